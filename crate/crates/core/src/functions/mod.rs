//! Function language, families and subdifferential objects.

pub mod convex;
pub mod dsl;
pub mod expr;
pub mod family;
pub mod frechet;
pub mod subdiff;

pub use convex::{directional_derivative, exact_subdifferential};
pub use dsl::{parse_function, parse_region, print_function, print_region};
pub use expr::{Blackbox, Constraint, ExtFunction};
pub use family::{parse_family, FunctionFamily, Generator, Member, UpperSum, Witness};
pub use frechet::{frechet_membership_test, Membership, RefuterConfig};
pub use subdiff::{distance_to_minkowski_sum, ConeAxis, MinkowskiDistance, SubdifferentialSet};
