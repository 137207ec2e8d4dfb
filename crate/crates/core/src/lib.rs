//! Decoupled infima of function families on `R^n`.
//!
//! The crate estimates the uniform infimum `Λ`, the firm constant `Θ` and
//! the gap `Δ` of a family `{f_t}`, certifies uniform lower semicontinuity,
//! and runs the Ekeland-penalty search for fuzzy multiplier points.

pub mod chain;
pub mod error;
pub mod ext;
pub mod functions;
pub mod geometry;
pub mod rng;
pub mod search;
pub mod decouple;
pub mod certify;
pub mod varprinciple;
pub mod multiplier;
pub mod corpus;
pub mod report;
pub mod cli;

pub use error::{Error, Result};
pub use ext::{ExtValue, LimitValue};
pub use geometry::{diam, Point, Region};
