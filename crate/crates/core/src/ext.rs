//! Extended-real scalars.
//!
//! [`ExtValue`] is the codomain of the functions handled by the toolkit,
//! `R ∪ {+∞}`. [`LimitValue`] is the codomain of limits, infima and suprema,
//! `[−∞, +∞]`. Neither type ever holds NaN.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A value in `R ∪ {+∞}`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtValue(f64);

impl ExtValue {
    pub const INFINITY: ExtValue = ExtValue(f64::INFINITY);
    pub const ZERO: ExtValue = ExtValue(0.0);

    /// Builds a value from a float. `+∞` is accepted, `−∞` and NaN are not.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::UndefinedArithmetic("NaN is not an extended real"))
        } else if v == f64::NEG_INFINITY {
            Err(Error::UndefinedArithmetic("function values cannot be -inf"))
        } else {
            Ok(ExtValue(v))
        }
    }

    /// Finite constructor. Panics on non-finite input; use [`ExtValue::new`]
    /// when the input is not known to be finite.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "ExtValue::finite called with {v}");
        ExtValue(v)
    }

    /// Maps NaN and `−∞` (which a well-formed function never returns) to `+∞`.
    pub(crate) fn saturating(v: f64) -> Self {
        if v.is_nan() || v == f64::NEG_INFINITY {
            ExtValue::INFINITY
        } else {
            ExtValue(v)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }

    /// `self − other`; `∞ − ∞` is an error, `x − ∞` is `−∞`.
    pub fn checked_sub(self, other: ExtValue) -> Result<LimitValue> {
        match (self.is_infinite(), other.is_infinite()) {
            (true, true) => Err(Error::UndefinedArithmetic("inf - inf")),
            _ => Ok(LimitValue(self.0 - other.0)),
        }
    }

    /// Multiplication by a nonnegative scalar; `0 · ∞` is taken as `∞`
    /// so that domains are preserved under scaling.
    pub fn scale(self, lambda: f64) -> ExtValue {
        if self.is_infinite() {
            ExtValue::INFINITY
        } else {
            ExtValue(lambda * self.0)
        }
    }

    pub fn max(self, other: ExtValue) -> ExtValue {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: ExtValue) -> ExtValue {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }
}

impl Add for ExtValue {
    type Output = ExtValue;
    fn add(self, rhs: ExtValue) -> ExtValue {
        ExtValue(self.0 + rhs.0)
    }
}

impl std::iter::Sum for ExtValue {
    fn sum<I: Iterator<Item = ExtValue>>(iter: I) -> ExtValue {
        iter.fold(ExtValue::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        LimitValue(self.0).fmt(f)
    }
}

/// A value in `[−∞, +∞]`.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct LimitValue(f64);

impl LimitValue {
    pub const INFINITY: LimitValue = LimitValue(f64::INFINITY);
    pub const NEG_INFINITY: LimitValue = LimitValue(f64::NEG_INFINITY);
    pub const ZERO: LimitValue = LimitValue(0.0);

    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(Error::UndefinedArithmetic("NaN is not an extended real"))
        } else {
            Ok(LimitValue(v))
        }
    }

    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "LimitValue::finite called with {v}");
        LimitValue(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_pos_infinity(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_neg_infinity(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Addition that refuses `∞ + (−∞)`.
    pub fn checked_add(self, other: LimitValue) -> Result<LimitValue> {
        let s = self.0 + other.0;
        if s.is_nan() {
            Err(Error::UndefinedArithmetic("inf - inf"))
        } else {
            Ok(LimitValue(s))
        }
    }

    pub fn checked_sub(self, other: LimitValue) -> Result<LimitValue> {
        self.checked_add(LimitValue(-other.0))
    }

    pub fn min(self, other: LimitValue) -> LimitValue {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: LimitValue) -> LimitValue {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    /// Total order (no NaN can occur).
    pub fn total_cmp(&self, other: &LimitValue) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl From<ExtValue> for LimitValue {
    fn from(v: ExtValue) -> Self {
        LimitValue(v.0)
    }
}

impl fmt::Debug for LimitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for LimitValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "+inf")
        } else if self.0 == f64::NEG_INFINITY {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// JSON has no infinities: finite values serialize as numbers and the two
/// infinities as the strings `"+inf"` / `"-inf"`.
impl Serialize for LimitValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            s.serialize_str("+inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for LimitValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(LimitValue(v)),
            Repr::Str(s) => match s.as_str() {
                "+inf" | "inf" => Ok(LimitValue::INFINITY),
                "-inf" => Ok(LimitValue::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad extended real {other:?}"))),
            },
        }
    }
}

impl Serialize for ExtValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LimitValue(self.0).serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_rejects_negative_infinity() {
        assert!(ExtValue::new(f64::NEG_INFINITY).is_err());
        assert!(ExtValue::new(f64::NAN).is_err());
        assert!(ExtValue::new(f64::INFINITY).unwrap().is_infinite());
    }

    #[test]
    fn infinity_absorbs_addition() {
        let s = ExtValue::finite(3.0) + ExtValue::INFINITY;
        assert!(s.is_infinite());
    }

    #[test]
    fn inf_minus_inf_is_reported() {
        assert!(ExtValue::INFINITY.checked_sub(ExtValue::INFINITY).is_err());
        let d = ExtValue::finite(1.0).checked_sub(ExtValue::INFINITY).unwrap();
        assert!(d.is_neg_infinity());
        assert!(LimitValue::INFINITY.checked_add(LimitValue::NEG_INFINITY).is_err());
    }

    #[test]
    fn json_infinities_round_trip() {
        let v = vec![LimitValue::finite(1.5), LimitValue::INFINITY, LimitValue::NEG_INFINITY];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"[1.5,"+inf","-inf"]"#);
        let back: Vec<LimitValue> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
