//! Finite index subsets, prefix chains and limits along them.
//!
//! Upper and lower limits over the directed set of finite subsets are
//! evaluated along one declared chain `S_0 ⊂ S_1 ⊂ …`. Whether the value at
//! the last prefix says anything about the limit depends on the
//! [`TailMode`] the family declares.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::LimitValue;

/// Estimates below this value with a nonincreasing tail are read as `−∞`.
pub const DIVERGENCE_FLOOR: f64 = -1e6;

/// A finite set of index ids, kept in enumeration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct IndexSubset(Vec<usize>);

impl IndexSubset {
    pub fn new(mut ids: Vec<usize>) -> Self {
        let mut seen = std::collections::HashSet::new();
        ids.retain(|i| seen.insert(*i));
        IndexSubset(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(&id)
    }

    pub fn is_subset_of(&self, other: &IndexSubset) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }
}

/// Nested prefixes `S_0 ⊂ S_1 ⊂ … ⊂ S_K` of an enumeration of the index set.
///
/// `tail_args[k]` is the argument at which a tail bound is evaluated for
/// prefix `k` (the generator index of the last member, or `None` for
/// prefixes of a finite family).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSchedule {
    prefixes: Vec<IndexSubset>,
    tail_args: Vec<Option<usize>>,
}

impl ChainSchedule {
    pub fn new(prefixes: Vec<IndexSubset>, tail_args: Vec<Option<usize>>) -> Result<Self> {
        if prefixes.is_empty() {
            return Err(Error::Empty("chain schedule"));
        }
        if prefixes.len() != tail_args.len() {
            return Err(Error::InvalidParameter("one tail argument per prefix".into()));
        }
        for w in prefixes.windows(2) {
            if !w[0].is_subset_of(&w[1]) {
                return Err(Error::InvalidParameter("chain prefixes must be nested".into()));
            }
        }
        Ok(ChainSchedule { prefixes, tail_args })
    }

    /// Single prefix `{0, …, n−1}`: the whole of a finite index set.
    pub fn finite(n: usize) -> Self {
        ChainSchedule {
            prefixes: vec![IndexSubset::new((0..n).collect())],
            tail_args: vec![None],
        }
    }

    pub fn prefixes(&self) -> &[IndexSubset] {
        &self.prefixes
    }

    pub fn depth(&self) -> usize {
        self.prefixes.len()
    }

    pub fn last(&self) -> &IndexSubset {
        self.prefixes.last().expect("nonempty chain")
    }

    pub fn tail_arg(&self, k: usize) -> Option<usize> {
        self.tail_args.get(k).copied().flatten()
    }

    /// The chain truncated to its first `k + 1` prefixes.
    pub fn truncated(&self, k: usize) -> ChainSchedule {
        let k = k.min(self.prefixes.len() - 1);
        ChainSchedule {
            prefixes: self.prefixes[..=k].to_vec(),
            tail_args: self.tail_args[..=k].to_vec(),
        }
    }
}

/// Tail bound `k ↦ b(k)`, `b(k) → 0`.
#[derive(Clone)]
pub struct TailBound(Arc<dyn Fn(usize) -> f64 + Send + Sync>);

impl TailBound {
    pub fn new(f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        TailBound(Arc::new(f))
    }

    pub fn eval(&self, k: usize) -> f64 {
        (self.0)(k)
    }
}

impl fmt::Debug for TailBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TailBound(..)")
    }
}

/// What is known about a sequence indexed by the chain.
#[derive(Clone, Debug)]
pub enum TailMode {
    Finite,
    MonotoneNondecreasing,
    /// `|limit − v_K| ≤ b(K)`. With `nonnegative` the remainder is known to
    /// be `≥ 0`, so the limit lies in `[v_K, v_K + b(K)]`.
    TailBounded { bound: TailBound, nonnegative: bool },
    Unknown,
}

impl TailMode {
    pub fn name(&self) -> &'static str {
        match self {
            TailMode::Finite => "finite",
            TailMode::MonotoneNondecreasing => "monotone",
            TailMode::TailBounded {
                nonnegative: true, ..
            } => "bounded-nonneg",
            TailMode::TailBounded { .. } => "bounded",
            TailMode::Unknown => "unknown",
        }
    }
}

/// Upper and lower limits of a chain-indexed sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirectedLimit {
    pub limsup: LimitValue,
    pub liminf: LimitValue,
    /// Certified half-width around the reported value, when the tail mode
    /// supplies one.
    pub radius: Option<f64>,
    pub inconclusive: bool,
}

impl DirectedLimit {
    fn exact(v: LimitValue) -> Self {
        DirectedLimit {
            limsup: v,
            liminf: v,
            radius: None,
            inconclusive: false,
        }
    }
}

/// Upper and lower limits of `values` (one per prefix of `chain`).
pub fn directed_limits(
    values: &[LimitValue],
    chain: &ChainSchedule,
    mode: &TailMode,
) -> Result<DirectedLimit> {
    let last = *values.last().ok_or(Error::Empty("directed limit of empty sequence"))?;
    Ok(match mode {
        TailMode::Finite => DirectedLimit::exact(last),
        TailMode::MonotoneNondecreasing => {
            let sup = values.iter().copied().fold(LimitValue::NEG_INFINITY, LimitValue::max);
            DirectedLimit::exact(sup)
        }
        TailMode::TailBounded { bound, nonnegative } => {
            let k = values.len() - 1;
            let b = chain
                .tail_arg(k.min(chain.depth().saturating_sub(1)))
                .map(|a| bound.eval(a))
                .unwrap_or(0.0)
                .abs();
            if !last.is_finite() {
                DirectedLimit::exact(last)
            } else if *nonnegative {
                let v = LimitValue::finite(last.value() + 0.5 * b);
                DirectedLimit {
                    limsup: v,
                    liminf: v,
                    radius: Some(0.5 * b),
                    inconclusive: false,
                }
            } else {
                DirectedLimit {
                    limsup: last,
                    liminf: last,
                    radius: Some(b),
                    inconclusive: false,
                }
            }
        }
        TailMode::Unknown => {
            let window = values.len().div_ceil(2).max(1);
            let tail = &values[values.len() - window..];
            let sup = tail.iter().copied().fold(LimitValue::NEG_INFINITY, LimitValue::max);
            let inf = tail.iter().copied().fold(LimitValue::INFINITY, LimitValue::min);
            DirectedLimit {
                limsup: sup,
                liminf: inf,
                radius: None,
                inconclusive: values.len() > 1,
            }
        }
    })
}

pub fn directed_limsup(
    values: &[LimitValue],
    chain: &ChainSchedule,
    mode: &TailMode,
) -> Result<DirectedLimit> {
    directed_limits(values, chain, mode)
}

pub fn directed_liminf(
    values: &[LimitValue],
    chain: &ChainSchedule,
    mode: &TailMode,
) -> Result<DirectedLimit> {
    directed_limits(values, chain, mode)
}

/// `−∞` reading of a schedule trace: the last value is below
/// [`DIVERGENCE_FLOOR`] and the last three values do not increase.
pub fn floor_divergence(values: &[f64]) -> bool {
    match values {
        [] => false,
        [.., last] if *last == f64::NEG_INFINITY => true,
        [.., a, b, c] => *c < DIVERGENCE_FLOOR && a >= b && b >= c,
        _ => false,
    }
}

/// Last three values strictly decrease with non-shrinking decrements: the
/// pattern of `k − k²`, never of a convergent sequence's tail.
pub fn accelerating_descent(values: &[f64]) -> bool {
    match values {
        [.., a, b, c] if a.is_finite() && b.is_finite() && c.is_finite() => {
            a > b && b > c && (b - c) >= (a - b)
        }
        _ => false,
    }
}

/// Mirror of [`accelerating_descent`] for growth to `+∞`; increments must
/// also exceed `min_step`.
pub fn accelerating_ascent(values: &[f64], min_step: f64) -> bool {
    match values {
        [.., a, b, c] if a.is_finite() && b.is_finite() && c.is_finite() => {
            b - a > min_step && c - b > min_step && (c - b) >= (b - a) * (1.0 - 1e-9)
        }
        [.., _, _, c] => *c == f64::INFINITY,
        _ => false,
    }
}

/// Aitken Δ² extrapolation of the last three values of a geometrically
/// convergent trace. `None` when the tail is not contracting monotonically.
pub fn aitken_limit(values: &[f64]) -> Option<f64> {
    let [a, b, c] = match values {
        [.., a, b, c] => [*a, *b, *c],
        _ => return None,
    };
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return None;
    }
    let d1 = b - a;
    let d2 = c - b;
    let scale = 1.0 + c.abs();
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let ratio = d2 / d1;
    if !(ratio > 0.0 && ratio < 0.95) {
        return None;
    }
    if (d2 - d1).abs() < 1e-9 * scale {
        return None;
    }
    Some(c + d2 * ratio / (1.0 - ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[f64]) -> Vec<LimitValue> {
        v.iter().map(|x| LimitValue::new(*x).unwrap()).collect()
    }

    fn prefix_chain(k: usize) -> ChainSchedule {
        let prefixes = (1..=k).map(|j| IndexSubset::new((1..=j).collect())).collect();
        ChainSchedule::new(prefixes, (1..=k).map(Some).collect()).unwrap()
    }

    #[test]
    fn geometric_partial_sums_with_tail_bound() {
        // oracle: partial sums of 2^-t, t = 1..K, limit 1
        let k = 20;
        let mut partial = Vec::new();
        let mut s = 0.0;
        for t in 1..=k {
            s += 0.5f64.powi(t as i32);
            partial.push(s);
        }
        let mode = TailMode::TailBounded {
            bound: TailBound::new(|k| 0.5f64.powi(k as i32)),
            nonnegative: false,
        };
        let lim = directed_limsup(&lv(&partial), &prefix_chain(k), &mode).unwrap();
        let r = lim.radius.unwrap();
        assert_eq!(r, 0.5f64.powi(k as i32));
        assert!((lim.limsup.value() - 1.0).abs() <= r);
    }

    #[test]
    fn constant_net() {
        let v = lv(&[7.0; 5]);
        for mode in [TailMode::Finite, TailMode::MonotoneNondecreasing, TailMode::Unknown] {
            let l = directed_limits(&v, &prefix_chain(5), &mode).unwrap();
            assert_eq!(l.limsup.value(), 7.0);
            assert_eq!(l.liminf.value(), 7.0);
        }
    }

    #[test]
    fn oscillation_is_inconclusive() {
        let l = directed_limits(&lv(&[0.0, 1.0, 0.0, 1.0]), &prefix_chain(4), &TailMode::Unknown)
            .unwrap();
        assert_eq!(l.limsup.value(), 1.0);
        assert_eq!(l.liminf.value(), 0.0);
        assert!(l.inconclusive);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        assert!(directed_limits(&[], &prefix_chain(1), &TailMode::Finite).is_err());
    }

    #[test]
    fn nested_prefixes_required() {
        let bad = vec![IndexSubset::new(vec![1, 2]), IndexSubset::new(vec![2, 3])];
        assert!(ChainSchedule::new(bad, vec![None, None]).is_err());
    }

    #[test]
    fn divergence_rules() {
        assert!(floor_divergence(&[-1e3, -1e7, -1e9]));
        assert!(!floor_divergence(&[-1e7, -1e9, -1e8]));
        assert!(floor_divergence(&[0.0, f64::NEG_INFINITY]));
        let kk: Vec<f64> = (8..=10).map(|k| (k - k * k) as f64).collect();
        assert!(accelerating_descent(&kk));
        assert!(!accelerating_descent(&[1.0, 0.5, 0.25]));
        assert!(!accelerating_descent(&[-1.0, -1.5, -1.75]));
        assert!(accelerating_ascent(&[1.0, 2.0, 3.0], 0.5));
        assert!(!accelerating_ascent(&[1.0, 1.5, 1.75], 0.1));
    }

    #[test]
    fn aitken_is_exact_on_geometric_tails() {
        let v = [1.0 - 0.5, 1.0 - 0.25, 1.0 - 0.125];
        assert!((aitken_limit(&v).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(aitken_limit(&[0.0, 1.0, 0.0]), None);
        assert_eq!(aitken_limit(&[1.0, 1.0, 1.0]), None);
    }

    proptest::proptest! {
        #[test]
        fn limsup_dominates_liminf(v in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            let chain = prefix_chain(v.len());
            for mode in [TailMode::Finite, TailMode::MonotoneNondecreasing, TailMode::Unknown] {
                let l = directed_limits(&lv(&v), &chain, &mode).unwrap();
                proptest::prop_assert!(l.limsup >= l.liminf);
            }
        }

        #[test]
        fn monotone_inputs_have_equal_limits(mut v in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            v.sort_by(f64::total_cmp);
            let chain = prefix_chain(v.len());
            let l = directed_limits(&lv(&v), &chain, &TailMode::MonotoneNondecreasing).unwrap();
            proptest::prop_assert_eq!(l.limsup, l.liminf);
            proptest::prop_assert_eq!(l.limsup.value(), *v.last().unwrap());
        }
    }
}
