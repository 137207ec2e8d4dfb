//! Extended-real-valued functions on `R^n` built from a small set of atoms.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ext::{ExtValue, LimitValue};
use crate::geometry::{dist, dot, norm, Region};

/// One constraint `Σ lin_i x_i + Σ recip_i / x_i + c ≤ 0` of an
/// [`ExtFunction::IndicatorSublevel`]. Coordinates with a nonzero
/// reciprocal coefficient must be nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub lin: Vec<f64>,
    pub recip: Vec<f64>,
    pub c: f64,
}

impl Constraint {
    /// Constraint value, or `None` where a reciprocal term is undefined.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut g = self.c;
        for (i, a) in self.lin.iter().enumerate() {
            g += a * x[i];
        }
        for (i, b) in self.recip.iter().enumerate() {
            if *b != 0.0 {
                if x[i] == 0.0 {
                    return None;
                }
                g += b / x[i];
            }
        }
        Some(g)
    }

    /// Rounding allowance: relative to the size of the summed terms.
    fn slack(&self, x: &[f64]) -> f64 {
        let mut s = self.c.abs();
        for (i, a) in self.lin.iter().enumerate() {
            s += (a * x[i]).abs();
        }
        for (i, b) in self.recip.iter().enumerate() {
            if *b != 0.0 && x[i] != 0.0 {
                s += (b / x[i]).abs();
            }
        }
        1e-12 * (1.0 + s)
    }

    pub fn satisfied(&self, x: &[f64]) -> bool {
        match self.value(x) {
            Some(g) => g <= self.slack(x),
            None => false,
        }
    }

    fn has_recip(&self) -> bool {
        self.recip.iter().any(|b| *b != 0.0)
    }
}

/// User-supplied function with a domain test.
#[derive(Clone)]
pub struct Blackbox {
    pub name: String,
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub dom: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    pub convex: bool,
    pub lipschitz: Option<f64>,
}

impl fmt::Debug for Blackbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Blackbox({})", self.name)
    }
}

/// A function `R^n → R ∪ {+∞}`.
#[derive(Clone, Debug)]
pub enum ExtFunction {
    Const(f64),
    Affine { a: Vec<f64>, b: f64 },
    /// `xᵀQx + ⟨a, x⟩ + b`.
    Quad { q: Vec<Vec<f64>>, a: Vec<f64>, b: f64 },
    Abs(usize),
    Norm2,
    NormInf,
    Max(Vec<ExtFunction>),
    Sum(Vec<ExtFunction>),
    /// `λ f` with `λ ≥ 0`.
    Scale(f64, Box<ExtFunction>),
    Indicator(Region),
    IndicatorSublevel(Vec<Constraint>),
    /// `±1/x_i`, `+∞` at `x_i = 0`.
    Recip { index: usize, positive: bool },
    /// `weight · ‖x − center‖`.
    Distance { center: Vec<f64>, weight: f64 },
    Blackbox(Blackbox),
}

use ExtFunction as F;

impl PartialEq for ExtFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (F::Const(a), F::Const(b)) => a == b,
            (F::Affine { a, b }, F::Affine { a: a2, b: b2 }) => a == a2 && b == b2,
            (F::Quad { q, a, b }, F::Quad { q: q2, a: a2, b: b2 }) => q == q2 && a == a2 && b == b2,
            (F::Abs(i), F::Abs(j)) => i == j,
            (F::Norm2, F::Norm2) | (F::NormInf, F::NormInf) => true,
            (F::Max(a), F::Max(b)) | (F::Sum(a), F::Sum(b)) => a == b,
            (F::Scale(l, a), F::Scale(m, b)) => l == m && a == b,
            (F::Indicator(a), F::Indicator(b)) => a == b,
            (F::IndicatorSublevel(a), F::IndicatorSublevel(b)) => a == b,
            (
                F::Recip { index, positive },
                F::Recip {
                    index: j,
                    positive: p,
                },
            ) => index == j && positive == p,
            (
                F::Distance { center, weight },
                F::Distance {
                    center: c,
                    weight: w,
                },
            ) => center == c && weight == w,
            _ => false,
        }
    }
}

fn recip_value(x: f64, positive: bool) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else if positive {
        1.0 / x
    } else {
        -1.0 / x
    }
}

/// Infimum of `±1/x` over `[lo, hi] \ {0}`.
pub fn recip_interval_inf(positive: bool, lo: f64, hi: f64) -> LimitValue {
    if lo == 0.0 && hi == 0.0 {
        return LimitValue::INFINITY;
    }
    let v = if positive {
        // 1/x falls to −∞ as x → 0⁻
        if lo < 0.0 && hi >= 0.0 {
            f64::NEG_INFINITY
        } else {
            1.0 / hi
        }
    } else if lo <= 0.0 && hi > 0.0 {
        // −1/x falls to −∞ as x → 0⁺
        f64::NEG_INFINITY
    } else {
        -1.0 / lo
    };
    LimitValue::new(v).unwrap_or(LimitValue::INFINITY)
}

impl ExtFunction {
    pub fn eval(&self, x: &[f64]) -> ExtValue {
        ExtValue::saturating(self.raw(x))
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match self {
            F::Const(c) => *c,
            F::Affine { a, b } => dot(a, x) + b,
            F::Quad { q, a, b } => {
                let mut v = *b + dot(a, x);
                for (i, row) in q.iter().enumerate() {
                    v += x[i] * dot(row, x);
                }
                v
            }
            F::Abs(i) => x[*i].abs(),
            F::Norm2 => norm(x),
            F::NormInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            F::Max(ch) => {
                let mut m = f64::NEG_INFINITY;
                for c in ch {
                    m = m.max(c.raw(x));
                }
                m
            }
            F::Sum(ch) => {
                let mut s = 0.0;
                for c in ch {
                    s += c.raw(x);
                    if s == f64::INFINITY {
                        break;
                    }
                }
                s
            }
            F::Scale(l, c) => {
                let v = c.raw(x);
                if v == f64::INFINITY {
                    v
                } else {
                    l * v
                }
            }
            F::Indicator(r) => {
                if r.contains(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            F::IndicatorSublevel(cs) => {
                if cs.iter().all(|c| c.satisfied(x)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            F::Recip { index, positive } => recip_value(x[*index], *positive),
            F::Distance { center, weight } => weight * dist(x, center),
            F::Blackbox(b) => {
                if (b.dom)(x) {
                    (b.eval)(x)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        self.eval(x).is_finite()
    }

    /// A nonnegative measure of how far `x` is from the domain, zero exactly
    /// on the domain. Used to steer searches out of `+∞` plateaus.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            F::Max(ch) | F::Sum(ch) => ch.iter().map(|c| c.violation(x)).sum(),
            F::Scale(_, c) => c.violation(x),
            F::Indicator(r) => dist(x, &r.project(x)),
            F::IndicatorSublevel(cs) => cs
                .iter()
                .map(|c| {
                    if c.satisfied(x) {
                        0.0
                    } else {
                        c.value(x).map_or(1.0, |g| g.clamp(0.0, 1e12) + 1e-12)
                    }
                })
                .sum(),
            F::Recip { index, .. } => {
                if x[*index] == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            F::Blackbox(b) => {
                if (b.dom)(x) {
                    0.0
                } else {
                    1.0
                }
            }
            _ => {
                if self.raw(x).is_finite() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Smallest dimension the expression can be evaluated in, and whether
    /// the dimension is pinned exactly by a vector literal.
    pub fn dim_requirement(&self) -> (usize, Option<usize>) {
        let merge = |ch: &[ExtFunction]| {
            let mut lo = 1;
            let mut exact = None;
            for c in ch {
                let (l, e) = c.dim_requirement();
                lo = lo.max(l);
                if e.is_some() {
                    exact = e;
                }
            }
            (lo, exact)
        };
        match self {
            F::Const(_) | F::Norm2 | F::NormInf => (1, None),
            F::Affine { a, .. } | F::Quad { a, .. } => (a.len(), Some(a.len())),
            F::Abs(i) | F::Recip { index: i, .. } => (i + 1, None),
            F::Max(ch) | F::Sum(ch) => merge(ch),
            F::Scale(_, c) => c.dim_requirement(),
            F::Indicator(r) => (r.dim(), Some(r.dim())),
            F::IndicatorSublevel(cs) => {
                let n = cs.first().map_or(1, |c| c.lin.len());
                (n, Some(n))
            }
            F::Distance { center, .. } => (center.len(), Some(center.len())),
            F::Blackbox(_) => (1, None),
        }
    }

    /// Checks that the expression is well formed in dimension `n`.
    pub fn check_dim(&self, n: usize) -> Result<()> {
        let bad = |got: usize| Err(Error::Dimension { expected: n, got });
        match self {
            F::Affine { a, .. } if a.len() != n => bad(a.len()),
            F::Quad { q, a, .. } => {
                if a.len() != n {
                    return bad(a.len());
                }
                if q.len() != n {
                    return bad(q.len());
                }
                for row in q {
                    if row.len() != n {
                        return bad(row.len());
                    }
                }
                Ok(())
            }
            F::Abs(i) | F::Recip { index: i, .. } if *i >= n => bad(i + 1),
            F::Max(ch) | F::Sum(ch) => {
                if ch.is_empty() {
                    return Err(Error::Empty("max/sum needs at least one term"));
                }
                ch.iter().try_for_each(|c| c.check_dim(n))
            }
            F::Scale(l, c) => {
                if !(*l >= 0.0 && l.is_finite()) {
                    return Err(Error::InvalidParameter(format!("scale factor {l} must be >= 0")));
                }
                c.check_dim(n)
            }
            F::Indicator(r) if r.dim() != n => bad(r.dim()),
            F::IndicatorSublevel(cs) => {
                for c in cs {
                    if c.lin.len() != n {
                        return bad(c.lin.len());
                    }
                    if c.recip.len() != n {
                        return bad(c.recip.len());
                    }
                }
                Ok(())
            }
            F::Distance { center, weight } => {
                if center.len() != n {
                    return bad(center.len());
                }
                if !(*weight >= 0.0) {
                    return Err(Error::InvalidParameter("distance weight must be >= 0".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            F::Quad { q, .. } => is_psd(q),
            F::Max(ch) | F::Sum(ch) => ch.iter().all(|c| c.is_convex()),
            F::Scale(_, c) => c.is_convex(),
            F::IndicatorSublevel(cs) => !cs.iter().any(|c| c.has_recip()),
            F::Recip { .. } => false,
            F::Blackbox(b) => b.convex,
            _ => true,
        }
    }

    pub fn is_lsc(&self) -> bool {
        match self {
            F::Max(ch) | F::Sum(ch) => ch.iter().all(|c| c.is_lsc()),
            F::Scale(_, c) => c.is_lsc(),
            F::IndicatorSublevel(cs) => !cs.iter().any(|c| c.has_recip()),
            F::Recip { .. } => false,
            F::Blackbox(b) => b.convex,
            _ => true,
        }
    }

    /// Global Lipschitz constant when one is known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            F::Const(_) => Some(0.0),
            F::Affine { a, .. } => Some(norm(a)),
            F::Abs(_) | F::Norm2 | F::NormInf => Some(1.0),
            F::Distance { weight, .. } => Some(*weight),
            F::Sum(ch) => ch.iter().map(|c| c.lipschitz()).sum(),
            F::Max(ch) => ch
                .iter()
                .map(|c| c.lipschitz())
                .try_fold(0.0f64, |m, l| l.map(|l| m.max(l))),
            F::Scale(l, c) => c.lipschitz().map(|v| l * v),
            F::Blackbox(b) => b.lipschitz,
            _ => None,
        }
    }

    /// Whether the function is finite and continuous everywhere.
    pub fn is_finite_everywhere(&self) -> bool {
        match self {
            F::Max(ch) | F::Sum(ch) => ch.iter().all(|c| c.is_finite_everywhere()),
            F::Scale(_, c) => c.is_finite_everywhere(),
            F::Indicator(r) => r.is_whole_space(),
            F::IndicatorSublevel(_) | F::Recip { .. } | F::Blackbox(_) => false,
            _ => true,
        }
    }

    /// Structural lower bound valid on all of `R^n`.
    pub fn lower_bound(&self) -> Option<f64> {
        match self {
            F::Const(c) => Some(*c),
            F::Affine { a, b } if a.iter().all(|v| *v == 0.0) => Some(*b),
            F::Quad { q, a, b } if a.iter().all(|v| *v == 0.0) && is_psd(q) => Some(*b),
            F::Abs(_) | F::Norm2 | F::NormInf | F::Distance { .. } => Some(0.0),
            F::Indicator(_) | F::IndicatorSublevel(_) => Some(0.0),
            F::Sum(ch) => ch.iter().map(|c| c.lower_bound()).sum(),
            F::Max(ch) => ch.iter().filter_map(|c| c.lower_bound()).reduce(f64::max),
            F::Scale(l, c) => c.lower_bound().map(|v| l * v),
            _ => None,
        }
    }

    /// Closed-form infimum over the closed ball `B(c, r)`, when available.
    pub fn ball_inf(&self, c: &[f64], r: f64) -> Option<LimitValue> {
        let fin = |v: f64| Some(LimitValue::finite(v));
        match self {
            F::Const(v) => fin(*v),
            F::Affine { a, b } => fin(dot(a, c) + b - r * norm(a)),
            F::Abs(i) => fin((c[*i].abs() - r).max(0.0)),
            F::Norm2 => fin((norm(c) - r).max(0.0)),
            F::Distance { center, weight } => fin(weight * (dist(c, center) - r).max(0.0)),
            F::Scale(l, ch) => ch.ball_inf(c, r).map(|v| {
                if v.is_pos_infinity() {
                    v
                } else if v.is_neg_infinity() {
                    if *l == 0.0 {
                        LimitValue::ZERO
                    } else {
                        v
                    }
                } else {
                    LimitValue::finite(l * v.value())
                }
            }),
            F::Recip { index, positive } => {
                Some(recip_interval_inf(*positive, c[*index] - r, c[*index] + r))
            }
            F::Indicator(region) => {
                let p = region.project(c);
                if dist(&p, c) <= r {
                    Some(LimitValue::ZERO)
                } else {
                    Some(LimitValue::INFINITY)
                }
            }
            _ => None,
        }
    }

    /// Gradient at `x` when the function is differentiable there.
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len();
        match self {
            F::Const(_) => Some(vec![0.0; n]),
            F::Affine { a, .. } => Some(a.clone()),
            F::Quad { q, a, .. } => {
                let mut g = a.clone();
                for i in 0..n {
                    for j in 0..n {
                        g[i] += (q[i][j] + q[j][i]) * x[j];
                    }
                }
                Some(g)
            }
            F::Abs(i) => {
                if x[*i] == 0.0 {
                    None
                } else {
                    let mut g = vec![0.0; n];
                    g[*i] = x[*i].signum();
                    Some(g)
                }
            }
            F::Norm2 => {
                let nx = norm(x);
                (nx > 0.0).then(|| x.iter().map(|v| v / nx).collect())
            }
            F::NormInf => {
                let m = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                let active: Vec<usize> = (0..n).filter(|i| x[*i].abs() == m).collect();
                if m == 0.0 || active.len() != 1 {
                    None
                } else {
                    let mut g = vec![0.0; n];
                    g[active[0]] = x[active[0]].signum();
                    Some(g)
                }
            }
            F::Distance { center, weight } => {
                let d = dist(x, center);
                (d > 0.0).then(|| x.iter().zip(center).map(|(a, b)| weight * (a - b) / d).collect())
            }
            F::Recip { index, positive } => {
                let v = x[*index];
                if v == 0.0 {
                    None
                } else {
                    let mut g = vec![0.0; n];
                    g[*index] = if *positive { -1.0 / (v * v) } else { 1.0 / (v * v) };
                    Some(g)
                }
            }
            F::Sum(ch) => {
                let mut g = vec![0.0; n];
                for c in ch {
                    for (a, b) in g.iter_mut().zip(c.gradient(x)?) {
                        *a += b;
                    }
                }
                Some(g)
            }
            F::Scale(l, c) => c.gradient(x).map(|g| g.into_iter().map(|v| l * v).collect()),
            F::Max(ch) => {
                let vals: Vec<f64> = ch.iter().map(|c| c.raw(x)).collect();
                let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let active: Vec<usize> = (0..ch.len()).filter(|i| vals[*i] == m).collect();
                if active.len() == 1 && m.is_finite() {
                    ch[active[0]].gradient(x)
                } else {
                    None
                }
            }
            F::Indicator(r) => (r.interior_distance(x) > 0.0).then(|| vec![0.0; n]),
            F::IndicatorSublevel(cs) => cs
                .iter()
                .all(|c| c.value(x).is_some_and(|g| g < 0.0))
                .then(|| vec![0.0; n]),
            F::Blackbox(_) => None,
        }
    }

    /// Whether every indicator atom of the expression holds `x` in its
    /// interior (so the function is continuous at `x`).
    pub fn continuous_at(&self, x: &[f64]) -> bool {
        match self {
            F::Max(ch) | F::Sum(ch) => ch.iter().all(|c| c.continuous_at(x)),
            F::Scale(_, c) => c.continuous_at(x),
            F::Indicator(r) => r.interior_distance(x) > 0.0,
            F::IndicatorSublevel(cs) => cs.iter().all(|c| c.value(x).is_some_and(|g| g < 0.0)),
            F::Recip { index, .. } => x[*index] != 0.0,
            F::Blackbox(_) => false,
            _ => true,
        }
    }

    pub fn sum(parts: Vec<ExtFunction>) -> ExtFunction {
        F::Sum(parts)
    }
}

/// Positive semidefiniteness of the symmetric part, by Cholesky with a
/// small diagonal shift.
pub fn is_psd(q: &[Vec<f64>]) -> bool {
    let n = q.len();
    let scale = q
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = 0.5 * (q[i][j] + q[j][i]);
        }
        a[i][i] += 1e-12 * scale;
    }
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recip_matches_example_atoms() {
        let f1 = F::Recip {
            index: 0,
            positive: true,
        };
        let f2 = F::Recip {
            index: 0,
            positive: false,
        };
        assert_eq!(f1.eval(&[0.5]).value(), 2.0);
        assert_eq!(f2.eval(&[0.5]).value(), -2.0);
        assert!(f1.eval(&[0.0]).is_infinite());
        assert!(f2.eval(&[0.0]).is_infinite());
    }

    #[test]
    fn indicator_box() {
        let f = F::Indicator(Region::interval(0.0, 1.0));
        assert_eq!(f.eval(&[0.5]).value(), 0.0);
        assert!(f.eval(&[2.0]).is_infinite());
        assert_eq!(f.violation(&[2.0]), 1.0);
    }

    #[test]
    fn max_of_affine_and_const_is_pointwise_max() {
        let a = F::Affine {
            a: vec![2.0, -1.0],
            b: 0.5,
        };
        let c = F::Const(1.0);
        let m = F::Max(vec![a.clone(), c.clone()]);
        for x in [[0.0, 0.0], [1.0, 0.0], [-3.0, 2.0], [0.25, 0.0]] {
            let oracle = a.eval(&x).value().max(c.eval(&x).value());
            assert_eq!(m.eval(&x).value(), oracle);
        }
    }

    #[test]
    fn sublevel_accepts_reciprocal_sequence_points() {
        // 1/u1 − u2 ≤ 0 and −1/u1 − u3 ≤ 0
        let f1 = F::IndicatorSublevel(vec![Constraint {
            lin: vec![0.0, -1.0, 0.0],
            recip: vec![1.0, 0.0, 0.0],
            c: 0.0,
        }]);
        let f2 = F::IndicatorSublevel(vec![Constraint {
            lin: vec![0.0, 0.0, -1.0],
            recip: vec![-1.0, 0.0, 0.0],
            c: 0.0,
        }]);
        for k in 1..=100 {
            let k = k as f64;
            assert!(f1.in_domain(&[1.0 / k, k, -k * k]));
            assert!(f2.in_domain(&[1.0 / (k * k), k, -k * k]));
        }
        assert!(!f1.in_domain(&[0.0, 5.0, 0.0]));
        assert!(!f1.is_convex());
    }

    #[test]
    fn recip_interval_infima() {
        assert!(recip_interval_inf(true, -0.1, 0.1).is_neg_infinity());
        assert_eq!(recip_interval_inf(true, 0.5, 2.0).value(), 0.5);
        assert_eq!(recip_interval_inf(true, -2.0, -0.5).value(), -2.0);
        assert!(recip_interval_inf(false, 0.0, 0.1).is_neg_infinity());
        assert_eq!(recip_interval_inf(false, 0.5, 2.0).value(), -2.0);
        assert!(recip_interval_inf(true, 0.0, 0.0).is_pos_infinity());
    }

    #[test]
    fn ball_inf_closed_forms_match_sampling() {
        let fs = [
            F::Affine {
                a: vec![1.0, -2.0],
                b: 0.3,
            },
            F::Abs(1),
            F::Norm2,
            F::Distance {
                center: vec![1.0, 1.0],
                weight: 2.0,
            },
        ];
        let c = [0.3, -0.2];
        let r = 0.25;
        for f in &fs {
            let exact = f.ball_inf(&c, r).unwrap().value();
            let mut best = f64::INFINITY;
            for i in 0..=400 {
                let th = std::f64::consts::TAU * i as f64 / 400.0;
                for s in [0.0, 0.5, 1.0] {
                    let x = [c[0] + s * r * th.cos(), c[1] + s * r * th.sin()];
                    best = best.min(f.eval(&x).value());
                }
            }
            assert!(exact <= best + 1e-12);
            assert!(best - exact < 1e-3);
        }
    }

    #[test]
    fn psd_detection() {
        assert!(is_psd(&[vec![1.0, 0.0], vec![0.0, 0.0]]));
        assert!(!is_psd(&[vec![1.0, 2.0], vec![2.0, 1.0]]));
    }

    #[test]
    fn quad_gradient_matches_central_differences() {
        let f = F::Quad {
            q: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            a: vec![1.0, -1.0],
            b: 0.0,
        };
        let x = [0.3, -0.7];
        let g = f.gradient(&x).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            let fd = (f.eval(&p).value() - f.eval(&m).value()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-5);
        }
    }
}
