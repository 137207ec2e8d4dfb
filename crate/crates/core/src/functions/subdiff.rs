//! Closed convex sets of dual vectors in representation form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, norm};

/// Per-axis shape of a normal cone to an axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeAxis {
    Zero,
    NonPositive,
    NonNegative,
    Free,
}

impl ConeAxis {
    fn interval(self) -> (f64, f64) {
        match self {
            ConeAxis::Zero => (0.0, 0.0),
            ConeAxis::NonPositive => (f64::NEG_INFINITY, 0.0),
            ConeAxis::NonNegative => (0.0, f64::INFINITY),
            ConeAxis::Free => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubdifferentialSet {
    Point { g: Vec<f64> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// Convex hull of the vertices.
    Polytope { vertices: Vec<Vec<f64>> },
    AxisCone { axes: Vec<ConeAxis> },
    Sum { parts: Vec<SubdifferentialSet> },
}

use SubdifferentialSet as S;

impl SubdifferentialSet {
    pub fn point(g: Vec<f64>) -> Self {
        S::Point { g }
    }

    pub fn zero(n: usize) -> Self {
        S::Point { g: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        match self {
            S::Point { g } => g.len(),
            S::Box { lo, .. } => lo.len(),
            S::Ball { center, .. } => center.len(),
            S::Polytope { vertices } => vertices.first().map_or(0, |v| v.len()),
            S::AxisCone { axes } => axes.len(),
            S::Sum { parts } => parts.first().map_or(0, |p| p.dim()),
        }
    }

    /// `sup {⟨g, d⟩ : g in the set}`, possibly `+∞`.
    pub fn support(&self, d: &[f64]) -> f64 {
        match self {
            S::Point { g } => dot(g, d),
            S::Box { lo, hi } => (0..d.len()).map(|i| (lo[i] * d[i]).max(hi[i] * d[i])).sum(),
            S::Ball { center, radius } => dot(center, d) + radius * norm(d),
            S::Polytope { vertices } => vertices
                .iter()
                .map(|v| dot(v, d))
                .fold(f64::NEG_INFINITY, f64::max),
            S::AxisCone { axes } => {
                let mut s = 0.0;
                for (a, di) in axes.iter().zip(d) {
                    let unbounded = match a {
                        ConeAxis::Zero => false,
                        ConeAxis::NonPositive => *di < 0.0,
                        ConeAxis::NonNegative => *di > 0.0,
                        ConeAxis::Free => *di != 0.0,
                    };
                    if unbounded {
                        s = f64::INFINITY;
                    }
                }
                s
            }
            S::Sum { parts } => parts.iter().map(|p| p.support(d)).sum(),
        }
    }

    /// Nearest point of the set.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            S::Point { g } => g.clone(),
            S::Box { lo, hi } => (0..y.len()).map(|i| y[i].clamp(lo[i], hi[i])).collect(),
            S::Ball { center, radius } => {
                let d = dist(y, center);
                if d <= *radius {
                    y.to_vec()
                } else {
                    center
                        .iter()
                        .zip(y)
                        .map(|(c, v)| c + (v - c) * radius / d)
                        .collect()
                }
            }
            S::Polytope { vertices } => project_polytope(vertices, y),
            S::AxisCone { axes } => axes
                .iter()
                .zip(y)
                .map(|(a, v)| {
                    let (l, h) = a.interval();
                    v.clamp(l, h)
                })
                .collect(),
            S::Sum { parts } => {
                let r = distance_to_minkowski_sum(y, parts);
                sum_vectors(&r.parts, y.len())
            }
        }
    }

    pub fn distance(&self, y: &[f64]) -> f64 {
        match self {
            S::Sum { parts } => distance_to_minkowski_sum(y, parts).residual,
            _ => dist(y, &self.project(y)),
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.distance(y) <= tol
    }

    /// Per-axis intervals when the set is a product of intervals.
    pub fn axis_intervals(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            S::Point { g } => Some(g.iter().map(|v| (*v, *v)).collect()),
            S::Box { lo, hi } => Some(lo.iter().copied().zip(hi.iter().copied()).collect()),
            S::AxisCone { axes } => Some(axes.iter().map(|a| a.interval()).collect()),
            S::Ball { center, radius } if center.len() == 1 || *radius == 0.0 => Some(
                center
                    .iter()
                    .map(|c| (c - radius, c + radius))
                    .collect(),
            ),
            S::Polytope { vertices } if vertices.len() == 1 || self.dim() == 1 => {
                let n = self.dim();
                Some(
                    (0..n)
                        .map(|i| {
                            let lo = vertices.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                            let hi = vertices.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                            (lo, hi)
                        })
                        .collect(),
                )
            }
            S::Sum { parts } => {
                let mut acc = vec![(0.0, 0.0); self.dim()];
                for p in parts {
                    let iv = p.axis_intervals()?;
                    for (a, b) in acc.iter_mut().zip(iv) {
                        a.0 += b.0;
                        a.1 += b.1;
                    }
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// `λ · set` for `λ ≥ 0`.
    pub fn scale(&self, lambda: f64) -> SubdifferentialSet {
        let sc = |v: &Vec<f64>| v.iter().map(|x| lambda * x).collect::<Vec<_>>();
        match self {
            S::Point { g } => S::Point { g: sc(g) },
            S::Box { lo, hi } => S::Box {
                lo: sc(lo),
                hi: sc(hi),
            },
            S::Ball { center, radius } => S::Ball {
                center: sc(center),
                radius: lambda * radius,
            },
            S::Polytope { vertices } => S::Polytope {
                vertices: vertices.iter().map(sc).collect(),
            },
            S::AxisCone { axes } => {
                if lambda == 0.0 {
                    S::zero(axes.len())
                } else {
                    self.clone()
                }
            }
            S::Sum { parts } => S::Sum {
                parts: parts.iter().map(|p| p.scale(lambda)).collect(),
            },
        }
    }

    /// Atoms of a (possibly nested) Minkowski sum.
    pub fn atoms(&self) -> Vec<&SubdifferentialSet> {
        match self {
            S::Sum { parts } => parts.iter().flat_map(|p| p.atoms()).collect(),
            other => vec![other],
        }
    }
}

/// Result of projecting a target onto a Minkowski sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinkowskiDistance {
    pub residual: f64,
    /// One member per input set; their sum is the projection.
    pub parts: Vec<Vec<f64>>,
    /// The per-axis closed form was used.
    pub exact: bool,
    pub converged: bool,
}

/// Distance from `target` to `sets[0] + … + sets[m−1]` with an optimal
/// decomposition.
pub fn distance_to_minkowski_sum(target: &[f64], sets: &[SubdifferentialSet]) -> MinkowskiDistance {
    let n = target.len();
    if sets.is_empty() {
        return MinkowskiDistance {
            residual: norm(target),
            parts: Vec::new(),
            exact: true,
            converged: true,
        };
    }
    if let Some(ivs) = sets.iter().map(|s| s.axis_intervals()).collect::<Option<Vec<_>>>() {
        return separable_decomposition(target, &ivs);
    }
    cyclic_projection(target, sets, n)
}

fn separable_decomposition(target: &[f64], ivs: &[Vec<(f64, f64)>]) -> MinkowskiDistance {
    let m = ivs.len();
    let n = target.len();
    let mut parts = vec![vec![0.0; n]; m];
    let mut resid2 = 0.0;
    for axis in 0..n {
        let lo: f64 = ivs.iter().map(|iv| iv[axis].0).sum();
        let hi: f64 = ivs.iter().map(|iv| iv[axis].1).sum();
        let p = target[axis].clamp(lo, hi);
        resid2 += (target[axis] - p).powi(2);
        let mut s = 0.0;
        for (i, iv) in ivs.iter().enumerate() {
            let b = 0.0f64.clamp(iv[axis].0, iv[axis].1);
            parts[i][axis] = b;
            s += b;
        }
        let mut need = p - s;
        for (i, iv) in ivs.iter().enumerate() {
            if need == 0.0 {
                break;
            }
            let room = if need > 0.0 {
                iv[axis].1 - parts[i][axis]
            } else {
                iv[axis].0 - parts[i][axis]
            };
            let step = if need > 0.0 { need.min(room) } else { need.max(room) };
            parts[i][axis] += step;
            need -= step;
        }
    }
    MinkowskiDistance {
        residual: resid2.sqrt(),
        parts,
        exact: true,
        converged: true,
    }
}

const CYCLIC_TOL: f64 = 1e-9;
const CYCLIC_SWEEPS: usize = 10_000;

fn cyclic_projection(target: &[f64], sets: &[SubdifferentialSet], n: usize) -> MinkowskiDistance {
    let m = sets.len();
    let share: Vec<f64> = target.iter().map(|t| t / m as f64).collect();
    let mut parts: Vec<Vec<f64>> = sets.iter().map(|s| s.project(&share)).collect();
    let mut total = sum_vectors(&parts, n);
    let mut converged = false;
    for _ in 0..CYCLIC_SWEEPS {
        let mut change = 0.0f64;
        for i in 0..m {
            let r: Vec<f64> = (0..n).map(|k| target[k] - (total[k] - parts[i][k])).collect();
            let g = sets[i].project(&r);
            change = change.max(dist(&g, &parts[i]));
            for k in 0..n {
                total[k] += g[k] - parts[i][k];
            }
            parts[i] = g;
        }
        if change <= CYCLIC_TOL {
            converged = true;
            break;
        }
    }
    let total = sum_vectors(&parts, n);
    MinkowskiDistance {
        residual: dist(target, &total),
        parts,
        exact: false,
        converged,
    }
}

pub(crate) fn sum_vectors(v: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for x in v {
        for (a, b) in s.iter_mut().zip(x) {
            *a += b;
        }
    }
    s
}

/// Projection onto the convex hull of `vertices` by projected gradient on
/// the simplex of barycentric weights.
fn project_polytope(vertices: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = vertices.len();
    if k == 1 {
        return vertices[0].clone();
    }
    if k == 2 {
        let (a, b) = (&vertices[0], &vertices[1]);
        let ab: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
        let den = dot(&ab, &ab);
        if den == 0.0 {
            return a.clone();
        }
        let ay: Vec<f64> = y.iter().zip(a).map(|(p, q)| p - q).collect();
        let t = (dot(&ay, &ab) / den).clamp(0.0, 1.0);
        return a.iter().zip(&ab).map(|(p, d)| p + t * d).collect();
    }
    let n = y.len();
    let lip: f64 = vertices.iter().map(|v| dot(v, v)).sum::<f64>().max(1e-300);
    let mut w = vec![1.0 / k as f64; k];
    let combo = |w: &[f64]| {
        let mut x = vec![0.0; n];
        for (wi, v) in w.iter().zip(vertices) {
            for (a, b) in x.iter_mut().zip(v) {
                *a += wi * b;
            }
        }
        x
    };
    for _ in 0..20_000 {
        let x = combo(&w);
        let r: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let step: Vec<f64> = w
            .iter()
            .zip(vertices)
            .map(|(wi, v)| wi - dot(v, &r) / lip)
            .collect();
        let next = project_simplex(&step);
        let delta = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if delta < 1e-15 {
            break;
        }
    }
    combo(&w)
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Checks that all sets share one dimension.
pub fn check_dims(sets: &[SubdifferentialSet], n: usize) -> Result<()> {
    for s in sets {
        if s.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: s.dim(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64) -> SubdifferentialSet {
        S::Box {
            lo: vec![lo],
            hi: vec![hi],
        }
    }

    #[test]
    fn zero_in_sum_of_unit_intervals() {
        let r = distance_to_minkowski_sum(&[0.0], &[interval(-1.0, 1.0), interval(-1.0, 1.0)]);
        assert_eq!(r.residual, 0.0);
        assert!(r.exact);
    }

    #[test]
    fn target_three_against_interval_plus_point() {
        // 1-d enumeration: the sum is [0, 2], nearest point 2
        let r = distance_to_minkowski_sum(&[3.0], &[interval(-1.0, 1.0), S::point(vec![1.0])]);
        assert_eq!(r.residual, 1.0);
        assert_eq!(r.parts, vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn cone_plus_point_reaches_target() {
        let cone = S::AxisCone {
            axes: vec![ConeAxis::NonNegative, ConeAxis::Zero],
        };
        let r = distance_to_minkowski_sum(&[1.0, 1.0], &[cone, S::point(vec![0.0, 1.0])]);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.parts[0], vec![1.0, 0.0]);
    }

    #[test]
    fn cyclic_path_matches_ball_geometry() {
        // two unit discs sum to the disc of radius 2
        let ball = S::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let r = distance_to_minkowski_sum(&[3.0, 4.0], &[ball.clone(), ball]);
        assert!(!r.exact);
        assert!((r.residual - 3.0).abs() < 1e-7);
    }

    #[test]
    fn polytope_projection() {
        let tri = S::Polytope {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let p = tri.project(&[1.0, 1.0]);
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
        assert!(tri.contains(&[0.2, 0.2], 1e-12));
        assert_eq!(tri.support(&[1.0, 2.0]), 2.0);
    }

    #[test]
    fn cone_support_is_infinite_off_polar() {
        let cone = S::AxisCone {
            axes: vec![ConeAxis::NonPositive],
        };
        assert_eq!(cone.support(&[1.0]), 0.0);
        assert!(cone.support(&[-1.0]).is_infinite());
    }

    proptest::proptest! {
        #[test]
        fn separable_residual_matches_interval_oracle(
            t in -5.0f64..5.0,
            a in -2.0f64..0.0, b in 0.0f64..2.0,
            c in -1.0f64..1.0, r in 0.0f64..1.5,
        ) {
            // oracle: the sum of two intervals is an interval
            let exact = distance_to_minkowski_sum(
                &[t],
                &[interval(a, b), S::Ball { center: vec![c], radius: r }],
            );
            let lo = a + c - r;
            let hi = b + c + r;
            let oracle = if t < lo { lo - t } else if t > hi { t - hi } else { 0.0 };
            proptest::prop_assert!((exact.residual - oracle).abs() < 1e-12);
            let recon: f64 = exact.parts.iter().map(|p| p[0]).sum();
            proptest::prop_assert!((recon - t.clamp(lo, hi)).abs() < 1e-12);
        }
    }
}
