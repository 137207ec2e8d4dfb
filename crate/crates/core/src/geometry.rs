//! Points, regions and Euclidean metrics on `R^n`.

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `R^n` with finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point must have dimension >= 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate);
        }
        Ok(Point(coords))
    }

    pub fn scalar(x: f64) -> Self {
        Point::new(vec![x]).expect("finite scalar")
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dist(&self, other: &Point) -> f64 {
        dist(&self.0, &other.0)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest pairwise distance of a finite set; 0 for a singleton.
pub fn diam(points: &[Point]) -> Result<f64> {
    let first = points.first().ok_or(Error::Empty("diam of empty set"))?;
    let n = first.dim();
    if let Some(bad) = points.iter().find(|p| p.dim() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: bad.dim(),
        });
    }
    Ok(diam_slices(points.iter().map(|p| p.coords())))
}

/// Diameter of a set given as coordinate slices (no dimension checks).
pub fn diam_slices<'a>(points: impl Iterator<Item = &'a [f64]> + Clone) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.clone().enumerate() {
        for b in points.clone().skip(i + 1) {
            best = best.max(dist(a, b));
        }
    }
    best
}

/// Subset of `R^n` over which estimators search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// All of `R^n`; the box only bounds where searches look.
    WholeSpace { lo: Vec<f64>, hi: Vec<f64> },
}

impl Region {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        Ok(Region::Box { lo, hi })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Empty("ball center"));
        }
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad ball radius {radius}")));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn new_whole(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_box(&lo, &hi)?;
        Ok(Region::WholeSpace { lo, hi })
    }

    /// One-dimensional box `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::new_box(vec![lo], vec![hi]).expect("valid interval")
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } | Region::WholeSpace { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    /// Membership in the searchable part of the region.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h),
            Region::Ball { center, radius } => dist(x, center) <= *radius,
        }
    }

    /// `dist(x, R^n \ U)`: 0 outside, `+∞` for the whole space.
    pub fn interior_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Region::Ball { center, radius } => (radius - dist(x, center)).max(0.0),
            Region::WholeSpace { .. } => f64::INFINITY,
        }
    }

    /// `V_ρ = {x ∈ U : dist(x, complement) ≥ ρ}`, or `None` when empty.
    pub fn shrink(&self, rho: f64) -> Option<Region> {
        match self {
            Region::Box { lo, hi } => {
                let lo2: Vec<f64> = lo.iter().map(|l| l + rho).collect();
                let hi2: Vec<f64> = hi.iter().map(|h| h - rho).collect();
                if lo2.iter().zip(&hi2).any(|(l, h)| l > h) {
                    None
                } else {
                    Some(Region::Box { lo: lo2, hi: hi2 })
                }
            }
            Region::Ball { center, radius } => {
                if rho > *radius {
                    None
                } else if rho == *radius {
                    // degenerate ball: the center only
                    Some(Region::Box {
                        lo: center.clone(),
                        hi: center.clone(),
                    })
                } else {
                    Some(Region::Ball {
                        center: center.clone(),
                        radius: radius - rho,
                    })
                }
            }
            Region::WholeSpace { .. } => Some(self.clone()),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Length scale used to seed diameter schedules: the shortest side of
    /// the bounding box.
    pub fn diam_scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean diameter of the searchable set.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        match self {
            Region::Ball { radius, .. } => 2.0 * radius,
            _ => dist(&lo, &hi),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Product grid with `density` points per axis over the bounding box,
    /// restricted to the region. Lexicographic order.
    pub fn grid(&self, density: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let axes: Vec<Vec<f64>> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| axis_points(*l, *h, density))
            .collect();
        product(&axes)
            .into_iter()
            .filter(|p| self.contains(p))
            .collect()
    }

    /// Grid whose total size stays within `budget` points.
    pub fn grid_with_budget(&self, density: usize, budget: usize) -> Vec<Vec<f64>> {
        let n = self.dim() as f64;
        let cap = (budget.max(1) as f64).powf(1.0 / n).floor() as usize;
        self.grid(density.min(cap.max(2)))
    }

    /// Uniform sample from the searchable set.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if h > l { rng.gen_range(*l..=*h) } else { *l })
                .collect(),
            Region::Ball { center, radius } => sample_ball(center, *radius, rng),
        }
    }

    /// Nearest point of the searchable set.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
            Region::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(x)
                        .map(|(c, v)| c + (v - c) * radius / d)
                        .collect()
                }
            }
        }
    }

    /// Largest `λ ∈ [0, 1]` with `from + λ (to − from)` in the region.
    /// `from` must lie in the region.
    pub fn ray_fraction(&self, from: &[f64], to: &[f64]) -> f64 {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => {
                box_ray_fraction(lo, hi, from, to)
            }
            Region::Ball { center, radius } => ball_ray_fraction(center, *radius, from, to),
        }
    }

    /// Whether the closed ball `B(c, r)` lies inside the searchable set.
    pub fn contains_ball(&self, c: &[f64], r: f64) -> bool {
        match self {
            Region::Box { lo, hi } | Region::WholeSpace { lo, hi } => c
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| v - r >= *l && v + r <= *h),
            Region::Ball { center, radius } => dist(c, center) + r <= *radius,
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self, Region::WholeSpace { .. })
    }
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() {
        return Err(Error::Empty("box bounds"));
    }
    if lo.len() != hi.len() {
        return Err(Error::Dimension {
            expected: lo.len(),
            got: hi.len(),
        });
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h))
    {
        return Err(Error::InvalidParameter("box needs finite lo <= hi".into()));
    }
    Ok(())
}

pub(crate) fn axis_points(lo: f64, hi: f64, density: usize) -> Vec<f64> {
    if density <= 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    let step = (hi - lo) / (density - 1) as f64;
    (0..density)
        .map(|i| if i + 1 == density { hi } else { lo + step * i as f64 })
        .collect()
}

/// Cartesian product in lexicographic order.
pub(crate) fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn sample_ball<R: Rng>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    let n = center.len();
    let dir = random_unit(n, rng);
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    center.iter().zip(&dir).map(|(c, d)| c + r * d).collect()
}

pub(crate) fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        // Box-Muller normals
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let nv = norm(&v);
        if nv > 1e-12 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

pub(crate) fn box_ray_fraction(lo: &[f64], hi: &[f64], from: &[f64], to: &[f64]) -> f64 {
    let mut lam = 1.0f64;
    for i in 0..from.len() {
        let d = to[i] - from[i];
        if d > 0.0 && to[i] > hi[i] {
            lam = lam.min(((hi[i] - from[i]) / d).max(0.0));
        } else if d < 0.0 && to[i] < lo[i] {
            lam = lam.min(((lo[i] - from[i]) / d).max(0.0));
        }
    }
    lam
}

pub(crate) fn ball_ray_fraction(center: &[f64], radius: f64, from: &[f64], to: &[f64]) -> f64 {
    if dist(to, center) <= radius {
        return 1.0;
    }
    // |from - c + λ d|^2 = r^2, take the positive root
    let d: Vec<f64> = to.iter().zip(from).map(|(t, f)| t - f).collect();
    let w: Vec<f64> = from.iter().zip(center).map(|(f, c)| f - c).collect();
    let a = dot(&d, &d);
    if a == 0.0 {
        return 1.0;
    }
    let b = 2.0 * dot(&w, &d);
    let c = dot(&w, &w) - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let lam = (-b + disc.sqrt()) / (2.0 * a);
    lam.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|c| Point::new(c.to_vec()).unwrap()).collect()
    }

    #[test]
    fn diam_singleton_is_zero() {
        assert_eq!(diam(&pts(&[&[0.0, 0.0]])).unwrap(), 0.0);
    }

    #[test]
    fn diam_single_pair() {
        assert_eq!(diam(&pts(&[&[0.0, 0.0], &[3.0, 4.0]])).unwrap(), 5.0);
    }

    #[test]
    fn diam_triangle_matches_pairwise_brute_force() {
        let p = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let mut brute = 0.0f64;
        for a in &p {
            for b in &p {
                brute = brute.max(a.dist(b));
            }
        }
        assert_eq!(diam(&p).unwrap(), brute);
        assert!((brute - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diam_rejects_mixed_dimensions() {
        let p = pts(&[&[0.0, 0.0], &[1.0]]);
        assert!(matches!(diam(&p), Err(Error::Dimension { .. })));
        assert!(diam(&[]).is_err());
    }

    #[test]
    fn interior_distance_closed_forms() {
        let b = Region::new_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        assert!((b.interior_distance(&[0.25, 1.0]) - 0.25).abs() < 1e-15);
        assert_eq!(b.interior_distance(&[3.0, 1.0]), 0.0);
        let ball = Region::new_ball(vec![0.0, 0.0], 2.0).unwrap();
        assert!((ball.interior_distance(&[1.0, 0.0]) - 1.0).abs() < 1e-15);
        let w = Region::new_whole(vec![-1.0], vec![1.0]).unwrap();
        assert!(w.interior_distance(&[0.0]).is_infinite());
    }

    #[test]
    fn shrink_box_and_ball() {
        let b = Region::interval(0.0, 1.0);
        assert_eq!(b.shrink(0.25), Some(Region::interval(0.25, 0.75)));
        assert_eq!(b.shrink(0.75), None);
        let ball = Region::new_ball(vec![0.0], 1.0).unwrap();
        assert_eq!(ball.shrink(0.5), Some(Region::new_ball(vec![0.0], 0.5).unwrap()));
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = Region::interval(-2.0, 2.0).grid(33);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], vec![-2.0]);
        assert_eq!(g[16], vec![0.0]);
        assert_eq!(g[32], vec![2.0]);
    }

    #[test]
    fn ray_fraction_stays_inside() {
        let b = Region::interval(0.0, 1.0);
        assert_eq!(b.ray_fraction(&[0.5], &[2.0]), 1.0 / 3.0);
        let ball = Region::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let lam = ball.ray_fraction(&[0.0, 0.0], &[2.0, 0.0]);
        assert!((lam - 0.5).abs() < 1e-15);
    }
}
