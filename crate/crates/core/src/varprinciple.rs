//! Ekeland's variational principle on finite grids, and the penalized
//! decoupled objectives used to locate fuzzy multiplier points.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{IndexSubset, DIVERGENCE_FLOOR};
use crate::error::{Error, Result};
use crate::ext::ExtValue;
use crate::functions::{ExtFunction, FunctionFamily};
use crate::geometry::{dist, Region};
use crate::rng;

/// Product-space size above which the exhaustive path is abandoned.
pub const EXHAUSTIVE_CAP: usize = 1 << 21;
/// Largest `m · n` handled exhaustively.
pub const EXHAUSTIVE_DIM: usize = 6;

/// Finite product `G_1 × … × G_m` of point grids in `R^n`, with the metric
/// `max_i ‖u_i − v_i‖`. A single copy is an ordinary grid.
#[derive(Clone, Debug, Serialize)]
pub struct GridSpace {
    copies: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl GridSpace {
    pub fn new(copies: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = copies
            .first()
            .and_then(|c| c.first())
            .map(|p| p.len())
            .ok_or(Error::Empty("grid space needs a nonempty copy"))?;
        if dim == 0 {
            return Err(Error::Empty("grid points need at least one coordinate"));
        }
        for c in &copies {
            if c.is_empty() {
                return Err(Error::Empty("grid space needs a nonempty copy"));
            }
            for p in c {
                if p.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: p.len(),
                    });
                }
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteCoordinate);
                }
            }
        }
        Ok(GridSpace { copies, dim })
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        GridSpace::new(vec![points])
    }

    /// `m` copies of the grid of `region` at `density` points per axis.
    pub fn product_of_region(region: &Region, density: usize, m: usize) -> Result<Self> {
        let g = region.grid(density);
        GridSpace::new(vec![g; m.max(1)])
    }

    pub fn copies(&self) -> usize {
        self.copies.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn copy(&self, i: usize) -> &[Vec<f64>] {
        &self.copies[i]
    }

    /// Number of product points, saturating.
    pub fn size(&self) -> usize {
        self.copies
            .iter()
            .fold(1usize, |acc, c| acc.saturating_mul(c.len()))
    }

    pub fn is_exhaustive(&self) -> bool {
        self.copies() * self.dim <= EXHAUSTIVE_DIM && self.size() <= EXHAUSTIVE_CAP
    }

    /// Mixed-radix decoding, first copy varying slowest.
    pub fn index_of(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.copies)
            .fold(0, |acc, (i, c)| acc * c.len() + i)
    }

    pub fn decode(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.copies.len()];
        for (i, c) in self.copies.iter().enumerate().rev() {
            idx[i] = flat % c.len();
            flat /= c.len();
        }
        idx
    }

    pub fn tuple(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter()
            .zip(&self.copies)
            .map(|(i, c)| c[*i].clone())
            .collect()
    }

    /// Per-copy indices of `tuple`, if every point lies on its grid.
    pub fn locate(&self, tuple: &[Vec<f64>]) -> Option<Vec<usize>> {
        if tuple.len() != self.copies.len() {
            return None;
        }
        tuple
            .iter()
            .zip(&self.copies)
            .map(|(p, c)| c.iter().position(|q| q == p))
            .collect()
    }

    pub fn metric(&self, a: &[usize], b: &[usize]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.copies)
            .map(|((i, j), c)| dist(&c[*i], &c[*j]))
            .fold(0.0, f64::max)
    }
}

pub fn product_metric(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| dist(u, v)).fold(0.0, f64::max)
}

fn lex(a: &[usize], b: &[usize], space: &GridSpace) -> Ordering {
    for ((i, j), c) in a.iter().zip(b).zip(&space.copies) {
        for (x, y) in c[*i].iter().zip(&c[*j]) {
            match x.total_cmp(y) {
                Ordering::Equal => {}
                o => return o,
            }
        }
    }
    Ordering::Equal
}

#[derive(Clone, Debug, Serialize)]
pub struct EkelandResult {
    pub index: Vec<usize>,
    pub point: Vec<Vec<f64>>,
    pub value: f64,
    pub steps: usize,
    /// The two EVP inequalities were checked against every grid point;
    /// otherwise against a seeded sample only.
    pub exhaustive: bool,
    pub checked: usize,
}

/// Objective on grid tuples.
pub type GridObjective<'f> = dyn Fn(&[Vec<f64>]) -> ExtValue + Sync + 'f;

struct Candidate {
    idx: Vec<usize>,
    f: f64,
    g: f64,
}

fn better(a: &Candidate, b: &Candidate, space: &GridSpace) -> bool {
    match a.g.total_cmp(&b.g) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => match a.f.total_cmp(&b.f) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => lex(&a.idx, &b.idx, space) == Ordering::Less,
        },
    }
}

fn floor_check(v: f64) -> Result<()> {
    if v < DIVERGENCE_FLOOR {
        Err(Error::Precondition(format!(
            "objective looks unbounded below (value {v:.3e})"
        )))
    } else {
        Ok(())
    }
}

/// Ekeland point of `f` on `space` from `start` with slope `eps`.
///
/// Moves from `x_k` to the minimizer of `f(y) + ε d(y, x_k)` over the grid
/// points `y ≠ x_k` with `f(y) + ε d(y, x_k) ≤ f(x_k)`, ties broken by the
/// smaller `f` and then lexicographically, until no such `y` exists. The
/// result satisfies `f(x̂) ≤ f(x̄)` and `f(x̂) < f(y) + ε d(y, x̂)` for all
/// `y ≠ x̂`; both are checked before returning. Grids beyond the exhaustive
/// budget use single-copy moves and seeded samples, and say so.
pub fn ekeland_on_grid(
    f: &GridObjective,
    space: &GridSpace,
    start: &[usize],
    eps: f64,
    seed: u64,
) -> Result<EkelandResult> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if start.len() != space.copies() || start.iter().zip(&space.copies).any(|(i, c)| *i >= c.len()) {
        return Err(Error::InvalidParameter("start index outside the grid".into()));
    }
    let f0 = f(&space.tuple(start)).value();
    if !f0.is_finite() {
        return Err(Error::NotInDomain);
    }
    if space.is_exhaustive() {
        exhaustive(f, space, start, eps, f0)
    } else {
        sampled(f, space, start, eps, f0, seed)
    }
}

fn exhaustive(
    f: &GridObjective,
    space: &GridSpace,
    start: &[usize],
    eps: f64,
    f0: f64,
) -> Result<EkelandResult> {
    let n = space.size();
    let idxs: Vec<Vec<usize>> = (0..n).map(|k| space.decode(k)).collect();
    let fv: Vec<f64> = idxs.par_iter().map(|i| f(&space.tuple(i)).value()).collect();
    let lowest = fv.iter().copied().fold(f64::INFINITY, f64::min);
    floor_check(lowest)?;
    let mut x = start.to_vec();
    let mut fx = f0;
    let mut steps = 0;
    loop {
        let best = (0..n)
            .into_par_iter()
            .filter_map(|k| {
                let y = &idxs[k];
                if *y == x || !fv[k].is_finite() {
                    return None;
                }
                let g = fv[k] + eps * space.metric(y, &x);
                (g <= fx).then(|| Candidate {
                    idx: y.clone(),
                    f: fv[k],
                    g,
                })
            })
            .reduce_with(|a, b| if better(&b, &a, space) { b } else { a });
        match best {
            Some(c) => {
                x = c.idx;
                fx = c.f;
                steps += 1;
                if steps > n {
                    return Err(Error::Precondition("Ekeland iteration failed to terminate".into()));
                }
            }
            None => break,
        }
    }
    // postcondition over every grid point
    let violated = (0..n).into_par_iter().any(|k| {
        idxs[k] != x && !(fx < fv[k] + eps * space.metric(&idxs[k], &x))
    });
    if violated || fx > f0 {
        return Err(Error::Precondition("EVP postcondition failed".into()));
    }
    Ok(EkelandResult {
        point: space.tuple(&x),
        index: x,
        value: fx,
        steps,
        exhaustive: true,
        checked: n,
    })
}

const SAMPLES: usize = 4096;

fn sampled(
    f: &GridObjective,
    space: &GridSpace,
    start: &[usize],
    eps: f64,
    f0: f64,
    seed: u64,
) -> Result<EkelandResult> {
    let draw = |keys: &[u64], count: usize| -> Vec<Vec<usize>> {
        let mut g = rng::stream(seed, keys);
        (0..count)
            .map(|_| space.copies.iter().map(|c| g.gen_range(0..c.len())).collect())
            .collect()
    };
    let pool = draw(&[0xE7], SAMPLES);
    let mut x = start.to_vec();
    let mut fx = f0;
    let mut steps = 0;
    let limit = 100_000;
    loop {
        let mut cands: Vec<Vec<usize>> = Vec::new();
        for (i, c) in space.copies.iter().enumerate() {
            for j in 0..c.len() {
                let mut y = x.clone();
                y[i] = j;
                cands.push(y);
            }
        }
        cands.extend(pool.iter().cloned());
        let best = cands
            .par_iter()
            .filter_map(|y| {
                if *y == x {
                    return None;
                }
                let fy = f(&space.tuple(y)).value();
                if !fy.is_finite() {
                    return None;
                }
                let g = fy + eps * space.metric(y, &x);
                (g <= fx).then(|| Candidate {
                    idx: y.clone(),
                    f: fy,
                    g,
                })
            })
            .reduce_with(|a, b| if better(&b, &a, space) { b } else { a });
        match best {
            Some(c) => {
                floor_check(c.f)?;
                x = c.idx;
                fx = c.f;
                steps += 1;
                if steps > limit {
                    return Err(Error::Precondition("Ekeland iteration failed to terminate".into()));
                }
            }
            None => break,
        }
    }
    let check = draw(&[0xE8], 4 * SAMPLES);
    let violated = check.par_iter().any(|y| {
        *y != x && {
            let fy = f(&space.tuple(y)).value();
            !(fx < fy + eps * space.metric(y, &x))
        }
    });
    if violated || fx > f0 {
        return Err(Error::Precondition("EVP postcondition failed on the sample".into()));
    }
    Ok(EkelandResult {
        point: space.tuple(&x),
        index: x,
        value: fx,
        steps,
        exhaustive: false,
        checked: check.len(),
    })
}

/// Both EVP inequalities at `x̂` against every grid point, independent of
/// how `x̂` was found.
pub fn evp_holds(f: &GridObjective, space: &GridSpace, xbar: &[usize], xhat: &[usize], eps: f64) -> bool {
    let fbar = f(&space.tuple(xbar)).value();
    let fhat = f(&space.tuple(xhat)).value();
    if !(fhat <= fbar) {
        return false;
    }
    (0..space.size()).into_par_iter().all(|k| {
        let y = space.decode(k);
        y == xhat || fhat < f(&space.tuple(&y)).value() + eps * space.metric(&y, xhat)
    })
}

/// Constants of the penalized problem around `x̄`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PenaltyParams {
    pub eps: f64,
    pub delta_prime: f64,
    pub eps_prime: f64,
    pub rho: f64,
    pub eta_prime: f64,
    /// Common lower bound of the members on the ball around `x̄`.
    pub c_lower: f64,
}

/// `φ_γ(u) = Σ f_{t_i}(u_i) + γ diam{u_i}` and
/// `φ̂_γ(u) = φ_γ(u) + α max_i ‖u_i − x̄‖²`.
#[derive(Clone, Debug, Serialize)]
pub struct PenalizedObjective {
    pub ids: Vec<usize>,
    #[serde(skip)]
    funcs: Vec<Arc<ExtFunction>>,
    pub anchor: Vec<f64>,
    pub gamma: f64,
    pub alpha: f64,
    pub xi: f64,
    pub params: PenaltyParams,
    /// `Σ f_{t_i}(x̄)`.
    pub anchor_sum: f64,
}

impl PenalizedObjective {
    pub fn m(&self) -> usize {
        self.funcs.len()
    }

    pub fn sum(&self, u: &[Vec<f64>]) -> ExtValue {
        self.funcs.iter().zip(u).map(|(f, p)| f.eval(p)).sum()
    }

    pub fn diam(u: &[Vec<f64>]) -> f64 {
        crate::geometry::diam_slices(u.iter().map(|p| p.as_slice()))
    }

    pub fn anchor_dist(&self, u: &[Vec<f64>]) -> f64 {
        u.iter().map(|p| dist(p, &self.anchor)).fold(0.0, f64::max)
    }

    pub fn phi(&self, u: &[Vec<f64>]) -> ExtValue {
        let s = self.sum(u);
        if !s.is_finite() {
            return s;
        }
        ExtValue::finite(s.value() + self.gamma * Self::diam(u))
    }

    pub fn phi_hat(&self, u: &[Vec<f64>]) -> ExtValue {
        let p = self.phi(u);
        if !p.is_finite() {
            return p;
        }
        let r = self.anchor_dist(u);
        ExtValue::finite(p.value() + self.alpha * r * r)
    }
}

/// Builds `φ̂_γ` for `S = {t_1..t_m}` with `α = ε′/ρ²`, `ξ = ε − 2ε′/ρ` and
/// `γ = (Σ f_{t_i}(x̄) − m c)/η′ + 1`. Requires `ε′ ∈ (0, εδ′/2)` and
/// `ρ ∈ (2ε′/ε, δ′)`.
pub fn build_penalized(
    family: &FunctionFamily,
    s: &IndexSubset,
    xbar: &[f64],
    p: PenaltyParams,
) -> Result<PenalizedObjective> {
    let bad = |m: String| Err(Error::InvalidParameter(m));
    if !(p.eps > 0.0 && p.delta_prime > 0.0 && p.eta_prime > 0.0) {
        return bad("eps, delta' and eta' must be positive".into());
    }
    if !(p.eps_prime > 0.0 && p.eps_prime < p.eps * p.delta_prime / 2.0) {
        return bad(format!(
            "eps' = {} must lie in (0, eps delta'/2 = {})",
            p.eps_prime,
            p.eps * p.delta_prime / 2.0
        ));
    }
    if !(p.rho > 2.0 * p.eps_prime / p.eps && p.rho < p.delta_prime) {
        return bad(format!(
            "rho = {} must lie in (2 eps'/eps = {}, delta' = {})",
            p.rho,
            2.0 * p.eps_prime / p.eps,
            p.delta_prime
        ));
    }
    if !p.c_lower.is_finite() {
        return bad("the lower bound must be finite".into());
    }
    family.check_point(xbar)?;
    let members = family.subset_members(s)?;
    if members.is_empty() {
        return Err(Error::Empty("index subset is empty"));
    }
    let funcs: Vec<Arc<ExtFunction>> = members.iter().map(|m| m.func.clone()).collect();
    let anchor_sum = funcs.iter().map(|f| f.eval(xbar)).sum::<ExtValue>();
    if !anchor_sum.is_finite() {
        return Err(Error::NotInDomain);
    }
    let m = funcs.len() as f64;
    let slack = anchor_sum.value() - m * p.c_lower;
    if slack < 0.0 {
        return bad("the lower bound exceeds the values at the anchor".into());
    }
    Ok(PenalizedObjective {
        ids: s.ids().to_vec(),
        funcs,
        anchor: xbar.to_vec(),
        gamma: slack / p.eta_prime + 1.0,
        alpha: p.eps_prime / (p.rho * p.rho),
        xi: p.eps - 2.0 * p.eps_prime / p.rho,
        params: p,
        anchor_sum: anchor_sum.value(),
    })
}

/// Outcome of the Ekeland step on the product space, with the bounds the
/// step is supposed to deliver.
#[derive(Clone, Debug, Serialize)]
pub struct ProductStep {
    pub points: Vec<Vec<f64>>,
    pub phi_hat: f64,
    pub sum: f64,
    pub diam: f64,
    pub anchor_dist: f64,
    /// `γ diam + α max‖x̂_i − x̄‖² ≤ Σ f(x̄) − Σ f(x̂)`.
    pub penalty_chain: bool,
    pub heuristic: bool,
    pub steps: usize,
}

/// Grid Ekeland point of `φ̂_γ` with slope `ξ`, started at `(x̄, …, x̄)`.
/// Every copy's grid must lie in `B̄_ρ(x̄)` and contain `x̄`. Fails with
/// `ParameterRegimeTooCoarse` when the returned tuple misses the sum
/// decrease, the diameter bound `< η′` or the anchor bound `< ρ`.
pub fn ekeland_step_on_product(
    obj: &PenalizedObjective,
    space: &GridSpace,
    seed: u64,
) -> Result<ProductStep> {
    if space.copies() != obj.m() {
        return Err(Error::Dimension {
            expected: obj.m(),
            got: space.copies(),
        });
    }
    if space.dim() != obj.anchor.len() {
        return Err(Error::Dimension {
            expected: obj.anchor.len(),
            got: space.dim(),
        });
    }
    let rho = obj.params.rho;
    for c in &space.copies {
        if c.iter().any(|p| dist(p, &obj.anchor) > rho * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter("grid leaves the closed ball around the anchor".into()));
        }
    }
    let start_tuple = vec![obj.anchor.clone(); obj.m()];
    let start = space
        .locate(&start_tuple)
        .ok_or_else(|| Error::InvalidParameter("the anchor must be a grid point of every copy".into()))?;
    if obj.xi <= 0.0 {
        return Err(Error::InvalidParameter(format!("slope xi = {} must be positive", obj.xi)));
    }
    let f = |u: &[Vec<f64>]| obj.phi_hat(u);
    let r = ekeland_on_grid(&f, space, &start, obj.xi, seed)?;
    let sum = obj.sum(&r.point).value();
    let diam = PenalizedObjective::diam(&r.point);
    let ad = obj.anchor_dist(&r.point);
    let coarse = |m: String| Err(Error::ParameterRegimeTooCoarse(m));
    if !(sum <= obj.anchor_sum) {
        return coarse(format!("sum increased from {} to {sum}", obj.anchor_sum));
    }
    if !(diam < obj.params.eta_prime) {
        return coarse(format!("diameter {diam} is not below eta' = {}", obj.params.eta_prime));
    }
    if !(ad < rho) {
        return coarse(format!("anchor distance {ad} is not below rho = {rho}"));
    }
    let lhs = obj.gamma * diam + obj.alpha * ad * ad;
    let rhs = obj.anchor_sum - sum;
    Ok(ProductStep {
        points: r.point,
        phi_hat: r.value,
        sum,
        diam,
        anchor_dist: ad,
        penalty_chain: lhs <= rhs + 1e-12 * (1.0 + rhs.abs()),
        heuristic: !r.exhaustive,
        steps: r.steps,
    })
}

/// Grid of `B̄_ρ(x̄)` with `density` points per axis, always containing `x̄`.
pub fn ball_grid(anchor: &[f64], rho: f64, density: usize) -> Vec<Vec<f64>> {
    let n = anchor.len();
    let density = density.max(2) | 1;
    let mid = (density / 2) as f64;
    // symmetric in k so the middle offset is exactly zero
    let axis: Vec<f64> = (0..density)
        .map(|k| rho * (k as f64 - mid) / mid)
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let p: Vec<f64> = (0..n).map(|i| anchor[i] + axis[idx[i]]).collect();
        if dist(&p, anchor) <= rho {
            out.push(p);
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            idx[i] += 1;
            if idx[i] < density {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(pts: &[f64]) -> GridSpace {
        GridSpace::from_points(pts.iter().map(|x| vec![*x]).collect()).unwrap()
    }

    #[test]
    fn quadratic_on_five_points() {
        let s = grid1(&[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let f = |u: &[Vec<f64>]| ExtValue::finite(u[0][0] * u[0][0]);
        let r = ekeland_on_grid(&f, &s, &[4], 0.1, 0).unwrap();
        assert_eq!(r.point, vec![vec![0.0]]);
        assert!(evp_holds(&f, &s, &[4], &r.index, 0.1));
    }

    #[test]
    fn constant_stays_put() {
        let s = grid1(&[0.0, 1.0, 2.0]);
        let f = |_: &[Vec<f64>]| ExtValue::finite(3.0);
        let r = ekeland_on_grid(&f, &s, &[1], 0.5, 0).unwrap();
        assert_eq!(r.index, vec![1]);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn large_slope_picks_the_near_well() {
        // wells at -1 (depth 1) and 1 (depth 1.2), start at 0.5
        let pts: Vec<f64> = (0..21).map(|k| -1.0 + 0.1 * k as f64).collect();
        let s = grid1(&pts);
        let f = |u: &[Vec<f64>]| {
            let x = u[0][0];
            ExtValue::finite(((x + 1.0).powi(2) - 1.0).min((x - 1.0).powi(2) - 1.2))
        };
        let start = [15];
        let r = ekeland_on_grid(&f, &s, &start, 2.0, 0).unwrap();
        assert!(r.point[0][0] > 0.0);
        assert!(evp_holds(&f, &s, &start, &r.index, 2.0));
    }

    #[test]
    fn ties_move_off_the_start() {
        // f(y) + eps d(y, x) = f(x) exactly: the strict inequality needs a move
        let s = grid1(&[0.0, 1.0]);
        let f = |u: &[Vec<f64>]| ExtValue::finite(if u[0][0] == 0.0 { 1.0 } else { 0.5 });
        let r = ekeland_on_grid(&f, &s, &[0], 0.5, 0).unwrap();
        assert_eq!(r.index, vec![1]);
    }

    #[test]
    fn unbounded_is_reported() {
        let s = grid1(&[0.0, 1.0]);
        let f = |u: &[Vec<f64>]| ExtValue::finite(-1e9 * u[0][0]);
        assert!(matches!(
            ekeland_on_grid(&f, &s, &[0], 0.5, 0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn penalty_constants() {
        let fam = crate::functions::parse_family("t1 := (abs 0)\nt2 := (dist (1) 1)\n").unwrap();
        let p = PenaltyParams {
            eps: 0.1,
            delta_prime: 1.0,
            eps_prime: 0.02,
            rho: 0.5,
            eta_prime: 0.1,
            c_lower: 0.0,
        };
        let o = build_penalized(&fam, &IndexSubset::new(vec![0, 1]), &[0.5], p).unwrap();
        assert!((o.alpha - 0.08).abs() < 1e-15);
        assert!((o.xi - 0.02).abs() < 1e-15);
        assert!((o.gamma - 11.0).abs() < 1e-12);
        let anchor = vec![vec![0.5], vec![0.5]];
        assert_eq!(o.phi_hat(&anchor).value(), 1.0);
        let bad = PenaltyParams { rho: 0.3, ..p };
        assert!(build_penalized(&fam, &IndexSubset::new(vec![0, 1]), &[0.5], bad).is_err());
    }

    #[test]
    fn singleton_has_no_diameter_penalty() {
        let fam = crate::functions::parse_family("t1 := (abs 0)\n").unwrap();
        let p = PenaltyParams {
            eps: 0.2,
            delta_prime: 0.2,
            eps_prime: 0.01,
            rho: 0.15,
            eta_prime: 0.05,
            c_lower: 0.0,
        };
        let o = build_penalized(&fam, &IndexSubset::new(vec![0]), &[0.0], p).unwrap();
        let u = vec![vec![0.1]];
        assert_eq!(o.phi(&u).value(), 0.1);
        let space = GridSpace::new(vec![ball_grid(&[0.0], 0.15, 7)]).unwrap();
        let step = ekeland_step_on_product(&o, &space, 0).unwrap();
        assert_eq!(step.points, vec![vec![0.0]]);
    }
}
