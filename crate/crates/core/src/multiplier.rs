//! Fuzzy multiplier rule and fuzzy sum rule for families, following the
//! Ekeland-penalty construction on a finite product grid.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{CertVerdict, Certificate, Certifier, CertifyConfig};
use crate::chain::{IndexSubset, TailMode};
use crate::decouple::{self, member_ball_inf, DecoupleConfig};
use crate::error::{Error, Result};
use crate::ext::ExtValue;
use crate::functions::{
    exact_subdifferential, frechet_membership_test, ExtFunction, FunctionFamily, RefuterConfig,
    SubdifferentialSet,
};
use crate::geometry::{dist, dot, norm, random_unit, Region};
use crate::rng;
use crate::varprinciple::{
    ball_grid, build_penalized, ekeland_step_on_product, GridSpace, PenaltyParams,
};

pub use crate::functions::{distance_to_minkowski_sum, MinkowskiDistance};

/// Largest chain depth the tail extension may request.
const MAX_DEPTH: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    /// Run the certificate on `B_δ(x̄)` and refuse to search without `Holds`.
    Run,
    /// Take the lower semicontinuity hypothesis on trust.
    Assume,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplierConfig {
    /// Grid points per axis of the ball grid; raised to the next odd number.
    pub density: usize,
    /// Extra attempts, each roughly doubling the density, when the residual
    /// misses `ε` on the coarser grid.
    pub refinements: usize,
    /// Use the quasi variants of the certificates.
    pub quasi: bool,
    pub certificate: CertificateMode,
    /// Estimator settings for certificates and the decoupled infimum; the
    /// region is replaced by the relevant ball.
    pub decouple: DecoupleConfig,
    #[serde(skip)]
    pub refuter: RefuterConfig,
    pub seed: u64,
}

impl MultiplierConfig {
    pub fn new(dim: usize) -> Self {
        MultiplierConfig {
            density: 21,
            refinements: 2,
            quasi: false,
            certificate: CertificateMode::Run,
            decouple: DecoupleConfig::new(Region::new_box(vec![-1.0; dim], vec![1.0; dim]).expect("unit box")),
            refuter: RefuterConfig::default(),
            seed: 0,
        }
    }

    pub fn assume_certificate(mut self) -> Self {
        self.certificate = CertificateMode::Assume;
        self
    }

    fn on(&self, region: Region) -> DecoupleConfig {
        DecoupleConfig {
            region,
            seed: self.seed,
            ..self.decouple.clone()
        }
    }
}

/// Which conclusions of the rule were verified on the returned data.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Checks {
    /// `|Σ_S f(x̄) − Σ̄ f(x̄)| < ε′/2` by the tail bound.
    pub tail_error: bool,
    pub points_in_ball: bool,
    /// `Σ (f(x_i) − f(x̄)) ≤ 0`.
    pub sum_defect_nonpositive: bool,
    /// `Σ (f(x_i) − f(x̄)) < ε`.
    pub sum_defect_below_eps: bool,
    pub residual_below_eps: bool,
    /// `γ diam + α max‖x̂_i − x̄‖² ≤ Σ f(x̄) − Σ f(x̂)`.
    pub penalty_chain: bool,
    /// The EVP conditions were checked against every grid tuple.
    pub ekeland_exhaustive: bool,
    /// Every subdifferential came from a closed form.
    pub subdifferentials_exact: bool,
    pub residual_exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplierResult {
    pub s: IndexSubset,
    pub labels: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub sum_defect: f64,
    pub dual_residual: f64,
    /// Subgradients `g_i ∈ ∂f_{t_i}(x_i)` nearest to the target.
    pub decomposition: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    pub epsilon: f64,
    pub xbar: Vec<f64>,
    pub params: PenaltyParams,
    pub gamma: f64,
    pub alpha: f64,
    pub xi: f64,
    pub density: usize,
    pub certified: Checks,
    pub certificate: Option<Certificate>,
    /// The hypothesis behind the search was only supported empirically or
    /// assumed.
    pub conditional: bool,
    pub notes: Vec<String>,
}

impl MultiplierResult {
    /// `(sum_defect, dual_residual)` recomputed from the stored points.
    pub fn replay(&self, family: &FunctionFamily) -> Result<(f64, f64)> {
        let members = family.subset_members(&self.s)?;
        let mut defect = 0.0;
        let mut sets = Vec::with_capacity(members.len());
        for (m, x) in members.iter().zip(&self.points) {
            defect += m.func.eval(x).value() - m.func.eval(&self.xbar).value();
            sets.push(subdifferential_at(&m.func, x)?.0);
        }
        Ok((defect, distance_to_minkowski_sum(&self.target, &sets).residual))
    }
}

/// `∂f(x)`: the convex subdifferential, or the gradient of a smooth member.
/// The flag says whether the set is exact.
pub fn subdifferential_at(f: &ExtFunction, x: &[f64]) -> Result<(SubdifferentialSet, bool)> {
    if f.is_convex() {
        return Ok((exact_subdifferential(f, x)?, true));
    }
    match f.gradient(x) {
        Some(g) => Ok((SubdifferentialSet::point(g), true)),
        None => Err(Error::ExactnessUnavailable(
            "member is neither convex nor differentiable at the point".into(),
        )),
    }
}

fn certificate_for(
    family: &FunctionFamily,
    ball: &Region,
    cfg: &MultiplierConfig,
    firm: bool,
) -> Result<Certificate> {
    let ccfg = CertifyConfig {
        decouple: cfg.on(ball.clone()),
        ..CertifyConfig::new(ball.clone())
    };
    let c = Certifier::new(family, &ccfg)?;
    match (firm, cfg.quasi) {
        (false, false) => c.uniform_lsc(),
        (false, true) => c.quasi_uniform_lsc(),
        (true, false) => Ok(c.firm_uniform_lsc()),
        (true, true) => c.firm_quasi_uniform_lsc(),
    }
}

fn require(cert: &Certificate) -> Result<()> {
    match &cert.verdict {
        CertVerdict::Holds => Ok(()),
        CertVerdict::Fails { .. } => Err(Error::CertificateMissing(format!(
            "{} fails on the ball",
            cert.property.name()
        ))),
        CertVerdict::Inconclusive => Err(Error::CertificateMissing(format!(
            "{} is inconclusive on the ball",
            cert.property.name()
        ))),
    }
}

fn upper_value(family: &FunctionFamily, x: &[f64]) -> Result<f64> {
    Ok(family.upper_sum(x)?.value.value())
}

/// Grid scan of `B_δ(x̄)`: `x̄` must minimize the upper sum there.
pub fn check_local_min(family: &FunctionFamily, xbar: &[f64], delta: f64, density: usize) -> Result<f64> {
    let v = upper_value(family, xbar)?;
    if !v.is_finite() {
        return Err(Error::NotInDomain);
    }
    let tol = 1e-9 * (1.0 + v.abs());
    let grid = ball_grid(xbar, delta * (1.0 - 1e-9), density);
    let worst = grid
        .par_iter()
        .map(|y| upper_value(family, y).unwrap_or(f64::INFINITY))
        .reduce(|| f64::INFINITY, f64::min);
    if worst < v - tol {
        return Err(Error::Precondition(format!(
            "x̄ is not a minimum of the upper sum on the ball: grid value {worst} < {v}"
        )));
    }
    Ok(v)
}

/// Chain prefix that contains `s0` and has tail error below `bound`.
fn extend_by_tail(
    family: &FunctionFamily,
    s0: &IndexSubset,
    bound: f64,
) -> Result<(FunctionFamily, IndexSubset)> {
    match family.tail_mode() {
        TailMode::Finite => {
            let all = family.chain().last().clone();
            if !s0.is_subset_of(&all) {
                return Err(Error::InvalidParameter("S0 has ids outside the family".into()));
            }
            Ok((family.clone(), all))
        }
        TailMode::TailBounded { bound: b, .. } => {
            let chain = family.chain();
            let nf = family.fixed_len();
            let start = chain.tail_arg(0).expect("countable chain");
            let need_s0 = s0.ids().iter().max().map_or(0, |m| m.saturating_sub(nf));
            let need_tail = (0..MAX_DEPTH)
                .find(|j| b.eval(start + j).abs() < bound)
                .ok_or_else(|| Error::TailUncontrolled(format!("tail bound stays above {bound}")))?;
            let j = need_s0.max(need_tail);
            let fam = if j < chain.depth() {
                family.clone()
            } else {
                family.with_depth(j + 1)?
            };
            let s = fam.chain().prefixes()[j].clone();
            if !s0.is_subset_of(&s) {
                return Err(Error::InvalidParameter("S0 has ids outside the family".into()));
            }
            Ok((fam, s))
        }
        _ => Err(Error::TailUncontrolled(format!(
            "tail mode {} gives no bound on the tail",
            family.tail_mode().name()
        ))),
    }
}

/// Common lower bound of the members on `B_δ(x̄)`. Structural bounds are
/// exact; searched ones are lowered by one unit to stay below the infimum.
fn lower_bound(family: &FunctionFamily, s: &IndexSubset, xbar: &[f64], delta: f64, ball: &Region) -> Result<(f64, bool)> {
    let mut c = f64::INFINITY;
    let mut exact = true;
    for m in family.subset_members(s)? {
        let v = if let Some(v) = m.func.lower_bound() {
            v
        } else if let Some(v) = m.func.ball_inf(xbar, delta) {
            v.value()
        } else {
            exact = false;
            member_ball_inf(&m.func, xbar, delta, ball).value - 1.0
        };
        c = c.min(v);
    }
    if !c.is_finite() {
        return Err(Error::Precondition("a member is unbounded below on the ball".into()));
    }
    Ok((c, exact))
}

/// Fuzzy multiplier rule at a local minimizer `x̄` of the upper sum on
/// `B_δ(x̄)`: a finite `S ⊇ S0` and points `x_i ∈ B_ε(x̄)` with
/// `Σ (f(x_i) − f(x̄)) ≤ 0` and `dist(0, Σ ∂f_{t_i}(x_i)) < ε`.
pub fn multiplier_search(
    family: &FunctionFamily,
    xbar: &[f64],
    delta: f64,
    eps: f64,
    s0: &IndexSubset,
    cfg: &MultiplierConfig,
) -> Result<MultiplierResult> {
    let target = vec![0.0; family.dim()];
    search(family, xbar, delta, eps, s0, &target, cfg, None)
}

#[allow(clippy::too_many_arguments)]
fn search(
    family: &FunctionFamily,
    xbar: &[f64],
    delta: f64,
    eps: f64,
    s0: &IndexSubset,
    target: &[f64],
    cfg: &MultiplierConfig,
    preset: Option<Certificate>,
) -> Result<MultiplierResult> {
    family.check_point(xbar)?;
    if !(eps > 0.0 && eps.is_finite() && delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter("eps and delta must be positive".into()));
    }
    let ball = Region::new_ball(xbar.to_vec(), delta)?;
    let upper = check_local_min(family, xbar, delta, cfg.density)?;
    let mut notes = Vec::new();
    let (certificate, mut conditional) = match (preset, cfg.certificate) {
        (Some(c), _) => (Some(c), true),
        (None, CertificateMode::Assume) => {
            notes.push("lower semicontinuity assumed, not certified".into());
            (None, true)
        }
        (None, CertificateMode::Run) => {
            let c = certificate_for(family, &ball, cfg, false)?;
            require(&c)?;
            let empirical = c.empirical;
            (Some(c), empirical)
        }
    };

    let dp = eps.min(delta);
    let eps_prime = eps * dp / 4.0;
    // midpoint of (2ε′/ε, δ′) = (δ′/2, δ′)
    let rho = 0.75 * dp;
    let (fam, s) = extend_by_tail(family, s0, eps_prime / 2.0)?;
    let members = fam.subset_members(&s)?;
    let at_anchor: f64 = members.iter().map(|m| m.func.eval(xbar).value()).sum();
    let tail_error = (at_anchor - upper).abs();
    let tail_ok = tail_error < eps_prime / 2.0
        || matches!(fam.tail_mode(), TailMode::TailBounded { .. } | TailMode::Finite);
    let (c_lower, c_exact) = lower_bound(&fam, &s, xbar, delta, &ball)?;
    if !c_exact {
        notes.push("member lower bound searched, not closed form".into());
    }

    // η′: decoupled tuples of diameter < η′ in the closed ρ-ball must stay
    // above the anchor value up to ε′/2
    let dcfg = cfg.on(Region::new_ball(xbar.to_vec(), rho)?);
    let mut eta_prime = None;
    for j in 0..48 {
        let eta = rho * 0.5f64.powi(j);
        let est = decouple::decoupled_inf(&fam, &s, eta, &dcfg)?;
        if upper < est.value.value() + eps_prime / 2.0 {
            eta_prime = Some(eta);
            break;
        }
    }
    let eta_prime = eta_prime.ok_or_else(|| {
        Error::ParameterRegimeTooCoarse("no diameter level keeps the decoupled infimum near the anchor".into())
    })?;
    let params = PenaltyParams {
        eps,
        delta_prime: dp,
        eps_prime,
        rho,
        eta_prime,
        c_lower,
    };
    let obj = build_penalized(&fam, &s, xbar, params)?;

    let m = members.len();
    let mut density = cfg.density.max(3) | 1;
    let mut last_err = None;
    let mut best: Option<MultiplierResult> = None;
    for attempt in 0..=cfg.refinements {
        let grid = ball_grid(xbar, rho * (1.0 - 1e-12), density);
        let space = GridSpace::new(vec![grid; m])?;
        let step = match ekeland_step_on_product(&obj, &space, rng::stream(cfg.seed, &[0x3C, attempt as u64]).gen::<u64>()) {
            Ok(st) => st,
            Err(e @ Error::ParameterRegimeTooCoarse(_)) => {
                last_err = Some(e);
                density = 2 * density - 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut sets = Vec::with_capacity(m);
        let mut exact = true;
        for (mem, x) in members.iter().zip(&step.points) {
            let (set, ex) = subdifferential_at(&mem.func, x)?;
            exact &= ex;
            sets.push(set);
        }
        let md = distance_to_minkowski_sum(target, &sets);
        let sum_defect: f64 = members
            .iter()
            .zip(&step.points)
            .map(|(mem, x)| mem.func.eval(x).value() - mem.func.eval(xbar).value())
            .sum();
        let max_dist = step.points.iter().map(|p| dist(p, xbar)).fold(0.0, f64::max);
        let checks = Checks {
            tail_error: tail_ok,
            points_in_ball: max_dist < eps,
            sum_defect_nonpositive: sum_defect <= 0.0,
            sum_defect_below_eps: sum_defect < eps,
            residual_below_eps: md.residual < eps,
            penalty_chain: step.penalty_chain,
            ekeland_exhaustive: !step.heuristic,
            subdifferentials_exact: exact,
            residual_exact: md.exact && md.converged,
        };
        let done = checks.residual_below_eps;
        let r = MultiplierResult {
            labels: members.iter().map(|mem| mem.label.clone()).collect(),
            s: s.clone(),
            points: step.points,
            sum_defect,
            dual_residual: md.residual,
            decomposition: md.parts,
            target: target.to_vec(),
            epsilon: eps,
            xbar: xbar.to_vec(),
            params,
            gamma: obj.gamma,
            alpha: obj.alpha,
            xi: obj.xi,
            density,
            certified: checks,
            certificate: certificate.clone(),
            conditional,
            notes: notes.clone(),
        };
        let better = best.as_ref().is_none_or(|b| r.dual_residual < b.dual_residual);
        if better {
            best = Some(r);
        }
        if done {
            break;
        }
        density = 2 * density - 1;
    }
    let mut r = match best {
        Some(r) => r,
        None => return Err(last_err.expect("at least one attempt")),
    };
    if !r.certified.ekeland_exhaustive {
        r.notes.push("product grid too large: EVP conditions checked on a seeded sample".into());
        conditional = true;
    }
    r.conditional = conditional;
    Ok(r)
}

/// `−⟨x*, x⟩ + ε′‖x − x̄‖`.
pub fn tilt(xstar: &[f64], xbar: &[f64], eps_prime: f64) -> ExtFunction {
    ExtFunction::Sum(vec![
        ExtFunction::Affine {
            a: xstar.iter().map(|v| -v).collect(),
            b: 0.0,
        },
        ExtFunction::Distance {
            center: xbar.to_vec(),
            weight: eps_prime,
        },
    ])
}

/// `∂f_{t_0}(x̄) ⊂ −x* + ε′ B̄`, checked through support functions.
fn tilt_inclusion(f: &ExtFunction, xstar: &[f64], xbar: &[f64], eps_prime: f64, seed: u64) -> Result<bool> {
    let set = exact_subdifferential(f, xbar)?;
    let n = xbar.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            dirs.push(e);
        }
    }
    let mut g = rng::stream(seed, &[0x7117]);
    dirs.extend((0..64).map(|_| random_unit(n, &mut g)));
    let minus: Vec<f64> = xstar.iter().map(|v| -v).collect();
    Ok(dirs
        .iter()
        .all(|d| set.support(d) <= dot(&minus, d) + eps_prime * norm(d) + 1e-12))
}

/// Fuzzy sum rule: `x* ∈ Σ ∂f_{t_i}(x_i) + ε B*` with `x_i ∈ B_ε(x̄)` and
/// `Σ (f(x_i) − f(x̄)) < ε`, via the tilted family with
/// `f_{t_0} = −⟨x*, ·⟩ + ε′‖· − x̄‖`, `ε′ = ε/(‖x*‖ + 2)`.
pub fn fuzzy_sum_rule(
    family: &FunctionFamily,
    xbar: &[f64],
    xstar: &[f64],
    delta: f64,
    eps: f64,
    s0: &IndexSubset,
    cfg: &MultiplierConfig,
) -> Result<MultiplierResult> {
    family.check_point(xbar)?;
    if xstar.len() != family.dim() {
        return Err(Error::Dimension {
            expected: family.dim(),
            got: xstar.len(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter("eps must be positive".into()));
    }
    let up = |y: &[f64]| match family.upper_sum(y) {
        Ok(u) if u.value.is_neg_infinity() => ExtValue::finite(f64::MIN),
        Ok(u) => ExtValue::new(u.value.value()).unwrap_or(ExtValue::INFINITY),
        Err(_) => ExtValue::INFINITY,
    };
    let rcfg = RefuterConfig {
        seed: cfg.seed,
        ..cfg.refuter.clone()
    };
    if let m @ crate::functions::Membership::Refuted { .. } = frechet_membership_test(&up, xbar, xstar, &[], &rcfg) {
        return Err(Error::Precondition(format!(
            "x* is not a Fréchet subgradient of the upper sum at x̄: {m:?}"
        )));
    }
    let ball = Region::new_ball(xbar.to_vec(), delta)?;
    let cert = match cfg.certificate {
        CertificateMode::Run => {
            let c = certificate_for(family, &ball, cfg, true)?;
            require(&c)?;
            Some(c)
        }
        CertificateMode::Assume => None,
    };

    let ep = eps / (norm(xstar) + 2.0);
    let f0 = tilt(xstar, xbar, ep);
    if !tilt_inclusion(&f0, xstar, xbar, ep, cfg.seed)? {
        return Err(Error::Precondition("tilt subdifferential escapes −x* + ε′B".into()));
    }
    let nf = family.fixed_len();
    let aug = family.append("t0", f0)?;
    let shift = |id: usize| if id < nf { id } else { id + 1 };
    let mut ids: Vec<usize> = s0.ids().iter().map(|i| shift(*i)).collect();
    ids.push(nf);
    let inner_cfg = MultiplierConfig {
        certificate: CertificateMode::Assume,
        ..cfg.clone()
    };
    let target = vec![0.0; family.dim()];
    let mut r = search(&aug, xbar, delta, ep, &IndexSubset::new(ids), &target, &inner_cfg, cert.clone())?;
    if cert.is_none() {
        r.certificate = None;
        r.notes.push("firm lower semicontinuity assumed, not certified".into());
    }

    // drop t0 and judge the decomposition of x* by the original members
    let pos = r.s.ids().iter().position(|i| *i == nf).expect("tilt in S");
    let tilt_point = r.points.remove(pos);
    r.labels.remove(pos);
    let ids: Vec<usize> = r
        .s
        .ids()
        .iter()
        .filter(|i| **i != nf)
        .map(|i| if *i > nf { i - 1 } else { *i })
        .collect();
    r.s = IndexSubset::new(ids);
    let members = family.subset_members(&r.s)?;
    let mut sets = Vec::with_capacity(members.len());
    let mut exact = true;
    let mut defect = 0.0;
    for (m, x) in members.iter().zip(&r.points) {
        let (set, ex) = subdifferential_at(&m.func, x)?;
        exact &= ex;
        sets.push(set);
        defect += m.func.eval(x).value() - m.func.eval(xbar).value();
    }
    let md = distance_to_minkowski_sum(xstar, &sets);
    let max_dist = r.points.iter().map(|p| dist(p, xbar)).fold(0.0, f64::max);
    r.notes.push(format!("tilt eps' = {ep}, tilt point {tilt_point:?}"));
    r.target = xstar.to_vec();
    r.epsilon = eps;
    r.sum_defect = defect;
    r.dual_residual = md.residual;
    r.decomposition = md.parts;
    r.certified.points_in_ball = max_dist < eps;
    r.certified.sum_defect_nonpositive = defect <= 0.0;
    r.certified.sum_defect_below_eps = defect < eps;
    r.certified.residual_below_eps = md.residual < eps;
    r.certified.subdifferentials_exact &= exact;
    r.certified.residual_exact = md.exact && md.converged;
    Ok(r)
}

/// Outcome of the randomized check of the dual bounds for the diameter
/// penalty `g = γ diam{u_i}` and the max-distance penalty
/// `h = ε̂ max_i ‖u_i − x̂_i‖`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DiamPenaltyReport {
    pub m: usize,
    pub dim: usize,
    pub trials: usize,
    /// Genuine subgradients of `g` the refuter rejected.
    pub g_members_refuted: usize,
    /// Largest `‖Σ u_i*‖` over genuine subgradients of `g`.
    pub g_max_sum_norm: f64,
    /// Candidates with `Σ u_i* ≠ 0` the refuter let through.
    pub g_violators_missed: usize,
    pub h_members_refuted: usize,
    /// Largest `Σ ‖u_i*‖ − ε̂` over genuine subgradients of `h`.
    pub h_max_excess: f64,
    pub h_violators_missed: usize,
    pub soundness_failures: usize,
}

fn flatten(u: &[Vec<f64>]) -> Vec<f64> {
    u.iter().flatten().copied().collect()
}

fn unflatten(v: &[f64], n: usize) -> Vec<&[f64]> {
    v.chunks(n).collect()
}

/// Samples subgradients of the two penalties and their violators and runs
/// the membership refuter on each.
pub fn diam_penalty_subgradient_property(
    m: usize,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<DiamPenaltyReport> {
    if m < 2 || dim == 0 {
        return Err(Error::InvalidParameter("need m >= 2 copies of a nonempty space".into()));
    }
    let tol = 1e-9;
    let rcfg = RefuterConfig {
        tol: 1e-7,
        budget_per_dim: 16,
        ..RefuterConfig::default()
    };
    // shared shifts (w, …, w) along ± axes
    let shared: Vec<Vec<f64>> = (0..dim)
        .flat_map(|i| {
            [-1.0, 1.0].into_iter().map(move |s| {
                let mut w = vec![0.0; dim];
                w[i] = s;
                w
            })
        })
        .map(|w| (0..m).flat_map(|_| w.clone()).collect())
        .collect();
    let outcomes: Vec<DiamPenaltyReport> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut g = rng::stream(seed, &[0xD1A3, m as u64, dim as u64, trial as u64]);
            let mut rep = DiamPenaltyReport::default();
            let rc = RefuterConfig {
                seed: rng::stream(seed, &[0xD1A4, trial as u64]).gen::<u64>(),
                ..rcfg.clone()
            };
            let gamma: f64 = g.gen_range(0.5..5.0);
            let u: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..dim).map(|_| g.gen_range(-1.0..1.0)).collect())
                .collect();
            let gf = |v: &[f64]| {
                let pts = unflatten(v, dim);
                ExtValue::finite(gamma * crate::geometry::diam_slices(pts.into_iter()))
            };
            // genuine member: γ (e, −e) on the farthest pair
            let (mut bi, mut bj, mut bd) = (0, 1, -1.0);
            for i in 0..m {
                for j in i + 1..m {
                    let d = dist(&u[i], &u[j]);
                    if d > bd {
                        (bi, bj, bd) = (i, j, d);
                    }
                }
            }
            let mut star = vec![vec![0.0; dim]; m];
            if bd > 0.0 {
                for k in 0..dim {
                    let e = (u[bi][k] - u[bj][k]) / bd;
                    star[bi][k] = gamma * e;
                    star[bj][k] = -gamma * e;
                }
            }
            let x = flatten(&u);
            if frechet_membership_test(&gf, &x, &flatten(&star), &shared, &rc).is_refuted() {
                rep.g_members_refuted += 1;
            }
            let sum: Vec<f64> = (0..dim).map(|k| star.iter().map(|s| s[k]).sum()).collect();
            rep.g_max_sum_norm = norm(&sum);
            // violator: shared shift of total size γ/2
            let v = random_unit(dim, &mut g);
            let mut bad = star.clone();
            for s in &mut bad {
                for k in 0..dim {
                    s[k] += 0.5 * gamma * v[k] / m as f64;
                }
            }
            if !frechet_membership_test(&gf, &x, &flatten(&bad), &shared, &rc).is_refuted() {
                rep.g_violators_missed += 1;
            }

            // h at its anchor: the dual unit ball of the max-norm is Σ‖u_i*‖ ≤ ε̂
            let eh: f64 = g.gen_range(0.1..2.0);
            let anchor = flatten(&u);
            let hf = |v: &[f64]| {
                let r = unflatten(v, dim)
                    .into_iter()
                    .zip(unflatten(&anchor, dim))
                    .map(|(a, b)| dist(a, b))
                    .fold(0.0, f64::max);
                ExtValue::finite(eh * r)
            };
            let weights: Vec<f64> = (0..m).map(|_| g.gen_range(0.0..1.0)).collect();
            let total: f64 = weights.iter().sum::<f64>().max(1e-12);
            let shrink: f64 = g.gen_range(0.0..0.99);
            let hstar: Vec<Vec<f64>> = weights
                .iter()
                .map(|w| {
                    let d = random_unit(dim, &mut g);
                    d.iter().map(|c| c * eh * shrink * w / total).collect()
                })
                .collect();
            let hint = |s: &[Vec<f64>]| -> Vec<Vec<f64>> {
                vec![flatten(
                    &s.iter()
                        .map(|p| {
                            let np = norm(p);
                            if np > 0.0 {
                                p.iter().map(|c| c / np).collect()
                            } else {
                                vec![0.0; dim]
                            }
                        })
                        .collect::<Vec<_>>(),
                )]
            };
            if frechet_membership_test(&hf, &anchor, &flatten(&hstar), &hint(&hstar), &rc).is_refuted() {
                rep.h_members_refuted += 1;
            }
            rep.h_max_excess = hstar.iter().map(|p| norm(p)).sum::<f64>() - eh;
            let grow = 1.5 / shrink.max(1e-3);
            let hbad: Vec<Vec<f64>> = if shrink > 1e-3 {
                hstar.iter().map(|p| p.iter().map(|c| c * grow).collect()).collect()
            } else {
                let d = random_unit(dim, &mut g);
                vec![d.iter().map(|c| c * 1.5 * eh).collect(); m]
            };
            if !frechet_membership_test(&hf, &anchor, &flatten(&hbad), &hint(&hbad), &rc).is_refuted() {
                rep.h_violators_missed += 1;
            }
            rep
        })
        .collect();
    let mut rep = DiamPenaltyReport {
        m,
        dim,
        trials,
        g_max_sum_norm: 0.0,
        h_max_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    for o in outcomes {
        rep.g_members_refuted += o.g_members_refuted;
        rep.g_violators_missed += o.g_violators_missed;
        rep.h_members_refuted += o.h_members_refuted;
        rep.h_violators_missed += o.h_violators_missed;
        rep.g_max_sum_norm = rep.g_max_sum_norm.max(o.g_max_sum_norm);
        rep.h_max_excess = rep.h_max_excess.max(o.h_max_excess);
    }
    rep.soundness_failures = rep.g_members_refuted
        + rep.g_violators_missed
        + rep.h_members_refuted
        + rep.h_violators_missed
        + usize::from(rep.g_max_sum_norm > tol)
        + usize::from(rep.h_max_excess > tol);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_family;

    fn cfg() -> MultiplierConfig {
        MultiplierConfig::new(1).assume_certificate()
    }

    #[test]
    fn twin_abs_at_zero() {
        let f = parse_family("t1 := (abs 0)\nt2 := (abs 0)\n").unwrap();
        let r = multiplier_search(&f, &[0.0], 1.0, 0.1, &IndexSubset::new(vec![]), &cfg()).unwrap();
        assert_eq!(r.s.ids(), &[0, 1]);
        assert_eq!(r.points, vec![vec![0.0], vec![0.0]]);
        assert_eq!(r.dual_residual, 0.0);
        assert!(r.certified.ekeland_exhaustive);
        assert_eq!(r.replay(&f).unwrap(), (r.sum_defect, r.dual_residual));
    }

    #[test]
    fn sum_rule_splits_the_interval() {
        let f = parse_family("t1 := (abs 0)\nt2 := (abs 0)\n").unwrap();
        let r = fuzzy_sum_rule(&f, &[0.0], &[1.5], 1.0, 0.1, &IndexSubset::new(vec![]), &cfg()).unwrap();
        assert!(r.dual_residual <= 1e-9);
        let s: f64 = r.decomposition.iter().map(|g| g[0]).sum();
        assert!((s - 1.5).abs() < 1e-9);
    }

    #[test]
    fn refuses_a_non_minimizer() {
        let f = parse_family("t1 := (affine (1) 0)\n").unwrap();
        assert!(matches!(
            multiplier_search(&f, &[0.0], 1.0, 0.1, &IndexSubset::new(vec![]), &cfg()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tilt_subdifferential() {
        let f = tilt(&[1.0, -2.0], &[0.5, 0.5], 0.1);
        assert!(tilt_inclusion(&f, &[1.0, -2.0], &[0.5, 0.5], 0.1, 0).unwrap());
        assert!(!tilt_inclusion(&f, &[1.0, -2.0], &[0.5, 0.5], 0.05, 0).unwrap());
    }

    #[test]
    fn diam_penalty_small() {
        let r = diam_penalty_subgradient_property(2, 1, 50, 3).unwrap();
        assert_eq!(r.soundness_failures, 0, "{r:?}");
    }
}
