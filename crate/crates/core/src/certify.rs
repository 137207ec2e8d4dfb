//! Three-valued certificates for uniform lower semicontinuity, its firm,
//! quasi and weak variants, inf-stability, and two sufficient-condition
//! checkers.
//!
//! Every quantity behind a certificate is estimated one-sidedly, so a
//! verdict is `Holds` or `Fails` only with an explicit margin; anything in
//! between is `Inconclusive`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{accelerating_ascent, DIVERGENCE_FLOOR};
use crate::decouple::{
    delta_limit, member_ball_inf, Analyzer, DecoupleConfig, Estimate, Verdict,
};
use crate::error::{Error, Result};
use crate::ext::LimitValue;
use crate::functions::{ExtFunction, FunctionFamily};
use crate::geometry::{diam_slices, Region};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    UniformLsc,
    FirmUniformLsc,
    QuasiUniformLsc,
    FirmQuasiUniformLsc,
    WeakDeltaLeqZero,
    WeakFirm,
    InfStable,
    InfQuasiStable,
    JointLsc,
    InfCompactSufficient,
}

impl Property {
    pub const ALL: [Property; 10] = [
        Property::UniformLsc,
        Property::FirmUniformLsc,
        Property::QuasiUniformLsc,
        Property::FirmQuasiUniformLsc,
        Property::WeakDeltaLeqZero,
        Property::WeakFirm,
        Property::InfStable,
        Property::InfQuasiStable,
        Property::JointLsc,
        Property::InfCompactSufficient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::UniformLsc => "uniform-lsc",
            Property::FirmUniformLsc => "firm-uniform-lsc",
            Property::QuasiUniformLsc => "quasi-uniform-lsc",
            Property::FirmQuasiUniformLsc => "firm-quasi-uniform-lsc",
            Property::WeakDeltaLeqZero => "weak-delta",
            Property::WeakFirm => "weak-firm",
            Property::InfStable => "inf-stable",
            Property::InfQuasiStable => "inf-quasi-stable",
            Property::JointLsc => "joint-lsc",
            Property::InfCompactSufficient => "inf-compact",
        }
    }

    pub fn parse(s: &str) -> Option<Property> {
        Property::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Concrete data behind a `Fails` verdict, replayable by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureWitness {
    Tuple { points: Vec<Vec<f64>> },
    Indices { ids: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CertVerdict {
    Holds,
    Fails { witness: FailureWitness },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub name: String,
    pub value: LimitValue,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub property: Property,
    pub verdict: CertVerdict,
    pub tol: f64,
    pub margin: f64,
    /// The verdict rests on an adversarial search rather than a bound.
    pub empirical: bool,
    pub evidence: Vec<Evidence>,
    pub estimates: Vec<Estimate>,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.verdict == CertVerdict::Holds
    }

    pub fn fails(&self) -> bool {
        matches!(self.verdict, CertVerdict::Fails { .. })
    }

    pub fn evidence(&self, name: &str) -> Option<LimitValue> {
        self.evidence.iter().find(|e| e.name == name).map(|e| e.value)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyConfig {
    pub decouple: DecoupleConfig,
    /// Overrides `1e−4 · (1 + |scale|)`.
    pub tol: Option<f64>,
    pub margin_factor: f64,
}

impl CertifyConfig {
    pub fn new(region: Region) -> Self {
        CertifyConfig {
            decouple: DecoupleConfig::new(region),
            tol: None,
            margin_factor: 10.0,
        }
    }

    pub fn tolerance(&self, scale: f64) -> f64 {
        let s = if scale.is_finite() { scale.abs() } else { 0.0 };
        self.tol.unwrap_or(1e-4 * (1.0 + s))
    }
}

fn ev(name: &str, v: f64) -> Evidence {
    Evidence {
        name: name.into(),
        value: LimitValue::new(v).unwrap_or(LimitValue::INFINITY),
    }
}

fn gap(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() && a.signum() == b.signum() {
        f64::NAN
    } else {
        a - b
    }
}

/// Runs certificates over one family, sharing estimator runs between them.
pub struct Certifier<'a> {
    an: Analyzer<'a>,
    cfg: &'a CertifyConfig,
}

impl<'a> Certifier<'a> {
    pub fn new(family: &'a FunctionFamily, cfg: &'a CertifyConfig) -> Result<Self> {
        if !(cfg.margin_factor >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "margin factor must be >= 1, got {}",
                cfg.margin_factor
            )));
        }
        Ok(Certifier {
            an: Analyzer::new(family, &cfg.decouple)?,
            cfg,
        })
    }

    pub fn analyzer(&self) -> &Analyzer<'a> {
        &self.an
    }

    fn family(&self) -> &FunctionFamily {
        self.an.family()
    }

    fn tol(&self) -> f64 {
        self.cfg.tolerance(self.an.plain().value.value())
    }

    fn blank(&self, property: Property) -> Certificate {
        let tol = self.tol();
        Certificate {
            property,
            verdict: CertVerdict::Inconclusive,
            tol,
            margin: self.cfg.margin_factor * tol,
            empirical: false,
            evidence: Vec::new(),
            estimates: Vec::new(),
            notes: vec![format!(
                "holds below tol; fails beyond margin = {} x tol",
                self.cfg.margin_factor
            )],
        }
    }

    fn last_prefix_ids(&self) -> Vec<usize> {
        let k = *self.an.relevant.last().expect("relevant prefix");
        self.an.chain.prefixes()[k].ids().to_vec()
    }

    /// Tuple behind an estimate: its own, else the family witness at the
    /// last index of its witness trace.
    fn tuple_of(&self, e: &Estimate) -> FailureWitness {
        if let Some(t) = &e.witness {
            if t.len() > 1 {
                return FailureWitness::Tuple { points: t.clone() };
            }
        }
        if let Some(wp) = e.witness_trace.last() {
            if let Some(w) = self.family().witnesses().iter().find(|w| w.k == wp.k) {
                return FailureWitness::Tuple {
                    points: w.points.clone(),
                };
            }
        }
        FailureWitness::Indices {
            ids: self.last_prefix_ids(),
        }
    }

    fn inf_side(&self) -> Estimate {
        if self.family().is_finite() {
            self.an.plain()
        } else {
            self.an.upper_inf()
        }
    }

    fn compare_uniform(&self, property: Property, inf: Estimate, lam: Estimate) -> Certificate {
        let mut c = self.blank(property);
        let i = inf.value.value();
        let l = lam.value.value();
        let g = gap(i, l);
        c.evidence.push(ev("inf", i));
        c.evidence.push(ev("lambda", l));
        c.evidence.push(ev("gap", if g.is_nan() { f64::INFINITY } else { g }));
        let decisive = inf.verdict != Verdict::Inconclusive && lam.verdict != Verdict::Inconclusive;
        c.verdict = if lam.verdict == Verdict::NegativeInfinityDiverging && i > f64::NEG_INFINITY {
            CertVerdict::Fails {
                witness: self.tuple_of(&lam),
            }
        } else if g.is_nan() {
            CertVerdict::Inconclusive
        } else if g <= c.tol && decisive {
            CertVerdict::Holds
        } else if g >= c.margin && lam.verdict != Verdict::Inconclusive {
            CertVerdict::Fails {
                witness: self.tuple_of(&lam),
            }
        } else {
            CertVerdict::Inconclusive
        };
        c.empirical = inf.heuristic || lam.heuristic;
        c.estimates = vec![inf, lam];
        c
    }

    pub fn uniform_lsc(&self) -> Result<Certificate> {
        let lam = self.an.lambda()?;
        Ok(self.compare_uniform(Property::UniformLsc, self.inf_side(), lam))
    }

    pub fn quasi_uniform_lsc(&self) -> Result<Certificate> {
        let lam = self.an.quasi_lambda()?;
        Ok(self.compare_uniform(Property::QuasiUniformLsc, self.inf_side(), lam))
    }

    /// Holds when every per-prefix value is below `tol`; fails when the
    /// last three levels of some run, or the last three witness tuples,
    /// all sit at or above the margin.
    fn judge_firm(&self, property: Property, th: Estimate) -> Certificate {
        let mut c = self.blank(property);
        c.empirical = true;
        let worst = th
            .prefix_values
            .iter()
            .map(|p| p.value.value())
            .fold(0.0, f64::max);
        c.evidence.push(ev("theta", th.value.value()));
        c.evidence.push(ev("max_prefix_value", worst));
        let mut persistent = false;
        let last_len = th.trace.last().map(|t| t.s_size);
        let mut rhos: Vec<Option<f64>> = Vec::new();
        for t in &th.trace {
            if !rhos.contains(&t.rho) {
                rhos.push(t.rho);
            }
        }
        for rho in rhos {
            let vals: Vec<f64> = th
                .trace
                .iter()
                .filter(|t| t.rho == rho && Some(t.s_size) == last_len)
                .map(|t| t.value.value())
                .collect();
            // a trace shrinking with delta is not evidence of failure
            if vals.len() >= 3
                && vals[vals.len() - 3..].iter().all(|v| *v >= c.margin)
                && delta_limit(&vals) >= c.margin
            {
                persistent = true;
            }
        }
        let wt = &th.witness_trace;
        if wt.len() >= 3 {
            let tail = &wt[wt.len() - 3..];
            c.evidence.push(ev("witness_j_last", tail[2].value.value()));
            if tail.iter().all(|w| w.value.value() >= c.margin) {
                persistent = true;
            }
        }
        c.verdict = if persistent {
            CertVerdict::Fails {
                witness: self.tuple_of(&th),
            }
        } else if worst <= c.tol && th.verdict != Verdict::Inconclusive {
            CertVerdict::Holds
        } else {
            CertVerdict::Inconclusive
        };
        c.notes.push("firm verdicts are empirical: the inner infimum is estimated from above".into());
        c.estimates = vec![th];
        c
    }

    pub fn firm_uniform_lsc(&self) -> Certificate {
        self.judge_firm(Property::FirmUniformLsc, self.an.theta())
    }

    /// Also runs the variant whose inner point may leave `U`; the two must
    /// agree, and disagreement is reported as an estimator alarm.
    pub fn firm_quasi_uniform_lsc(&self) -> Result<Certificate> {
        let th = self.an.quasi_theta()?;
        let mut c = self.judge_firm(Property::FirmQuasiUniformLsc, th);
        let free = self.an.quasi_theta_unrestricted()?;
        let d = (free.value.value() - c.estimates[0].value.value()).abs();
        c.evidence.push(ev("unrestricted_theta", free.value.value()));
        if d > c.margin {
            c.notes.push(format!(
                "alarm: dropping the restriction x in U changed the value by {d:.3e}"
            ));
        }
        c.estimates.push(free);
        Ok(c)
    }

    pub fn weak_delta(&self) -> Result<Certificate> {
        let d = self.an.delta()?;
        let mut c = self.blank(Property::WeakDeltaLeqZero);
        let v = d.value.value();
        c.evidence.push(ev("delta", v));
        c.verdict = if d.verdict == Verdict::PositiveInfinityDiverging || (v >= c.margin && d.verdict != Verdict::Inconclusive) {
            CertVerdict::Fails {
                witness: FailureWitness::Indices {
                    ids: self.last_prefix_ids(),
                },
            }
        } else if v <= c.tol && d.verdict == Verdict::Converged {
            CertVerdict::Holds
        } else {
            CertVerdict::Inconclusive
        };
        c.empirical = d.heuristic;
        c.estimates = vec![d];
        Ok(c)
    }

    pub fn weak_firm(&self) -> Certificate {
        self.judge_firm(Property::WeakFirm, self.an.prefix_theta())
    }

    fn judge_stable(&self, property: Property, rhs: Option<Estimate>) -> Certificate {
        let mut c = self.blank(property);
        let Some(rhs) = rhs else {
            c.verdict = CertVerdict::Holds;
            c.notes.push("finite family: the limit function is the full sum".into());
            return c;
        };
        let up = self.an.upper_inf();
        let u = up.value.value();
        let r = rhs.value.value();
        let g = gap(u, r);
        c.evidence.push(ev("inf_upper_sum", u));
        c.evidence.push(ev("liminf_prefix_inf", r));
        let decisive = up.verdict != Verdict::Inconclusive && rhs.verdict != Verdict::Inconclusive;
        c.verdict = if g.is_nan() {
            CertVerdict::Inconclusive
        } else if g <= c.tol && decisive {
            CertVerdict::Holds
        } else if g >= c.margin && decisive {
            CertVerdict::Fails {
                witness: FailureWitness::Indices {
                    ids: self.last_prefix_ids(),
                },
            }
        } else {
            CertVerdict::Inconclusive
        };
        c.empirical = true;
        c.estimates = vec![up, rhs];
        c
    }

    pub fn inf_stability(&self) -> Certificate {
        let rhs = (!self.family().is_finite()).then(|| self.an.plain());
        self.judge_stable(Property::InfStable, rhs)
    }

    pub fn inf_quasi_stability(&self) -> Result<Certificate> {
        let rhs = if self.family().is_finite() {
            None
        } else {
            Some(self.an.quasi_plain()?)
        };
        Ok(self.judge_stable(Property::InfQuasiStable, rhs))
    }

    /// Certificates that need no extra argument.
    pub fn certify(&self, property: Property) -> Result<Certificate> {
        match property {
            Property::UniformLsc => self.uniform_lsc(),
            Property::FirmUniformLsc => Ok(self.firm_uniform_lsc()),
            Property::QuasiUniformLsc => self.quasi_uniform_lsc(),
            Property::FirmQuasiUniformLsc => self.firm_quasi_uniform_lsc(),
            Property::WeakDeltaLeqZero => self.weak_delta(),
            Property::WeakFirm => Ok(self.weak_firm()),
            Property::InfStable => Ok(self.inf_stability()),
            Property::InfQuasiStable => self.inf_quasi_stability(),
            Property::JointLsc | Property::InfCompactSufficient => Err(Error::InvalidParameter(
                format!("{} needs a point or a member id", property.name()),
            )),
        }
    }

    /// Uniform lsc against `Δ ≤ 0` together with inf-stability; the two
    /// sides are equivalent, so a decisive mismatch is an estimator alarm.
    pub fn characterization(&self) -> Result<CharacterizationReport> {
        let uniform = self.uniform_lsc()?;
        let delta = self.weak_delta()?;
        let stable = self.inf_stability();
        let predicted = if delta.holds() && stable.holds() {
            Some(true)
        } else if delta.fails() || stable.fails() {
            Some(false)
        } else {
            None
        };
        let observed = if uniform.holds() {
            Some(true)
        } else if uniform.fails() {
            Some(false)
        } else {
            None
        };
        let alarm = matches!((predicted, observed), (Some(a), Some(b)) if a != b);
        Ok(CharacterizationReport {
            uniform: uniform.verdict,
            weak_delta: delta.verdict,
            inf_stable: stable.verdict,
            agree: predicted == observed,
            alarm,
        })
    }

    /// `inf_δ lim_S Σ_{t∈S} (f_t(x̄) − inf_{B_δ(x̄)∩U} f_t)`.
    pub fn joint_lsc(&self, xbar: &[f64]) -> Result<Certificate> {
        let fam = self.family();
        fam.check_point(xbar)?;
        let region = &self.cfg.decouple.region;
        if !region.contains(xbar) {
            return Err(Error::Precondition("the point lies outside the region".into()));
        }
        let funcs = &self.an.funcs;
        let at: Vec<f64> = funcs.iter().map(|f| f.eval(xbar).value()).collect();
        if at.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotInDomain);
        }
        let ids = self.last_prefix_ids();
        let mut values = Vec::new();
        for &delta in &self.an.deltas {
            let dips: Vec<f64> = ids
                .par_iter()
                .map(|&t| {
                    let b = member_ball_inf(&funcs[t], xbar, delta, region);
                    (at[t] - b.value).max(0.0)
                })
                .collect();
            values.push(dips.iter().sum::<f64>());
        }
        let mut c = self.blank(Property::JointLsc);
        let last = *values.last().expect("delta levels");
        let lim = delta_limit(&values).clamp(0.0, last);
        c.evidence.push(ev("limit", lim));
        c.evidence.push(ev("smallest_delta_value", last));
        let tail = &values[values.len().saturating_sub(3)..];
        c.verdict = if lim <= c.tol {
            CertVerdict::Holds
        } else if lim >= c.margin && tail.iter().all(|v| *v >= c.margin) {
            CertVerdict::Fails {
                witness: FailureWitness::Indices { ids },
            }
        } else {
            CertVerdict::Inconclusive
        };
        if !fam.is_finite() {
            c.notes.push(format!(
                "index limit read at chain depth {}",
                self.an.chain.depth()
            ));
        }
        c.empirical = true;
        Ok(c)
    }

    /// Sufficient condition from a member with compact level sets: checks
    /// level-set growth of `f_{t0}`, `Λ` of the rest above the divergence
    /// floor, and boundedness of decoupled sums near the diagonal.
    pub fn inf_compact_sufficient(&self, t0: usize) -> Result<Certificate> {
        let fam = self.family();
        let f0 = fam
            .member(t0)
            .ok_or_else(|| Error::InvalidParameter(format!("no member with id {t0}")))?
            .func
            .clone();
        let mut c = self.blank(Property::InfCompactSufficient);
        c.empirical = true;
        let region = &self.cfg.decouple.region;

        let (ok_a, mins) = level_growth(&f0, region, self.cfg.decouple.grid_budget);
        for (i, m) in mins.iter().enumerate() {
            c.evidence.push(ev(&format!("boundary_min_{}", 1 << i), *m));
        }

        let ok_b = if fam.members().len() <= 1 {
            true
        } else if t0 < fam.fixed_len() {
            let rest = fam.remove_fixed(t0)?;
            match Analyzer::new(&rest, &self.cfg.decouple)?.lambda() {
                Ok(e) => {
                    c.evidence.push(ev("lambda_rest", e.value.value()));
                    let v = e.value.value();
                    let ok = e.verdict != Verdict::NegativeInfinityDiverging && v > DIVERGENCE_FLOOR;
                    c.estimates.push(e);
                    ok
                }
                Err(Error::Precondition(m)) => {
                    c.notes.push(format!("rest of the family: {m}"));
                    true
                }
                Err(e) => return Err(e),
            }
        } else {
            c.notes.push("only fixed members can be singled out".into());
            false
        };

        let sups = self.diagonal_sups();
        for (j, s) in sups.iter().enumerate() {
            c.evidence.push(ev(&format!("diagonal_sup_{j}"), *s));
        }
        let ok_c = sups.iter().all(|s| s.is_finite() && *s < -DIVERGENCE_FLOOR)
            && !accelerating_ascent(&sups, 1.0);

        c.verdict = if ok_a && ok_b {
            c.notes.push("supports: Delta <= 0 (weak uniform lsc)".into());
            if ok_c {
                c.notes.push("supports: limsup over prefixes of Theta = 0 (weak firm)".into());
            }
            CertVerdict::Holds
        } else {
            if !ok_a {
                c.notes.push("level sets of the chosen member do not look compact".into());
            }
            if !ok_b {
                c.notes.push("the remaining members may have Lambda = -inf".into());
            }
            CertVerdict::Inconclusive
        };
        Ok(c)
    }

    /// Largest `Σ f_t(x_t)` found over domain tuples of diameter `< δ`, for
    /// the three smallest `δ`.
    fn diagonal_sups(&self) -> Vec<f64> {
        let region = &self.cfg.decouple.region;
        let funcs = &self.an.funcs;
        let n = region.dim();
        let mut centers = region.grid_with_budget(self.cfg.decouple.grid_density, 256);
        let mut g = rng::stream(self.cfg.decouple.seed, &[0x17]);
        for _ in 0..64 {
            centers.push(region.sample(&mut g));
        }
        let deltas = &self.an.deltas;
        let mut out = Vec::new();
        for (j, &delta) in deltas.iter().enumerate().skip(deltas.len().saturating_sub(3)) {
            let r = 0.5 * delta * (1.0 - 1e-9);
            let best = centers
                .par_iter()
                .enumerate()
                .map(|(ci, c)| {
                    let mut g = rng::stream(self.cfg.decouple.seed, &[0x17, j as u64, ci as u64]);
                    let mut best = f64::NEG_INFINITY;
                    for _ in 0..8 {
                        let mut s = 0.0;
                        let mut ok = true;
                        for f in funcs {
                            let p: Vec<f64> = (0..n)
                                .map(|i| c[i] + r / (n as f64).sqrt() * g.gen_range(-1.0..=1.0))
                                .collect();
                            let p = region.project(&p);
                            let v = f.eval(&p);
                            if !v.is_finite() {
                                ok = false;
                                break;
                            }
                            s += v.value();
                        }
                        if ok {
                            best = best.max(s);
                        }
                    }
                    best
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            let mut best = best;
            for w in self.an.family().witnesses() {
                if diam_slices(w.points.iter().map(|p| p.as_slice())) < delta {
                    let vals: Vec<_> = funcs.iter().zip(&w.points).map(|(f, p)| f.eval(p)).collect();
                    if vals.iter().all(|v| v.is_finite()) {
                        best = best.max(vals.iter().map(|v| v.value()).sum());
                    }
                }
            }
            out.push(best);
        }
        out
    }
}

/// Minimum of `f` over the boundaries of boxes scaled 1, 2, 4, 8 around the
/// region's bounding box. Compact levels show as strictly growing minima
/// with nondecreasing increments.
fn level_growth(f: &ExtFunction, region: &Region, budget: usize) -> (bool, Vec<f64>) {
    let (lo, hi) = region.bounding_box();
    let center = region.center();
    let inside = region
        .grid_with_budget(33, budget)
        .iter()
        .map(|x| f.eval(x).value())
        .fold(f64::INFINITY, f64::min);
    let mut mins = Vec::new();
    for s in [1.0, 2.0, 4.0, 8.0] {
        let l: Vec<f64> = lo.iter().zip(&center).map(|(a, c)| c + s * (a - c)).collect();
        let h: Vec<f64> = hi.iter().zip(&center).map(|(a, c)| c + s * (a - c)).collect();
        let Ok(b) = Region::new_box(l.clone(), h.clone()) else {
            return (false, mins);
        };
        let m = b
            .grid_with_budget(33, budget)
            .iter()
            .filter(|x| x.iter().enumerate().any(|(i, v)| *v == l[i] || *v == h[i]))
            .map(|x| f.eval(x).value())
            .fold(f64::INFINITY, f64::min);
        mins.push(m);
    }
    let mut ok = mins[0] > inside;
    for w in mins.windows(2) {
        ok &= w[1] > w[0] || w[1] == f64::INFINITY;
    }
    for w in mins.windows(3) {
        if w.iter().all(|v| v.is_finite()) {
            ok &= w[2] - w[1] >= (w[1] - w[0]) * (1.0 - 1e-9);
        }
    }
    (ok, mins)
}

#[derive(Clone, Debug, Serialize)]
pub struct CharacterizationReport {
    pub uniform: CertVerdict,
    pub weak_delta: CertVerdict,
    pub inf_stable: CertVerdict,
    pub agree: bool,
    /// Both sides decisive and opposite.
    pub alarm: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub original: Certificate,
    pub perturbed: Certificate,
    /// `Holds` turned into `Fails`.
    pub degraded: bool,
    pub theta_trace_identical: bool,
}

pub fn certify(
    property: Property,
    family: &FunctionFamily,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    Certifier::new(family, cfg)?.certify(property)
}

pub fn certify_uniform_lsc(family: &FunctionFamily, cfg: &CertifyConfig) -> Result<Certificate> {
    Certifier::new(family, cfg)?.uniform_lsc()
}

pub fn certify_firm_uniform_lsc(
    family: &FunctionFamily,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    Ok(Certifier::new(family, cfg)?.firm_uniform_lsc())
}

pub fn certify_inf_stability(family: &FunctionFamily, cfg: &CertifyConfig) -> Result<Certificate> {
    Ok(Certifier::new(family, cfg)?.inf_stability())
}

pub fn check_characterization(
    family: &FunctionFamily,
    cfg: &CertifyConfig,
) -> Result<CharacterizationReport> {
    Certifier::new(family, cfg)?.characterization()
}

pub fn check_joint_lsc(
    family: &FunctionFamily,
    xbar: &[f64],
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    Certifier::new(family, cfg)?.joint_lsc(xbar)
}

pub fn check_inf_compact_sufficient(
    family: &FunctionFamily,
    t0: usize,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    Certifier::new(family, cfg)?.inf_compact_sufficient(t0)
}

/// Firm certificate of `{f_t}` against the family with `f_{t0} + g`; firm
/// uniform lsc survives uniformly continuous perturbations, so `Holds`
/// must not turn into `Fails`. With `quasi` the firm quasi certificate is
/// compared instead.
pub fn perturbation_stability_test(
    family: &FunctionFamily,
    t0: usize,
    g: &ExtFunction,
    quasi: bool,
    cfg: &CertifyConfig,
) -> Result<PerturbationReport> {
    let f0 = family
        .member(t0)
        .ok_or_else(|| Error::InvalidParameter(format!("no member with id {t0}")))?;
    g.check_dim(family.dim())?;
    let perturbed = family.replace_fixed(t0, ExtFunction::Sum(vec![(*f0.func).clone(), g.clone()]))?;
    let run = |fam: &FunctionFamily| -> Result<Certificate> {
        let c = Certifier::new(fam, cfg)?;
        if quasi {
            c.firm_quasi_uniform_lsc()
        } else {
            Ok(c.firm_uniform_lsc())
        }
    };
    let original = run(family)?;
    let perturbed = run(&perturbed)?;
    let degraded = original.holds() && perturbed.fails();
    let theta_trace_identical = original.estimates[0].trace == perturbed.estimates[0].trace;
    Ok(PerturbationReport {
        original,
        perturbed,
        degraded,
        theta_trace_identical,
    })
}
