use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use super::ball::{member_ball_inf, BallMin};
use super::theta::{ThetaRun, ThetaSpec};
use super::{
    lv, BoundDirection, DecoupleConfig, Estimate, PrefixValue, TracePoint, Verdict, WitnessPoint,
};
use crate::chain::{
    accelerating_descent, aitken_limit, floor_divergence, ChainSchedule, IndexSubset, TailMode,
};
use crate::error::{Error, Result};
use crate::functions::{ExtFunction, FunctionFamily, Witness};
use crate::geometry::{diam_slices, Region};
use crate::rng;
use crate::search::{multistart, pattern_search, Bounds, PatternConfig, Score};

/// Ball radius used for diameter `δ`: strictly below `δ/2`, so any tuple
/// drawn from one ball has diameter `< δ`.
pub(crate) fn half_radius(delta: f64) -> f64 {
    0.5 * delta * (1.0 - 1e-9)
}

/// `+∞` absorbs everything, then `−∞`.
pub(crate) fn add_inf(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a + b
    }
}

pub(crate) fn tuple_diam(points: &[Vec<f64>]) -> f64 {
    diam_slices(points.iter().map(|p| p.as_slice()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LimitKind {
    Inf,
    Sup,
}

#[derive(Clone, Debug)]
pub(crate) struct ChainLim {
    pub value: f64,
    pub radius: Option<f64>,
    pub inconclusive: bool,
}

/// Limit along `δ → 0` of a trace made monotone by [`LambdaRun`] or
/// [`ThetaRun`], extrapolated when the tail contracts geometrically.
pub(crate) fn delta_limit(trace: &[f64]) -> f64 {
    let last = *trace.last().expect("nonempty trace");
    if !last.is_finite() {
        return last;
    }
    aitken_limit(trace).unwrap_or(last)
}

#[derive(Clone, Debug)]
pub(crate) struct LevelBest {
    pub value: f64,
    pub tuple: Option<Vec<Vec<f64>>>,
}

/// Per prefix and level: values made nondecreasing in `j` (an upper bound
/// at a smaller `δ` bounds every larger `δ` too).
#[derive(Clone, Debug)]
pub(crate) struct LambdaRun {
    pub levels: Vec<Vec<LevelBest>>,
    pub searched: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct PlainRun {
    pub values: Vec<f64>,
    pub argmins: Vec<Option<Vec<f64>>>,
    pub searched: bool,
}

pub struct Analyzer<'a> {
    pub(crate) family: &'a FunctionFamily,
    pub(crate) cfg: &'a DecoupleConfig,
    pub(crate) funcs: Vec<Arc<ExtFunction>>,
    pub(crate) chain: ChainSchedule,
    /// Prefix indices the chain limit reads.
    pub(crate) relevant: Vec<usize>,
    pub(crate) lens: Vec<usize>,
    pub(crate) deltas: Vec<f64>,
    pub(crate) shrunk: Vec<(f64, Region)>,
    pub(crate) shrink_notes: Vec<String>,
    plain: OnceLock<PlainRun>,
    upper: OnceLock<(f64, bool)>,
    lambda_u: OnceLock<LambdaRun>,
    lambda_v: OnceLock<Vec<LambdaRun>>,
    theta_u: OnceLock<ThetaRun>,
    theta_v: OnceLock<Vec<ThetaRun>>,
}

impl<'a> Analyzer<'a> {
    pub fn new(family: &'a FunctionFamily, cfg: &'a DecoupleConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.region.dim() != family.dim() {
            return Err(Error::Dimension {
                expected: family.dim(),
                got: cfg.region.dim(),
            });
        }
        let funcs: Vec<Arc<ExtFunction>> =
            family.members().iter().map(|m| m.func.clone()).collect();
        if funcs.is_empty() {
            return Err(Error::Empty("family has no members"));
        }
        let chain = family.chain().clone();
        let depth = chain.depth();
        let relevant: Vec<usize> = match family.tail_mode() {
            TailMode::Finite | TailMode::TailBounded { .. } => vec![depth - 1],
            TailMode::MonotoneNondecreasing | TailMode::Unknown => {
                let w = depth.div_ceil(2).max(1);
                (depth - w..depth).collect()
            }
        };
        let lens = relevant.iter().map(|p| chain.prefixes()[*p].len()).collect();
        let mut shrunk = Vec::new();
        let mut shrink_notes = Vec::new();
        for rho in cfg.rhos() {
            match cfg.region.shrink(rho) {
                Some(v) => shrunk.push((rho, v)),
                None => shrink_notes.push(format!("V_rho empty at rho = {rho}; level skipped")),
            }
        }
        Ok(Analyzer {
            family,
            cfg,
            funcs,
            chain,
            relevant,
            lens,
            deltas: cfg.deltas(),
            shrunk,
            shrink_notes,
            plain: OnceLock::new(),
            upper: OnceLock::new(),
            lambda_u: OnceLock::new(),
            lambda_v: OnceLock::new(),
            theta_u: OnceLock::new(),
            theta_v: OnceLock::new(),
        })
    }

    pub fn family(&self) -> &FunctionFamily {
        self.family
    }

    pub fn config(&self) -> &DecoupleConfig {
        self.cfg
    }

    pub(crate) fn chain_limit(&self, vals: &[f64], kind: LimitKind) -> ChainLim {
        let last = *vals.last().expect("nonempty chain values");
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        match self.family.tail_mode() {
            TailMode::Finite => ChainLim {
                value: last,
                radius: None,
                inconclusive: false,
            },
            TailMode::TailBounded { bound, .. } => {
                let k = *self.relevant.last().expect("relevant prefix");
                let radius = self.chain.tail_arg(k).map(|a| bound.eval(a).abs());
                ChainLim {
                    value: last,
                    radius,
                    inconclusive: false,
                }
            }
            TailMode::MonotoneNondecreasing => ChainLim {
                value: max,
                radius: None,
                inconclusive: false,
            },
            TailMode::Unknown => ChainLim {
                value: if kind == LimitKind::Inf { min } else { max },
                radius: None,
                inconclusive: vals.len() > 1,
            },
        }
    }

    /// Centers scanned for a region: grid, region center, seeded samples
    /// and witness points lying in the region.
    pub(crate) fn base_centers(&self, region: &Region, budget: usize, tag: u64) -> Vec<Vec<f64>> {
        let mut out = region.grid_with_budget(self.cfg.grid_density, budget);
        out.push(region.center());
        let mut g = rng::stream(self.cfg.seed, &[0xCE, tag]);
        for _ in 0..self.cfg.multistarts {
            out.push(region.sample(&mut g));
        }
        for w in self.family.witnesses() {
            if let Some(p) = w.points.first() {
                if p.len() == region.dim() && region.contains(p) {
                    out.push(p.clone());
                }
            }
        }
        out
    }

    fn shrunk_budget(&self) -> usize {
        (self.cfg.grid_budget / self.cfg.rho_levels.max(1)).max(1)
    }

    /// Centers for the plain run: the region's own plus every shrunken
    /// region's, so a quasi run never scans a center the plain run missed.
    fn centers_u(&self) -> Vec<Vec<f64>> {
        let mut out = self.base_centers(&self.cfg.region, self.cfg.grid_budget, 0);
        for (i, (_, v)) in self.shrunk.iter().enumerate() {
            out.extend(self.base_centers(v, self.shrunk_budget(), 1 + i as u64));
        }
        // diagonal tuples at the plain minimizers keep each level below the
        // plain infimum
        out.extend(self.plain_run().argmins.iter().flatten().cloned());
        out
    }

    fn centers_v(&self, i: usize) -> Vec<Vec<f64>> {
        self.base_centers(&self.shrunk[i].1, self.shrunk_budget(), 1 + i as u64)
    }

    pub(crate) fn plain_run(&self) -> &PlainRun {
        self.plain.get_or_init(|| {
            let region = &self.cfg.region;
            let starts = self.plain_starts(region);
            let mut values = Vec::new();
            let mut argmins = Vec::new();
            for &len in &self.lens {
                let funcs = &self.funcs[..len];
                let obj = |x: &[f64]| sum_score(funcs, x);
                let (v, x) = minimize(&obj, &starts, region, self.cfg.refine_top);
                values.push(v);
                argmins.push(x);
            }
            PlainRun {
                values,
                argmins,
                searched: true,
            }
        })
    }

    fn plain_starts(&self, region: &Region) -> Vec<Vec<f64>> {
        let mut starts = self.base_centers(region, self.cfg.grid_budget, 0x51);
        for w in self.family.witnesses() {
            for p in &w.points {
                if p.len() == region.dim() && region.contains(p) {
                    starts.push(p.clone());
                }
            }
        }
        starts
    }

    /// `inf_U` of the upper sum, with a flag for unknown tails.
    pub(crate) fn upper_run(&self) -> (f64, bool) {
        *self.upper.get_or_init(|| {
            if self.family.is_finite() {
                return (*self.plain_run().values.last().expect("prefix"), false);
            }
            let region = &self.cfg.region;
            let starts = self.plain_starts(region);
            let fam = self.family;
            let funcs = &self.funcs;
            let obj = |x: &[f64]| match fam.upper_sum(x) {
                Ok(u) if u.value.is_finite() => Score::feasible(u.value.value()),
                Ok(u) if u.value.is_neg_infinity() => Score::feasible(f64::NEG_INFINITY),
                _ => Score::infeasible(funcs.iter().map(|f| f.violation(x)).sum()),
            };
            let (v, _) = minimize(&obj, &starts, region, self.cfg.refine_top);
            (v, matches!(fam.tail_mode(), TailMode::Unknown))
        })
    }

    pub(crate) fn lambda_u(&self) -> &LambdaRun {
        self.lambda_u
            .get_or_init(|| self.lambda_run(&self.cfg.region, &self.centers_u()))
    }

    pub(crate) fn lambda_v(&self) -> &[LambdaRun] {
        self.lambda_v.get_or_init(|| {
            (0..self.shrunk.len())
                .map(|i| self.lambda_run(&self.shrunk[i].1, &self.centers_v(i)))
                .collect()
        })
    }

    pub(crate) fn theta_u(&self) -> &ThetaRun {
        self.theta_u.get_or_init(|| {
            let mut regions = vec![(&self.cfg.region, 0u64)];
            regions.extend(self.shrunk.iter().enumerate().map(|(i, (_, v))| (v, 1 + i as u64)));
            self.theta_run(&ThetaSpec {
                tuple_regions: regions,
                inner: &self.cfg.region,
                upper: true,
            })
        })
    }

    pub(crate) fn theta_v(&self) -> &[ThetaRun] {
        self.theta_v.get_or_init(|| {
            self.shrunk
                .iter()
                .enumerate()
                .map(|(i, (_, v))| {
                    self.theta_run(&ThetaSpec {
                        tuple_regions: vec![(v, 1 + i as u64)],
                        inner: &self.cfg.region,
                        upper: true,
                    })
                })
                .collect()
        })
    }

    fn lambda_run(&self, region: &Region, centers: &[Vec<f64>]) -> LambdaRun {
        let mut levels: Vec<Vec<LevelBest>> = vec![Vec::new(); self.lens.len()];
        let mut searched = false;
        for &delta in &self.deltas {
            let (best, s) = level_inf(
                &self.funcs,
                &self.lens,
                centers,
                region,
                delta,
                self.family.witnesses(),
                self.cfg.refine_top,
            );
            searched |= s;
            for (p, b) in best.into_iter().enumerate() {
                levels[p].push(b);
            }
        }
        for lv in &mut levels {
            for j in (0..lv.len().saturating_sub(1)).rev() {
                if lv[j + 1].value < lv[j].value {
                    lv[j] = lv[j + 1].clone();
                }
            }
        }
        LambdaRun { levels, searched }
    }

    /// Values of witness tuples for the full member list, in `region`.
    pub(crate) fn witness_sums(&self, region: &Region) -> Vec<WitnessPoint> {
        let m = self.funcs.len();
        let mut ws: Vec<&Witness> = self
            .family
            .witnesses()
            .iter()
            .filter(|w| w.points.len() >= m && w.points[..m].iter().all(|p| region.contains(p)))
            .collect();
        ws.sort_by_key(|w| w.k);
        ws.iter()
            .map(|w| {
                let pts = &w.points[..m];
                let v = self
                    .funcs
                    .iter()
                    .zip(pts)
                    .fold(0.0, |acc, (f, p)| add_inf(acc, f.eval(p).value()));
                WitnessPoint {
                    k: w.k,
                    diam: tuple_diam(pts),
                    value: lv(v),
                }
            })
            .collect()
    }

    /// Divergence read off a witness sequence: diameters shrink while the
    /// sums fall with non-shrinking decrements.
    pub(crate) fn witness_diverges(trace: &[WitnessPoint]) -> bool {
        if trace.len() < 3 {
            return false;
        }
        let t = &trace[trace.len() - 3..];
        let diams_shrink = t[0].diam > t[1].diam && t[1].diam > t[2].diam;
        let vals: Vec<f64> = t.iter().map(|w| w.value.value()).collect();
        diams_shrink && (accelerating_descent(&vals) || floor_divergence(&vals))
    }

    fn lambda_assemble(
        &self,
        quantity: &str,
        runs: &[(Option<f64>, &LambdaRun, &Region)],
    ) -> Result<Estimate> {
        let plain = self.plain_run();
        if plain.values.last().is_some_and(|v| *v == f64::INFINITY) {
            return Err(Error::Precondition(
                "no point of the region lies in the domain of every member".into(),
            ));
        }
        let mut notes = self.shrink_notes_for(runs.len() > 1 || runs[0].0.is_some());
        if plain.values.iter().any(|v| *v == f64::NEG_INFINITY) {
            notes.push("a partial sum appears unbounded below on the region".into());
        }
        let mut trace = Vec::new();
        let mut prefix_values = Vec::new();
        let mut best: Option<(f64, ChainLim, bool, Option<Vec<Vec<f64>>>)> = None;
        let mut witness_trace = Vec::new();
        let mut searched = false;
        for (rho, run, region) in runs {
            searched |= run.searched;
            let (lims, diverging, wtrace) = self.lambda_prefix_limits(run, region);
            for (p, lvls) in run.levels.iter().enumerate() {
                for (j, b) in lvls.iter().enumerate() {
                    trace.push(TracePoint {
                        s_size: self.lens[p],
                        delta: Some(self.deltas[j]),
                        rho: *rho,
                        value: lv(b.value),
                    });
                }
                prefix_values.push(PrefixValue {
                    s_size: self.lens[p],
                    rho: *rho,
                    value: lv(lims[p]),
                });
            }
            let cl = self.chain_limit(&lims, LimitKind::Inf);
            let tuple = run.levels.last().and_then(|l| l.last()).and_then(|b| b.tuple.clone());
            if best.as_ref().is_none_or(|b| cl.value < b.0) {
                best = Some((cl.value, cl, diverging, tuple));
                witness_trace = wtrace;
            }
        }
        let (value, cl, diverging, tuple) = best.expect("at least one run");
        let verdict = if diverging || value == f64::NEG_INFINITY {
            Verdict::NegativeInfinityDiverging
        } else if cl.inconclusive || value == f64::INFINITY {
            Verdict::Inconclusive
        } else {
            Verdict::Converged
        };
        if let Some(r) = cl.radius {
            notes.push(format!("chain limit certified to within tail radius {r:e}"));
        }
        Ok(Estimate {
            quantity: quantity.into(),
            value: lv(if diverging { f64::NEG_INFINITY } else { value }),
            bound_direction: BoundDirection::UpperBoundOfInf,
            verdict,
            trace,
            prefix_values,
            witness: tuple,
            witness_trace,
            heuristic: searched,
            notes,
        })
    }

    fn shrink_notes_for(&self, quasi: bool) -> Vec<String> {
        if quasi {
            self.shrink_notes.clone()
        } else {
            Vec::new()
        }
    }

    /// `δ`-limits per relevant prefix, with the divergence rules applied to
    /// the prefix sequence and to the witness sequence.
    pub(crate) fn lambda_prefix_limits(
        &self,
        run: &LambdaRun,
        region: &Region,
    ) -> (Vec<f64>, bool, Vec<WitnessPoint>) {
        let mut lims: Vec<f64> = run
            .levels
            .iter()
            .map(|l| delta_limit(&l.iter().map(|b| b.value).collect::<Vec<_>>()))
            .collect();
        if *region == self.cfg.region {
            // Λ never exceeds the plain infimum; extrapolation may overshoot it
            for (l, p) in lims.iter_mut().zip(&self.plain_run().values) {
                *l = l.min(*p);
            }
        }
        let wtrace = self.witness_sums(region);
        let mut diverging = lims.last().is_some_and(|v| *v == f64::NEG_INFINITY)
            || (lims.len() >= 3 && floor_divergence(&lims));
        if Self::witness_diverges(&wtrace) {
            diverging = true;
        }
        if diverging {
            *lims.last_mut().expect("prefix") = f64::NEG_INFINITY;
        }
        (lims, diverging, wtrace)
    }

    pub fn lambda(&self) -> Result<Estimate> {
        let run = self.lambda_u();
        self.lambda_assemble("lambda", &[(None, run, &self.cfg.region)])
    }

    pub fn quasi_lambda(&self) -> Result<Estimate> {
        if self.shrunk.is_empty() {
            return Err(Error::Precondition("every V_rho is empty; U has no interior".into()));
        }
        let runs = self.lambda_v();
        let items: Vec<(Option<f64>, &LambdaRun, &Region)> = self
            .shrunk
            .iter()
            .zip(runs)
            .map(|((rho, v), r)| (Some(*rho), r, v))
            .collect();
        self.lambda_assemble("quasi_lambda", &items)
    }

    pub fn plain(&self) -> Estimate {
        let run = self.plain_run();
        let cl = self.chain_limit(&run.values, LimitKind::Inf);
        let trace = run
            .values
            .iter()
            .zip(&self.lens)
            .map(|(v, l)| TracePoint {
                s_size: *l,
                delta: None,
                rho: None,
                value: lv(*v),
            })
            .collect::<Vec<_>>();
        let prefix_values = trace
            .iter()
            .map(|t| PrefixValue {
                s_size: t.s_size,
                rho: None,
                value: t.value,
            })
            .collect();
        let verdict = verdict_for(cl.value, cl.inconclusive);
        Estimate {
            quantity: "inf_partial_sum".into(),
            value: lv(cl.value),
            bound_direction: BoundDirection::UpperBoundOfInf,
            verdict,
            trace,
            prefix_values,
            witness: run.argmins.last().cloned().flatten().map(|x| vec![x]),
            witness_trace: Vec::new(),
            heuristic: run.searched,
            notes: Vec::new(),
        }
    }

    /// `inf_ρ liminf_S inf_{V_ρ} Σ_{t∈S} f_t`, the right side of
    /// inf-quasistability.
    pub fn quasi_plain(&self) -> Result<Estimate> {
        if self.shrunk.is_empty() {
            return Err(Error::Precondition("every V_rho is empty; U has no interior".into()));
        }
        let mut trace = Vec::new();
        let mut prefix_values = Vec::new();
        let mut best: Option<(ChainLim, Option<Vec<f64>>)> = None;
        let mut searched = false;
        for (i, (rho, v)) in self.shrunk.iter().enumerate() {
            let mut starts = self.base_centers(v, self.shrunk_budget(), 0x5100 + i as u64);
            starts.extend(
                self.plain_run()
                    .argmins
                    .iter()
                    .flatten()
                    .filter(|x| v.contains(x))
                    .cloned(),
            );
            let mut values = Vec::new();
            let mut last_x = None;
            for &len in &self.lens {
                let funcs = &self.funcs[..len];
                let obj = |x: &[f64]| sum_score(funcs, x);
                let (val, x) = minimize(&obj, &starts, v, self.cfg.refine_top);
                searched = true;
                trace.push(TracePoint {
                    s_size: len,
                    delta: None,
                    rho: Some(*rho),
                    value: lv(val),
                });
                prefix_values.push(PrefixValue {
                    s_size: len,
                    rho: Some(*rho),
                    value: lv(val),
                });
                values.push(val);
                last_x = x;
            }
            let cl = self.chain_limit(&values, LimitKind::Inf);
            if best.as_ref().is_none_or(|b| cl.value < b.0.value) {
                best = Some((cl, last_x));
            }
        }
        let (cl, x) = best.expect("at least one level");
        Ok(Estimate {
            quantity: "quasi_inf_partial_sum".into(),
            value: lv(cl.value),
            bound_direction: BoundDirection::UpperBoundOfInf,
            verdict: verdict_for(cl.value, cl.inconclusive),
            trace,
            prefix_values,
            witness: x.map(|x| vec![x]),
            witness_trace: Vec::new(),
            heuristic: searched,
            notes: self.shrink_notes.clone(),
        })
    }

    pub fn upper_inf(&self) -> Estimate {
        let (v, inconclusive) = self.upper_run();
        Estimate {
            quantity: "inf_upper_sum".into(),
            value: lv(v),
            bound_direction: BoundDirection::UpperBoundOfInf,
            verdict: verdict_for(v, inconclusive),
            trace: Vec::new(),
            prefix_values: Vec::new(),
            witness: None,
            witness_trace: Vec::new(),
            heuristic: true,
            notes: Vec::new(),
        }
    }

    fn delta_assemble(&self, quantity: &str, runs: &[(Option<f64>, &LambdaRun, &Region)]) -> Result<Estimate> {
        let plain = self.plain_run();
        let mut notes = self.shrink_notes_for(runs[0].0.is_some());
        let mut best: Option<(f64, ChainLim, bool)> = None;
        let mut trace = Vec::new();
        let mut prefix_values = Vec::new();
        let mut undefined = false;
        for (rho, run, region) in runs {
            let (lims, diverging, _) = self.lambda_prefix_limits(run, region);
            let gaps: Vec<f64> = plain
                .values
                .iter()
                .zip(&lims)
                .map(|(p, l)| {
                    if p.is_infinite() && l.is_infinite() && p.signum() == l.signum() {
                        undefined = true;
                        f64::INFINITY
                    } else {
                        p - l
                    }
                })
                .collect();
            for (p, g) in gaps.iter().enumerate() {
                trace.push(TracePoint {
                    s_size: self.lens[p],
                    delta: None,
                    rho: *rho,
                    value: lv(*g),
                });
                prefix_values.push(PrefixValue {
                    s_size: self.lens[p],
                    rho: *rho,
                    value: lv(*g),
                });
            }
            let cl = self.chain_limit(&gaps, LimitKind::Sup);
            if best.as_ref().is_none_or(|b| cl.value > b.0) {
                best = Some((cl.value, cl, diverging));
            }
        }
        let (value, cl, diverging) = best.expect("at least one run");
        if undefined {
            notes.push("a gap of the form inf - inf was read as +inf".into());
        }
        let verdict = if value == f64::INFINITY && diverging {
            Verdict::PositiveInfinityDiverging
        } else if cl.inconclusive || undefined || value.is_infinite() {
            Verdict::Inconclusive
        } else {
            Verdict::Converged
        };
        Ok(Estimate {
            quantity: quantity.into(),
            value: lv(value),
            bound_direction: BoundDirection::TwoSided {
                radius: cl.radius.unwrap_or(0.0),
            },
            verdict,
            trace,
            prefix_values,
            witness: None,
            witness_trace: Vec::new(),
            heuristic: true,
            notes,
        })
    }

    pub fn delta(&self) -> Result<Estimate> {
        let run = self.lambda_u();
        self.delta_assemble("delta", &[(None, run, &self.cfg.region)])
    }

    pub fn quasi_delta(&self) -> Result<Estimate> {
        if self.shrunk.is_empty() {
            return Err(Error::Precondition("every V_rho is empty; U has no interior".into()));
        }
        let runs = self.lambda_v();
        let items: Vec<(Option<f64>, &LambdaRun, &Region)> = self
            .shrunk
            .iter()
            .zip(runs)
            .map(|((rho, v), r)| (Some(*rho), r, v))
            .collect();
        self.delta_assemble("quasi_delta", &items)
    }

    pub fn theta(&self) -> Estimate {
        let run = self.theta_u();
        self.theta_assemble("theta", &[(None, run)])
    }

    pub fn quasi_theta(&self) -> Result<Estimate> {
        if self.shrunk.is_empty() {
            return Err(Error::Precondition("every V_rho is empty; U has no interior".into()));
        }
        let runs = self.theta_v();
        let items: Vec<(Option<f64>, &ThetaRun)> = self
            .shrunk
            .iter()
            .zip(runs)
            .map(|((rho, _), r)| (Some(*rho), r))
            .collect();
        let mut e = self.theta_assemble("quasi_theta", &items);
        e.notes.extend(self.shrink_notes.iter().cloned());
        Ok(e)
    }

    pub fn theta_uv(&self, v: &Region) -> Result<Estimate> {
        if v.dim() != self.family.dim() {
            return Err(Error::Dimension {
                expected: self.family.dim(),
                got: v.dim(),
            });
        }
        let run = self.theta_run(&ThetaSpec {
            tuple_regions: vec![(v, 0x55)],
            inner: &self.cfg.region,
            upper: false,
        });
        Ok(self.theta_assemble("theta_uv", &[(None, &run)]))
    }

    /// `limsup_S Θ({f_t}_{t∈S})`: each prefix judged by its own sum. Equal to
    /// [`Analyzer::theta`] for finite families.
    pub fn prefix_theta(&self) -> Estimate {
        if self.family.is_finite() {
            let mut e = self.theta();
            e.quantity = "prefix_theta".into();
            return e;
        }
        let mut regions = vec![(&self.cfg.region, 0u64)];
        regions.extend(self.shrunk.iter().enumerate().map(|(i, (_, v))| (v, 1 + i as u64)));
        let run = self.theta_run(&ThetaSpec {
            tuple_regions: regions,
            inner: &self.cfg.region,
            upper: false,
        });
        self.theta_assemble("prefix_theta", &[(None, &run)])
    }

    /// Same as the firm quasi constant but with the inner point free to
    /// leave `U` (searched over an enlarged bounding box).
    pub fn quasi_theta_unrestricted(&self) -> Result<Estimate> {
        if self.shrunk.is_empty() {
            return Err(Error::Precondition("every V_rho is empty; U has no interior".into()));
        }
        let (lo, hi) = self.cfg.region.bounding_box();
        let pad = 0.5 * self.cfg.region.diam_scale();
        let outer = Region::new_whole(
            lo.iter().map(|l| l - pad).collect(),
            hi.iter().map(|h| h + pad).collect(),
        )?;
        let runs: Vec<ThetaRun> = self
            .shrunk
            .iter()
            .enumerate()
            .map(|(i, (_, v))| {
                self.theta_run(&ThetaSpec {
                    tuple_regions: vec![(v, 1 + i as u64)],
                    inner: &outer,
                    upper: true,
                })
            })
            .collect();
        let items: Vec<(Option<f64>, &ThetaRun)> = self
            .shrunk
            .iter()
            .zip(&runs)
            .map(|((rho, _), r)| (Some(*rho), r))
            .collect();
        Ok(self.theta_assemble("quasi_theta_unrestricted", &items))
    }

    fn theta_assemble(&self, quantity: &str, runs: &[(Option<f64>, &ThetaRun)]) -> Estimate {
        let mut trace = Vec::new();
        let mut prefix_values = Vec::new();
        let mut best: Option<(f64, ChainLim, Option<Vec<Vec<f64>>>, Vec<WitnessPoint>)> = None;
        let mut empty = false;
        for (rho, run) in runs {
            empty |= run.empty;
            let mut lims = Vec::new();
            for (p, lvls) in run.levels.iter().enumerate() {
                for (j, b) in lvls.iter().enumerate() {
                    trace.push(TracePoint {
                        s_size: self.lens[p],
                        delta: Some(self.deltas[j]),
                        rho: *rho,
                        value: lv(b.value),
                    });
                }
                let mut lim =
                    delta_limit(&lvls.iter().map(|b| b.value).collect::<Vec<_>>()).max(0.0);
                if p + 1 == run.levels.len() {
                    if let Some(w) = run.witness_evidence {
                        lim = lim.max(w);
                    }
                }
                prefix_values.push(PrefixValue {
                    s_size: self.lens[p],
                    rho: *rho,
                    value: lv(lim),
                });
                lims.push(lim);
            }
            let cl = self.chain_limit(&lims, LimitKind::Sup);
            let tuple = run.best_tuple();
            if best.as_ref().is_none_or(|b| cl.value > b.0) {
                best = Some((cl.value, cl, tuple, run.witness_trace.clone()));
            }
        }
        let (value, cl, tuple, witness_trace) = best.expect("at least one run");
        let mut notes = vec![
            "delta-limits are taken per prefix before the chain limit".to_string(),
        ];
        if empty {
            notes.push("no domain-feasible tuple found at some level".into());
        }
        let verdict = if empty || cl.inconclusive {
            Verdict::Inconclusive
        } else {
            Verdict::Converged
        };
        Estimate {
            quantity: quantity.into(),
            value: lv(value),
            bound_direction: BoundDirection::LowerEvidenceOfSup,
            verdict,
            trace,
            prefix_values,
            witness: tuple,
            witness_trace,
            heuristic: true,
            notes,
        }
    }
}

fn verdict_for(v: f64, inconclusive: bool) -> Verdict {
    if v == f64::NEG_INFINITY {
        Verdict::NegativeInfinityDiverging
    } else if inconclusive || v == f64::INFINITY {
        Verdict::Inconclusive
    } else {
        Verdict::Converged
    }
}

pub(crate) fn sum_score(funcs: &[Arc<ExtFunction>], x: &[f64]) -> Score {
    let mut s = 0.0;
    let mut viol = 0.0;
    for f in funcs {
        let v = f.eval(x);
        if v.is_finite() {
            s += v.value();
        } else {
            viol += f.violation(x).max(f64::MIN_POSITIVE);
        }
    }
    if viol > 0.0 {
        Score::infeasible(viol)
    } else {
        Score::feasible(s)
    }
}

/// Multistart minimization over a region; `−∞` on detected divergence.
pub(crate) fn minimize(
    obj: &(dyn Fn(&[f64]) -> Score + Sync),
    starts: &[Vec<f64>],
    region: &Region,
    refine: usize,
) -> (f64, Option<Vec<f64>>) {
    let scale = region.diam_scale().max(1e-12);
    let cfg = PatternConfig {
        step: scale / 8.0,
        min_step: scale * 1e-10,
        max_evals: 4000 * region.dim(),
        lower_bound: None,
        extra_dirs: 0,
    };
    match multistart(obj, starts, &Bounds::region(region), refine, &cfg) {
        Some(o) if o.diverged => (f64::NEG_INFINITY, None),
        Some(o) if o.score.is_feasible() => (o.score.value, Some(o.x)),
        _ => (f64::INFINITY, None),
    }
}

/// Decoupled infimum at one diameter for each prefix length in `lens`,
/// via centers and per-member ball infima.
pub(crate) fn level_inf(
    funcs: &[Arc<ExtFunction>],
    lens: &[usize],
    centers: &[Vec<f64>],
    region: &Region,
    delta: f64,
    witnesses: &[Witness],
    refine_top: usize,
) -> (Vec<LevelBest>, bool) {
    let r = half_radius(delta);
    let lmax = *lens.iter().max().expect("prefix lengths");
    let phi: Vec<Vec<BallMin>> = centers
        .par_iter()
        .map(|c| {
            funcs[..lmax]
                .iter()
                .map(|f| member_ball_inf(f, c, r, region))
                .collect()
        })
        .collect();
    let searched = phi.iter().flatten().any(|b| b.searched);
    let mut out = Vec::with_capacity(lens.len());
    for &len in lens {
        let sums: Vec<f64> = phi
            .iter()
            .map(|row| row[..len].iter().fold(0.0, |a, b| add_inf(a, b.value)))
            .collect();
        let mut order: Vec<usize> = (0..centers.len()).collect();
        order.sort_by(|a, b| sums[*a].total_cmp(&sums[*b]).then(a.cmp(b)));
        let tuple_of = |row: &[BallMin]| -> Option<Vec<Vec<f64>>> {
            row[..len].iter().map(|b| b.point.clone()).collect()
        };
        let mut best = LevelBest {
            value: f64::INFINITY,
            tuple: None,
        };
        if let Some(&i0) = order.first() {
            best = LevelBest {
                value: sums[i0],
                tuple: tuple_of(&phi[i0]),
            };
        }
        if best.value > f64::NEG_INFINITY {
            let picked: Vec<usize> = order
                .iter()
                .copied()
                .filter(|i| sums[*i].is_finite())
                .take(refine_top)
                .collect();
            let refined: Vec<LevelBest> = picked
                .par_iter()
                .map(|i| refine_center(&funcs[..len], &centers[*i], r, region))
                .collect();
            for b in refined {
                if b.value < best.value {
                    best = b;
                }
            }
        }
        for w in witnesses {
            if w.points.len() < len {
                continue;
            }
            let pts = &w.points[..len];
            if pts.iter().any(|p| p.len() != region.dim() || !region.contains(p)) {
                continue;
            }
            if tuple_diam(pts) >= delta {
                continue;
            }
            let v = funcs[..len]
                .iter()
                .zip(pts)
                .fold(0.0, |a, (f, p)| add_inf(a, f.eval(p).value()));
            if v < best.value {
                best = LevelBest {
                    value: v,
                    tuple: Some(pts.to_vec()),
                };
            }
        }
        out.push(best);
    }
    (out, searched)
}

fn refine_center(funcs: &[Arc<ExtFunction>], c: &[f64], r: f64, region: &Region) -> LevelBest {
    let eval = |y: &[f64]| -> (f64, Vec<BallMin>) {
        let row: Vec<BallMin> = funcs.iter().map(|f| member_ball_inf(f, y, r, region)).collect();
        (row.iter().fold(0.0, |a, b| add_inf(a, b.value)), row)
    };
    let obj = |y: &[f64]| {
        let (v, _) = eval(y);
        if v == f64::INFINITY {
            Score::infeasible(1.0)
        } else {
            Score::feasible(v)
        }
    };
    let n = c.len();
    let cfg = PatternConfig {
        step: r,
        min_step: r * 1e-3,
        max_evals: 40 + 40 * n,
        lower_bound: None,
        extra_dirs: 0,
    };
    let out = pattern_search(&obj, c, &Bounds::region(region), &cfg);
    let (v, row) = eval(&out.x);
    let tuple = if v.is_finite() {
        row.iter().map(|b| b.point.clone()).collect()
    } else {
        None
    };
    LevelBest { value: v, tuple }
}

pub(crate) fn decoupled_inf(
    family: &FunctionFamily,
    s: &IndexSubset,
    delta: f64,
    cfg: &DecoupleConfig,
) -> Result<Estimate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if s.is_empty() {
        return Err(Error::Empty("index subset"));
    }
    let an = Analyzer::new(family, cfg)?;
    let funcs: Vec<Arc<ExtFunction>> = family
        .subset_members(s)?
        .iter()
        .map(|m| m.func.clone())
        .collect();
    let is_prefix = s.ids().iter().enumerate().all(|(i, id)| i == *id);
    let witnesses: &[Witness] = if is_prefix { family.witnesses() } else { &[] };
    let centers = an.base_centers(&cfg.region, cfg.grid_budget, 0);
    let (best, searched) = level_inf(
        &funcs,
        &[funcs.len()],
        &centers,
        &cfg.region,
        delta,
        witnesses,
        cfg.refine_top,
    );
    let b = &best[0];
    let mut notes = Vec::new();
    if b.value == f64::INFINITY {
        notes.push("no feasible decoupled tuple found".into());
    }
    Ok(Estimate {
        quantity: "decoupled_inf".into(),
        value: lv(b.value),
        bound_direction: BoundDirection::UpperBoundOfInf,
        verdict: verdict_for(b.value, false),
        trace: vec![TracePoint {
            s_size: s.len(),
            delta: Some(delta),
            rho: None,
            value: lv(b.value),
        }],
        prefix_values: Vec::new(),
        witness: b.tuple.clone(),
        witness_trace: Vec::new(),
        heuristic: searched,
        notes,
    })
}
