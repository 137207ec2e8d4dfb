//! Adversarial tuple search for the firm constant.

use rayon::prelude::*;

use super::ball::member_ball_inf;
use super::engine::{half_radius, tuple_diam, Analyzer, LevelBest};
use super::WitnessPoint;
use crate::error::{Error, Result};
use crate::functions::ExtFunction;
use crate::geometry::{dist, sample_ball, Region};
use crate::rng;
use crate::search::{multistart, pattern_search, Bounds, PatternConfig, Score};

pub(crate) struct ThetaSpec<'r> {
    /// Regions tuples are drawn from, each with the tag that keys its
    /// centers and random streams.
    pub tuple_regions: Vec<(&'r Region, u64)>,
    pub inner: &'r Region,
    /// Use the upper sum of the whole family in the inner value; otherwise
    /// only the prefix's own members.
    pub upper: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct ThetaRun {
    /// Per prefix and level, made nonincreasing in `j`.
    pub levels: Vec<Vec<LevelBest>>,
    pub witness_trace: Vec<WitnessPoint>,
    pub witness_evidence: Option<f64>,
    pub witness_tuple: Option<Vec<Vec<f64>>>,
    pub empty: bool,
}

impl ThetaRun {
    pub fn best_tuple(&self) -> Option<Vec<Vec<f64>>> {
        let last = self.levels.last().and_then(|l| l.last());
        match (self.witness_evidence, last) {
            (Some(w), Some(b)) if w > b.value => self.witness_tuple.clone(),
            (Some(_), None) => self.witness_tuple.clone(),
            (_, Some(b)) => b.tuple.clone(),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Termwise,
    Upper,
}

/// Inner grid with member values cached per point.
struct InnerGrid<'r> {
    region: &'r Region,
    pts: Vec<Vec<f64>>,
    fvals: Vec<Vec<f64>>,
    up: Vec<f64>,
}

impl<'a> Analyzer<'a> {
    fn mode(&self, upper: bool) -> Mode {
        if upper && !self.family.is_finite() {
            Mode::Upper
        } else {
            Mode::Termwise
        }
    }

    fn upper_at(&self, x: &[f64]) -> f64 {
        match self.family.upper_sum(x) {
            Ok(u) => u.value.value(),
            Err(_) => f64::INFINITY,
        }
    }

    fn inner_grid<'r>(&self, region: &'r Region, lmax: usize, mode: Mode) -> InnerGrid<'r> {
        let pts = region.grid_with_budget(self.cfg.grid_density, self.cfg.inner_budget);
        let fvals = pts
            .par_iter()
            .map(|x| self.funcs[..lmax].iter().map(|f| f.eval(x).value()).collect())
            .collect();
        let up = if mode == Mode::Upper {
            pts.par_iter().map(|x| self.upper_at(x)).collect()
        } else {
            Vec::new()
        };
        InnerGrid {
            region,
            pts,
            fvals,
            up,
        }
    }

    /// Upper estimate of `inf_x max{max_t d(x, x_t), D(x)}` where `D` is the
    /// termwise or upper-sum increase over the tuple values `xt`.
    fn inner_j(
        &self,
        grid: &InnerGrid,
        tuple: &[Vec<f64>],
        xt: &[f64],
        delta: f64,
        mode: Mode,
        global: bool,
    ) -> f64 {
        let len = tuple.len();
        let xt_sum: f64 = xt[..len].iter().sum();
        let d_of = |fx: &[f64], up: f64| -> f64 {
            match mode {
                Mode::Termwise => {
                    let mut s = 0.0;
                    for t in 0..len {
                        if fx[t] == f64::INFINITY {
                            return f64::INFINITY;
                        }
                        s += fx[t] - xt[t];
                    }
                    s
                }
                Mode::Upper => {
                    if up == f64::INFINITY {
                        f64::INFINITY
                    } else {
                        up - xt_sum
                    }
                }
            }
        };
        let maxdist = |x: &[f64]| tuple.iter().map(|p| dist(x, p)).fold(0.0, f64::max);
        let mut best = f64::INFINITY;
        let mut best_grid: Option<usize> = None;
        for (g, x) in grid.pts.iter().enumerate() {
            let md = maxdist(x);
            if md >= best {
                continue;
            }
            let up = if mode == Mode::Upper { grid.up[g] } else { 0.0 };
            let v = md.max(d_of(&grid.fvals[g], up));
            if v < best {
                best = v;
                best_grid = Some(g);
            }
        }
        let funcs = &self.funcs[..len];
        let score = |x: &[f64]| -> Score {
            let fx: Vec<f64> = funcs.iter().map(|f| f.eval(x).value()).collect();
            let up = if mode == Mode::Upper { self.upper_at(x) } else { 0.0 };
            let d = d_of(&fx, up);
            if d == f64::INFINITY {
                let viol: f64 = funcs.iter().map(|f| f.violation(x)).sum();
                Score::infeasible(viol.max(1e-12))
            } else {
                Score::feasible(maxdist(x).max(d))
            }
        };
        let mut start = tuple[0].clone();
        let mut start_score = score(&start);
        for p in &tuple[1..] {
            let s = score(p);
            if s.better_than(&start_score) {
                start = p.clone();
                start_score = s;
            }
        }
        let radius = self.cfg.inner_radius_factor * delta;
        let bounds = Bounds::with_ball(grid.region, &tuple[0], radius);
        if let Some(g) = best_grid {
            let x = &grid.pts[g];
            if bounds.contains(x) {
                let s = score(x);
                if s.better_than(&start_score) {
                    start = x.clone();
                    start_score = s;
                }
            }
        }
        if start_score.is_feasible() {
            best = best.min(start_score.value);
        }
        let n = start.len();
        if global {
            let mut starts = grid.pts.clone();
            starts.extend(tuple.iter().cloned());
            let gcfg = PatternConfig {
                step: grid.region.diam_scale() / 8.0,
                min_step: delta * 1e-6,
                max_evals: 4000 * n,
                lower_bound: Some(0.5 * tuple_diam(tuple)),
                extra_dirs: 16 * n,
            };
            let out = multistart(&score, &starts, &Bounds::region(grid.region), 8, &gcfg);
            if let Some(o) = out.filter(|o| o.score.is_feasible()) {
                best = best.min(o.score.value);
            }
        }
        if !bounds.contains(&start) {
            return best;
        }
        let cfg = PatternConfig {
            step: delta,
            min_step: delta * 1e-4,
            max_evals: 60 + 30 * n,
            lower_bound: Some(0.5 * tuple_diam(tuple)),
            extra_dirs: 0,
        };
        let out = pattern_search(&score, &start, &bounds, &cfg);
        if out.score.is_feasible() {
            best = best.min(out.score.value);
        }
        best
    }

    fn theta_centers(&self, region: &Region, tag: u64) -> Vec<Vec<f64>> {
        let mut out = region.grid_with_budget(self.cfg.grid_density, self.cfg.theta_centers);
        out.push(region.center());
        let mut g = rng::stream(self.cfg.seed, &[0x7C, tag]);
        for _ in 0..self.cfg.theta_centers / 4 {
            out.push(region.sample(&mut g));
        }
        out
    }

    /// Candidate tuples (one point per member up to `lmax`) around center
    /// `c`: the center itself, antipodal pairs along each axis, random
    /// points of the ball, and the members' ball minimizers.
    #[allow(clippy::too_many_arguments)]
    fn center_tuples(
        &self,
        c: &[f64],
        r: f64,
        w: &Region,
        tag: u64,
        j: usize,
        ci: usize,
        lmax: usize,
    ) -> Vec<Vec<Vec<f64>>> {
        let funcs = &self.funcs[..lmax];
        let n = c.len();
        let mut pos = Vec::with_capacity(lmax);
        let mut q = 0usize;
        for f in funcs {
            if matches!(**f, ExtFunction::Const(_)) {
                pos.push(None);
            } else {
                pos.push(Some(q));
                q += 1;
            }
        }
        let argmins: Vec<Option<Vec<f64>>> = funcs
            .iter()
            .map(|f| member_ball_inf(f, c, r, w).point.map(|p| w.project(&p)))
            .collect();
        let mut raw: Vec<Vec<Vec<f64>>> = Vec::new();
        raw.push(vec![c.to_vec(); lmax]);
        for i in 0..n {
            for s in [1.0, -1.0] {
                raw.push(
                    pos.iter()
                        .map(|qp| {
                            let mut p = c.to_vec();
                            if let Some(q) = qp {
                                let sign = if q % 2 == 0 { s } else { -s };
                                p[i] += sign * r;
                            }
                            w.project(&p)
                        })
                        .collect(),
                );
            }
        }
        for k in 0..self.cfg.theta_offsets {
            raw.push(
                pos.iter()
                    .map(|qp| match qp {
                        Some(q) => {
                            let mut g = rng::stream(
                                self.cfg.seed,
                                &[0x7E7A, tag, j as u64, ci as u64, k as u64, *q as u64],
                            );
                            w.project(&sample_ball(c, r, &mut g))
                        }
                        None => c.to_vec(),
                    })
                    .collect(),
            );
        }
        raw.push(
            argmins
                .iter()
                .map(|a| a.clone().unwrap_or_else(|| c.to_vec()))
                .collect(),
        );
        for tuple in &mut raw {
            for (t, f) in funcs.iter().enumerate() {
                if !f.in_domain(&tuple[t]) {
                    if let Some(a) = &argmins[t] {
                        tuple[t] = a.clone();
                    }
                }
            }
            let anchor = pos
                .iter()
                .position(|p| p.is_some())
                .map(|t| tuple[t].clone())
                .unwrap_or_else(|| c.to_vec());
            for (t, p) in pos.iter().enumerate() {
                if p.is_none() {
                    tuple[t] = anchor.clone();
                }
            }
        }
        raw
    }

    pub(crate) fn theta_run(&self, spec: &ThetaSpec) -> ThetaRun {
        let lmax = *self.lens.iter().max().expect("prefix lengths");
        let mode = self.mode(spec.upper);
        let grid = self.inner_grid(spec.inner, lmax, mode);
        let mut levels: Vec<Vec<LevelBest>> = vec![Vec::new(); self.lens.len()];
        let mut empty = false;
        let centers: Vec<Vec<(Vec<f64>, &Region, u64)>> = spec
            .tuple_regions
            .iter()
            .map(|(w, tag)| {
                self.theta_centers(w, *tag)
                    .into_iter()
                    .map(|c| (c, *w, *tag))
                    .collect()
            })
            .collect();
        let witnesses: Vec<Vec<Vec<f64>>> = self
            .family
            .witnesses()
            .iter()
            .filter(|w| w.points.len() >= lmax)
            .map(|w| w.points[..lmax].to_vec())
            .filter(|pts| {
                pts.iter().all(|p| p.len() == self.family.dim())
                    && spec
                        .tuple_regions
                        .iter()
                        .any(|(r, _)| pts.iter().all(|p| r.contains(p)))
            })
            .collect();
        for (j, &delta) in self.deltas.iter().enumerate() {
            let r = half_radius(delta);
            let mut cands: Vec<Vec<Vec<f64>>> = centers
                .iter()
                .flat_map(|list| list.iter().enumerate())
                .collect::<Vec<_>>()
                .par_iter()
                .map(|(ci, (c, w, tag))| self.center_tuples(c, r, w, *tag, j, *ci, lmax))
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect();
            cands.extend(witnesses.iter().filter(|w| tuple_diam(w) < delta).cloned());
            let xts: Vec<Vec<f64>> = cands
                .iter()
                .map(|t| {
                    self.funcs[..lmax]
                        .iter()
                        .zip(t)
                        .map(|(f, p)| f.eval(p).value())
                        .collect()
                })
                .collect();
            for (p, &len) in self.lens.iter().enumerate() {
                let jobs: Vec<usize> = (0..cands.len())
                    .filter(|i| {
                        xts[*i][..len].iter().all(|v| v.is_finite())
                            && tuple_diam(&cands[*i][..len]) < delta
                    })
                    .collect();
                let vals: Vec<f64> = jobs
                    .par_iter()
                    .map(|i| self.inner_j(&grid, &cands[*i][..len], &xts[*i], delta, mode, false))
                    .collect();
                let mut best = LevelBest {
                    value: 0.0,
                    tuple: None,
                };
                if jobs.is_empty() {
                    empty = true;
                }
                for (i, v) in jobs.iter().zip(vals) {
                    if v.is_finite() && (best.tuple.is_none() || v > best.value) {
                        best = LevelBest {
                            value: v,
                            tuple: Some(cands[*i][..len].to_vec()),
                        };
                    }
                }
                levels[p].push(best);
            }
        }
        for lv in &mut levels {
            for j in (0..lv.len().saturating_sub(1)).rev() {
                if lv[j + 1].value > lv[j].value {
                    lv[j] = lv[j + 1].clone();
                }
            }
        }
        let mut witness_trace = Vec::new();
        let mut sorted: Vec<(usize, Vec<Vec<f64>>)> = self
            .family
            .witnesses()
            .iter()
            .filter(|w| w.points.len() >= lmax)
            .map(|w| (w.k, w.points[..lmax].to_vec()))
            .filter(|(_, pts)| witnesses.contains(pts))
            .collect();
        sorted.sort_by_key(|(k, _)| *k);
        let last_delta = *self.deltas.last().expect("delta levels");
        let mut witness_tuple = None;
        for (k, pts) in &sorted {
            let xt: Vec<f64> = self.funcs[..lmax]
                .iter()
                .zip(pts)
                .map(|(f, p)| f.eval(p).value())
                .collect();
            if xt.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let d = tuple_diam(pts);
            let jv = self.inner_j(&grid, pts, &xt, d.max(last_delta), mode, false);
            witness_trace.push(WitnessPoint {
                k: *k,
                diam: d,
                value: super::lv(jv),
            });
            witness_tuple = Some(pts.clone());
        }
        let witness_evidence = if witness_trace.len() >= 3 {
            let t = &witness_trace[witness_trace.len() - 3..];
            (t[0].diam > t[1].diam && t[1].diam > t[2].diam)
                .then(|| t.iter().map(|w| w.value.value()).fold(f64::INFINITY, f64::min))
        } else {
            None
        };
        ThetaRun {
            levels,
            witness_trace,
            witness_evidence,
            witness_tuple,
            empty,
        }
    }

    /// Inner value of the firm constant at a full tuple, estimated from
    /// above over the configured region.
    pub fn inner_value(&self, tuple: &[Vec<f64>]) -> Result<f64> {
        let m = self.funcs.len();
        if tuple.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: tuple.len(),
            });
        }
        for p in tuple {
            self.family.check_point(p)?;
        }
        let xt: Vec<f64> = self
            .funcs
            .iter()
            .zip(tuple)
            .map(|(f, p)| f.eval(p).value())
            .collect();
        if xt.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotInDomain);
        }
        let mode = self.mode(true);
        let grid = self.inner_grid(&self.cfg.region, m, mode);
        let delta = tuple_diam(tuple).max(*self.deltas.last().expect("delta levels"));
        Ok(self.inner_j(&grid, tuple, &xt, delta, mode, true))
    }
}
