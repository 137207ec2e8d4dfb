//! Derivative-free local search on convex feasible sets.

use rand::Rng;

use crate::chain::{accelerating_descent, DIVERGENCE_FLOOR};
use crate::geometry::{ball_ray_fraction, dist, Region};

/// Objective value with a domain-violation measure; points with smaller
/// violation win, ties are broken by value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub viol: f64,
    pub value: f64,
}

impl Score {
    pub fn feasible(value: f64) -> Self {
        Score { viol: 0.0, value }
    }

    pub fn infeasible(viol: f64) -> Self {
        Score {
            viol: viol.max(f64::MIN_POSITIVE),
            value: f64::INFINITY,
        }
    }

    pub fn better_than(&self, other: &Score) -> bool {
        if self.viol != other.viol {
            self.viol < other.viol
        } else {
            self.value < other.value
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.viol == 0.0 && self.value < f64::INFINITY
    }
}

/// Feasible set `region ∩ B(center, radius)` (the ball is optional). The
/// anchor must be feasible; moves leaving the set are pulled back along the
/// segment from the current point.
#[derive(Clone, Copy, Debug)]
pub struct Bounds<'a> {
    pub region: &'a Region,
    pub ball: Option<(&'a [f64], f64)>,
}

impl<'a> Bounds<'a> {
    pub fn region(region: &'a Region) -> Self {
        Bounds { region, ball: None }
    }

    pub fn with_ball(region: &'a Region, center: &'a [f64], radius: f64) -> Self {
        Bounds {
            region,
            ball: Some((center, radius)),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.region.contains(x) && self.ball.is_none_or(|(c, r)| dist(x, c) <= r)
    }

    /// `from + λ (to − from)` with the largest feasible `λ ∈ [0, 1]`.
    pub fn pull(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        let mut lam = self.region.ray_fraction(from, to);
        if let Some((c, r)) = self.ball {
            lam = lam.min(ball_ray_fraction(c, r, from, to));
        }
        let y: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + lam * (b - a)).collect();
        if self.contains(&y) {
            y
        } else {
            from.to_vec()
        }
    }

    /// A feasible point near `x`, found from the ball center or the region
    /// center when `x` itself is outside.
    pub fn repair(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.contains(x) {
            return Some(x.to_vec());
        }
        let anchor: Vec<f64> = match self.ball {
            Some((c, _)) if self.region.contains(c) => c.to_vec(),
            Some((c, _)) => self.region.project(c),
            None => self.region.project(x),
        };
        if !self.contains(&anchor) {
            return None;
        }
        Some(self.pull(&anchor, x))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match self.ball {
            None => Some(self.region.sample(rng)),
            Some((c, r)) => {
                let p = crate::geometry::sample_ball(c, r, rng);
                self.repair(&p)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PatternConfig {
    pub step: f64,
    pub min_step: f64,
    pub max_evals: usize,
    /// Stop as soon as a feasible value at or below this is seen.
    pub lower_bound: Option<f64>,
    /// Fixed random directions polled when no axis move improves.
    pub extra_dirs: usize,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub score: Score,
    pub evals: usize,
    /// The best value fell below the divergence floor with accelerating
    /// decrements across mesh levels.
    pub diverged: bool,
}

/// Compass search with step doubling on success and halving on failure.
pub fn pattern_search(
    obj: &dyn Fn(&[f64]) -> Score,
    x0: &[f64],
    bounds: &Bounds,
    cfg: &PatternConfig,
) -> SearchOutcome {
    let n = x0.len();
    let mut x = match bounds.repair(x0) {
        Some(x) => x,
        None => {
            return SearchOutcome {
                x: x0.to_vec(),
                score: Score::infeasible(1.0),
                evals: 0,
                diverged: false,
            }
        }
    };
    let mut fx = obj(&x);
    let mut evals = 1;
    let mut step = cfg.step;
    let mut level_best: Vec<f64> = Vec::new();
    let mut momentum: Option<Vec<f64>> = None;
    let extra: Vec<Vec<f64>> = {
        let mut g = crate::rng::stream(0, &[0xD1, n as u64]);
        (0..cfg.extra_dirs)
            .map(|_| crate::geometry::random_unit(n, &mut g))
            .collect()
    };
    let done = |s: &Score| cfg.lower_bound.is_some_and(|lb| s.viol == 0.0 && s.value <= lb);
    while step >= cfg.min_step && evals < cfg.max_evals && !done(&fx) {
        let mut best: Option<(Vec<f64>, Score)> = None;
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * n + 1);
        if let Some(m) = &momentum {
            dirs.push(m.clone());
        }
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[i] = s;
                dirs.push(d);
            }
        }
        let mut poll = |dirs: &[Vec<f64>], best: &mut Option<(Vec<f64>, Score)>| {
            for d in dirs {
                let to: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
                let y = bounds.pull(&x, &to);
                if y == x {
                    continue;
                }
                let fy = obj(&y);
                evals += 1;
                if fy.better_than(best.as_ref().map_or(&fx, |b| &b.1)) {
                    *best = Some((y, fy));
                }
                if evals >= cfg.max_evals {
                    break;
                }
            }
        };
        poll(&dirs, &mut best);
        // axis moves stall against slanted constraints
        if best.is_none() && !extra.is_empty() {
            poll(&extra, &mut best);
        }
        match best {
            Some((y, fy)) => {
                let m: Vec<f64> = y.iter().zip(&x).map(|(a, b)| (a - b) / step).collect();
                momentum = Some(m);
                x = y;
                fx = fy;
                step = (2.0 * step).min(cfg.step);
            }
            None => {
                momentum = None;
                step *= 0.5;
                if fx.viol == 0.0 {
                    level_best.push(fx.value);
                    if fx.value < DIVERGENCE_FLOOR && accelerating_descent(&level_best) {
                        return SearchOutcome {
                            x,
                            score: Score::feasible(f64::NEG_INFINITY),
                            evals,
                            diverged: true,
                        };
                    }
                }
            }
        }
    }
    SearchOutcome {
        x,
        score: fx,
        evals,
        diverged: false,
    }
}

/// Evaluates `starts`, then runs pattern search from the `refine` best.
/// Ties resolve to the earliest start, so the result depends only on the
/// order of `starts`.
pub fn multistart(
    obj: &(dyn Fn(&[f64]) -> Score + Sync),
    starts: &[Vec<f64>],
    bounds: &Bounds,
    refine: usize,
    cfg: &PatternConfig,
) -> Option<SearchOutcome> {
    use rayon::prelude::*;
    let scored: Vec<(usize, Score)> = starts
        .par_iter()
        .enumerate()
        .filter(|(_, s)| bounds.contains(s))
        .map(|(i, s)| (i, obj(s)))
        .collect();
    let mut order = scored;
    order.sort_by(|a, b| {
        if a.1.better_than(&b.1) {
            std::cmp::Ordering::Less
        } else if b.1.better_than(&a.1) {
            std::cmp::Ordering::Greater
        } else {
            a.0.cmp(&b.0)
        }
    });
    let picked: Vec<usize> = order.iter().take(refine.max(1)).map(|(i, _)| *i).collect();
    let outcomes: Vec<SearchOutcome> = picked
        .par_iter()
        .map(|i| pattern_search(obj, &starts[*i], bounds, cfg))
        .collect();
    let mut best: Option<SearchOutcome> = None;
    for o in outcomes {
        if best.as_ref().is_none_or(|b| o.score.better_than(&b.score)) {
            best = Some(o);
        }
    }
    // a start may beat its own refinement only through the divergence exit
    if let Some((i, s)) = order.first() {
        if best.as_ref().is_none_or(|b| s.better_than(&b.score)) {
            best = Some(SearchOutcome {
                x: starts[*i].clone(),
                score: *s,
                evals: 1,
                diverged: false,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_box_constrained_minimum() {
        let region = Region::new_box(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let obj = |x: &[f64]| Score::feasible((x[0] - 2.0).powi(2) + (x[1] + 0.3).powi(2));
        let cfg = PatternConfig {
            step: 0.5,
            min_step: 1e-9,
            max_evals: 10_000,
            lower_bound: None,
            extra_dirs: 0,
        };
        let out = pattern_search(&obj, &[0.0, 0.0], &Bounds::region(&region), &cfg);
        assert!((out.x[0] - 1.0).abs() < 1e-8);
        assert!((out.x[1] + 0.3).abs() < 1e-8);
    }

    #[test]
    fn escapes_infeasible_plateau_by_violation() {
        let region = Region::interval(-5.0, 5.0);
        let obj = |x: &[f64]| {
            if x[0] >= 2.0 {
                Score::feasible(x[0])
            } else {
                Score::infeasible(2.0 - x[0])
            }
        };
        let cfg = PatternConfig {
            step: 1.0,
            min_step: 1e-10,
            max_evals: 10_000,
            lower_bound: None,
            extra_dirs: 0,
        };
        let out = pattern_search(&obj, &[-4.0], &Bounds::region(&region), &cfg);
        assert!(out.score.is_feasible());
        assert!((out.x[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn ball_bounds_are_respected() {
        let region = Region::interval(-5.0, 5.0);
        let c = [1.0];
        let b = Bounds::with_ball(&region, &c, 0.25);
        let obj = |x: &[f64]| Score::feasible(x[0]);
        let cfg = PatternConfig {
            step: 0.1,
            min_step: 1e-12,
            max_evals: 1000,
            lower_bound: None,
            extra_dirs: 0,
        };
        let out = pattern_search(&obj, &[1.0], &b, &cfg);
        assert!((out.x[0] - 0.75).abs() < 1e-10);
    }
}
