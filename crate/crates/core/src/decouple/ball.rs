//! Infima of single members over `B(c, r) ∩ U`.

use crate::functions::expr::recip_interval_inf;
use crate::functions::ExtFunction;
use crate::geometry::{dist, norm, Region};
use crate::search::{pattern_search, Bounds, PatternConfig, Score};

#[derive(Clone, Debug)]
pub(crate) struct BallMin {
    /// `+∞` when the ball misses the domain.
    pub value: f64,
    /// A point attaining `value`, when the infimum is attained.
    pub point: Option<Vec<f64>>,
    pub searched: bool,
}

/// `x_i` range of `B(c, r) ∩ U` for `c ∈ U`, when it is an interval
/// reachable by moving along axis `i` alone.
fn coord_interval(region: &Region, c: &[f64], r: f64, i: usize) -> Option<(f64, f64)> {
    match region {
        Region::Box { lo, hi } => Some(((c[i] - r).max(lo[i]), (c[i] + r).min(hi[i]))),
        Region::WholeSpace { .. } => Some((c[i] - r, c[i] + r)),
        Region::Ball { .. } => region.contains_ball(c, r).then(|| (c[i] - r, c[i] + r)),
    }
}

fn toward(c: &[f64], target: &[f64], r: f64) -> Vec<f64> {
    let d = dist(c, target);
    if d <= r {
        target.to_vec()
    } else {
        c.iter().zip(target).map(|(a, b)| a + (b - a) * r / d).collect()
    }
}

/// Minimizer over the closed ball for the atoms with closed-form infima.
fn ball_argmin(f: &ExtFunction, c: &[f64], r: f64) -> Option<Vec<f64>> {
    match f {
        ExtFunction::Const(_) => Some(c.to_vec()),
        ExtFunction::Affine { a, .. } => {
            let na = norm(a);
            if na == 0.0 {
                Some(c.to_vec())
            } else {
                Some(c.iter().zip(a).map(|(x, ai)| x - r * ai / na).collect())
            }
        }
        ExtFunction::Abs(i) => {
            let mut p = c.to_vec();
            p[*i] = c[*i] - c[*i].signum() * c[*i].abs().min(r);
            Some(p)
        }
        ExtFunction::Norm2 => Some(toward(c, &vec![0.0; c.len()], r)),
        ExtFunction::Distance { center, .. } => Some(toward(c, center, r)),
        ExtFunction::Scale(l, ch) => {
            if *l > 0.0 {
                ball_argmin(ch, c, r)
            } else {
                Some(c.to_vec())
            }
        }
        ExtFunction::Indicator(reg) => {
            let p = reg.project(c);
            (dist(&p, c) <= r).then_some(p)
        }
        _ => None,
    }
}

pub(crate) fn score_of(f: &ExtFunction, x: &[f64]) -> Score {
    let v = f.eval(x);
    if v.is_finite() {
        Score::feasible(v.value())
    } else {
        Score::infeasible(f.violation(x))
    }
}

/// `inf { f(x) : x ∈ B(c, r) ∩ U }` with `c ∈ U`; closed form when the
/// atom allows it, otherwise compass search from the center.
pub(crate) fn member_ball_inf(f: &ExtFunction, c: &[f64], r: f64, region: &Region) -> BallMin {
    if let ExtFunction::Recip { index, positive } = f {
        if let Some((lo, hi)) = coord_interval(region, c, r, *index) {
            let value = recip_interval_inf(*positive, lo, hi).value();
            let point = value.is_finite().then(|| {
                let mut p = c.to_vec();
                p[*index] = if *positive { hi } else { lo };
                p
            });
            return BallMin {
                value,
                point,
                searched: false,
            };
        }
    }
    if region.is_whole_space() || region.contains_ball(c, r) {
        if let Some(v) = f.ball_inf(c, r) {
            let value = v.value();
            let point = if value.is_finite() {
                ball_argmin(f, c, r)
            } else {
                None
            };
            return BallMin {
                value,
                point,
                searched: false,
            };
        }
    }
    let bounds = Bounds::with_ball(region, c, r);
    let obj = |x: &[f64]| score_of(f, x);
    let n = c.len();
    let mut start = c.to_vec();
    let mut best = obj(c);
    for i in 0..n {
        for s in [0.5, -0.5] {
            let mut y = c.to_vec();
            y[i] += s * r;
            let y = bounds.pull(c, &y);
            let sy = obj(&y);
            if sy.better_than(&best) {
                best = sy;
                start = y;
            }
        }
    }
    let cfg = PatternConfig {
        step: 0.5 * r,
        min_step: (r * 1e-6).max(1e-12),
        max_evals: 100 + 60 * n,
        lower_bound: f.lower_bound(),
        extra_dirs: 0,
    };
    let out = pattern_search(&obj, &start, &bounds, &cfg);
    if out.diverged {
        BallMin {
            value: f64::NEG_INFINITY,
            point: None,
            searched: true,
        }
    } else if out.score.is_feasible() {
        BallMin {
            value: out.score.value,
            point: Some(out.x),
            searched: true,
        }
    } else {
        BallMin {
            value: f64::INFINITY,
            point: None,
            searched: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::parse_function;

    #[test]
    fn recip_ball_straddling_zero_is_unbounded() {
        let f = parse_function("(recip 0 +)").unwrap();
        let u = Region::interval(-2.0, 2.0);
        let b = member_ball_inf(&f, &[0.01], 0.05, &u);
        assert_eq!(b.value, f64::NEG_INFINITY);
        let b = member_ball_inf(&f, &[1.0], 0.5, &u);
        assert_eq!(b.value, 1.0 / 1.5);
        assert_eq!(b.point, Some(vec![1.5]));
    }

    #[test]
    fn clipped_ball_uses_search() {
        let f = parse_function("(abs 0)").unwrap();
        let u = Region::interval(0.5, 2.0);
        let b = member_ball_inf(&f, &[0.6], 0.3, &u);
        assert!(b.searched);
        assert!((b.value - 0.5).abs() < 1e-6);
    }

    #[test]
    fn closed_form_matches_grid_oracle() {
        // oracle: dense scan of the ball
        let f = parse_function("(affine (2 -1) 0.5)").unwrap();
        let u = Region::new_box(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let c = [0.3, -0.2];
        let r = 0.7;
        let b = member_ball_inf(&f, &c, r, &u);
        let mut best = f64::INFINITY;
        for k in 0..20000 {
            let th = std::f64::consts::TAU * k as f64 / 20000.0;
            let x = [c[0] + r * th.cos(), c[1] + r * th.sin()];
            best = best.min(f.eval(&x).value());
        }
        assert!((b.value - best).abs() < 1e-6);
        let p = b.point.unwrap();
        assert!((f.eval(&p).value() - b.value).abs() < 1e-12);
    }
}
