//! Sampling refuter for Fréchet subgradient membership.

use serde::Serialize;

use crate::ext::ExtValue;
use crate::geometry::{dot, norm, random_unit};
use crate::rng;

#[derive(Clone, Debug)]
pub struct RefuterConfig {
    pub tol: f64,
    /// Largest radius; the schedule is `r0 · ratio^j`, `j < radii`.
    pub r0: f64,
    pub ratio: f64,
    pub radii: usize,
    /// Random directions per dimension above 3.
    pub budget_per_dim: usize,
    pub seed: u64,
}

impl Default for RefuterConfig {
    fn default() -> Self {
        RefuterConfig {
            tol: 1e-6,
            r0: 1e-3,
            ratio: 0.1,
            radii: 5,
            budget_per_dim: 128,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Membership {
    NotRefuted,
    Refuted {
        direction: Vec<f64>,
        radius: f64,
        quotient: f64,
    },
}

impl Membership {
    pub fn is_refuted(&self) -> bool {
        matches!(self, Membership::Refuted { .. })
    }
}

/// Unit directions used by the refuter in dimension `n`.
pub fn direction_grid(n: usize, budget_per_dim: usize, seed: u64) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 64.0;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci sphere
            let m = 512;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut g = rng::stream(seed, &[0xD1, n as u64]);
            let mut dirs: Vec<Vec<f64>> = (0..n)
                .flat_map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    let mut f = e.clone();
                    f[i] = -1.0;
                    [e, f]
                })
                .collect();
            dirs.extend((0..budget_per_dim * n).map(|_| random_unit(n, &mut g)));
            dirs
        }
    }
}

/// Tests `g ∈ ∂f(x)` by sampling difference quotients
/// `(f(x + r d) − f(x) − r⟨g, d⟩) / r`. A direction refutes membership when
/// the quotient is below `−tol` at every radius of the schedule.
/// `extra` directions are tried first; they need not be normalized.
pub fn frechet_membership_test(
    f: &dyn Fn(&[f64]) -> ExtValue,
    x: &[f64],
    g: &[f64],
    extra: &[Vec<f64>],
    cfg: &RefuterConfig,
) -> Membership {
    let fx = f(x);
    if !fx.is_finite() {
        return Membership::NotRefuted;
    }
    let n = x.len();
    let normalized: Vec<Vec<f64>> = extra
        .iter()
        .filter_map(|d| {
            let nd = norm(d);
            (nd > 0.0).then(|| d.iter().map(|v| v / nd).collect())
        })
        .collect();
    let grid = direction_grid(n, cfg.budget_per_dim, cfg.seed);
    let mut y = vec![0.0; n];
    for d in normalized.iter().chain(grid.iter()) {
        let gd = dot(g, d);
        let mut worst: Option<(f64, f64)> = None;
        let mut all_below = true;
        for j in 0..cfg.radii {
            let r = cfg.r0 * cfg.ratio.powi(j as i32);
            for k in 0..n {
                y[k] = x[k] + r * d[k];
            }
            let fy = f(&y);
            if !fy.is_finite() {
                all_below = false;
                break;
            }
            let q = (fy.value() - fx.value()) / r - gd;
            if q >= -cfg.tol {
                all_below = false;
                break;
            }
            worst = Some((r, q));
        }
        if all_below {
            if let Some((radius, quotient)) = worst {
                return Membership::Refuted {
                    direction: d.clone(),
                    radius,
                    quotient,
                };
            }
        }
    }
    Membership::NotRefuted
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs(x: &[f64]) -> ExtValue {
        ExtValue::finite(x[0].abs())
    }

    #[test]
    fn interior_subgradient_survives() {
        let cfg = RefuterConfig::default();
        assert_eq!(frechet_membership_test(&abs, &[0.0], &[0.5], &[], &cfg), Membership::NotRefuted);
    }

    #[test]
    fn too_large_slope_is_refuted_along_plus_one() {
        let cfg = RefuterConfig::default();
        match frechet_membership_test(&abs, &[0.0], &[1.5], &[], &cfg) {
            Membership::Refuted { direction, .. } => assert_eq!(direction, vec![1.0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_of_square_survives() {
        let sq = |x: &[f64]| ExtValue::finite(x[0] * x[0]);
        let cfg = RefuterConfig::default();
        assert_eq!(frechet_membership_test(&sq, &[1.0], &[2.0], &[], &cfg), Membership::NotRefuted);
        assert!(frechet_membership_test(&sq, &[1.0], &[2.5], &[], &cfg).is_refuted());
    }

    #[test]
    fn direction_grid_sizes() {
        assert_eq!(direction_grid(1, 1, 0).len(), 2);
        assert_eq!(direction_grid(2, 1, 0).len(), 64);
        assert_eq!(direction_grid(3, 1, 0).len(), 512);
        for d in direction_grid(3, 1, 0) {
            assert!((norm(&d) - 1.0).abs() < 1e-12);
        }
    }
}
