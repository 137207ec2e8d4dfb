//! Estimators for the uniform infimum `Λ`, the firm constant `Θ`, the gap
//! `Δ`, and their variants restricted to essentially interior subsets.
//!
//! Inf-type outputs are upper bounds of the true infima; `Θ` outputs are
//! empirical evidence from an adversarial tuple search. [`Estimate`] carries
//! the direction so callers never read more into a value than it supports.

mod ball;
mod engine;
mod theta;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::LimitValue;
use crate::geometry::Region;

pub(crate) use ball::member_ball_inf;
pub(crate) use engine::delta_limit;

pub use engine::Analyzer;

/// Knobs shared by every estimator.
#[derive(Clone, Debug, Serialize)]
pub struct DecoupleConfig {
    pub region: Region,
    /// First diameter level; the region's shortest side when unset.
    pub delta0: Option<f64>,
    pub delta_ratio: f64,
    pub delta_levels: usize,
    pub multistarts: usize,
    pub seed: u64,
    pub grid_density: usize,
    /// Cap on grid points per region.
    pub grid_budget: usize,
    /// Grid cap for the inner minimization of `Θ`.
    pub inner_budget: usize,
    /// Grid cap for the centers of `Θ` candidate tuples.
    pub theta_centers: usize,
    /// Random tuples per center and level.
    pub theta_offsets: usize,
    pub rho_levels: usize,
    /// Centers refined by pattern search per prefix and level.
    pub refine_top: usize,
    /// The inner search of `Θ` looks within this many `δ` of the tuple.
    pub inner_radius_factor: f64,
}

impl DecoupleConfig {
    pub fn new(region: Region) -> Self {
        DecoupleConfig {
            region,
            delta0: None,
            delta_ratio: 0.5,
            delta_levels: 12,
            multistarts: 64,
            seed: 0,
            grid_density: 33,
            grid_budget: 4096,
            inner_budget: 512,
            theta_centers: 64,
            theta_offsets: 8,
            rho_levels: 4,
            refine_top: 4,
            inner_radius_factor: 10.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_ratio > 0.0 && self.delta_ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta ratio must lie in (0, 1), got {}",
                self.delta_ratio
            )));
        }
        if self.delta_levels == 0 || self.grid_density == 0 {
            return Err(Error::InvalidParameter("schedules must be nonempty".into()));
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("delta0 must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// `δ_j = δ_0 · ratio^j`.
    pub fn deltas(&self) -> Vec<f64> {
        let d0 = self.delta0.unwrap_or_else(|| self.region.diam_scale());
        (0..self.delta_levels)
            .map(|j| d0 * self.delta_ratio.powi(j as i32))
            .collect()
    }

    /// `ρ_i = diam_scale / 8 · 2^{−i}`.
    pub fn rhos(&self) -> Vec<f64> {
        let r0 = self.region.diam_scale() / 8.0;
        (0..self.rho_levels).map(|i| r0 * 0.5f64.powi(i as i32)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BoundDirection {
    UpperBoundOfInf,
    LowerEvidenceOfSup,
    TwoSided { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Converged,
    NegativeInfinityDiverging,
    PositiveInfinityDiverging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub s_size: usize,
    pub delta: Option<f64>,
    pub rho: Option<f64>,
    pub value: LimitValue,
}

/// Limit over `δ` for one prefix (and one `ρ` for the quasi variants).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrefixValue {
    pub s_size: usize,
    pub rho: Option<f64>,
    pub value: LimitValue,
}

/// One term of a witness sequence with its tuple diameter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessPoint {
    pub k: usize,
    pub diam: f64,
    pub value: LimitValue,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub quantity: String,
    pub value: LimitValue,
    pub bound_direction: BoundDirection,
    pub verdict: Verdict,
    pub trace: Vec<TracePoint>,
    pub prefix_values: Vec<PrefixValue>,
    /// Tuple behind the reported value, replayable by the evaluators.
    pub witness: Option<Vec<Vec<f64>>>,
    pub witness_trace: Vec<WitnessPoint>,
    /// Some member needed a search without a closed form or a Lipschitz
    /// bound, so the value is not backed by a grid-gap argument.
    pub heuristic: bool,
    pub notes: Vec<String>,
}

pub(crate) fn lv(v: f64) -> LimitValue {
    LimitValue::new(v).unwrap_or(LimitValue::INFINITY)
}

use crate::functions::FunctionFamily;
use crate::chain::IndexSubset;

/// Decoupled infimum of `{f_t}_{t∈S}` at a single diameter `δ`.
pub fn decoupled_inf(
    family: &FunctionFamily,
    s: &IndexSubset,
    delta: f64,
    cfg: &DecoupleConfig,
) -> Result<Estimate> {
    engine::decoupled_inf(family, s, delta, cfg)
}

pub fn lambda_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.lambda()
}

pub fn theta_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Ok(Analyzer::new(family, cfg)?.theta())
}

pub fn delta_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.delta()
}

/// `liminf_S inf_U Σ_{t∈S} f_t`.
pub fn plain_inf_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Ok(Analyzer::new(family, cfg)?.plain())
}

/// `inf_U` of the upper sum.
pub fn upper_inf_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Ok(Analyzer::new(family, cfg)?.upper_inf())
}

pub fn quasi_lambda_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.quasi_lambda()
}

pub fn quasi_theta_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.quasi_theta()
}

pub fn quasi_delta_estimate(family: &FunctionFamily, cfg: &DecoupleConfig) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.quasi_delta()
}

/// `Θ_{U,V}` along the chain: tuples in `V`, inner point in `U`.
pub fn theta_uv_estimate(
    family: &FunctionFamily,
    v: &Region,
    cfg: &DecoupleConfig,
) -> Result<Estimate> {
    Analyzer::new(family, cfg)?.theta_uv(v)
}

/// Inner value `inf_{x∈U} max{max_t d(x, x_t), Σ̄ f_t(x) − Σ_t f_t(x_t)}`
/// at a full tuple, estimated from above.
pub fn theta_inner_value(
    family: &FunctionFamily,
    tuple: &[Vec<f64>],
    cfg: &DecoupleConfig,
) -> Result<f64> {
    Analyzer::new(family, cfg)?.inner_value(tuple)
}
