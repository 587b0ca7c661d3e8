use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pathsim::SeedSpec;
use crate::specfun::{Params, TestFunction};

/// Base-time grid of every path in an ensemble. The horizon is derived from
/// the largest reporting time, so that `L̂` can be read there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_steps: usize,
    /// Share of grid points placed in the first hundredth of the horizon.
    pub refine_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorKnobs {
    /// `ε = h^eps_exponent` with `h` the bulk grid step.
    pub eps_exponent: f64,
    /// Half-width of the bands of the two-parameter local time.
    pub bandwidth: f64,
    /// Levels at which `E[L̂^x_1]` is compared with its closed form.
    pub surface_levels: Vec<f64>,
    /// Decreasing levels for the `x → 0` trend.
    pub small_levels: Vec<f64>,
    /// Interval of the indicator in the occupation identity.
    pub occupation_interval: (f64, f64),
    /// Number of bands the interval is cut into.
    pub occupation_cells: usize,
    /// Truncation of the jumps of `ξ̂`: bound on the discarded `∫ x² π̂(dx)`.
    pub xi_second_moment_tol: f64,
    /// Relative tail at which the exponential functional is stopped.
    pub xi_tail_rel: f64,
    /// Level step of the stable path behind `(L̂₁, λ̂₁)` samples.
    pub level_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub n_list: Vec<f64>,
    /// Test function with `c₁ ≠ 0`.
    pub first_order: TestFunction,
    /// Test function with `c₁ = 0` and compact support.
    pub second_order: TestFunction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmpSpec {
    /// Independent `(L̂₁, λ̂₁)` samples from stable paths.
    pub n_points: usize,
    /// Samples of `ξ̂₁` and of the exponential functional.
    pub n_xi: usize,
    pub laplace_r: Vec<f64>,
    /// Paths and base steps for the coupled inverse check.
    pub coupled_paths: usize,
    pub coupled_steps: usize,
    pub coupled_levels: usize,
    pub coupled_points: usize,
}

/// Every threshold that decides pass or fail. Relative budgets are scaled
/// by the reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub se_multiplier: f64,
    /// Moments of orders up to this one gate the report; higher ones are informative.
    pub gated_moment_order: u32,
    pub moment_bias: f64,
    /// Mean agreement of the routes at `t = 1`.
    pub route_bias: f64,
    pub ibp_sup_rel: f64,
    /// Smallest mean relative gap the plus-sign variant must show.
    pub ibp_plus_min_gap: f64,
    pub bridge_bias: f64,
    pub variance_bias: f64,
    pub surface_bias: f64,
    pub occupation_residual: f64,
    pub ks_min_p: f64,
    pub exponent_tol: f64,
    /// Relative slack in the level of the coupled inverse check.
    pub coupled_rel_tol: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy {
            se_multiplier: 3.0,
            gated_moment_order: 2,
            moment_bias: 0.03,
            route_bias: 0.03,
            ibp_sup_rel: 1e-3,
            ibp_plus_min_gap: 0.05,
            bridge_bias: 0.01,
            variance_bias: 0.05,
            surface_bias: 0.03,
            occupation_residual: 0.02,
            ks_min_p: 0.01,
            exponent_tol: 0.02,
            coupled_rel_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: Params,
    pub n_paths: usize,
    pub grid: GridSpec,
    pub estimator: EstimatorKnobs,
    /// Times at which `E[L̂_t]` is estimated; must include 1.
    pub times: Vec<f64>,
    pub scaling: ScalingSpec,
    pub ssmp: SsmpSpec,
    pub seed: SeedSpec,
    pub batches: usize,
    pub tolerance: TolerancePolicy,
}

impl ExperimentConfig {
    /// Defaults sized for a desktop run of one setting.
    pub fn new(params: Params) -> Self {
        ExperimentConfig {
            params,
            n_paths: 2000,
            grid: GridSpec {
                n_steps: 800_000,
                refine_fraction: 0.2,
            },
            estimator: EstimatorKnobs {
                eps_exponent: 0.5,
                bandwidth: 0.02,
                surface_levels: vec![0.1, 0.5, 1.0],
                small_levels: vec![0.4, 0.2, 0.1],
                occupation_interval: (0.2, 0.8),
                occupation_cells: 30,
                xi_second_moment_tol: crate::ssmp::DEFAULT_SECOND_MOMENT_TOL,
                xi_tail_rel: crate::ssmp::DEFAULT_TAIL_REL,
                level_step: 1e-3,
            },
            times: vec![0.5, 1.0, 2.0],
            scaling: ScalingSpec {
                n_list: vec![1e2, 1e3, 1e4],
                first_order: TestFunction::indicator(0.0, 1.0).expect("valid indicator"),
                second_order: TestFunction::signed_bump(params.alpha()),
            },
            ssmp: SsmpSpec {
                n_points: 2000,
                n_xi: 20_000,
                laplace_r: vec![0.5, 1.0, 2.0],
                coupled_paths: 1000,
                coupled_steps: 20_000,
                coupled_levels: 20_000,
                coupled_points: 100,
            },
            seed: SeedSpec::new(20_240_601, 0),
            batches: 100,
            tolerance: TolerancePolicy::default(),
        }
    }

    /// Largest base time any path must reach.
    pub fn horizon(&self) -> f64 {
        let t = self.times.iter().copied().fold(1.0f64, f64::max);
        t.powf(self.params.q())
    }

    /// Levels of the mean-surface and small-level tests together, sorted.
    pub fn band_levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .estimator
            .surface_levels
            .iter()
            .chain(&self.estimator.small_levels)
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let e = &self.estimator;
        if self.grid.n_steps < 10 {
            return bad(format!("grid.n_steps = {} is too small", self.grid.n_steps));
        }
        if !(self.grid.refine_fraction > 0.0 && self.grid.refine_fraction < 0.9) {
            return bad(format!(
                "grid.refine_fraction = {} must lie in (0, 0.9)",
                self.grid.refine_fraction
            ));
        }
        if !(e.eps_exponent > 0.0 && e.eps_exponent <= 0.5) {
            return bad(format!(
                "estimator.eps_exponent = {} must lie in (0, 0.5]",
                e.eps_exponent
            ));
        }
        if !(e.bandwidth > 0.0) {
            return bad(format!(
                "estimator.bandwidth = {} must be positive",
                e.bandwidth
            ));
        }
        if !self.times.contains(&1.0) || self.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("times must be positive and include 1".into());
        }
        let (a, b) = e.occupation_interval;
        if !(a > 0.0 && b > a) || e.occupation_cells == 0 {
            return bad(format!(
                "occupation interval ({a}, {b}) with {} cells is invalid",
                e.occupation_cells
            ));
        }
        if self.scaling.n_list.iter().any(|n| !(*n >= 1.0)) {
            return bad("scaling.n_list entries must be at least 1".into());
        }
        if !(e.xi_second_moment_tol > 0.0 && e.xi_tail_rel > 0.0 && e.level_step > 0.0) {
            return bad("ssmp truncations must be positive".into());
        }
        if self.batches < 2 {
            return bad(format!("batches = {} must be at least 2", self.batches));
        }
        if self.params.p() >= 0.49 {
            return bad(format!(
                "p = {} exceeds the supported 0.49",
                self.params.p()
            ));
        }
        let t = &self.tolerance;
        if [
            t.se_multiplier,
            t.moment_bias,
            t.route_bias,
            t.ibp_sup_rel,
            t.bridge_bias,
            t.variance_bias,
        ]
        .iter()
        .chain(&[
            t.surface_bias,
            t.occupation_residual,
            t.exponent_tol,
            t.coupled_rel_tol,
        ])
        .any(|x| !(*x >= 0.0 && x.is_finite()))
        {
            return bad("tolerances must be finite and nonnegative".into());
        }
        if !(t.ks_min_p > 0.0 && t.ks_min_p < 1.0) {
            return bad(format!(
                "tolerance.ks_min_p = {} must lie in (0,1)",
                t.ks_min_p
            ));
        }
        let levels = self.band_levels();
        if levels[0] <= 2.0 * e.bandwidth * 0.999_999 {
            return bad(format!(
                "bandwidth {} is too wide for level {}",
                e.bandwidth, levels[0]
            ));
        }
        if levels
            .windows(2)
            .any(|w| w[1] - w[0] < 2.0 * e.bandwidth * 0.999_999)
        {
            return bad(format!("bands of half-width {} overlap", e.bandwidth));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
