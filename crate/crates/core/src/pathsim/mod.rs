//! Exact-law Bessel paths on time grids and the space-time reinforcement map.
//!
//! The squared process is advanced with its exact BESQ(d) transition, so any
//! grid gives unbiased marginals no matter how coarse it is.

mod grid;

pub use grid::{
    build_grid, build_grid_with_budget, GridScheme, TimeGrid, DEFAULT_GRID_BUDGET_BYTES,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::container::Columns;
use crate::error::{Error, Result};
use crate::specfun::Params;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }

    /// ChaCha8 keyed by the master seed, on its own 64-bit stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Seed for a named sub-experiment; keeps streams of different
    /// experiments apart without coordination.
    pub fn derive(&self, tag: u64) -> SeedSpec {
        // splitmix64 finaliser
        let mut z = self.master_seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        SeedSpec::new(z ^ (z >> 31), self.stream_index)
    }

    pub fn with_stream(&self, stream_index: u64) -> SeedSpec {
        SeedSpec::new(self.master_seed, stream_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Bessel,
    ReinforcedBessel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
    kind: PathKind,
}

impl SampledPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Input(format!(
                "path value {v} is not a nonnegative number"
            )));
        }
        Ok(SampledPath { grid, values, kind })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Columns `t, value`.
    pub fn to_columns(&self) -> Columns {
        Columns {
            names: vec!["t".into(), "value".into()],
            data: vec![self.times().to_vec(), self.values.clone()],
        }
    }

    /// Reads back a path written by [`SampledPath::to_columns`]; the grid
    /// scheme is not stored and comes back as the one given.
    pub fn from_columns(cols: &Columns, kind: PathKind, scheme: GridScheme) -> Result<Self> {
        let (t, v) = match (cols.get("t"), cols.get("value")) {
            (Some(t), Some(v)) => (t, v),
            _ => return Err(Error::Format("expected columns t and value".into())),
        };
        let grid = TimeGrid::from_times(t.to_vec(), scheme)?;
        SampledPath::new(Arc::new(grid), v.to_vec(), kind)
    }
}

/// One exact BESQ(d) step of length `dt` from `x`.
#[derive(Debug, Clone)]
struct BesqStep {
    half_d: f64,
    from_zero: Gamma<f64>,
}

impl BesqStep {
    fn new(d: f64) -> Self {
        BesqStep {
            half_d: d / 2.0,
            from_zero: Gamma::new(d / 2.0, 1.0).expect("d > 0"),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, x: f64, dt: f64, rng: &mut R) -> f64 {
        if x <= 0.0 {
            return 2.0 * dt * self.from_zero.sample(rng);
        }
        let n = Poisson::new(x / (2.0 * dt))
            .expect("finite positive Poisson mean")
            .sample(rng);
        let g = Gamma::new(self.half_d + n, 1.0).expect("positive shape");
        2.0 * dt * g.sample(rng)
    }
}

/// Samples `R` on `grid` from `R_0 = 0`.
///
/// Between grid points the square moves by the Poisson mixture of Gammas.
/// In dimension one the process is reflected Brownian motion and a single
/// Gaussian per step does the same job exactly.
pub fn sample_bessel_path(grid: &Arc<TimeGrid>, params: &Params, seed: SeedSpec) -> SampledPath {
    let mut rng = seed.rng();
    let values = sample_bessel_values(grid.times(), params.d(), &mut rng);
    SampledPath {
        grid: Arc::clone(grid),
        values,
        kind: PathKind::Bessel,
    }
}

pub(crate) fn sample_bessel_values<R: Rng + ?Sized>(
    times: &[f64],
    d: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    out.push(0.0);
    if d == 1.0 {
        let mut r = 0.0f64;
        for w in times.windows(2) {
            let z: f64 = rng.sample(StandardNormal);
            r = (r + (w[1] - w[0]).sqrt() * z).abs();
            out.push(r);
        }
    } else {
        let step = BesqStep::new(d);
        let mut x = 0.0;
        for w in times.windows(2) {
            x = step.sample(x, w[1] - w[0], rng);
            out.push(x.sqrt());
        }
    }
    out
}

/// The reinforcement map for one base grid, precomputed so it can be
/// applied to many paths.
#[derive(Debug, Clone)]
pub struct Reinforcement {
    params: Params,
    base: Arc<TimeGrid>,
    grid: Arc<TimeGrid>,
    factor: Vec<f64>,
}

impl Reinforcement {
    pub fn new(base: &Arc<TimeGrid>, params: &Params) -> Result<Self> {
        let q = params.q();
        let p = params.p();
        let grid = if p == 0.0 {
            Arc::clone(base)
        } else {
            Arc::new(base.mapped(1.0 / q)?)
        };
        let sq = q.sqrt();
        let factor = grid
            .times()
            .iter()
            .map(|&t| if t == 0.0 { 0.0 } else { t.powf(p) / sq })
            .collect();
        Ok(Reinforcement {
            params: *params,
            base: Arc::clone(base),
            grid,
            factor,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn base_grid(&self) -> &Arc<TimeGrid> {
        &self.base
    }

    /// Grid of the reinforced path, `t_k = u_k^{1/(1-2p)}`.
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// `t_k^p / √(1-2p)` per grid point, so that `R̂_{t_k} = factor_k R_{u_k}`.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    pub fn apply(&self, base: &SampledPath) -> Result<SampledPath> {
        if base.kind != PathKind::Bessel {
            return Err(Error::Input("reinforcement expects a Bessel path".into()));
        }
        if !Arc::ptr_eq(&base.grid, &self.base) && *base.grid != *self.base {
            return Err(Error::Input("path is not on the grid of this map".into()));
        }
        let values = if self.params.p() == 0.0 {
            base.values.clone()
        } else {
            base.values
                .iter()
                .zip(&self.factor)
                .map(|(r, f)| r * f)
                .collect()
        };
        Ok(SampledPath {
            grid: Arc::clone(&self.grid),
            values,
            kind: PathKind::ReinforcedBessel,
        })
    }
}

/// `R̂_t = t^p R_{t^{1-2p}} / √(1-2p)` on the image grid; `R̂_0 = 0`.
pub fn reinforce_path(base: &SampledPath, params: &Params) -> Result<SampledPath> {
    Reinforcement::new(&base.grid, params)?.apply(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_zero_is_identity() {
        let g = Arc::new(build_grid(1.0, 50, GridScheme::Uniform).unwrap());
        let par = Params::new(0.3, 0.0).unwrap();
        let path = sample_bessel_path(&g, &par, SeedSpec::new(1, 0));
        let r = reinforce_path(&path, &par).unwrap();
        assert_eq!(r.values(), path.values());
        assert!(Arc::ptr_eq(r.grid(), path.grid()));
        assert_eq!(r.kind(), PathKind::ReinforcedBessel);
    }

    #[test]
    fn reinforced_values_follow_the_map() {
        let g = Arc::new(build_grid(2.0, 40, GridScheme::Uniform).unwrap());
        let par = Params::new(0.5, -0.5).unwrap();
        let path = sample_bessel_path(&g, &par, SeedSpec::new(3, 9));
        let r = reinforce_path(&path, &par).unwrap();
        assert_eq!(r.values()[0], 0.0);
        for k in 1..g.len() {
            let u = g.times()[k];
            let t = u.powf(0.5);
            assert!((r.times()[k] - t).abs() < 1e-15);
            let want = t.powf(-0.5) * path.values()[k] / 2f64.sqrt();
            assert!((r.values()[k] - want).abs() <= 1e-14 * want.max(1.0));
        }
    }

    #[test]
    fn rejects_double_reinforcement() {
        let g = Arc::new(build_grid(1.0, 10, GridScheme::Uniform).unwrap());
        let par = Params::new(0.5, 0.25).unwrap();
        let path = sample_bessel_path(&g, &par, SeedSpec::new(1, 1));
        let r = reinforce_path(&path, &par).unwrap();
        assert!(reinforce_path(&r, &par).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s = SeedSpec::new(42, 3);
        assert_ne!(s.derive(1), s.derive(2));
        assert_eq!(s.derive(1).stream_index, 3);
    }
}
