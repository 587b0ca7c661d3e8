//! One pass per path over the base sample, producing every per-path number
//! the reports need. The library operations in `localtime` are the
//! reference; the tests below hold this kernel to them.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::localtime::{band_of, band_weight, eps_from_step, estimate_l0, ReinforcedLocalTime};
use crate::pathsim::{
    build_grid, sample_bessel_path, GridScheme, Reinforcement, SampledPath, TimeGrid,
};
use crate::specfun::TestFunction;

const PATH_TAG: u64 = 0x7061_7468;

/// Per-path values, all at reinforced time 1 unless stated.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    /// Stieltjes-route `L̂_t` at each configured time.
    pub lhat: Vec<f64>,
    pub lhat_ibp: f64,
    pub lhat_ibp_plus: f64,
    pub lhat_direct: f64,
    /// Sup-norm gap between the IBP and Stieltjes routes, relative to the latter.
    pub ibp_sup_rel: f64,
    /// `n^{1-α} ∫_0^1 f(√n R̂_u) du` for each `n`, first-order test function.
    pub first_order: Vec<f64>,
    /// `n^{1-α/2} ∫_0^1 f(√n R̂_u) du` for each `n`, second-order test function.
    pub second_order: Vec<f64>,
    /// Band estimates of `L̂^x_1` at the configured levels.
    pub bands: Vec<f64>,
    /// `∫_0^1 1{a ≤ R̂ ≤ b} du`.
    pub occupation: f64,
    /// `α^{-1} Σ_i L̂^{x_i}_1 x_i^{1-2α} Δx` over cells tiling `[a, b]`.
    pub occupation_from_density: f64,
}

/// Everything fixed across the paths of one configuration.
pub struct Kernel {
    cfg: ExperimentConfig,
    base: Arc<TimeGrid>,
    map: Reinforcement,
    routes: ReinforcedLocalTime,
    eps: f64,
    time_index: Vec<usize>,
    one: usize,
    levels: Vec<f64>,
    level_norm: Vec<f64>,
    sqrt_n: Vec<f64>,
    cell_weight: Vec<f64>,
    cutoff: f64,
}

fn scaled_support(f: &TestFunction) -> f64 {
    f.support_end().unwrap_or(f64::INFINITY)
}

impl Kernel {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let par = cfg.params;
        let horizon = cfg.horizon();
        let scheme =
            GridScheme::refined_near_zero(horizon, cfg.grid.n_steps, cfg.grid.refine_fraction)?;
        let base = Arc::new(build_grid(horizon, cfg.grid.n_steps, scheme)?);
        let map = Reinforcement::new(&base, &par)?;
        let routes = ReinforcedLocalTime::new(&map)?;
        let eps = eps_from_step(base.bulk_step(), cfg.estimator.eps_exponent);
        let t = map.grid();
        let time_index = cfg.times.iter().map(|&s| t.index_at_or_before(s)).collect();
        let one = t.index_at_or_before(1.0);
        let a = par.alpha();
        let w = cfg.estimator.bandwidth;
        let levels = cfg.band_levels();
        let level_norm = levels.iter().map(|&x| a / band_weight(x, w, a)).collect();
        let sqrt_n: Vec<f64> = cfg.scaling.n_list.iter().map(|n| n.sqrt()).collect();
        let (lo, hi) = cfg.estimator.occupation_interval;
        let cells = cfg.estimator.occupation_cells;
        let dx = (hi - lo) / cells as f64;
        let cell_weight = (0..cells)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * dx;
                x.powf(1.0 - 2.0 * a) * dx / band_weight(x, 0.5 * dx, a)
            })
            .collect();
        let n_min = sqrt_n.iter().copied().fold(f64::INFINITY, f64::min);
        let support =
            scaled_support(&cfg.scaling.first_order).max(scaled_support(&cfg.scaling.second_order));
        let cutoff = [eps, levels.last().unwrap() + w, hi, support / n_min]
            .into_iter()
            .fold(0.0, f64::max);
        Ok(Kernel {
            cfg: cfg.clone(),
            base,
            map,
            routes,
            eps,
            time_index,
            one,
            levels,
            level_norm,
            sqrt_n,
            cell_weight,
            cutoff,
        })
    }

    pub fn base_grid(&self) -> &Arc<TimeGrid> {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Levels of [`PathSummary::bands`], sorted.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn summarize(&self, path: &SampledPath) -> Result<PathSummary> {
        if !Arc::ptr_eq(path.grid(), &self.base) && **path.grid() != *self.base {
            return Err(Error::Input("path is not on the ensemble grid".into()));
        }
        let cfg = &self.cfg;
        let par = cfg.params;
        let a = par.alpha();
        let r = path.values();
        let l = estimate_l0(path, &par, self.eps)?.path;
        let mut at = self.time_index.clone();
        at.push(self.one);
        let routes = self.routes.routes_at(l.values(), &at)?;
        let m = self.time_index.len();

        let t = self.map.grid().times();
        let fac = self.map.factor();
        let f1 = &cfg.scaling.first_order;
        let f2 = &cfg.scaling.second_order;
        let (s1, s2) = (scaled_support(f1), scaled_support(f2));
        let nn = self.sqrt_n.len();
        let mut first = vec![0.0; nn];
        let mut second = vec![0.0; nn];
        let mut bands = vec![0.0; self.levels.len()];
        let (lo, hi) = cfg.estimator.occupation_interval;
        let cells = self.cell_weight.len();
        let dx = (hi - lo) / cells as f64;
        let mut cell_occ = vec![0.0; cells];
        let (mut direct, mut occ) = (0.0, 0.0);
        let w = cfg.estimator.bandwidth;
        let band_lo = self.levels[0] - w;
        for k in 1..=self.one {
            let x = r[k] * fac[k];
            if x > self.cutoff {
                continue;
            }
            let dt = t[k] - t[k - 1];
            if x <= self.eps {
                direct += dt;
            }
            for (i, &sq) in self.sqrt_n.iter().enumerate() {
                let y = sq * x;
                if y < s1 {
                    first[i] += f1.eval(y) * dt;
                }
                if y < s2 {
                    second[i] += f2.eval(y) * dt;
                }
            }
            if x >= band_lo {
                if let Some(i) = band_of(&self.levels, w, x) {
                    bands[i] += dt;
                }
            }
            if x >= lo && x <= hi {
                occ += dt;
                let c = (((x - lo) / dx) as usize).min(cells - 1);
                cell_occ[c] += dt;
            }
        }
        for (i, n) in cfg.scaling.n_list.iter().enumerate() {
            first[i] *= n.powf(1.0 - a);
            second[i] *= n.powf(1.0 - 0.5 * a);
        }
        for (b, norm) in bands.iter_mut().zip(&self.level_norm) {
            *b *= norm;
        }
        let occupation_from_density = cell_occ
            .iter()
            .zip(&self.cell_weight)
            .map(|(o, c)| o * c)
            .sum();
        Ok(PathSummary {
            lhat: routes.stieltjes[..m].to_vec(),
            lhat_ibp: routes.ibp[m],
            lhat_ibp_plus: routes.ibp_plus[m],
            lhat_direct: 2.0 * a * (1.0 - a) * self.eps.powf(2.0 * a - 2.0) * direct,
            ibp_sup_rel: routes.sup_rel_gap,
            first_order: first,
            second_order: second,
            bands,
            occupation: occ,
            occupation_from_density,
        })
    }
}

/// Summaries of `cfg.n_paths` independent paths, in path order.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub eps: f64,
    pub bulk_step: f64,
    pub levels: Vec<f64>,
    pub paths: Vec<PathSummary>,
    pub warnings: Vec<String>,
}

impl Ensemble {
    pub fn simulate(cfg: &ExperimentConfig) -> Result<Self> {
        let kernel = Kernel::new(cfg)?;
        let seed = cfg.seed.derive(PATH_TAG);
        let base_params = cfg.params.unreinforced();
        let paths = (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let path = sample_bessel_path(&kernel.base, &base_params, seed.with_stream(i));
                kernel.summarize(&path)
            })
            .collect::<Result<Vec<_>>>()?;
        let h = kernel.base.bulk_step();
        let mut warnings = Vec::new();
        if h > kernel.eps * kernel.eps {
            warnings.push(format!(
                "grid step {h:.3e} exceeds eps^2; occupation bias is not controlled"
            ));
        }
        let finest = cfg.scaling.n_list.iter().copied().fold(0.0, f64::max);
        if h > 1.0 / finest {
            warnings.push(format!(
                "grid step {h:.3e} does not resolve the scale 1/n = {:.3e}",
                1.0 / finest
            ));
        }
        Ok(Ensemble {
            eps: kernel.eps,
            bulk_step: h,
            levels: kernel.levels.clone(),
            paths,
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn column<F: Fn(&PathSummary) -> f64>(&self, f: F) -> Vec<f64> {
        self.paths.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localtime::{estimate_lhat_direct, occupation_time, two_param_local_time_at};
    use crate::pathsim::{reinforce_path, SeedSpec};
    use crate::specfun::Params;

    fn small(p: f64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Params::new(0.4, p).unwrap());
        c.grid.n_steps = 20_000;
        c.n_paths = 3;
        c
    }

    #[test]
    fn kernel_matches_library_operations() {
        for &p in &[-0.5, 0.0, 0.25] {
            let cfg = small(p);
            let k = Kernel::new(&cfg).unwrap();
            let par = cfg.params;
            let path = sample_bessel_path(k.base_grid(), &par.unreinforced(), SeedSpec::new(9, 2));
            let s = k.summarize(&path).unwrap();

            let l = estimate_l0(&path, &par, k.eps()).unwrap().path;
            let rlt = ReinforcedLocalTime::new(&k.map).unwrap();
            let stj = rlt.stieltjes(&l).unwrap();
            let ibp = rlt.ibp(&l).unwrap();
            let g = k.map.grid();
            for (i, &t) in cfg.times.iter().enumerate() {
                assert_eq!(s.lhat[i], stj.values()[g.index_at_or_before(t)]);
            }
            assert_eq!(s.lhat_ibp, ibp.values()[k.one]);

            let rhat = reinforce_path(&path, &par).unwrap();
            let direct = estimate_lhat_direct(&rhat, &par, k.eps()).unwrap().path;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            assert!(rel(s.lhat_direct, direct.values()[k.one]) < 1e-12);

            let bands =
                two_param_local_time_at(&rhat, &par, k.levels(), cfg.estimator.bandwidth, 1.0)
                    .unwrap();
            for (a, b) in s.bands.iter().zip(&bands) {
                assert!((a - b).abs() <= 1e-12 * b.abs());
            }
            let (lo, hi) = cfg.estimator.occupation_interval;
            assert!((s.occupation - occupation_time(&rhat, lo, hi, 1.0)).abs() < 1e-12);

            let times = g.times();
            for (i, &n) in cfg.scaling.n_list.iter().enumerate() {
                let mut want = 0.0;
                for j in 1..=k.one {
                    want += cfg.scaling.first_order.eval(n.sqrt() * rhat.values()[j])
                        * (times[j] - times[j - 1]);
                }
                assert!(rel(s.first_order[i], want * n.powf(1.0 - par.alpha())) < 1e-12);
            }
        }
    }

    #[test]
    fn density_side_matches_occupation_at_half() {
        // at α = 1/2 the weight is flat and the two sides coincide
        let mut cfg = small(0.25);
        cfg.params = Params::new(0.5, 0.25).unwrap();
        cfg.scaling.second_order = TestFunction::signed_bump(0.5);
        let ens = Ensemble::simulate(&cfg).unwrap();
        for s in &ens.paths {
            assert!(
                (s.occupation - s.occupation_from_density).abs() <= 1e-12 * s.occupation.max(1.0)
            );
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let cfg = small(0.25);
        let a = Ensemble::simulate(&cfg).unwrap();
        let b = Ensemble::simulate(&cfg).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.len(), 3);
        assert_ne!(a.paths[0], a.paths[1]);
    }
}
