//! The Monte Carlo experiments. Each builds a [`StatReport`] whose thresholds
//! all come from the [`TolerancePolicy`] of its configuration.

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{ExperimentConfig, TolerancePolicy};
use super::ensemble::Ensemble;
use super::report::{Check, Record, StatReport};
use super::stats::{
    batch_mean, batch_ranges, batch_statistic, ks_two_sample, linear_fit, mean, skewness, variance,
    Estimate,
};
use crate::error::{Error, Result};
use crate::localtime::{eps_from_step, estimate_l0};
use crate::pathsim::{build_grid, sample_bessel_path, GridScheme, Reinforcement};
use crate::specfun::{self, TestFunction};
use crate::ssmp::{coupled_inverse_check, sample_ssmp_point, size_bias_check, SsmpPoint, XiHat};

const POINT_TAG: u64 = 0x706f_696e;
const NORMAL_TAG: u64 = 0x6e6f_726d;
const COUPLED_TAG: u64 = 0x636f_7570;
const XI_TAG: u64 = 0x7869;
const FUNCTIONAL_TAG: u64 = 0x6675_6e63;

/// An ensemble of paths and an independent set of `(L̂₁, λ̂₁)` draws for one
/// configuration; every Monte Carlo report except the ssmp suite reads from it.
pub struct EnsembleRun {
    pub config: ExperimentConfig,
    pub ensemble: Ensemble,
    pub points: Vec<SsmpPoint>,
    pub runtime_s: f64,
}

/// `n_points` independent draws of `(L̂₁, λ̂₁)`.
pub fn sample_points(cfg: &ExperimentConfig, n_points: usize) -> Vec<SsmpPoint> {
    let seed = cfg.seed.derive(POINT_TAG);
    let dl = cfg.estimator.level_step;
    (0..n_points as u64)
        .into_par_iter()
        .map(|i| sample_ssmp_point(&cfg.params, dl, &mut seed.with_stream(i).rng()))
        .collect()
}

fn rel_budget(tol: f64, reference: f64) -> f64 {
    tol * reference.abs()
}

fn within(
    tol: &TolerancePolicy,
    name: String,
    est: Estimate,
    reference: f64,
    prov: String,
    rel: f64,
) -> Record {
    Record::within(
        name,
        est,
        reference,
        prov,
        tol.se_multiplier,
        rel_budget(rel, reference),
    )
}

impl EnsembleRun {
    pub fn simulate(cfg: &ExperimentConfig) -> Result<Self> {
        let start = Instant::now();
        let ensemble = Ensemble::simulate(cfg)?;
        let points = if cfg.n_paths == 0 {
            Vec::new()
        } else {
            sample_points(cfg, cfg.ssmp.n_points)
        };
        Ok(EnsembleRun {
            config: cfg.clone(),
            ensemble,
            points,
            runtime_s: start.elapsed().as_secs_f64(),
        })
    }

    fn new_report(&self, experiment: &str) -> StatReport {
        let mut r = StatReport::new(experiment, self.config.hash(), self.config.seed.master_seed);
        r.runtime_s = self.runtime_s;
        for w in &self.ensemble.warnings {
            r.warn(w.clone());
        }
        if self.ensemble.is_empty() {
            r.warn("no paths simulated");
        }
        r
    }

    fn time_one(&self) -> usize {
        self.config
            .times
            .iter()
            .position(|&t| t == 1.0)
            .expect("validated config has t = 1")
    }

    fn lhat_one(&self) -> Vec<f64> {
        let i = self.time_one();
        self.ensemble.column(|s| s.lhat[i])
    }

    /// Moments of `L̂₁` by the three routes against the closed form, and
    /// `E[λ̂₁^{-α}]` from stable paths against `E[L̂₁]`.
    pub fn moments(&self) -> Result<StatReport> {
        let mut report = self.new_report("moments");
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let cfg = &self.config;
        let tol = &cfg.tolerance;
        let par = cfg.params;
        let i1 = self.time_one();
        let routes: [(&str, Vec<f64>); 3] = [
            ("stieltjes", self.ensemble.column(|s| s.lhat[i1])),
            ("ibp", self.ensemble.column(|s| s.lhat_ibp)),
            ("direct", self.ensemble.column(|s| s.lhat_direct)),
        ];
        for n in 1..=3u32 {
            let reference = specfun::moment_lhat(n, 1.0, &par)?;
            let check = specfun::moment_lhat_via_phi(n, &par)?;
            report.push(Record::at_most(
                format!("reference_cross_check_n{n}"),
                ((reference - check) / reference).abs(),
                1e-10,
                "specfun::moment_lhat vs specfun::moment_lhat_via_phi",
            ));
            for (route, xs) in &routes {
                let pw: Vec<f64> = xs.iter().map(|x| x.powi(n as i32)).collect();
                let est = batch_mean(&pw, cfg.batches);
                let name = format!("E[Lhat_1^{n}] {route}");
                let prov = format!("specfun::moment_lhat(n={n}, t=1)");
                let budget = rel_budget(tol.moment_bias, reference);
                let gated = *route == "stieltjes" && n <= tol.gated_moment_order;
                let check = if gated {
                    Check::Within {
                        se_multiplier: tol.se_multiplier,
                        bias_budget: budget,
                    }
                } else {
                    Check::Info {
                        se_multiplier: tol.se_multiplier,
                        bias_budget: budget,
                    }
                };
                report.push(Record::new(name, est.mean, est.se, reference, prov, check));
            }
        }
        if self.points.is_empty() {
            report.warn("no stable-path samples; bridge not checked");
        } else {
            let a = par.alpha();
            let inv: Vec<f64> = self
                .points
                .iter()
                .map(|p| p.lambda_hat_one.powf(-a))
                .collect();
            let reference = specfun::moment_lhat(1, 1.0, &par)?;
            report.push(within(
                tol,
                "E[lambdahat_1^-alpha]".into(),
                batch_mean(&inv, cfg.batches),
                reference,
                "specfun::moment_lhat(n=1, t=1)".into(),
                tol.bridge_bias,
            ));
        }
        Ok(report)
    }

    /// Agreement of the Stieltjes, IBP and direct routes at `t = 1`, and
    /// disagreement of the plus-sign variant.
    pub fn routes(&self) -> Result<StatReport> {
        let mut report = self.new_report("routes");
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let cfg = &self.config;
        let tol = &cfg.tolerance;
        let stj = self.lhat_one();
        let scale = specfun::moment_lhat(1, 1.0, &cfg.params)?;
        for (name, other) in [
            ("ibp", self.ensemble.column(|s| s.lhat_ibp)),
            ("direct", self.ensemble.column(|s| s.lhat_direct)),
        ] {
            let diff: Vec<f64> = other.iter().zip(&stj).map(|(a, b)| a - b).collect();
            report.push(Record::within(
                format!("mean {name} - stieltjes"),
                batch_mean(&diff, cfg.batches),
                0.0,
                format!("0, with budget relative to specfun::moment_lhat(n=1, t=1) = {scale:.6}"),
                tol.se_multiplier,
                2.0 * rel_budget(tol.route_bias, scale),
            ));
        }
        let gap = self
            .ensemble
            .paths
            .iter()
            .map(|s| s.ibp_sup_rel)
            .fold(0.0, f64::max);
        report.push(Record::at_most(
            "max sup-norm gap ibp vs stieltjes",
            gap,
            tol.ibp_sup_rel,
            "pathwise identity of the two forms",
        ));
        if cfg.params.p() == 0.0 {
            report.warn("the plus-sign variant coincides with the others at p = 0");
        } else {
            let plus = self.ensemble.column(|s| s.lhat_ibp_plus);
            let m = mean(&stj);
            report.push(Record::at_least(
                "plus-sign variant relative gap",
                (mean(&plus) - m).abs() / m,
                tol.ibp_plus_min_gap,
                "regression fixture: must differ from the Stieltjes route",
            ));
        }
        Ok(report)
    }

    /// `n^{-α}∫_0^n f(R̂)ds` at the largest `n` and independent draws of its
    /// limit `c₁ L̂₁`: the two samples of the first-order KS test.
    pub fn first_order_samples(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let c1 = first_order_constant(&cfg.scaling.first_order, cfg)?;
        let last = cfg.scaling.n_list.len() - 1;
        let x = self.ensemble.column(|s| s.first_order[last]);
        let y = self.points.iter().map(|p| c1 * p.lhat_one).collect();
        Ok((x, y))
    }

    /// `X_n` at the largest `n` and independent draws of `Z √(c₂ L̂₁)`.
    pub fn second_order_samples(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let c2 = second_order_constant(&cfg.scaling.second_order, cfg)?;
        let last = cfg.scaling.n_list.len() - 1;
        let x = self.ensemble.column(|s| s.second_order[last]);
        let mut rng = cfg.seed.derive(NORMAL_TAG).rng();
        let y = self
            .points
            .iter()
            .map(|p| {
                let z: f64 = rng.sample(StandardNormal);
                z * (c2 * p.lhat_one).sqrt()
            })
            .collect();
        Ok((x, y))
    }

    /// Coupled first-order scaling limit with the configured test function.
    pub fn scaling_i(&self) -> Result<StatReport> {
        let mut report = self.new_report("scaling_limit_i");
        let cfg = &self.config;
        let f = &cfg.scaling.first_order;
        let c1 = first_order_constant(f, cfg)?;
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let tol = &cfg.tolerance;
        let lhat = self.lhat_one();
        let mut means = Vec::new();
        for (i, n) in cfg.scaling.n_list.iter().enumerate() {
            let d: Vec<f64> = self
                .ensemble
                .paths
                .iter()
                .zip(&lhat)
                .map(|(s, l)| (s.first_order[i] - c1 * l).abs())
                .collect();
            let est = batch_mean(&d, cfg.batches);
            means.push(est.mean);
            report.push(Record::report(
                format!("mean D_n n={n}"),
                est.mean,
                est.se,
                "coupled L1 distance",
            ));
        }
        report.push(Record::holds(
            "mean D_n strictly decreasing",
            means.windows(2).all(|w| w[1] < w[0]),
            "the coupled distance tends to 0",
        ));
        if f.is_identically_zero() {
            return Ok(report);
        }
        if self.points.is_empty() {
            report.warn("no independent L̂₁ samples; KS not run");
            return Ok(report);
        }
        let (x, y) = self.first_order_samples()?;
        let ks = ks_two_sample(&x, &y)?;
        report.push(Record::report(
            "KS statistic",
            ks.statistic,
            0.0,
            "two-sample KS",
        ));
        report.push(Record::at_least(
            "KS p-value vs c1 Lhat_1",
            ks.p_value,
            tol.ks_min_p,
            format!("c1 = specfun::c1 = {c1:.6} times independent L̂₁ draws"),
        ));
        Ok(report)
    }

    /// Second-order scaling limit: mixed-normal limit `Z √(c₂ L̂₁)`.
    pub fn scaling_ii(&self) -> Result<StatReport> {
        let mut report = self.new_report("scaling_limit_ii");
        let cfg = &self.config;
        let c2 = second_order_constant(&cfg.scaling.second_order, cfg)?;
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let tol = &cfg.tolerance;
        for (i, n) in cfg.scaling.n_list.iter().enumerate() {
            let x = self.ensemble.column(|s| s.second_order[i]);
            report.push(Record::report(
                format!("skewness X_n n={n}"),
                skewness(&x),
                0.0,
                "tends to 0",
            ));
        }
        let last = cfg.scaling.n_list.len() - 1;
        let x = self.ensemble.column(|s| s.second_order[last]);
        let mean_x = batch_mean(&x, cfg.batches);
        report.push(Record::within(
            "mean X_n",
            mean_x,
            0.0,
            "0 by symmetry of the mixed-normal limit",
            tol.se_multiplier,
            0.0,
        ));
        let finite_n = specfun::mean_second_order_functional(
            &cfg.scaling.second_order,
            cfg.scaling.n_list[last],
            &cfg.params,
        )?;
        report.push(Record::new(
            "mean X_n vs its exact finite-n value",
            mean_x.mean,
            mean_x.se,
            finite_n,
            "specfun::mean_second_order_functional; decays like n^(-alpha/2)",
            Check::Info {
                se_multiplier: tol.se_multiplier,
                bias_budget: 0.0,
            },
        ));
        let m1 = specfun::moment_lhat(1, 1.0, &cfg.params)?;
        report.push(within(
            tol,
            "Var X_n".into(),
            batch_statistic(&x, cfg.batches, variance),
            c2 * m1,
            format!("specfun::c2 = {c2:.6} times specfun::moment_lhat(n=1, t=1)"),
            tol.variance_bias,
        ));
        if self.points.is_empty() {
            report.warn("no independent L̂₁ samples; KS not run");
            return Ok(report);
        }
        let (_, y) = self.second_order_samples()?;
        let ks = ks_two_sample(&x, &y)?;
        report.push(Record::report(
            "KS statistic",
            ks.statistic,
            0.0,
            "two-sample KS",
        ));
        report.push(Record::at_least(
            "KS p-value vs Z sqrt(c2 Lhat_1)",
            ks.p_value,
            tol.ks_min_p,
            "independent normal times independent L̂₁ draws",
        ));
        Ok(report)
    }

    /// Occupation identity, mean surface at fixed levels, and the `x → 0` trend.
    pub fn occupation(&self) -> Result<StatReport> {
        let mut report = self.new_report("occupation");
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let cfg = &self.config;
        let tol = &cfg.tolerance;
        let par = cfg.params;
        let occ = mean(&self.ensemble.column(|s| s.occupation));
        let dens = mean(&self.ensemble.column(|s| s.occupation_from_density));
        let (a, b) = cfg.estimator.occupation_interval;
        report.push(Record::at_most(
            format!("occupation residual on [{a}, {b}]"),
            if occ > 0.0 {
                (dens - occ).abs() / occ
            } else {
                f64::INFINITY
            },
            tol.occupation_residual,
            "occupation density formula, midpoint rule in x",
        ));
        let level_index = |x: f64| self.ensemble.levels.iter().position(|&l| l == x);
        for &x in &cfg.estimator.surface_levels {
            let i = level_index(x).expect("surface level is a band level");
            let est = batch_mean(&self.ensemble.column(|s| s.bands[i]), cfg.batches);
            let reference = specfun::mean_two_param_local_time(x, 1.0, &par)?;
            report.push(within(
                tol,
                format!("E[Lhat^x_1] x={x}"),
                est,
                reference,
                format!("specfun::mean_two_param_local_time(x={x}, t=1)"),
                tol.surface_bias,
            ));
        }
        let lhat = self.lhat_one();
        let mut dist = Vec::new();
        for &x in &cfg.estimator.small_levels {
            let i = level_index(x).expect("small level is a band level");
            let d: Vec<f64> = self
                .ensemble
                .paths
                .iter()
                .zip(&lhat)
                .map(|(s, l)| (s.bands[i] - l).abs())
                .collect();
            let est = batch_mean(&d, cfg.batches);
            dist.push(est.mean);
            report.push(Record::report(
                format!("E|Lhat^x_1 - Lhat_1| x={x}"),
                est.mean,
                est.se,
                "L1 distance",
            ));
        }
        report.push(Record::holds(
            "E|Lhat^x_1 - Lhat_1| decreasing as x decreases",
            dist.windows(2).all(|w| w[1] < w[0]),
            "convergence in L1 as x → 0",
        ));
        Ok(report)
    }

    /// Slope of `log E[L̂_t]` against `log t`, which should equal `α`.
    pub fn self_similarity(&self) -> Result<StatReport> {
        let mut report = self.new_report("self_similarity");
        if self.ensemble.is_empty() {
            return Ok(report);
        }
        let cfg = &self.config;
        let times = &cfg.times;
        if times.len() < 2 {
            report.warn("fewer than two times; no slope to fit");
            return Ok(report);
        }
        let lt: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let slope = |range: std::ops::Range<usize>| -> f64 {
            let lm: Vec<f64> = (0..times.len())
                .map(|i| {
                    mean(
                        &self.ensemble.paths[range.clone()]
                            .iter()
                            .map(|s| s.lhat[i])
                            .collect::<Vec<_>>(),
                    )
                    .ln()
                })
                .collect();
            linear_fit(&lt, &lm).0
        };
        let n = self.ensemble.len();
        let per: Vec<f64> = batch_ranges(n, cfg.batches)
            .into_iter()
            .map(slope)
            .collect();
        let se = if per.len() > 1 {
            (variance(&per) / per.len() as f64).sqrt()
        } else {
            f64::INFINITY
        };
        for (i, t) in times.iter().enumerate() {
            let est = batch_mean(&self.ensemble.column(|s| s.lhat[i]), cfg.batches);
            report.push(Record::report(
                format!("E[Lhat_t] t={t}"),
                est.mean,
                est.se,
                "log-log fit input",
            ));
        }
        report.push(Record::new(
            "log-log slope of E[Lhat_t]",
            slope(0..n),
            se,
            cfg.params.alpha(),
            "alpha, the self-similarity index",
            Check::Within {
                se_multiplier: cfg.tolerance.se_multiplier,
                bias_budget: cfg.tolerance.exponent_tol,
            },
        ));
        Ok(report)
    }
}

fn first_order_constant(f: &TestFunction, cfg: &ExperimentConfig) -> Result<f64> {
    let c1 = specfun::c1(f, &cfg.params)?;
    if c1 == 0.0 && !f.is_identically_zero() {
        return Err(Error::Domain(
            "c1(f) = 0; use the second-order limit".into(),
        ));
    }
    Ok(c1)
}

fn second_order_constant(f: &TestFunction, cfg: &ExperimentConfig) -> Result<f64> {
    if f.support_end().is_none() {
        return Err(Error::Domain(
            "the second-order limit needs compact support".into(),
        ));
    }
    specfun::c2(f, &cfg.params)
}

/// Moments of `L̂₁` by every route, plus the `λ̂₁^{-α}` bridge.
pub fn run_moment_experiment(cfg: &ExperimentConfig) -> Result<StatReport> {
    EnsembleRun::simulate(cfg)?.moments()
}

/// Coupled first-order limit for `f`, along `cfg.scaling.n_list`.
pub fn run_scaling_limit_i(f: &TestFunction, cfg: &ExperimentConfig) -> Result<StatReport> {
    let mut cfg = cfg.clone();
    first_order_constant(f, &cfg)?;
    cfg.scaling.first_order = f.clone();
    EnsembleRun::simulate(&cfg)?.scaling_i()
}

/// Mixed-normal limit for a centred, compactly supported `f`.
pub fn run_scaling_limit_ii(f: &TestFunction, cfg: &ExperimentConfig) -> Result<StatReport> {
    let mut cfg = cfg.clone();
    second_order_constant(f, &cfg)?;
    cfg.scaling.second_order = f.clone();
    EnsembleRun::simulate(&cfg)?.scaling_ii()
}

pub fn run_occupation_suite(cfg: &ExperimentConfig) -> Result<StatReport> {
    EnsembleRun::simulate(cfg)?.occupation()
}

/// The inverse local time as a self-similar Markov process: the coupled
/// pathwise inverse, the Laplace transform of `ξ̂₁`, the mean of the
/// exponential functional and the size-bias identity.
pub fn run_ssmp_suite(cfg: &ExperimentConfig) -> Result<StatReport> {
    cfg.validate()?;
    let start = Instant::now();
    let par = cfg.params;
    let tol = &cfg.tolerance;
    let sp = &cfg.ssmp;
    let mut report = StatReport::new("ssmp", cfg.hash(), cfg.seed.master_seed);

    if sp.coupled_paths > 0 {
        let scheme =
            GridScheme::refined_near_zero(1.0, sp.coupled_steps, cfg.grid.refine_fraction)?;
        let grid = Arc::new(build_grid(1.0, sp.coupled_steps, scheme)?);
        let map = Reinforcement::new(&grid, &par)?;
        let eps = eps_from_step(grid.bulk_step(), cfg.estimator.eps_exponent);
        let seed = cfg.seed.derive(COUPLED_TAG);
        let base = par.unreinforced();
        let checks = (0..sp.coupled_paths as u64)
            .into_par_iter()
            .map(|i| {
                let path = sample_bessel_path(&grid, &base, seed.with_stream(i));
                let l = estimate_l0(&path, &par, eps)?.path;
                if l.terminal() == 0.0 {
                    return Ok(None);
                }
                coupled_inverse_check(
                    &l,
                    &map,
                    sp.coupled_levels,
                    sp.coupled_points,
                    tol.coupled_rel_tol,
                )
                .map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        let done: Vec<_> = checks.into_iter().flatten().collect();
        if done.len() < sp.coupled_paths {
            report.warn(format!(
                "{} paths never reached 0 and were skipped",
                sp.coupled_paths - done.len()
            ));
        }
        let bad = done.iter().filter(|c| !c.holds()).count();
        let worst = done.iter().map(|c| c.worst_excess).fold(0.0, f64::max);
        report.push(Record::report(
            "coupled inverse: paths checked",
            done.len() as f64,
            0.0,
            "count",
        ));
        report.push(Record::report(
            "coupled inverse: worst excess",
            worst,
            0.0,
            "time units beyond the bracket",
        ));
        report.push(Record::at_most(
            "coupled inverse: paths with violations",
            bad as f64,
            0.0,
            "pathwise time-change formula for the inverse local time",
        ));
    }

    if sp.n_xi > 0 {
        let xi = XiHat::with_second_moment_tol(&par, cfg.estimator.xi_second_moment_tol)?;
        let seed = cfg.seed.derive(XI_TAG);
        let ends: Vec<f64> = (0..sp.n_xi as u64)
            .into_par_iter()
            .map(|i| xi.sample_value(1.0, &mut seed.with_stream(i).rng()))
            .collect();
        for &r in &sp.laplace_r {
            let e: Vec<f64> = ends.iter().map(|x| (-r * x).exp()).collect();
            let reference = (-specfun::laplace_exponent_hat(r, &par)?).exp();
            report.push(Record::within(
                format!("E[exp(-r xi_1)] r={r}"),
                batch_mean(&e, cfg.batches),
                reference,
                format!("exp(-specfun::laplace_exponent_hat(r={r}))"),
                tol.se_multiplier,
                xi.laplace_budget(r)?,
            ));
        }
        let seed = cfg.seed.derive(FUNCTIONAL_TAG);
        let tail = cfg.estimator.xi_tail_rel;
        let fs: Vec<_> = (0..sp.n_xi as u64)
            .into_par_iter()
            .map(|i| xi.sample_exponential_functional(tail, &mut seed.with_stream(i).rng()))
            .collect();
        let open = fs.iter().filter(|f| !f.converged(tail)).count();
        if open > 0 {
            report.warn(format!(
                "{open} exponential functionals stopped before their tail fell below {tail:e}"
            ));
        }
        let i_samples: Vec<f64> = fs.iter().map(|f| f.value).collect();
        let reference = 1.0 / specfun::laplace_exponent_hat(par.alpha(), &par)?;
        report.push(Record::within(
            "E[I]",
            batch_mean(&i_samples, cfg.batches),
            reference,
            "1 / specfun::laplace_exponent_hat(r=alpha)",
            tol.se_multiplier,
            xi.mean_functional_budget()?,
        ));
        let lhat: Vec<f64> = sample_points(cfg, sp.n_points)
            .iter()
            .map(|p| p.lhat_one)
            .collect();
        let fns = [
            ("1[0,1]", TestFunction::indicator(0.0, 1.0)?),
            ("min(x,2)", TestFunction::min_with(2.0)?),
        ];
        for (label, f) in &fns {
            let sub = size_bias_check(&i_samples, &lhat, f, &par, tol.se_multiplier);
            for w in sub.warnings {
                report.warn(w);
            }
            report.extend(sub.records.into_iter().map(|mut r| {
                r.name = format!("{} f={label}", r.name);
                r
            }));
        }
    }
    if report.records.is_empty() {
        report.warn("nothing to check: no coupled paths and no samples");
    }
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::Params;

    fn tiny(a: f64, p: f64) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Params::new(a, p).unwrap());
        c.grid.n_steps = 20_000;
        c.n_paths = 40;
        c.ssmp.n_points = 40;
        c.batches = 10;
        c
    }

    #[test]
    fn ssmp_suite_runs_small() {
        let mut c = tiny(0.5, 0.25);
        c.ssmp.coupled_paths = 4;
        c.ssmp.coupled_steps = 5000;
        c.ssmp.coupled_levels = 5000;
        c.ssmp.n_xi = 200;
        c.batches = 10;
        let r = run_ssmp_suite(&c).unwrap();
        assert!(
            r.record("coupled inverse: paths with violations")
                .unwrap()
                .pass
        );
        assert!(r.record("E[I]").is_some());
        assert!(r.record("size_bias f=1[0,1]").is_some());
        assert!(!r
            .record("size_bias_printed_constant f=1[0,1]")
            .unwrap()
            .check
            .gates());
        c.ssmp.coupled_paths = 0;
        c.ssmp.n_xi = 0;
        let r = run_ssmp_suite(&c).unwrap();
        assert!(!r.pass && r.records.is_empty());
    }

    #[test]
    fn zero_paths_give_empty_failing_report() {
        let mut c = tiny(0.5, 0.0);
        c.n_paths = 0;
        let r = run_moment_experiment(&c).unwrap();
        assert!(r.records.is_empty());
        assert!(!r.pass);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn zero_function_has_zero_distance() {
        let c = tiny(0.5, 0.25);
        let r = run_scaling_limit_i(&TestFunction::zero(), &c).unwrap();
        for rec in r.records.iter().filter(|r| r.name.starts_with("mean D_n")) {
            assert_eq!(rec.estimate, 0.0);
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let c = tiny(0.5, 0.0);
        assert!(run_scaling_limit_i(&TestFunction::signed_bump(0.5), &c).is_err());
        let ind = TestFunction::indicator(0.0, 1.0).unwrap();
        assert!(run_scaling_limit_ii(&ind, &c).is_err());
        assert!(run_scaling_limit_ii(&TestFunction::min_with(2.0).unwrap(), &c).is_err());
    }

    #[test]
    fn reports_are_reproducible_and_carry_the_hash() {
        let c = tiny(0.3, 0.25);
        let a = EnsembleRun::simulate(&c).unwrap();
        let b = EnsembleRun::simulate(&c).unwrap();
        for (x, y) in [
            (a.moments().unwrap(), b.moments().unwrap()),
            (a.occupation().unwrap(), b.occupation().unwrap()),
            (a.scaling_ii().unwrap(), b.scaling_ii().unwrap()),
        ] {
            assert_eq!(x.records, y.records);
            assert_eq!(x.config_hash, c.hash());
        }
        let m = a.moments().unwrap();
        assert!(m
            .records
            .iter()
            .any(|r| r.name == "E[Lhat_1^1] stieltjes" && r.check.gates()));
        assert!(m
            .records
            .iter()
            .any(|r| r.name == "E[Lhat_1^3] stieltjes" && !r.check.gates()));
        let s = a.self_similarity().unwrap();
        assert!(s.record("log-log slope of E[Lhat_t]").is_some());
    }
}
