//! CSV series for external plotting.

use rbessel::harness::stats::{batch_mean, mean};
use rbessel::harness::{EnsembleRun, StatReport};
use rbessel::specfun;

use crate::output::Table;

/// What a plot series shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `E[L̂_t]` against `t` with the closed form; log-log slope is `α`.
    MomentScaling,
    /// Empirical CDFs of the two KS samples on their pooled support.
    CdfOverlay,
    /// `E[L̂^x_1]` at the band levels with the closed form.
    SurfaceSlice,
    /// Mean coupled distance `D_n` along the `n` list.
    DnDecay,
}

pub fn moment_scaling(run: &EnsembleRun) -> rbessel::Result<Table> {
    let cfg = &run.config;
    let mut t = Table::new(["t", "mean_Lhat", "se", "reference"]);
    let mut order: Vec<usize> = (0..cfg.times.len()).collect();
    order.sort_by(|&a, &b| cfg.times[a].total_cmp(&cfg.times[b]));
    for i in order {
        let est = batch_mean(&run.ensemble.column(|s| s.lhat[i]), cfg.batches);
        let reference = specfun::moment_lhat(1, cfg.times[i], &cfg.params)?;
        t.push(vec![cfg.times[i], est.mean, est.se, reference]);
    }
    Ok(t)
}

/// Both empirical CDFs evaluated at every point of either sample.
pub fn cdf_overlay(sample: &[f64], reference: &[f64]) -> Table {
    let mut a = sample.to_vec();
    let mut b = reference.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut xs: Vec<f64> = a.iter().chain(&b).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut t = Table::new(["x", "F_empirical", "F_reference"]);
    let cdf = |s: &[f64], x: f64| {
        if s.is_empty() {
            f64::NAN
        } else {
            s.partition_point(|&v| v <= x) as f64 / s.len() as f64
        }
    };
    for x in xs {
        t.push(vec![x, cdf(&a, x), cdf(&b, x)]);
    }
    t
}

pub fn surface_slice(run: &EnsembleRun) -> rbessel::Result<Table> {
    let cfg = &run.config;
    let mut t = Table::new(["x", "E_Lhat_x_1", "se", "reference"]);
    for (i, &x) in cfg.band_levels().iter().enumerate() {
        let est = batch_mean(&run.ensemble.column(|s| s.bands[i]), cfg.batches);
        let reference = specfun::mean_two_param_local_time(x, 1.0, &cfg.params)?;
        t.push(vec![x, est.mean, est.se, reference]);
    }
    Ok(t)
}

/// Read off the first-order report, which holds one record per `n`.
pub fn dn_decay(run: &EnsembleRun, report: &StatReport) -> Table {
    let mut t = Table::new(["n", "mean_D_n", "se"]);
    for &n in &run.config.scaling.n_list {
        if let Some(r) = report.record(&format!("mean D_n n={n}")) {
            t.push(vec![n, r.estimate, r.standard_error]);
        }
    }
    t
}

/// One row per path with every per-path quantity of the ensemble.
pub fn ensemble_samples(run: &EnsembleRun) -> Table {
    let cfg = &run.config;
    let mut header: Vec<String> = cfg.times.iter().map(|t| format!("lhat_t={t}")).collect();
    header.extend(["lhat_ibp", "lhat_ibp_plus", "lhat_direct", "ibp_sup_rel"].map(String::from));
    header.extend(
        cfg.scaling
            .n_list
            .iter()
            .map(|n| format!("first_order_n={n}")),
    );
    header.extend(
        cfg.scaling
            .n_list
            .iter()
            .map(|n| format!("second_order_n={n}")),
    );
    header.extend(cfg.band_levels().iter().map(|x| format!("lhat_x={x}")));
    header.extend(["occupation", "occupation_from_density"].map(String::from));
    let mut t = Table::new(header);
    for s in &run.ensemble.paths {
        let mut row = s.lhat.clone();
        row.extend([s.lhat_ibp, s.lhat_ibp_plus, s.lhat_direct, s.ibp_sup_rel]);
        row.extend(&s.first_order);
        row.extend(&s.second_order);
        row.extend(&s.bands);
        row.extend([s.occupation, s.occupation_from_density]);
        t.push(row);
    }
    t
}

pub fn point_samples(run: &EnsembleRun) -> Table {
    let mut t = Table::new(["lhat_one", "lambda_hat_one"]);
    for p in &run.points {
        t.push(vec![p.lhat_one, p.lambda_hat_one]);
    }
    t
}

/// The tables of one kind, with their file names.
pub fn emit_plot_data(
    run: &EnsembleRun,
    kind: PlotKind,
    first_order: Option<&StatReport>,
) -> rbessel::Result<Vec<(String, Table)>> {
    Ok(match kind {
        PlotKind::MomentScaling => vec![("moment_scaling.csv".into(), moment_scaling(run)?)],
        PlotKind::SurfaceSlice => vec![("surface_slice.csv".into(), surface_slice(run)?)],
        PlotKind::DnDecay => first_order
            .map(|r| vec![("dn_decay.csv".into(), dn_decay(run, r))])
            .unwrap_or_default(),
        PlotKind::CdfOverlay => {
            let mut v = Vec::new();
            if !run.points.is_empty() && !run.ensemble.is_empty() {
                let (x, y) = run.first_order_samples()?;
                if mean(&y) != 0.0 {
                    v.push(("cdf_first_order.csv".into(), cdf_overlay(&x, &y)));
                }
                let (x, y) = run.second_order_samples()?;
                v.push(("cdf_second_order.csv".into(), cdf_overlay(&x, &y)));
            }
            v
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_steps_through_both_samples() {
        let t = cdf_overlay(&[2.0, 1.0], &[1.5]);
        assert_eq!(t.header, ["x", "F_empirical", "F_reference"]);
        assert_eq!(
            t.rows,
            vec![
                vec![1.0, 0.5, 0.0],
                vec![1.5, 0.5, 1.0],
                vec![2.0, 1.0, 1.0]
            ]
        );
    }
}
