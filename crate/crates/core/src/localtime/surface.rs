use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pathsim::{SampledPath, TimeGrid};
use crate::specfun::Params;

/// `L̂^x_t` on a set of levels, one nondecreasing row per level.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeSurface {
    pub x_levels: Vec<f64>,
    pub bandwidth: f64,
    pub t_grid: Arc<TimeGrid>,
    pub values: Vec<Vec<f64>>,
}

impl LocalTimeSurface {
    /// Row of level `i` at time `t` (last grid point at or before `t`).
    pub fn at(&self, i: usize, t: f64) -> f64 {
        self.values[i][self.t_grid.index_at_or_before(t)]
    }
}

/// `∫_{x-w}^{x+w} y^{1-2α} dy`.
pub fn band_weight(x: f64, w: f64, alpha: f64) -> f64 {
    let e = 2.0 - 2.0 * alpha;
    ((x + w).powf(e) - (x - w).max(0.0).powf(e)) / e
}

fn check_levels(levels: &[f64], w: f64) -> Result<()> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::Domain(format!(
            "bandwidth must be positive, got {w}"
        )));
    }
    if levels.is_empty() {
        return Err(Error::Input("no levels requested".into()));
    }
    for pair in levels.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::Input("levels must be strictly increasing".into()));
        }
        // touching bands are fine, overlapping ones are not
        if pair[1] - pair[0] < 2.0 * w * (1.0 - 1e-12) {
            return Err(Error::Input(format!(
                "bands around {} and {} overlap at bandwidth {w}",
                pair[0], pair[1]
            )));
        }
    }
    if !(levels[0] > 0.0) || w > levels[0] / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "bandwidth {w} exceeds half the lowest level {}",
            levels[0]
        )));
    }
    Ok(())
}

/// Index of the band containing `r`, if any.
pub(crate) fn band_of(levels: &[f64], w: f64, r: f64) -> Option<usize> {
    let i = levels.partition_point(|&x| x + w < r);
    (i < levels.len() && (r - levels[i]).abs() <= w).then_some(i)
}

/// `∫_0^t 1{a ≤ X_s ≤ b} ds` as a right-point grid sum.
pub fn occupation_time(path: &SampledPath, a: f64, b: f64, t: f64) -> f64 {
    let times = path.times();
    let x = path.values();
    let end = path.grid().index_at_or_before(t);
    let mut acc = 0.0;
    for k in 1..=end {
        if x[k] >= a && x[k] <= b {
            acc += times[k] - times[k - 1];
        }
    }
    acc
}

/// Band estimator of `L̂^x_t`: `α` times the time spent within `w` of `x`,
/// divided by the band's `y^{1-2α} dy` mass.
pub fn two_param_local_time(
    path: &SampledPath,
    params: &Params,
    x_levels: &[f64],
    bandwidth: f64,
) -> Result<LocalTimeSurface> {
    check_levels(x_levels, bandwidth)?;
    let a = params.alpha();
    let norm: Vec<f64> = x_levels
        .iter()
        .map(|&x| a / band_weight(x, bandwidth, a))
        .collect();
    let times = path.times();
    let x = path.values();
    let mut values = vec![Vec::with_capacity(x.len()); x_levels.len()];
    let mut acc = vec![0.0; x_levels.len()];
    for row in values.iter_mut() {
        row.push(0.0);
    }
    for k in 1..x.len() {
        if let Some(i) = band_of(x_levels, bandwidth, x[k]) {
            acc[i] += times[k] - times[k - 1];
        }
        for (i, row) in values.iter_mut().enumerate() {
            row.push(norm[i] * acc[i]);
        }
    }
    Ok(LocalTimeSurface {
        x_levels: x_levels.to_vec(),
        bandwidth,
        t_grid: Arc::clone(path.grid()),
        values,
    })
}

/// The surface evaluated at a single time, without storing rows.
pub fn two_param_local_time_at(
    path: &SampledPath,
    params: &Params,
    x_levels: &[f64],
    bandwidth: f64,
    t: f64,
) -> Result<Vec<f64>> {
    check_levels(x_levels, bandwidth)?;
    let a = params.alpha();
    let times = path.times();
    let x = path.values();
    let end = path.grid().index_at_or_before(t);
    let mut acc = vec![0.0; x_levels.len()];
    for k in 1..=end {
        if let Some(i) = band_of(x_levels, bandwidth, x[k]) {
            acc[i] += times[k] - times[k - 1];
        }
    }
    Ok(acc
        .iter()
        .zip(x_levels)
        .map(|(o, &lx)| a * o / band_weight(lx, bandwidth, a))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathsim::{build_grid, GridScheme, PathKind};

    #[test]
    fn band_weight_at_half_is_width() {
        assert!((band_weight(1.0, 0.1, 0.5) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn overlapping_bands_rejected() {
        assert!(check_levels(&[0.1, 0.15], 0.05).is_err());
        assert!(check_levels(&[0.1, 0.2], 0.05).is_ok());
        assert!(check_levels(&[0.1], 0.06).is_err());
        assert!(check_levels(&[0.2, 0.1], 0.01).is_err());
    }

    #[test]
    fn band_lookup() {
        let lv = [0.1, 0.2, 0.3];
        assert_eq!(band_of(&lv, 0.05, 0.12), Some(0));
        assert_eq!(band_of(&lv, 0.02, 0.15), None);
        assert_eq!(band_of(&lv, 0.02, 0.31), Some(2));
        assert_eq!(band_of(&lv, 0.02, 0.9), None);
    }

    #[test]
    fn unvisited_level_is_zero() {
        let g = Arc::new(build_grid(1.0, 4, GridScheme::Uniform).unwrap());
        let path =
            SampledPath::new(g, vec![0.0, 0.1, 0.2, 0.1, 0.0], PathKind::ReinforcedBessel).unwrap();
        let par = Params::new(0.5, 0.25).unwrap();
        let s = two_param_local_time(&path, &par, &[0.1, 5.0], 0.05).unwrap();
        assert!(s.values[1].iter().all(|&v| v == 0.0));
        assert!(s.at(0, 1.0) > 0.0);
        let at = two_param_local_time_at(&path, &par, &[0.1, 5.0], 0.05, 1.0).unwrap();
        assert_eq!(at[0], s.at(0, 1.0));
    }
}
