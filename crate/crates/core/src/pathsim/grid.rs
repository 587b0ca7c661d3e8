use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default grid memory budget: one path of values plus the grid itself.
pub const DEFAULT_GRID_BUDGET_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum GridScheme {
    Uniform,
    /// Steps `first_step · ratio^k`, capped at the uniform step needed to
    /// reach `t_max` with the requested number of steps.
    GeometricRefined {
        first_step: f64,
        ratio: f64,
    },
    /// Reinforced image `u ↦ u^{1/(1-2p)}` of another grid.
    Mapped {
        exponent: f64,
    },
    /// Times read off data, such as the levels of a sampled path.
    Irregular,
}

impl GridScheme {
    /// Geometric refinement with first step `1e-8 · t_max` and the ratio
    /// chosen so that about `fraction` of the points land in `[0, t_max/100]`.
    pub fn refined_near_zero(t_max: f64, n_steps: usize, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Grid(format!(
                "fraction must lie in (0,1), got {fraction}"
            )));
        }
        let first_step = 1e-8 * t_max;
        let target = fraction * (n_steps + 1) as f64;
        // points near zero fall as the ratio grows
        let (mut lo, mut hi) = (1e-12f64, 1.0f64);
        let count = |ln_r: f64| -> Result<f64> {
            let steps = geometric_steps(t_max, n_steps, first_step, ln_r.exp())?;
            let cut = 0.01 * t_max;
            let mut t = 0.0;
            let mut c = 1.0;
            for s in steps {
                t += s;
                if t > cut {
                    break;
                }
                c += 1.0;
            }
            Ok(c)
        };
        if count(hi)? > target {
            return Err(Error::Grid("cannot refine that little".into()));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match count(mid) {
                Ok(c) if c > target => lo = mid,
                Ok(_) => hi = mid,
                // ratio too small to reach t_max
                Err(_) => lo = mid,
            }
        }
        Ok(GridScheme::GeometricRefined {
            first_step,
            ratio: hi.exp(),
        })
    }
}

/// Step sizes `min(δ₀ r^k, h)` with `h` solved so they sum to `t_max`.
fn geometric_steps(t_max: f64, n: usize, first: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(first > 0.0 && ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::Grid(format!(
            "need first step > 0 and ratio > 1, got {first} and {ratio}"
        )));
    }
    if first * n as f64 > t_max {
        return Err(Error::Grid(format!(
            "{n} steps of at least {first} overshoot t_max = {t_max}"
        )));
    }
    let total = |h: f64| -> f64 {
        let k = ((h / first).ln() / ratio.ln()).ceil().max(0.0);
        let k = k.min(n as f64);
        first * (ratio.powf(k) - 1.0) / (ratio - 1.0) + (n as f64 - k) * h
    };
    if total(t_max) < t_max {
        return Err(Error::Grid(format!(
            "ratio {ratio} is too small to reach t_max = {t_max} in {n} steps"
        )));
    }
    let (mut lo, mut hi) = (first, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < t_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = hi;
    let mut steps = Vec::with_capacity(n);
    let mut s = first;
    for _ in 0..n {
        steps.push(s.min(h));
        s *= ratio;
    }
    Ok(steps)
}

/// Strictly increasing times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
    scheme: GridScheme,
}

impl TimeGrid {
    pub fn from_times(times: Vec<f64>, scheme: GridScheme) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid("a grid needs at least two points".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Grid(format!(
                "grid must start at 0, got {}",
                times[0]
            )));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Grid(format!(
                    "nonpositive step at index {k}: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { times, scheme })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Size of the last step, the nominal resolution away from 0.
    pub fn bulk_step(&self) -> f64 {
        let n = self.times.len();
        self.times[n - 1] - self.times[n - 2]
    }

    pub fn max_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Largest index with `times[k] <= t`.
    pub fn index_at_or_before(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Image under `u ↦ u^{exponent}`.
    pub fn mapped(&self, exponent: f64) -> Result<Self> {
        if exponent == 1.0 {
            return Ok(self.clone());
        }
        let times = self
            .times
            .iter()
            .map(|&u| if u == 0.0 { 0.0 } else { u.powf(exponent) })
            .collect();
        TimeGrid::from_times(times, GridScheme::Mapped { exponent })
    }
}

pub fn build_grid(t_max: f64, n_steps: usize, scheme: GridScheme) -> Result<TimeGrid> {
    build_grid_with_budget(t_max, n_steps, scheme, DEFAULT_GRID_BUDGET_BYTES)
}

/// Rejects grids whose times plus one path of values would exceed `budget_bytes`.
pub fn build_grid_with_budget(
    t_max: f64,
    n_steps: usize,
    scheme: GridScheme,
    budget_bytes: usize,
) -> Result<TimeGrid> {
    if n_steps == 0 {
        return Err(Error::Grid("n_steps must be >= 1".into()));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Grid(format!("t_max must be positive, got {t_max}")));
    }
    let bytes = (n_steps + 1).saturating_mul(2 * std::mem::size_of::<f64>());
    if bytes > budget_bytes {
        return Err(Error::Grid(format!(
            "{n_steps} steps need {bytes} bytes, over the budget of {budget_bytes}"
        )));
    }
    let times = match scheme {
        GridScheme::Uniform => {
            let h = t_max / n_steps as f64;
            let mut t: Vec<f64> = (0..=n_steps).map(|k| k as f64 * h).collect();
            t[n_steps] = t_max;
            t
        }
        GridScheme::GeometricRefined { first_step, ratio } => {
            let steps = geometric_steps(t_max, n_steps, first_step, ratio)?;
            let mut t = Vec::with_capacity(n_steps + 1);
            t.push(0.0);
            let mut acc = 0.0;
            for s in steps {
                acc += s;
                t.push(acc);
            }
            let scale = t_max / acc;
            for x in t.iter_mut() {
                *x *= scale;
            }
            t[n_steps] = t_max;
            t
        }
        GridScheme::Mapped { .. } => {
            return Err(Error::Grid(
                "mapped grids are built with TimeGrid::mapped".into(),
            ))
        }
        GridScheme::Irregular => {
            return Err(Error::Grid(
                "irregular grids are built with TimeGrid::from_times".into(),
            ))
        }
    };
    TimeGrid::from_times(times, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_example() {
        let g = build_grid(1.0, 4, GridScheme::Uniform).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn refined_fraction_near_zero() {
        let scheme = GridScheme::refined_near_zero(1.0, 100_000, 0.2).unwrap();
        let g = build_grid(1.0, 100_000, scheme).unwrap();
        let near = g.times().iter().filter(|&&t| t <= 0.01).count() as f64;
        let frac = near / g.len() as f64;
        assert!((frac - 0.2).abs() < 0.01, "{frac}");
        assert_eq!(g.t_max(), 1.0);
        assert!((g.times()[1] - 1e-8).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(build_grid(1.0, 0, GridScheme::Uniform).is_err());
        assert!(build_grid(-1.0, 3, GridScheme::Uniform).is_err());
        assert!(build_grid_with_budget(1.0, 1000, GridScheme::Uniform, 1000).is_err());
        let tiny_ratio = GridScheme::GeometricRefined {
            first_step: 1e-9,
            ratio: 1.0 + 1e-12,
        };
        assert!(build_grid(1.0, 10, tiny_ratio).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 1.0, 1.0], GridScheme::Uniform).is_err());
        assert!(TimeGrid::from_times(vec![0.1, 1.0], GridScheme::Uniform).is_err());
    }
}
