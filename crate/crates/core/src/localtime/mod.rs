//! Local times: the ε-occupation estimator of the Bessel local time, the
//! reinforced local time built from it (Stieltjes and integration-by-parts
//! forms), the direct estimator on the reinforced path, and the
//! two-parameter occupation densities.

mod surface;

pub(crate) use surface::band_of;

pub use surface::{
    band_weight, occupation_time, two_param_local_time, two_param_local_time_at, LocalTimeSurface,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathsim::{PathKind, Reinforcement, SampledPath, TimeGrid};
use crate::specfun::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    Continuous,
    Cadlag,
}

/// A nondecreasing path on a grid, starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonePath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
    continuity: Continuity,
}

impl MonotonePath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>, continuity: Continuity) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::Input(format!(
                "monotone path starts at {}",
                values[0]
            )));
        }
        check_monotone(&values)?;
        Ok(MonotonePath {
            grid,
            values,
            continuity,
        })
    }

    /// Like [`MonotonePath::new`] but allows a positive starting value, as
    /// for an inverse whose first level is reached only after time 0.
    pub fn new_from(grid: Arc<TimeGrid>, values: Vec<f64>, continuity: Continuity) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if !(values[0] >= 0.0) {
            return Err(Error::Input(format!(
                "monotone path starts at {}",
                values[0]
            )));
        }
        check_monotone(&values)?;
        Ok(MonotonePath {
            grid,
            values,
            continuity,
        })
    }

    pub(crate) fn new_unchecked(
        grid: Arc<TimeGrid>,
        values: Vec<f64>,
        continuity: Continuity,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        MonotonePath {
            grid,
            values,
            continuity,
        }
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

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Linear interpolation for continuous paths, last value at or before
    /// `t` for càdlàg ones; constant beyond the grid.
    pub fn value_at(&self, t: f64) -> f64 {
        let times = self.grid.times();
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.t_max() {
            return self.terminal();
        }
        let k = self.grid.index_at_or_before(t);
        match self.continuity {
            Continuity::Cadlag => self.values[k],
            Continuity::Continuous => {
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                self.values[k] + w * (self.values[k + 1] - self.values[k])
            }
        }
    }
}

fn check_monotone(values: &[f64]) -> Result<()> {
    for (k, w) in values.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(Error::Input(format!(
                "path decreases at index {k}: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// What an ε-estimator was run with, and whether its resolution condition held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDiagnostics {
    pub eps: f64,
    /// Nominal step, the last grid step.
    pub h: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeEstimate {
    pub path: MonotonePath,
    pub diagnostics: EstimatorDiagnostics,
}

/// `ε = h^exponent`, the coupling of the occupation window to the grid step.
pub fn eps_from_step(h: f64, exponent: f64) -> f64 {
    h.powf(exponent)
}

fn diagnostics(grid: &TimeGrid, eps: f64) -> EstimatorDiagnostics {
    let h = grid.bulk_step();
    let mut warnings = Vec::new();
    if h > eps * eps {
        warnings.push(format!(
            "grid step {h:.3e} exceeds eps^2 = {:.3e}; occupation bias is not controlled",
            eps * eps
        ));
    }
    EstimatorDiagnostics { eps, h, warnings }
}

/// Cumulative `2α(1-α) ε^{2α-2} Σ_k 1{X_{t_k} ≤ ε} (t_k - t_{k-1})`.
fn occupation_estimator(path: &SampledPath, alpha: f64, eps: f64) -> Vec<f64> {
    let c = 2.0 * alpha * (1.0 - alpha) * eps.powf(2.0 * alpha - 2.0);
    let times = path.times();
    let x = path.values();
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    let mut acc = 0.0;
    for k in 1..x.len() {
        if x[k] <= eps {
            acc += times[k] - times[k - 1];
        }
        out.push(c * acc);
    }
    out
}

fn require_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must be positive, got {eps}")))
    }
}

/// ε-occupation estimate of the Bessel local time at 0.
pub fn estimate_l0(path: &SampledPath, params: &Params, eps: f64) -> Result<LocalTimeEstimate> {
    require_eps(eps)?;
    if path.kind() != PathKind::Bessel {
        return Err(Error::Input("estimate_l0 expects a Bessel path".into()));
    }
    let values = occupation_estimator(path, params.alpha(), eps);
    Ok(LocalTimeEstimate {
        path: MonotonePath::new_unchecked(Arc::clone(path.grid()), values, Continuity::Continuous),
        diagnostics: diagnostics(path.grid(), eps),
    })
}

/// The same ε-occupation functional applied to `R̂`.
pub fn estimate_lhat_direct(
    path: &SampledPath,
    params: &Params,
    eps: f64,
) -> Result<LocalTimeEstimate> {
    require_eps(eps)?;
    if path.kind() != PathKind::ReinforcedBessel {
        return Err(Error::Input(
            "estimate_lhat_direct expects a reinforced path".into(),
        ));
    }
    let values = occupation_estimator(path, params.alpha(), eps);
    Ok(LocalTimeEstimate {
        path: MonotonePath::new_unchecked(Arc::clone(path.grid()), values, Continuity::Continuous),
        diagnostics: diagnostics(path.grid(), eps),
    })
}

/// Sign of the correction term in the integration-by-parts form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IbpSign {
    Minus,
    /// Kept only to show that this sign does not reproduce the Stieltjes form.
    Plus,
}

/// Weights turning a Bessel local time on grid `u` into `L̂` on grid
/// `t = u^{1/(1-2p)}`; built once per grid and parameter set.
///
/// Inside the first cell `L` is taken proportional to `u^α`, its
/// self-similar shape, which fixes the singular weight at 0 when `p < 0`.
#[derive(Debug, Clone)]
pub struct ReinforcedLocalTime {
    params: Params,
    base: Arc<TimeGrid>,
    grid: Arc<TimeGrid>,
    /// Stieltjes weight per cell, `(1-2p)^{-α} m_j^γ`.
    stieltjes: Vec<f64>,
    /// `u_k^γ`.
    u_pow: Vec<f64>,
    /// `∫ v^{γ-1} dv` over each cell.
    cell_integral: Vec<f64>,
}

impl ReinforcedLocalTime {
    pub fn new(map: &Reinforcement) -> Result<Self> {
        let params = *map.params();
        let base = map.base_grid();
        let u = base.times();
        let g = params.weight_exponent();
        let a = params.alpha();
        let scale = params.q().powf(-a);
        let n = u.len();
        let mut stieltjes = vec![0.0; n];
        let mut cell_integral = vec![0.0; n];
        let u_pow: Vec<f64> = u
            .iter()
            .map(|&x| if x == 0.0 { 0.0 } else { x.powf(g) })
            .collect();
        if n > 1 {
            stieltjes[1] = scale * params.q() * u_pow[1];
            cell_integral[1] = u_pow[1] / (a + g);
        }
        for j in 2..n {
            stieltjes[j] = scale * (u[j - 1] * u[j]).sqrt().powf(g);
            cell_integral[j] = if g == 0.0 {
                (u[j] / u[j - 1]).ln()
            } else {
                (u_pow[j] - u_pow[j - 1]) / g
            };
        }
        Ok(ReinforcedLocalTime {
            params,
            base: Arc::clone(base),
            grid: Arc::clone(map.grid()),
            stieltjes,
            u_pow,
            cell_integral,
        })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    fn check_input(&self, l: &MonotonePath) -> Result<()> {
        if !Arc::ptr_eq(l.grid(), &self.base) && **l.grid() != *self.base {
            return Err(Error::Input("local time is not on the base grid".into()));
        }
        check_monotone(l.values())
    }

    /// `(1-2p)^{-α} Σ_j m_j^γ (L_{u_j} - L_{u_{j-1}})` with geometric midpoints `m_j`.
    pub fn stieltjes(&self, l: &MonotonePath) -> Result<MonotonePath> {
        self.check_input(l)?;
        if self.params.p() == 0.0 {
            return Ok(MonotonePath::new_unchecked(
                Arc::clone(&self.grid),
                l.values().to_vec(),
                l.continuity(),
            ));
        }
        let v = l.values();
        let mut out = Vec::with_capacity(v.len());
        out.push(0.0);
        let mut acc = 0.0;
        for j in 1..v.len() {
            let dl = v[j] - v[j - 1];
            if dl != 0.0 {
                acc += self.stieltjes[j] * dl;
            }
            out.push(acc);
        }
        Ok(MonotonePath::new_unchecked(
            Arc::clone(&self.grid),
            out,
            l.continuity(),
        ))
    }

    fn ibp_values(&self, l: &MonotonePath, sign: IbpSign) -> Vec<f64> {
        let g = self.params.weight_exponent();
        let scale = self.params.q().powf(-self.params.alpha());
        let s = match sign {
            IbpSign::Minus => -1.0,
            IbpSign::Plus => 1.0,
        };
        let v = l.values();
        let mut out = Vec::with_capacity(v.len());
        out.push(0.0);
        let mut integral = 0.0;
        for j in 1..v.len() {
            integral += if j == 1 {
                v[1] * self.cell_integral[1]
            } else {
                0.5 * (v[j - 1] + v[j]) * self.cell_integral[j]
            };
            out.push(scale * (self.u_pow[j] * v[j] + s * g * integral));
        }
        out
    }

    /// `(1-2p)^{-α} (u^γ L_u - γ ∫_0^u L_v v^{γ-1} dv)` at `u = t^{1-2p}`, with
    /// trapezoid values of `L` against exact cell integrals of the weight.
    pub fn ibp(&self, l: &MonotonePath) -> Result<MonotonePath> {
        self.check_input(l)?;
        if self.params.p() == 0.0 {
            return Ok(MonotonePath::new_unchecked(
                Arc::clone(&self.grid),
                l.values().to_vec(),
                l.continuity(),
            ));
        }
        let mut out = self.ibp_values(l, IbpSign::Minus);
        // summation by parts makes this a positive-weight sum; only
        // rounding can make it dip
        for k in 1..out.len() {
            if out[k] < out[k - 1] {
                out[k] = out[k - 1];
            }
        }
        Ok(MonotonePath::new_unchecked(
            Arc::clone(&self.grid),
            out,
            l.continuity(),
        ))
    }

    /// The same formula with `+` in front of the correction; not monotone in general.
    pub fn ibp_plus(&self, l: &MonotonePath) -> Result<Vec<f64>> {
        self.check_input(l)?;
        Ok(self.ibp_values(l, IbpSign::Plus))
    }

    /// All three routes in one pass over raw local-time values, read off at
    /// the grid indices `at`. Same numbers as [`Self::stieltjes`],
    /// [`Self::ibp`] and [`Self::ibp_plus`] without building the paths.
    pub fn routes_at(&self, l: &[f64], at: &[usize]) -> Result<RouteValues> {
        if l.len() != self.base.len() {
            return Err(Error::Input("local time is not on the base grid".into()));
        }
        if let Some(&k) = at.iter().find(|&&k| k >= l.len()) {
            return Err(Error::Input(format!("index {k} is off the grid")));
        }
        let m = at.len();
        let mut out = RouteValues {
            stieltjes: vec![0.0; m],
            ibp: vec![0.0; m],
            ibp_plus: vec![0.0; m],
            sup_rel_gap: 0.0,
        };
        if self.params.p() == 0.0 {
            for (i, &k) in at.iter().enumerate() {
                out.stieltjes[i] = l[k];
                out.ibp[i] = l[k];
                out.ibp_plus[i] = l[k];
            }
            return Ok(out);
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| at[i]);
        let mut next = order.iter().peekable();
        while next.peek().is_some_and(|&&i| at[i] == 0) {
            next.next();
        }
        let g = self.params.weight_exponent();
        let scale = self.params.q().powf(-self.params.alpha());
        let (mut stj, mut integral, mut ibp, mut gap) = (0.0, 0.0, 0.0f64, 0.0f64);
        for j in 1..l.len() {
            let dl = l[j] - l[j - 1];
            if dl != 0.0 {
                stj += self.stieltjes[j] * dl;
            }
            integral += if j == 1 {
                l[1] * self.cell_integral[1]
            } else {
                0.5 * (l[j - 1] + l[j]) * self.cell_integral[j]
            };
            let head = self.u_pow[j] * l[j];
            ibp = ibp.max(scale * (head - g * integral));
            gap = gap.max((ibp - stj).abs());
            while let Some(&&i) = next.peek() {
                if at[i] != j {
                    break;
                }
                out.stieltjes[i] = stj;
                out.ibp[i] = ibp;
                out.ibp_plus[i] = scale * (head + g * integral);
                next.next();
            }
        }
        if stj > 0.0 {
            out.sup_rel_gap = gap / stj;
        }
        Ok(out)
    }
}

/// The three reinforced routes at a few grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteValues {
    pub stieltjes: Vec<f64>,
    pub ibp: Vec<f64>,
    pub ibp_plus: Vec<f64>,
    /// `sup |ibp - stieltjes| / sup stieltjes` over the whole grid; 0 when
    /// the local time never grows.
    pub sup_rel_gap: f64,
}

/// Reinforced local time from the Bessel one via the Stieltjes integral.
pub fn reinforced_local_time_from_base(l: &MonotonePath, params: &Params) -> Result<MonotonePath> {
    let map = Reinforcement::new(l.grid(), params)?;
    ReinforcedLocalTime::new(&map)?.stieltjes(l)
}

/// Reinforced local time through the integration-by-parts form.
pub fn reinforced_local_time_ibp(l: &MonotonePath, params: &Params) -> Result<MonotonePath> {
    let map = Reinforcement::new(l.grid(), params)?;
    ReinforcedLocalTime::new(&map)?.ibp(l)
}

/// Integration by parts with the opposite sign; a regression fixture.
pub fn reinforced_local_time_ibp_plus(l: &MonotonePath, params: &Params) -> Result<Vec<f64>> {
    let map = Reinforcement::new(l.grid(), params)?;
    ReinforcedLocalTime::new(&map)?.ibp_plus(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathsim::{build_grid, sample_bessel_path, GridScheme, Reinforcement, SeedSpec};

    fn grid(n: usize) -> Arc<TimeGrid> {
        Arc::new(build_grid(1.0, n, GridScheme::Uniform).unwrap())
    }

    #[test]
    fn far_path_has_zero_local_time() {
        let g = grid(10);
        let mut v = vec![3.0; 11];
        v[0] = 0.0;
        let path = SampledPath::new(g, v, PathKind::Bessel).unwrap();
        let par = Params::new(0.5, 0.0).unwrap();
        let est = estimate_l0(&path, &par, 0.1).unwrap();
        assert!(est.path.values().iter().all(|&x| x == 0.0));
        assert!(!est.diagnostics.warnings.is_empty());
    }

    #[test]
    fn p_zero_collapses_to_base() {
        let g = grid(2000);
        let par = Params::new(0.3, 0.0).unwrap();
        let path = sample_bessel_path(&g, &par, SeedSpec::new(2, 0));
        let l = estimate_l0(&path, &par, 0.05).unwrap().path;
        let a = reinforced_local_time_from_base(&l, &par).unwrap();
        let b = reinforced_local_time_ibp(&l, &par).unwrap();
        assert_eq!(a.values(), l.values());
        assert_eq!(b.values(), l.values());
        let r = crate::pathsim::reinforce_path(&path, &par).unwrap();
        let d = estimate_lhat_direct(&r, &par, 0.05).unwrap().path;
        assert_eq!(d.values(), l.values());
    }

    #[test]
    fn rejects_non_monotone_input() {
        let g = grid(3);
        assert!(
            MonotonePath::new(g.clone(), vec![0.0, 1.0, 0.5, 2.0], Continuity::Continuous).is_err()
        );
        assert!(MonotonePath::new(g, vec![0.1, 1.0, 1.5, 2.0], Continuity::Continuous).is_err());
    }

    #[test]
    fn value_at_interpolates() {
        let g = grid(2);
        let p = MonotonePath::new(g.clone(), vec![0.0, 1.0, 3.0], Continuity::Continuous).unwrap();
        assert_eq!(p.value_at(0.75), 2.0);
        let c = MonotonePath::new(g, vec![0.0, 1.0, 3.0], Continuity::Cadlag).unwrap();
        assert_eq!(c.value_at(0.75), 1.0);
        assert_eq!(c.value_at(5.0), 3.0);
    }

    #[test]
    fn fused_routes_match_paths() {
        let scheme = GridScheme::refined_near_zero(1.0, 3000, 0.2).unwrap();
        let g = Arc::new(build_grid(1.0, 3000, scheme).unwrap());
        for &p in &[-0.5, 0.0, 0.3] {
            let par = Params::new(0.4, p).unwrap();
            let path = sample_bessel_path(&g, &par, SeedSpec::new(5, 1));
            let l = estimate_l0(&path, &par, 0.03).unwrap().path;
            let map = Reinforcement::new(&g, &par).unwrap();
            let rlt = ReinforcedLocalTime::new(&map).unwrap();
            let s = rlt.stieltjes(&l).unwrap();
            let i = rlt.ibp(&l).unwrap();
            let plus = rlt.ibp_plus(&l).unwrap();
            let at = [3000, 0, 1700, 1700, 1];
            let r = rlt.routes_at(l.values(), &at).unwrap();
            for (n, &k) in at.iter().enumerate() {
                assert_eq!(r.stieltjes[n], s.values()[k]);
                assert_eq!(r.ibp[n], i.values()[k]);
                if p != 0.0 {
                    assert_eq!(r.ibp_plus[n], plus[k]);
                }
            }
            let gap = s
                .values()
                .iter()
                .zip(i.values())
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            assert!((r.sup_rel_gap - gap / s.terminal()).abs() <= 1e-15 * r.sup_rel_gap);
            assert!(rlt.routes_at(l.values(), &[3001]).is_err());
        }
    }

    #[test]
    fn first_cell_rules_agree() {
        // a local time that is exactly c u^α on the first cell
        let par = Params::new(0.5, -0.5).unwrap();
        let g = grid(4);
        let l = MonotonePath::new(
            g.clone(),
            vec![0.0, 0.5, 0.5, 0.5, 0.5],
            Continuity::Continuous,
        )
        .unwrap();
        let s = reinforced_local_time_from_base(&l, &par).unwrap();
        let i = reinforced_local_time_ibp(&l, &par).unwrap();
        assert!((s.values()[1] - i.values()[1]).abs() < 1e-15);
        // ∫_0^{u1} s^γ dL with L = 0.5 (s/u1)^α, then times q^{-α}
        let (a, gm, u1) = (0.5f64, par.weight_exponent(), 0.25f64);
        let exact = 0.5 * a / (a + gm) * u1.powf(gm) * par.q().powf(-a);
        assert!((s.values()[1] - exact).abs() < 1e-15);
    }
}
