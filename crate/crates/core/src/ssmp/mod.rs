//! The inverse local time as a self-similar Markov process.
//!
//! `λ` is the inverse of the Bessel local time, an α-stable subordinator.
//! The reinforced inverse local time is `λ̂_t = λ_{τ(t)}^{1/(1-2p)}` with `τ`
//! the inverse of `ℓ ↦ (1-2p)^{-α} ∫_0^ℓ λ_s^γ ds`, `γ = 2αp/(1-2p)`.
//! Its Lamperti subordinator `ξ̂` and exponential functional live in [`xi`].

mod xi;

pub use xi::{
    exponential_functional, sample_xi_hat, size_bias_check, size_bias_printed_constant,
    ExpFunctional, JumpPath, XiHat, DEFAULT_SECOND_MOMENT_TOL, DEFAULT_TAIL_REL,
};

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::localtime::{Continuity, MonotonePath, ReinforcedLocalTime};
use crate::pathsim::{build_grid, GridScheme, Reinforcement, SeedSpec, TimeGrid};
use crate::specfun::{stable_time_scale, Params};

/// Growth factor of level steps near 0 in [`sample_ssmp_point`].
const LEVEL_RATIO: f64 = 1.01;

fn require_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "alpha must lie in (0,1), got {alpha}"
        )))
    }
}

/// A draw with `E e^{-rS} = e^{-r^α}` (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
    (alpha * u).sin() / u.sin().powf(1.0 / alpha)
        * ((1.0 - alpha) * u).sin().powf((1.0 - alpha) / alpha)
        / e.powf((1.0 - alpha) / alpha)
}

/// Increment of `λ` over a step of length `dl`: stable with Laplace
/// exponent `dl · r^α / a`.
struct StableIncrement {
    alpha: f64,
    a: f64,
}

impl StableIncrement {
    fn new(alpha: f64) -> Self {
        StableIncrement {
            alpha,
            a: stable_time_scale(alpha),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, dl: f64, rng: &mut R) -> f64 {
        (dl / self.a).powf(1.0 / self.alpha) * positive_stable(self.alpha, rng)
    }
}

/// `λ` on `grid` (levels of local time), starting from 0.
pub fn sample_stable_subordinator(
    alpha: f64,
    grid: &Arc<TimeGrid>,
    seed: SeedSpec,
) -> Result<MonotonePath> {
    require_alpha(alpha)?;
    let mut rng = seed.rng();
    let inc = StableIncrement::new(alpha);
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    let mut x = 0.0;
    for w in grid.times().windows(2) {
        x += inc.sample(w[1] - w[0], &mut rng);
        values.push(x);
    }
    MonotonePath::new(Arc::clone(grid), values, Continuity::Cadlag)
}

/// Levels on `[0, l_max]` refined geometrically near 0, where `λ^γ` is
/// singular for `p < 0`: about a fifth of the points fall below `l_max/100`.
pub fn level_grid(l_max: f64, n_steps: usize) -> Result<TimeGrid> {
    let scheme = GridScheme::refined_near_zero(l_max, n_steps, 0.2)?;
    build_grid(l_max, n_steps, scheme)
}

/// `τ` from `λ`: the left-point sum `A(ℓ) = Σ λ_{ℓ_i}^γ Δℓ_i` is inverted
/// by linear interpolation, so `τ` comes out on the grid `A(ℓ_j)/(1-2p)^α`
/// with values `ℓ_j`.
///
/// On the first cell `λ` has no usable left value; there the integral is
/// taken as if `λ_s = λ_{ℓ_1} (s/ℓ_1)^{1/α}`, which gives `(1-2p) ℓ_1 λ_{ℓ_1}^γ`.
pub fn time_change_tau(lambda: &MonotonePath, params: &Params) -> Result<MonotonePath> {
    let levels = lambda.times();
    if params.p() == 0.0 {
        let grid = Arc::new(TimeGrid::from_times(
            levels.to_vec(),
            GridScheme::Irregular,
        )?);
        return MonotonePath::new(grid, levels.to_vec(), Continuity::Continuous);
    }
    let g = params.weight_exponent();
    let q = params.q();
    let lam = lambda.values();
    if let Some(k) = lam
        .iter()
        .skip(1)
        .position(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(Error::Input(format!(
            "lambda must be positive after level 0, got {} at index {}",
            lam[k + 1],
            k + 1
        )));
    }
    let scale = q.powf(params.alpha());
    let mut times = Vec::with_capacity(levels.len());
    let mut values = Vec::with_capacity(levels.len());
    times.push(0.0);
    values.push(0.0);
    let mut acc = q * levels[1] * lam[1].powf(g);
    let mut last = 0.0;
    for j in 1..levels.len() {
        if j > 1 {
            acc += lam[j - 1].powf(g) * (levels[j] - levels[j - 1]);
        }
        let t = acc / scale;
        if !t.is_finite() {
            return Err(Error::Input(format!(
                "time change is ill-conditioned: integral overflows at level {}",
                levels[j]
            )));
        }
        if t > last {
            times.push(t);
            values.push(levels[j]);
            last = t;
        } else {
            // increment lost to rounding; τ jumps here
            *values.last_mut().unwrap() = levels[j];
        }
    }
    let grid = Arc::new(TimeGrid::from_times(times, GridScheme::Irregular)?);
    MonotonePath::new(grid, values, Continuity::Continuous)
}

/// `λ̂_t = λ_{τ(t)}^{1/(1-2p)}` on the grid of `tau`.
pub fn inverse_local_time_hat(
    lambda: &MonotonePath,
    tau: &MonotonePath,
    params: &Params,
) -> Result<MonotonePath> {
    if params.p() == 0.0 {
        return Ok(lambda.clone());
    }
    let inv_q = 1.0 / params.q();
    let values: Vec<f64> = tau
        .values()
        .iter()
        .map(|&l| lambda.value_at(l).powf(inv_q))
        .collect();
    MonotonePath::new_from(Arc::clone(tau.grid()), values, Continuity::Cadlag)
}

/// Right-continuous inverse `x ↦ inf{t : path(t) > x}` on the given levels,
/// which must be increasing, start at 0 and stay below the terminal value.
pub fn invert_monotone(path: &MonotonePath, levels: &[f64]) -> Result<MonotonePath> {
    let grid = Arc::new(TimeGrid::from_times(
        levels.to_vec(),
        GridScheme::Irregular,
    )?);
    let top = *levels.last().unwrap();
    if !(top < path.terminal()) {
        return Err(Error::Input(format!(
            "level {top} is not below the terminal value {}",
            path.terminal()
        )));
    }
    let t = path.times();
    let v = path.values();
    let mut out = Vec::with_capacity(levels.len());
    let mut k = 0;
    for &x in levels {
        while v[k] <= x {
            k += 1;
        }
        let s = match path.continuity() {
            Continuity::Cadlag => t[k],
            Continuity::Continuous if k == 0 => 0.0,
            Continuity::Continuous => {
                let w = (x - v[k - 1]) / (v[k] - v[k - 1]);
                (t[k - 1] + w * (t[k] - t[k - 1])).min(t[k])
            }
        };
        out.push(s);
    }
    MonotonePath::new_from(grid, out, Continuity::Cadlag)
}

/// Nudges repeated levels apart so they form a grid.
fn monotone_levels(mut v: Vec<f64>) -> Vec<f64> {
    for i in 1..v.len() {
        if v[i] <= v[i - 1] {
            v[i] = v[i - 1] + f64::MIN_POSITIVE.max(v[i - 1] * f64::EPSILON);
        }
    }
    v
}

/// `n + 1` equally spaced levels on `[0, top)`.
pub fn uniform_levels(top: f64, n: usize) -> Vec<f64> {
    let h = top / (n + 1) as f64;
    (0..=n).map(|k| k as f64 * h).collect()
}

/// One draw of `L̂_1` and of `λ̂_1` from a single stable path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsmpPoint {
    pub lhat_one: f64,
    pub lambda_hat_one: f64,
}

/// Samples `L̂_1 = (1-2p)^{-α} A(L_1)` and `λ̂_1 = λ_{τ(1)}^{1/(1-2p)}`
/// along one stable subordinator. Level steps start at `1e-6 · dl` and grow
/// geometrically up to `dl`.
///
/// `L_1`, the first level at which `λ` exceeds 1, is taken at the middle of
/// the crossing cell. At `τ(1)` the path is split so `λ_{τ(1)}` has its
/// exact conditional law given the left-point integral.
pub fn sample_ssmp_point<R: Rng + ?Sized>(params: &Params, dl: f64, rng: &mut R) -> SsmpPoint {
    let alpha = params.alpha();
    let inc = StableIncrement::new(alpha);
    if params.p() == 0.0 {
        // L_1 > ℓ ⇔ λ_ℓ < 1 ⇔ ℓ < a S^{-α}
        let s = positive_stable(alpha, rng);
        return SsmpPoint {
            lhat_one: inc.a * s.powf(-alpha),
            lambda_hat_one: inc.sample(1.0, rng),
        };
    }
    let g = params.weight_exponent();
    let q = params.q();
    let target = q.powf(alpha);

    let mut level = dl * 1e-6;
    let mut lam = inc.sample(level, rng);
    let mut acc = q * level * lam.powf(g);
    let mut lhat = if lam > 1.0 { Some(acc / target) } else { None };
    let mut lambda_hat = None;
    if acc >= target {
        lambda_hat = Some(lam.powf(1.0 / q));
    }
    while lhat.is_none() || lambda_hat.is_none() {
        let next = (level * LEVEL_RATIO).min(level + dl);
        let step = next - level;
        let w = lam.powf(g);
        if lambda_hat.is_none() && acc + w * step >= target {
            let part = (target - acc) / w;
            let at = lam + inc.sample(part, rng);
            lambda_hat = Some(at.powf(1.0 / q));
            let rest = inc.sample(step - part, rng);
            if lhat.is_none() && at > 1.0 {
                lhat = Some((acc + 0.5 * w * part) / target);
            }
            lam = at + rest;
        } else {
            lam += inc.sample(step, rng);
        }
        if lhat.is_none() && lam > 1.0 {
            lhat = Some((acc + 0.5 * w * step) / target);
        }
        acc += w * step;
        level = next;
    }
    SsmpPoint {
        lhat_one: lhat.unwrap(),
        lambda_hat_one: lambda_hat.unwrap(),
    }
}

/// Outcome of comparing the inverse of `L̂` with its closed-form expression through `λ` on one path.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledInverseCheck {
    pub levels_checked: usize,
    pub violations: usize,
    /// Largest miss beyond the bracket, in time units.
    pub worst_excess: f64,
}

impl CoupledInverseCheck {
    pub fn holds(&self) -> bool {
        self.levels_checked > 0 && self.violations == 0
    }
}

/// Builds `λ̂` twice from one Bessel local time `l` and compares.
///
/// Direct: invert `L̂` (Stieltjes form). Coupled: `λ` = inverse of `l` on a
/// level grid of `n_levels` steps, then `τ` and `λ̂ = λ_τ^{1/(1-2p)}`. At each
/// of `n_check` levels `x` the coupled value must lie in
/// `[λ̂^direct(x(1-δ) - η) - h, λ̂^direct(x(1+δ) + η) + h]`, where `h` is the
/// largest step of the reinforced grid and `η` the value of `L̂` after its
/// first cell.
pub fn coupled_inverse_check(
    l: &MonotonePath,
    map: &Reinforcement,
    n_levels: usize,
    n_check: usize,
    rel_level_tol: f64,
) -> Result<CoupledInverseCheck> {
    let params = map.params();
    let top = l.terminal();
    if !(top > 0.0) {
        return Err(Error::Input("local time never grows on this path".into()));
    }
    let lgrid = level_grid(0.999 * top, n_levels)?;
    let lambda = invert_monotone(l, lgrid.times())?;
    let tau = time_change_tau(&lambda, params)?;
    let coupled = inverse_local_time_hat(&lambda, &tau, params)?;

    let lhat = ReinforcedLocalTime::new(map)?.stieltjes(l)?;
    let h = map.grid().max_step();
    // the first cell of L̂ is an extrapolation; levels below it are not resolved
    let slack = lhat.values()[1];
    let x_top = tau
        .grid()
        .t_max()
        .min((lhat.terminal() - slack) / (1.0 + rel_level_tol))
        * (1.0 - 1e-9);
    let mut report = CoupledInverseCheck {
        levels_checked: 0,
        violations: 0,
        worst_excess: 0.0,
    };
    if !(x_top > 0.0) {
        return Ok(report);
    }
    let xs: Vec<f64> = (1..=n_check)
        .map(|i| x_top * i as f64 / (n_check + 1) as f64)
        .collect();
    let lo_levels: Vec<f64> = std::iter::once(0.0)
        .chain(
            xs.iter()
                .map(|x| (x * (1.0 - rel_level_tol) - slack).max(0.0)),
        )
        .collect();
    let hi_levels: Vec<f64> = std::iter::once(0.0)
        .chain(xs.iter().map(|x| x * (1.0 + rel_level_tol) + slack))
        .collect();
    let lo = invert_monotone(&lhat, &monotone_levels(lo_levels))?;
    let hi = invert_monotone(&lhat, &hi_levels)?;
    for (i, &x) in xs.iter().enumerate() {
        let v = coupled.value_at(x);
        let below = lo.values()[i + 1] - h - v;
        let above = v - hi.values()[i + 1] - h;
        let excess = below.max(above);
        report.levels_checked += 1;
        if excess > 0.0 {
            report.violations += 1;
            report.worst_excess = report.worst_excess.max(excess);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathsim::SeedSpec;

    #[test]
    fn level_grid_refines_near_zero() {
        let g = level_grid(2.0, 10_000).unwrap();
        assert_eq!(g.len(), 10_001);
        assert_eq!(g.t_max(), 2.0);
        let near = g.times().iter().filter(|&&l| l <= 0.02).count();
        assert!(near > 1500, "{near}");
    }

    #[test]
    fn tau_is_identity_without_reinforcement() {
        let g = Arc::new(level_grid(2.0, 100).unwrap());
        let lam = sample_stable_subordinator(0.5, &g, SeedSpec::new(1, 0)).unwrap();
        let par = Params::new(0.5, 0.0).unwrap();
        let tau = time_change_tau(&lam, &par).unwrap();
        assert_eq!(tau.values(), tau.times());
        assert_eq!(inverse_local_time_hat(&lam, &tau, &par).unwrap(), lam);
    }

    #[test]
    fn identity_inverts_to_identity() {
        let g = Arc::new(build_grid(1.0, 10, GridScheme::Uniform).unwrap());
        let id =
            MonotonePath::new(Arc::clone(&g), g.times().to_vec(), Continuity::Continuous).unwrap();
        let levels = uniform_levels(1.0, 9);
        let inv = invert_monotone(&id, &levels).unwrap();
        for (a, b) in inv.values().iter().zip(&levels) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn step_inverts_to_jump() {
        let g = Arc::new(build_grid(2.0, 2, GridScheme::Uniform).unwrap());
        let step = MonotonePath::new(g, vec![0.0, 1.0, 1.0], Continuity::Cadlag).unwrap();
        assert!(invert_monotone(&step, &[0.0, 0.5, 1.0]).is_err());
        let inv = invert_monotone(&step, &[0.0, 0.5, 0.99]).unwrap();
        assert_eq!(inv.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn unreachable_level_rejected() {
        let g = Arc::new(build_grid(1.0, 2, GridScheme::Uniform).unwrap());
        let p = MonotonePath::new(g, vec![0.0, 0.5, 0.5], Continuity::Continuous).unwrap();
        assert!(invert_monotone(&p, &[0.0, 0.5]).is_err());
    }
}
