use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::{Check, Record, StatReport};
use crate::harness::stats::{batch_mean, Estimate};
use crate::pathsim::SeedSpec;
use crate::quad::{self, Tolerance};
use statrs::function::gamma::gamma;

use crate::specfun::{self, Params, TestFunction};

/// Default bound on `∫_0^ε x² π̂(dx)`, the part of the jump law removed by
/// truncation that a compensating drift cannot reproduce.
pub const DEFAULT_SECOND_MOMENT_TOL: f64 = 1e-4;

/// Default relative size of the expected tail of the exponential functional
/// at which integration stops.
pub const DEFAULT_TAIL_REL: f64 = 1e-6;

/// A subordinator path: linear drift plus finitely many jumps on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub horizon: f64,
    pub drift_rate: f64,
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
}

impl JumpPath {
    pub fn new(
        horizon: f64,
        drift_rate: f64,
        jump_times: Vec<f64>,
        jump_sizes: Vec<f64>,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(drift_rate >= 0.0 && drift_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "drift must be nonnegative, got {drift_rate}"
            )));
        }
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::Input("jump times and sizes differ in length".into()));
        }
        let mut last = 0.0;
        for &t in &jump_times {
            if !(t > last && t <= horizon) {
                return Err(Error::Input(format!(
                    "jump time {t} out of order or beyond the horizon"
                )));
            }
            last = t;
        }
        if jump_sizes.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Input("jump sizes must be positive".into()));
        }
        Ok(JumpPath {
            horizon,
            drift_rate,
            jump_times,
            jump_sizes,
        })
    }

    /// `drift · t + Σ_{jumps ≤ t} size`.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.jump_times.partition_point(|&s| s <= t);
        self.drift_rate * t + self.jump_sizes[..n].iter().sum::<f64>()
    }

    pub fn terminal(&self) -> f64 {
        self.value_at(self.horizon)
    }
}

/// `∫_0^T e^{-αξ_t} dt` and the expected remainder `e^{-αξ_T}/Φ̂(α)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFunctional {
    pub value: f64,
    pub tail: f64,
    pub horizon: f64,
}

impl ExpFunctional {
    pub fn converged(&self, tail_rel: f64) -> bool {
        self.tail < tail_rel * self.value
    }
}

/// `∫_s^{s+Δ} e^{-α(x + b(t-s))} dt`.
fn drift_piece(alpha: f64, x: f64, b: f64, dt: f64) -> f64 {
    let level = (-alpha * x).exp();
    if b == 0.0 {
        level * dt
    } else {
        -level * (-alpha * b * dt).exp_m1() / (alpha * b)
    }
}

/// Integrates `e^{-αξ}` exactly between jumps.
pub fn exponential_functional(xi: &JumpPath, params: &Params) -> Result<ExpFunctional> {
    let alpha = params.alpha();
    let b = xi.drift_rate;
    let mut value = 0.0;
    let mut t = 0.0;
    let mut x = 0.0;
    for (&s, &j) in xi.jump_times.iter().zip(&xi.jump_sizes) {
        value += drift_piece(alpha, x, b, s - t);
        x += b * (s - t) + j;
        t = s;
    }
    value += drift_piece(alpha, x, b, xi.horizon - t);
    x += b * (xi.horizon - t);
    Ok(ExpFunctional {
        value,
        tail: (-alpha * x).exp() / specfun::laplace_exponent_hat(alpha, params)?,
        horizon: xi.horizon,
    })
}

/// `1 - e^{-z} - z`, accurate for small `z`.
fn one_minus_exp_minus_linear(z: f64) -> f64 {
    if z < 1e-3 {
        -z * z * (0.5 - z / 6.0 + z * z / 24.0)
    } else {
        -(-z).exp_m1() - z
    }
}

/// `∫_0^ε g(x) π̂(dx)` with `x = y^{1/(1-α)}` to tame the density at 0.
fn small_jump_integral<F: Fn(f64) -> f64>(eps: f64, params: &Params, g: F) -> Result<f64> {
    let m = 1.0 / (1.0 - params.alpha());
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let x = y.powf(m);
        g(x) * specfun::levy_density_hat(x, params).unwrap_or(0.0) * m * y.powf(m - 1.0)
    };
    Ok(quad::integrate(f, 0.0, eps.powf(1.0 / m), Tolerance::new(1e-300, 1e-12))?.value)
}

/// Sampler of `ξ̂` with jumps below `ε` replaced by their mean drift.
#[derive(Debug, Clone)]
pub struct XiHat {
    params: Params,
    eps: f64,
    rate: f64,
    drift: f64,
    e_qeps_m1: f64,
    phi_alpha: f64,
}

impl XiHat {
    pub fn new(params: &Params, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation must be positive, got {eps}"
            )));
        }
        let rate = specfun::levy_tail_hat(eps, params)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Domain(format!(
                "truncation {eps} leaves no jumps (rate {rate})"
            )));
        }
        Ok(XiHat {
            params: *params,
            eps,
            rate,
            drift: specfun::small_jump_mean_hat(eps, params)?,
            e_qeps_m1: (params.q() * eps).exp_m1(),
            phi_alpha: specfun::laplace_exponent_hat(params.alpha(), params)?,
        })
    }

    /// Largest truncation with `∫_0^ε x² π̂(dx) ≤ tol`.
    pub fn with_second_moment_tol(params: &Params, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let m2 = |e: f64| small_jump_integral(e, params, |x| x * x);
        let (mut lo, mut hi) = (1e-12f64.ln(), 10f64.ln());
        if m2(hi.exp())? <= tol {
            return XiHat::new(params, hi.exp());
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if m2(mid.exp())? <= tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        XiHat::new(params, lo.exp())
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Rate of jumps above `ε`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Compensating drift `∫_0^ε x π̂(dx)`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// `∫_0^ε x² π̂(dx)`.
    pub fn small_jump_second_moment(&self) -> Result<f64> {
        small_jump_integral(self.eps, &self.params, |x| x * x)
    }

    /// Laplace exponent of the truncated process,
    /// `Φ̂(r) - ∫_0^ε (1 - e^{-rx} - rx) π̂(dx)`.
    pub fn laplace_exponent(&self, r: f64) -> Result<f64> {
        let shift = small_jump_integral(self.eps, &self.params, |x| {
            one_minus_exp_minus_linear(r * x)
        })?;
        Ok(specfun::laplace_exponent_hat(r, &self.params)? - shift)
    }

    /// A jump size from `π̂` restricted to `(ε, ∞)`, by exact inversion of
    /// the tail `∝ (e^{(1-2p)x} - 1)^{-α}`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        let q = self.params.q();
        (self.e_qeps_m1 * u.powf(-1.0 / self.params.alpha())).ln_1p() / q
    }

    fn next_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / self.rate
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<JumpPath> {
        let mut times = Vec::new();
        let mut sizes = Vec::new();
        let mut t = self.next_gap(rng);
        while t <= horizon {
            times.push(t);
            sizes.push(self.sample_jump(rng));
            t += self.next_gap(rng);
        }
        JumpPath::new(horizon, self.drift, times, sizes)
    }

    /// `ξ̂_t` alone.
    pub fn sample_value<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        let mut x = self.drift * t;
        let mut s = self.next_gap(rng);
        while s <= t {
            x += self.sample_jump(rng);
            s += self.next_gap(rng);
        }
        x
    }

    /// `Î` from one path, extended in doublings of the horizon until the
    /// expected remainder falls below `tail_rel` times the integral.
    pub fn sample_exponential_functional<R: Rng + ?Sized>(
        &self,
        tail_rel: f64,
        rng: &mut R,
    ) -> ExpFunctional {
        let alpha = self.params.alpha();
        let b = self.drift;
        let mut horizon = 4.0 / self.phi_alpha;
        let mut value = 0.0;
        let mut t = 0.0;
        let mut x = 0.0;
        let mut next = self.next_gap(rng);
        loop {
            while next <= horizon {
                value += drift_piece(alpha, x, b, next - t);
                x += b * (next - t) + self.sample_jump(rng);
                t = next;
                next += self.next_gap(rng);
            }
            let end = drift_piece(alpha, x, b, horizon - t);
            let x_end = x + b * (horizon - t);
            let tail = (-alpha * x_end).exp() / self.phi_alpha;
            if tail < tail_rel * (value + end) || horizon > 1e12 {
                return ExpFunctional {
                    value: value + end,
                    tail,
                    horizon,
                };
            }
            horizon *= 2.0;
        }
    }

    /// `|1/Φ_ε(α) - 1/Φ̂(α)|`: the bias of `E[Î]` due to truncation.
    pub fn mean_functional_budget(&self) -> Result<f64> {
        let a = self.params.alpha();
        Ok((1.0 / self.laplace_exponent(a)? - 1.0 / self.phi_alpha).abs())
    }

    /// `|e^{-Φ_ε(r)} - e^{-Φ̂(r)}|`: the bias of `E[e^{-rξ̂_1}]`.
    pub fn laplace_budget(&self, r: f64) -> Result<f64> {
        let exact = specfun::laplace_exponent_hat(r, &self.params)?;
        Ok(((-self.laplace_exponent(r)?).exp() - (-exact).exp()).abs())
    }
}

/// `ξ̂` on `[0, horizon]` with jumps below `trunc_eps` compensated by drift.
pub fn sample_xi_hat(
    params: &Params,
    horizon: f64,
    trunc_eps: f64,
    seed: SeedSpec,
) -> Result<JumpPath> {
    XiHat::new(params, trunc_eps)?.sample_path(horizon, &mut seed.rng())
}

/// The constant printed with the size-bias identity,
/// `(1/2 - p)^{-α} (1-2p) / Γ(1-α)`; it equals `E[L̂_1]`.
pub fn size_bias_printed_constant(params: &Params) -> f64 {
    (0.5 - params.p()).powf(-params.alpha()) * params.q() / gamma(1.0 - params.alpha())
}

/// Compares `E f(Î)` with `c E[L̂_1 f(L̂_1)]`, `c = αm`, on independent
/// samples. A second, non-gating record uses the printed constant instead.
pub fn size_bias_check(
    i_samples: &[f64],
    lhat_samples: &[f64],
    f: &TestFunction,
    params: &Params,
    se_multiplier: f64,
) -> StatReport {
    let mut report = StatReport::new("size_bias", "", 0);
    if i_samples.is_empty() || lhat_samples.is_empty() {
        report.warn("no samples");
        return report;
    }
    let batches = 100;
    let fi: Vec<f64> = i_samples.iter().map(|&x| f.eval(x)).collect();
    let lf: Vec<f64> = lhat_samples.iter().map(|&x| x * f.eval(x)).collect();
    let lhs = batch_mean(&fi, batches);
    let m = batch_mean(&lf, batches);
    let combined = |c: f64| -> Estimate {
        Estimate {
            mean: lhs.mean,
            se: (lhs.se * lhs.se + c * c * m.se * m.se).sqrt(),
            n: lhs.n,
        }
    };
    let c = specfun::alpha_m(params);
    report.push(Record::within(
        "size_bias",
        combined(c),
        c * m.mean,
        "alpha_m times the Monte Carlo mean of L f(L) over independent L̂_1 draws",
        se_multiplier,
        0.0,
    ));
    let c_printed = size_bias_printed_constant(params);
    let e = combined(c_printed);
    report.push(Record::new(
        "size_bias_printed_constant",
        e.mean,
        e.se,
        c_printed * m.mean,
        "printed constant times the Monte Carlo mean of L f(L)",
        Check::Info {
            se_multiplier,
            bias_budget: 0.0,
        },
    ));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_drift_functional() {
        let par = Params::new(0.5, 0.25).unwrap();
        let b = 3.0;
        let xi = JumpPath::new(200.0, b, vec![], vec![]).unwrap();
        let f = exponential_functional(&xi, &par).unwrap();
        assert!((f.value - 1.0 / (0.5 * b)).abs() < 1e-15);
        assert!(f.converged(1e-6));
    }

    #[test]
    fn functional_over_one_jump() {
        let par = Params::new(0.5, 0.0).unwrap();
        let xi = JumpPath::new(2.0, 0.0, vec![1.0], vec![2.0]).unwrap();
        let f = exponential_functional(&xi, &par).unwrap();
        assert!((f.value - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(xi.value_at(0.5), 0.0);
        assert_eq!(xi.terminal(), 2.0);
    }

    #[test]
    fn jump_path_validation() {
        assert!(JumpPath::new(1.0, 0.0, vec![0.5, 0.4], vec![1.0, 1.0]).is_err());
        assert!(JumpPath::new(1.0, 0.0, vec![1.5], vec![1.0]).is_err());
        assert!(JumpPath::new(1.0, -1.0, vec![], vec![]).is_err());
        assert!(JumpPath::new(1.0, 0.0, vec![0.5], vec![0.0]).is_err());
    }

    #[test]
    fn small_z_series() {
        for z in [1e-9f64, 1e-5, 9e-4, 2e-3, 0.5, 3.0] {
            let direct = 1.0 - (-z).exp() - z;
            let got = one_minus_exp_minus_linear(z);
            assert!(
                (got - direct).abs() <= 1e-12 * z * z + 1e-16,
                "{z}: {got} {direct}"
            );
        }
    }

    #[test]
    fn huge_truncation_rejected() {
        let par = Params::new(0.5, 0.25).unwrap();
        assert!(XiHat::new(&par, 1e4).is_err());
        assert!(XiHat::new(&par, 0.0).is_err());
    }

    #[test]
    fn printed_constant_is_the_first_moment() {
        let par = Params::new(0.3, -0.5).unwrap();
        let m1 = specfun::moment_lhat(1, 1.0, &par).unwrap();
        assert!((size_bias_printed_constant(&par) - m1).abs() < 1e-12 * m1);
        assert!((specfun::alpha_m(&par) * m1 - 1.0).abs() < 1e-12);
    }
}
