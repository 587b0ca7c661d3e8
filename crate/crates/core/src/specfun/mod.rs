//! Closed-form layer: densities, moments, Laplace exponents, Lévy densities
//! and scaling-limit constants of the noise-reinforced Bessel process.
//!
//! Everything here is deterministic and serves as the reference for the
//! Monte Carlo modules. Gamma and Beta products are accumulated in log space.

mod params;
mod testfn;

pub use params::Params;
pub use testfn::{Piece, PowerTerm, TestFunction};

use std::f64::consts::LN_2;

use statrs::function::gamma::{gamma, gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn require_order(n: u32) -> Result<()> {
    if n == 0 {
        Err(Error::Domain("moment order must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Density at `x` of the reinforced process at time `s`, which equals the
/// Bessel density at time `s/(1-2p)`.
pub fn reinforced_density(x: f64, s: f64, params: &Params) -> Result<f64> {
    require_positive("x", x)?;
    require_positive("s", s)?;
    let a = params.alpha();
    let q = params.q();
    let ln = a * LN_2 - ln_gamma(1.0 - a) + (a - 1.0) * (s / q).ln() + (1.0 - 2.0 * a) * x.ln()
        - q * x * x / (2.0 * s);
    Ok(ln.exp())
}

/// `P(R̂_s ≤ x)`: `(1-2p) R̂_s² / (2s)` is Gamma(1-α, 1).
pub fn reinforced_cdf(x: f64, s: f64, params: &Params) -> Result<f64> {
    require_positive("s", s)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr(
        1.0 - params.alpha(),
        params.q() * x * x / (2.0 * s),
    ))
}

/// `ln E[L̂_1^n]`.
pub fn ln_moment_lhat(n: u32, params: &Params) -> Result<f64> {
    require_order(n)?;
    let a = params.alpha();
    let q = params.q();
    if n == 1 {
        return Ok(a * LN_2 - ln_gamma(1.0 - a) - (a - 1.0) * q.ln());
    }
    let nf = f64::from(n);
    let mut ln = a * nf * LN_2 + (1.0 - a * nf) * q.ln() + (nf - 1.0) * ln_gamma(1.0 + a)
        - nf * ln_gamma(1.0 - a)
        + ln_gamma(nf);
    for k in 1..n {
        let k = f64::from(k);
        ln += ln_gamma(a * k / q) - ln_gamma(a * (1.0 + k / q));
    }
    Ok(ln)
}

/// `E[L̂_t^n]`, computed as `t^{αn} E[L̂_1^n]`.
pub fn moment_lhat(n: u32, t: f64, params: &Params) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be nonnegative, got {t}")));
    }
    let at_one = ln_moment_lhat(n, params)?.exp();
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(at_one * t.powf(params.alpha() * f64::from(n)))
}

/// The unreinforced (Mittag-Leffler) moments `(2^α Γ(1+α)/Γ(1-α))^n n!/Γ(1+αn)`.
pub fn moment_lhat_mittag_leffler(n: u32, params: &Params) -> Result<f64> {
    require_order(n)?;
    if params.p() != 0.0 {
        return Err(Error::Domain(format!(
            "the Mittag-Leffler form requires p = 0, got p = {}",
            params.p()
        )));
    }
    let a = params.alpha();
    let nf = f64::from(n);
    let base = a * LN_2 + ln_gamma(1.0 + a) - ln_gamma(1.0 - a);
    Ok((nf * base + ln_gamma(nf + 1.0) - ln_gamma(1.0 + a * nf)).exp())
}

/// Laplace exponent `Φ̂` of the Lamperti subordinator of the reinforced
/// inverse local time, in Beta-function form.
pub fn laplace_exponent_hat(r: f64, params: &Params) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let a = params.alpha();
    let q = params.q();
    let x = r / q;
    let ln_beta = ln_gamma(a) + ln_gamma(x) - ln_gamma(a + x);
    Ok((-a * LN_2 + a * q.ln() + ln_gamma(1.0 - a) - a.ln() - ln_beta).exp())
}

/// Laplace exponent `Φ` of the unreinforced Lamperti subordinator,
/// `2^{-α} Γ(1-α)/Γ(1+α) · Γ(r+α)/Γ(r)`.
pub fn laplace_exponent_bessel(r: f64, alpha: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let c = 2f64.powf(-alpha) * gamma(1.0 - alpha) / gamma(1.0 + alpha);
    c * (ln_gamma(r + alpha) - ln_gamma(r)).exp()
}

/// `αm = α Φ̂'(0) = 2^{-α} (1-2p)^{α-1} Γ(1-α)`.
pub fn alpha_m(params: &Params) -> f64 {
    let a = params.alpha();
    2f64.powf(-a) * params.q().powf(a - 1.0) * gamma(1.0 - a)
}

/// `E[λ̂_1^{-αn}] = Γ(n) / (αm Φ̂(α) ⋯ Φ̂(α(n-1)))`.
pub fn moment_lhat_via_phi(n: u32, params: &Params) -> Result<f64> {
    require_order(n)?;
    let a = params.alpha();
    let mut ln = ln_gamma(f64::from(n)) - alpha_m(params).ln();
    for k in 1..n {
        ln -= laplace_exponent_hat(a * f64::from(k), params)?.ln();
    }
    Ok(ln.exp())
}

/// Density of the Lévy measure `π̂` of the reinforced Lamperti subordinator.
pub fn levy_density_hat(x: f64, params: &Params) -> Result<f64> {
    require_positive("x", x)?;
    let a = params.alpha();
    let q = params.q();
    let one_minus = -(-q * x).exp_m1();
    let ln = (a + 1.0) * q.ln() - a * LN_2 - ln_gamma(a) - (a + 1.0) * one_minus.ln() - a * q * x;
    Ok(ln.exp())
}

/// Tail `π̂((x, ∞)) = (1-2p)^α 2^{-α} (e^{(1-2p)x} - 1)^{-α} / Γ(1+α)`.
pub fn levy_tail_hat(x: f64, params: &Params) -> Result<f64> {
    require_positive("x", x)?;
    let a = params.alpha();
    let q = params.q();
    let ln = a * q.ln() - a * LN_2 - ln_gamma(1.0 + a) - a * (q * x).exp_m1().ln();
    Ok(ln.exp())
}

/// Tail `π̂((x, ∞))` by quadrature; independent of [`levy_tail_hat`].
pub fn levy_tail_hat_quadrature(x: f64, params: &Params) -> Result<f64> {
    require_positive("x", x)?;
    let tol = Tolerance::new(0.0, 1e-12);
    let f = |y: f64| levy_density_hat(y, params).unwrap_or(0.0);
    Ok(quad::integrate_to_infinity(f, x, tol)?.value)
}

/// Mean of the jumps below `eps`: `∫_0^ε x π̂(dx)`.
pub fn small_jump_mean_hat(eps: f64, params: &Params) -> Result<f64> {
    require_positive("eps", eps)?;
    let a = params.alpha();
    // x = y^m removes the x^{-α} behaviour at 0
    let m = 1.0 / (1.0 - a);
    let f = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let x = y.powf(m);
        x * levy_density_hat(x, params).unwrap_or(0.0) * m * y.powf(m - 1.0)
    };
    let r = quad::integrate(f, 0.0, eps.powf(1.0 / m), Tolerance::new(0.0, 1e-12))?;
    Ok(r.value)
}

/// `Φ̂(r)` recomputed as `∫ (1 - e^{-rx}) π̂(dx)` by quadrature.
pub fn laplace_exponent_hat_quadrature(r: f64, params: &Params) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("r must be nonnegative, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let a = params.alpha();
    let m = 1.0 / (1.0 - a);
    let tol = Tolerance::new(0.0, 1e-11);
    let near = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let x = y.powf(m);
        -(-r * x).exp_m1() * levy_density_hat(x, params).unwrap_or(0.0) * m * y.powf(m - 1.0)
    };
    let far = |x: f64| -(-r * x).exp_m1() * levy_density_hat(x, params).unwrap_or(0.0);
    let split = 1.0;
    Ok(quad::integrate(near, 0.0, split, tol)?.value
        + quad::integrate_to_infinity(far, split, tol)?.value)
}

/// Lévy density `2^{-α} t^{-α-1} / Γ(α)` of the Bessel inverse local time.
pub fn levy_density_stable(t: f64, alpha: f64) -> Result<f64> {
    require_positive("t", t)?;
    Ok((-alpha * LN_2 - ln_gamma(alpha) - (alpha + 1.0) * t.ln()).exp())
}

/// `a = 2^α Γ(1+α)/Γ(1-α)`; `(λ_{at})` is a standard stable subordinator.
pub fn stable_time_scale(alpha: f64) -> f64 {
    2f64.powf(alpha) * gamma(1.0 + alpha) / gamma(1.0 - alpha)
}

/// Laplace exponent `r^α / a` of the Bessel inverse local time.
pub fn stable_laplace_exponent(r: f64, alpha: f64) -> f64 {
    r.powf(alpha) / stable_time_scale(alpha)
}

/// Jump kernel of the generator of `λ̂` on `(1, ∞)`, including its constant:
/// `(1-2p)^{α+1} 2^{-α}/Γ(α) · v^{-2p} (v^{1-2p} - 1)^{-α-1}`.
pub fn generator_kernel_hat(v: f64, params: &Params) -> Result<f64> {
    if !(v > 1.0 && v.is_finite()) {
        return Err(Error::Domain(format!("v must exceed 1, got {v}")));
    }
    let a = params.alpha();
    let q = params.q();
    let ln = (a + 1.0) * q.ln()
        - a * LN_2
        - ln_gamma(a)
        - 2.0 * params.p() * v.ln()
        - (a + 1.0) * (q * v.ln()).exp_m1().ln();
    Ok(ln.exp())
}

/// `c₁(f) = α^{-1} ∫ f(x) x^{1-2α} dx`.
pub fn c1(f: &TestFunction, params: &Params) -> Result<f64> {
    Ok(f.weighted_integral(params.alpha())? / params.alpha())
}

fn require_centered(f: &TestFunction, params: &Params) -> Result<()> {
    let a = params.alpha();
    let c = f.weighted_integral(a)?;
    let scale = f.weighted_abs_bound(a)?.max(f64::MIN_POSITIVE);
    if c.abs() > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "c1(f) = {} is not zero; the second-order constant diverges",
            c / a
        )));
    }
    Ok(())
}

/// `c₂(f) = 4/α ∫_0^∞ F(x)² x^{2α-1} dx` with `F(x) = ∫_0^x f(t) t^{1-2α} dt`
/// in closed form and the outer integral by quadrature.
pub fn c2(f: &TestFunction, params: &Params) -> Result<f64> {
    require_centered(f, params)?;
    let a = params.alpha();
    let integrand = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let big_f = f.weighted_antiderivative(a, x).unwrap_or(0.0);
        big_f * big_f * x.powf(2.0 * a - 1.0)
    };
    let r = quad::integrate_piecewise(integrand, &f.knots(), Tolerance::new(1e-14, 1e-13))?;
    Ok(4.0 / a * r.value)
}

/// `c₂(f)` through the transform `ḡ(y) = 2α F(y^{1/(2α)})`:
/// `(1/(2α⁴)) ∫_0^∞ ḡ(y)² dy`.
pub fn c2_via_gbar(f: &TestFunction, params: &Params) -> Result<f64> {
    require_centered(f, params)?;
    let a = params.alpha();
    let gbar = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        2.0 * a
            * f.weighted_antiderivative(a, y.powf(1.0 / (2.0 * a)))
                .unwrap_or(0.0)
    };
    let knots: Vec<f64> = f.knots().iter().map(|k| k.powf(2.0 * a)).collect();
    let r = quad::integrate_piecewise(|y| gbar(y).powi(2), &knots, Tolerance::new(1e-14, 1e-13))?;
    Ok(r.value / (2.0 * a.powi(4)))
}

/// `E[L̂^x_t] = α 2^α/Γ(1-α) ∫_0^t (s/(1-2p))^{α-1} e^{-(1-2p)x²/(2s)} ds`,
/// integrated in `u = s^α` so the endpoint singularity disappears.
pub fn mean_two_param_local_time(x: f64, t: f64, params: &Params) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    require_positive("t", t)?;
    let a = params.alpha();
    let q = params.q();
    let c = q * x * x / 2.0;
    let prefactor = (a * LN_2 + (1.0 - a) * q.ln() - ln_gamma(1.0 - a)).exp();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        (-c / u.powf(1.0 / a)).exp()
    };
    let r = quad::integrate(integrand, 0.0, t.powf(a), Tolerance::new(1e-12, 1e-12))?;
    Ok(prefactor * r.value)
}

/// `E f(R̂_s)`. Against the marginal density each power term `c x^e` on
/// `[a, b)` is an incomplete gamma integral of order `1 - α + e/2`.
pub fn expected_test_function(f: &TestFunction, s: f64, params: &Params) -> Result<f64> {
    require_positive("s", s)?;
    let a = params.alpha();
    let q = params.q();
    let y = |x: f64| {
        if x.is_finite() {
            q * x * x / (2.0 * s)
        } else {
            f64::INFINITY
        }
    };
    let mut total = 0.0;
    for piece in f.pieces() {
        let (ya, yb) = (y(piece.start), y(piece.end));
        for t in &piece.terms {
            if t.coef == 0.0 {
                continue;
            }
            let k = 1.0 - a + t.exponent / 2.0;
            if k <= 0.0 {
                return Err(Error::Domain(format!(
                    "term x^{} is not integrable against the density at 0",
                    t.exponent
                )));
            }
            let cdf = |y: f64| match y {
                y if y <= 0.0 => 0.0,
                y if y.is_finite() => gamma_lr(k, y),
                _ => 1.0,
            };
            let mass = cdf(yb) - cdf(ya);
            // 2^α/Γ(1-α) (s/q)^{α-1} · ½ (2s/q)^k Γ(k)
            let ln = a * LN_2 - ln_gamma(1.0 - a)
                + (a - 1.0 + k) * (s / q).ln()
                + (k - 1.0) * LN_2
                + ln_gamma(k);
            total += t.coef * ln.exp() * mass;
        }
    }
    Ok(total)
}

/// `E[n^{-α/2} ∫_0^n f(R̂_s) ds]`, the finite-`n` mean of the second-order
/// scaling functional.
pub fn mean_second_order_functional(f: &TestFunction, n: f64, params: &Params) -> Result<f64> {
    require_positive("n", n)?;
    let mut knots = vec![0.0];
    let mut k = 1e-3;
    while k < n {
        knots.push(k);
        k *= 10.0;
    }
    knots.push(n);
    let g = |s: f64| {
        if s > 0.0 {
            expected_test_function(f, s, params).unwrap_or(f64::NAN)
        } else {
            0.0
        }
    };
    let r = quad::integrate_piecewise(g, &knots, Tolerance::new(1e-12, 1e-10))?;
    if !r.value.is_finite() {
        return Err(Error::Domain(
            "expectation of the test function is not finite".into(),
        ));
    }
    Ok(n.powf(-params.alpha() / 2.0) * r.value)
}
