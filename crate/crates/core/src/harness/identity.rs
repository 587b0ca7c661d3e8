//! Closed-form identities checked against each other; no randomness.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::report::{Record, StatReport};
use crate::error::Result;
use crate::specfun::{self, Params, TestFunction};

/// Relative tolerances of the identity suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityTolerances {
    pub moment_product: f64,
    pub mittag_leffler: f64,
    pub exponent_scaling: f64,
    pub exponent_quadrature: f64,
    pub generator_kernel: f64,
    pub c2_routes: f64,
}

impl Default for IdentityTolerances {
    fn default() -> Self {
        IdentityTolerances {
            moment_product: 1e-10,
            mittag_leffler: 1e-12,
            exponent_scaling: 1e-12,
            exponent_quadrature: 1e-6,
            generator_kernel: 1e-10,
            c2_routes: 1e-8,
        }
    }
}

pub const IDENTITY_ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const IDENTITY_PS: [f64; 5] = [-1.0, -0.25, 0.0, 0.25, 0.45];

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn worst<I: IntoIterator<Item = Result<f64>>>(it: I) -> Result<f64> {
    let mut m = 0.0f64;
    for x in it {
        let x = x?;
        // a NaN must fail the check, not vanish in max
        m = if x.is_nan() { f64::INFINITY } else { m.max(x) };
    }
    Ok(m)
}

pub fn run_identity_suite() -> Result<StatReport> {
    run_identity_suite_with(&IdentityTolerances::default())
}

pub fn run_identity_suite_with(tol: &IdentityTolerances) -> Result<StatReport> {
    let start = Instant::now();
    let mut report = StatReport::new("identities", "", 0);
    let grid: Vec<Params> = IDENTITY_ALPHAS
        .iter()
        .flat_map(|&a| IDENTITY_PS.iter().map(move |&p| Params::new(a, p)))
        .collect::<Result<_>>()?;

    let e = worst(grid.iter().flat_map(|par| {
        (1..=10).map(move |n| {
            Ok(rel(
                specfun::moment_lhat(n, 1.0, par)?,
                specfun::moment_lhat_via_phi(n, par)?,
            ))
        })
    }))?;
    report.push(Record::at_most(
        "moments vs laplace exponent product, n<=10",
        e,
        tol.moment_product,
        "specfun::moment_lhat vs specfun::moment_lhat_via_phi",
    ));

    let e = worst(IDENTITY_ALPHAS.iter().flat_map(|&a| {
        (1..=10).map(move |n| {
            let par = Params::new(a, 0.0)?;
            Ok(rel(
                specfun::moment_lhat(n, 1.0, &par)?,
                specfun::moment_lhat_mittag_leffler(n, &par)?,
            ))
        })
    }))?;
    report.push(Record::at_most(
        "p=0 moments vs Mittag-Leffler",
        e,
        tol.mittag_leffler,
        "specfun::moment_lhat vs specfun::moment_lhat_mittag_leffler",
    ));

    let rs = [0.01, 0.3, 1.0, 7.0, 50.0];
    let e = worst(grid.iter().flat_map(|par| {
        rs.iter().map(move |&r| {
            let via = par.q().powf(par.alpha())
                * specfun::laplace_exponent_bessel(r / par.q(), par.alpha());
            Ok(rel(specfun::laplace_exponent_hat(r, par)?, via))
        })
    }))?;
    report.push(Record::at_most(
        "laplace exponent scaling relation",
        e,
        tol.exponent_scaling,
        "specfun::laplace_exponent_hat vs specfun::laplace_exponent_bessel",
    ));

    let e = worst(grid.iter().flat_map(|par| {
        [0.1, 1.0, 10.0].into_iter().map(move |r| {
            Ok(rel(
                specfun::laplace_exponent_hat_quadrature(r, par)?,
                specfun::laplace_exponent_hat(r, par)?,
            ))
        })
    }))?;
    report.push(Record::at_most(
        "laplace exponent vs levy measure quadrature",
        e,
        tol.exponent_quadrature,
        "specfun::laplace_exponent_hat vs specfun::laplace_exponent_hat_quadrature",
    ));

    let e = worst(grid.iter().flat_map(|par| {
        (1..100).map(move |i| {
            let v = 1.0 + 0.05 * (i as f64).powf(1.5);
            Ok(rel(
                specfun::levy_density_hat(v.ln(), par)? / v,
                specfun::generator_kernel_hat(v, par)?,
            ))
        })
    }))?;
    report.push(Record::at_most(
        "generator kernel vs levy density in log coordinates",
        e,
        tol.generator_kernel,
        "specfun::generator_kernel_hat vs specfun::levy_density_hat",
    ));

    let e = worst(IDENTITY_ALPHAS.iter().map(|&a| {
        let par = Params::new(a, 0.0)?;
        let f = TestFunction::signed_bump(a);
        Ok(rel(specfun::c2_via_gbar(&f, &par)?, specfun::c2(&f, &par)?))
    }))?;
    report.push(Record::at_most(
        "c2 vs transformed route",
        e,
        tol.c2_routes,
        "specfun::c2 vs specfun::c2_via_gbar",
    ));
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok(report)
}
