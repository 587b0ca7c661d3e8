//! Pathwise and ensemble properties of the local-time estimators.

use std::sync::Arc;

use proptest::prelude::*;
use rayon::prelude::*;
use rbessel::harness::stats::batch_mean;
use rbessel::localtime::{
    band_weight, eps_from_step, estimate_l0, estimate_lhat_direct, occupation_time,
    two_param_local_time_at, ReinforcedLocalTime,
};
use rbessel::pathsim::{
    build_grid, sample_bessel_path, GridScheme, Reinforcement, SeedSpec, TimeGrid,
};
use rbessel::specfun::{self, Params};

fn refined(n: usize) -> Arc<TimeGrid> {
    let scheme = GridScheme::refined_near_zero(1.0, n, 0.2).unwrap();
    Arc::new(build_grid(1.0, n, scheme).unwrap())
}

struct Setup {
    par: Params,
    grid: Arc<TimeGrid>,
    map: Reinforcement,
    lt: ReinforcedLocalTime,
}

fn setup(alpha: f64, p: f64, n: usize) -> Setup {
    let par = Params::new(alpha, p).unwrap();
    let grid = refined(n);
    let map = Reinforcement::new(&grid, &par).unwrap();
    let lt = ReinforcedLocalTime::new(&map).unwrap();
    Setup { par, grid, map, lt }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lhat_grows_only_near_zero(alpha in 0.2f64..0.8, p in -0.5f64..0.4, seed in 0u64..1000) {
        let s = setup(alpha, p, 5_000);
        let base = sample_bessel_path(&s.grid, &s.par, SeedSpec::new(seed, 0));
        let eps = eps_from_step(s.grid.bulk_step(), 0.5);
        let l = estimate_l0(&base, &s.par, eps).unwrap().path;
        let lhat = s.lt.stieltjes(&l).unwrap();
        let x = base.values();
        for (j, w) in lhat.values().windows(2).enumerate() {
            prop_assert!(w[1] >= w[0]);
            if w[1] > w[0] {
                prop_assert!(x[j + 1] <= eps, "grew at {} where X = {}", j + 1, x[j + 1]);
            }
        }
        let r = s.map.apply(&base).unwrap();
        let direct = estimate_lhat_direct(&r, &s.par, eps).unwrap().path;
        for (j, w) in direct.values().windows(2).enumerate() {
            if w[1] > w[0] {
                prop_assert!(r.values()[j + 1] <= eps);
            }
        }
    }

    #[test]
    fn routes_agree_in_sup_norm(alpha in 0.2f64..0.8, p in -0.5f64..0.4, seed in 0u64..1000) {
        let s = setup(alpha, p, 20_000);
        let base = sample_bessel_path(&s.grid, &s.par, SeedSpec::new(seed, 1));
        let eps = eps_from_step(s.grid.bulk_step(), 0.5);
        let l = estimate_l0(&base, &s.par, eps).unwrap().path;
        let n = l.values().len() - 1;
        let r = s.lt.routes_at(l.values(), &[n]).unwrap();
        prop_assert!(r.sup_rel_gap <= 1e-3, "gap {}", r.sup_rel_gap);
    }

    #[test]
    fn occupation_is_tiled_by_bands(alpha in 0.2f64..0.8, p in -0.5f64..0.4, seed in 0u64..1000) {
        let s = setup(alpha, p, 20_000);
        let base = sample_bessel_path(&s.grid, &s.par, SeedSpec::new(seed, 2));
        let r = s.map.apply(&base).unwrap();
        let (a, b, cells) = (0.2, 0.8, 12);
        let w = (b - a) / (2.0 * cells as f64);
        let levels: Vec<f64> = (0..cells).map(|i| a + w * (2 * i + 1) as f64).collect();
        let lx = two_param_local_time_at(&r, &s.par, &levels, w, 1.0).unwrap();
        let from_density: f64 = lx
            .iter()
            .zip(&levels)
            .map(|(v, &x)| v * band_weight(x, w, alpha) / alpha)
            .sum();
        let occ = occupation_time(&r, a, b, 1.0);
        prop_assert!((from_density - occ).abs() <= 1e-12 * occ.max(1.0), "{from_density} vs {occ}");
    }
}

fn terminal_routes(s: &Setup, exponent: f64, paths: u64, seed: u64) -> Vec<(f64, f64)> {
    let eps = eps_from_step(s.grid.bulk_step(), exponent);
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let base = sample_bessel_path(&s.grid, &s.par, SeedSpec::new(seed, i));
            let l = estimate_l0(&base, &s.par, eps).unwrap().path;
            let n = l.values().len() - 1;
            let r = s.lt.routes_at(l.values(), &[n]).unwrap();
            (r.stieltjes[0], r.ibp_plus[0])
        })
        .collect()
}

#[test]
fn plus_sign_variant_disagrees() {
    let s = setup(0.5, 0.25, 50_000);
    let v = terminal_routes(&s, 0.5, 300, 7);
    let stj: f64 = v.iter().map(|x| x.0).sum();
    let plus: f64 = v.iter().map(|x| x.1).sum();
    let gap = (plus - stj).abs() / stj;
    assert!(gap >= 0.05, "relative gap {gap}");
}

#[test]
fn mean_is_stable_across_eps() {
    let s = setup(0.5, 0.25, 200_000);
    let reference = specfun::moment_lhat(1, 1.0, &s.par).unwrap();
    let mut means = Vec::new();
    for &exponent in &[0.5, 0.4] {
        let v: Vec<f64> = terminal_routes(&s, exponent, 1000, 11)
            .iter()
            .map(|x| x.0)
            .collect();
        let m = batch_mean(&v, 50);
        assert!(
            (m.mean - reference).abs() <= 4.0 * m.se + 0.03 * reference,
            "exponent {exponent}: {} ± {} vs {reference}",
            m.mean,
            m.se
        );
        means.push(m);
    }
    // same paths, so the difference is mostly discretisation
    let d = (means[0].mean - means[1].mean).abs();
    assert!(d <= 0.03 * reference, "eps sensitivity {d}");
}
