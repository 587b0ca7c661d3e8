//! Sample statistics used by the experiments: batch means, Kolmogorov–Smirnov
//! and chi-square goodness of fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Mean and standard error from contiguous batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Kahan–Neumaier sum; keeps reductions independent of chunking.
pub fn sum(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    sum(&dev) / (xs.len() - 1) as f64
}

/// Splits `0..n` into `batches` contiguous ranges of near-equal size.
pub fn batch_ranges(n: usize, batches: usize) -> Vec<std::ops::Range<usize>> {
    let b = batches.clamp(1, n.max(1));
    (0..b).map(|i| (i * n / b)..((i + 1) * n / b)).collect()
}

/// Batch-means estimate of `E[X]`; with fewer than two batches the standard
/// error is infinite.
pub fn batch_mean(xs: &[f64], batches: usize) -> Estimate {
    batch_statistic(xs, batches, mean)
}

/// Batch estimate of a general statistic: the statistic on all samples,
/// with the spread of its per-batch values as error.
pub fn batch_statistic<F: Fn(&[f64]) -> f64>(xs: &[f64], batches: usize, stat: F) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            se: f64::INFINITY,
            n,
        };
    }
    let per: Vec<f64> = batch_ranges(n, batches)
        .into_iter()
        .map(|r| stat(&xs[r]))
        .collect();
    let se = if per.len() < 2 {
        f64::INFINITY
    } else {
        (variance(&per) / per.len() as f64).sqrt()
    };
    Estimate {
        mean: stat(xs),
        se,
        n,
    }
}

/// Batch estimate of a statistic of paired samples, e.g. a covariance.
pub fn batch_statistic2<F: Fn(&[f64], &[f64]) -> f64>(
    xs: &[f64],
    ys: &[f64],
    batches: usize,
    stat: F,
) -> Estimate {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 0 {
        return Estimate {
            mean: f64::NAN,
            se: f64::INFINITY,
            n,
        };
    }
    let per: Vec<f64> = batch_ranges(n, batches)
        .into_iter()
        .map(|r| stat(&xs[r.clone()], &ys[r]))
        .collect();
    let se = if per.len() < 2 {
        f64::INFINITY
    } else {
        (variance(&per) / per.len() as f64).sqrt()
    };
    Estimate {
        mean: stat(xs, ys),
        se,
        n,
    }
}

pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let v = variance(xs);
    let c3: Vec<f64> = xs.iter().map(|x| (x - m).powi(3)).collect();
    mean(&c3) / v.powf(1.5)
}

/// Kolmogorov distribution tail `P(K > λ)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let s = ne.sqrt();
    kolmogorov_tail((s + 0.12 + 0.11 / s) * d)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Input("sample contains NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov statistic with its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("KS test needs two nonempty samples".into()));
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, na * nb / (na + nb)),
    })
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::Input("KS test needs a nonempty sample".into()));
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p(d, n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit with `bins` cells of equal probability under
/// `cdf`; `cdf` must be continuous.
pub fn chi_square_equiprobable<F: Fn(f64) -> f64>(
    xs: &[f64],
    bins: usize,
    cdf: F,
) -> Result<ChiSquareResult> {
    if bins < 2 || xs.len() < 5 * bins {
        return Err(Error::Input(format!(
            "{} samples are too few for {bins} bins",
            xs.len()
        )));
    }
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let u = cdf(x);
        let k = ((u * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let e = xs.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dof = bins - 1;
    let chi = ChiSquared::new(dof as f64).map_err(|e| Error::Input(e.to_string()))?;
    Ok(ChiSquareResult {
        statistic: stat,
        dof,
        p_value: 1.0 - chi.cdf(stat),
    })
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_extremes() {
        let a = [0.3, 0.1, 0.7, 0.2];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = ks_two_sample(&[0.0, 1.0, 2.0], &[5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_ties_are_handled() {
        let a = [1.0, 1.0, 2.0, 2.0];
        let b = [1.0, 2.0];
        assert_eq!(ks_two_sample(&a, &b).unwrap().statistic, 0.0);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // P(K > 1.36) ≈ 0.05, P(K > 1.63) ≈ 0.01
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn batches_cover_everything() {
        let r = batch_ranges(1003, 100);
        assert_eq!(r.len(), 100);
        assert_eq!(r[0].start, 0);
        assert_eq!(r[99].end, 1003);
        for w in r.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(batch_ranges(5, 100).len(), 5);
    }

    #[test]
    fn batch_mean_of_constant() {
        let e = batch_mean(&[2.0; 500], 100);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.se, 0.0);
        assert!(batch_mean(&[], 100).se.is_infinite());
    }

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&xs), 2.0);
    }
}
