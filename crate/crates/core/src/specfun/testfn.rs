//! Piecewise power-sum functions on `[0, ∞)`.
//!
//! Each piece `[start, end)` carries a finite sum `Σ c_j x^{e_j}` with real
//! exponents, so indicator functions, polynomials and the `x^{2α-1}` factors
//! used by the scaling-limit constants all have closed-form weighted
//! antiderivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(coef: f64, exponent: f64) -> Self {
        PowerTerm { coef, exponent }
    }

    pub fn constant(c: f64) -> Self {
        PowerTerm::new(c, 0.0)
    }

    fn eval(&self, x: f64) -> f64 {
        if self.exponent == 0.0 {
            self.coef
        } else {
            self.coef * x.powf(self.exponent)
        }
    }

    /// `∫_a^b c x^{e + s} dx`, with `s` the extra weight exponent.
    fn weighted_integral(&self, a: f64, b: f64, s: f64) -> f64 {
        let k = self.exponent + s + 1.0;
        if k.abs() < 1e-14 {
            self.coef * (b.ln() - a.ln())
        } else {
            self.coef * (b.powf(k) - a.powf(k)) / k
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub terms: Vec<PowerTerm>,
}

impl Piece {
    fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    fn weighted_integral(&self, a: f64, b: f64, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weighted_integral(a, b, s))
            .sum()
    }

    fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }
}

/// A test function `f: [0, ∞) → ℝ`, right-continuous at its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pieces: Vec<Piece>,
}

impl TestFunction {
    pub fn new(mut pieces: Vec<Piece>) -> Result<Self> {
        pieces.retain(|p| !p.terms.is_empty());
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        for p in &pieces {
            if !(p.start >= 0.0 && p.start.is_finite() && p.end > p.start) {
                return Err(Error::Input(format!(
                    "piece [{}, {}) is not a nonempty subinterval of [0, ∞)",
                    p.start, p.end
                )));
            }
            if p.terms
                .iter()
                .any(|t| !t.coef.is_finite() || !t.exponent.is_finite())
            {
                return Err(Error::Input("non-finite coefficient or exponent".into()));
            }
        }
        for w in pieces.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::Input(format!(
                    "pieces [{}, {}) and [{}, {}) overlap",
                    w[0].start, w[0].end, w[1].start, w[1].end
                )));
            }
        }
        Ok(TestFunction { pieces })
    }

    pub fn zero() -> Self {
        TestFunction { pieces: Vec::new() }
    }

    /// `1_{[a, b)}`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        TestFunction::new(vec![Piece {
            start: a,
            end: b,
            terms: vec![PowerTerm::constant(1.0)],
        }])
    }

    /// `x^{2α-1} (1_{[0,1)} - 1_{[1,2)})`, a mean-zero function for the
    /// weight `x^{1-2α}`.
    pub fn signed_bump(alpha: f64) -> Self {
        let e = 2.0 * alpha - 1.0;
        TestFunction {
            pieces: vec![
                Piece {
                    start: 0.0,
                    end: 1.0,
                    terms: vec![PowerTerm::new(1.0, e)],
                },
                Piece {
                    start: 1.0,
                    end: 2.0,
                    terms: vec![PowerTerm::new(-1.0, e)],
                },
            ],
        }
    }

    /// `x ∧ cap`; not compactly supported.
    pub fn min_with(cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::Input(format!("cap must be positive, got {cap}")));
        }
        TestFunction::new(vec![
            Piece {
                start: 0.0,
                end: cap,
                terms: vec![PowerTerm::new(1.0, 1.0)],
            },
            Piece {
                start: cap,
                end: f64::INFINITY,
                terms: vec![PowerTerm::constant(cap)],
            },
        ])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        // pieces are few; a linear scan beats a binary search here
        for p in &self.pieces {
            if x < p.start {
                return 0.0;
            }
            if x < p.end {
                return p.eval(x);
            }
        }
        0.0
    }

    pub fn is_identically_zero(&self) -> bool {
        self.pieces.iter().all(Piece::is_zero)
    }

    /// Right end of the support, `None` when a nonzero piece is unbounded.
    pub fn support_end(&self) -> Option<f64> {
        let mut end = 0.0;
        for p in self.pieces.iter().filter(|p| !p.is_zero()) {
            if !p.end.is_finite() {
                return None;
            }
            end = p.end;
        }
        Some(end)
    }

    /// Knots of the piecewise structure, including 0 and the support end.
    pub fn knots(&self) -> Vec<f64> {
        let mut k = vec![0.0];
        for p in &self.pieces {
            for x in [p.start, p.end] {
                if x.is_finite() && *k.last().unwrap() < x {
                    k.push(x);
                }
            }
        }
        k
    }

    fn check_weight_integrable(&self, s: f64) -> Result<()> {
        if self.support_end().is_none() {
            return Err(Error::Domain(
                "test function does not have compact support".into(),
            ));
        }
        for p in self.pieces.iter().filter(|p| p.start == 0.0) {
            for t in &p.terms {
                if t.coef != 0.0 && t.exponent + s + 1.0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "x^{} is not integrable against x^{} at 0",
                        t.exponent, s
                    )));
                }
            }
        }
        Ok(())
    }

    /// `∫_0^∞ f(x) x^{1-2α} dx` in closed form.
    pub fn weighted_integral(&self, alpha: f64) -> Result<f64> {
        let s = 1.0 - 2.0 * alpha;
        self.check_weight_integrable(s)?;
        Ok(self
            .pieces
            .iter()
            .map(|p| p.weighted_integral(p.start, p.end, s))
            .sum())
    }

    /// `∫_0^∞ |f(x)| x^{1-2α} dx` bounded above termwise; used as a scale
    /// for zero tests.
    pub fn weighted_abs_bound(&self, alpha: f64) -> Result<f64> {
        let s = 1.0 - 2.0 * alpha;
        self.check_weight_integrable(s)?;
        Ok(self
            .pieces
            .iter()
            .flat_map(|p| {
                p.terms
                    .iter()
                    .map(move |t| t.weighted_integral(p.start, p.end, s).abs())
            })
            .sum())
    }

    /// `F(x) = ∫_0^x f(t) t^{1-2α} dt` in closed form.
    pub fn weighted_antiderivative(&self, alpha: f64, x: f64) -> Result<f64> {
        let s = 1.0 - 2.0 * alpha;
        for p in self.pieces.iter().filter(|p| p.start == 0.0) {
            for t in &p.terms {
                if t.coef != 0.0 && t.exponent + s + 1.0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "x^{} is not integrable against x^{} at 0",
                        t.exponent, s
                    )));
                }
            }
        }
        let mut acc = 0.0;
        for p in &self.pieces {
            if x <= p.start {
                break;
            }
            acc += p.weighted_integral(p.start, x.min(p.end), s);
        }
        Ok(acc)
    }
}
