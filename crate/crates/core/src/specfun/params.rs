use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model parameters: dimension `d ∈ (0,2)`, index `alpha = 1 - d/2` and
/// reinforcement strength `p < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct Params {
    d: f64,
    alpha: f64,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    p: f64,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        Params::new(raw.alpha, raw.p)
    }
}

impl From<Params> for RawParams {
    fn from(p: Params) -> Self {
        RawParams {
            alpha: p.alpha,
            p: p.p,
        }
    }
}

impl Params {
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParams(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        if !(p.is_finite() && p < 0.5) {
            return Err(Error::InvalidParams(format!(
                "p must be finite and < 1/2, got {p}"
            )));
        }
        Ok(Params {
            d: 2.0 * (1.0 - alpha),
            alpha,
            p,
        })
    }

    pub fn from_dimension(d: f64, p: f64) -> Result<Self> {
        if !(d > 0.0 && d < 2.0) {
            return Err(Error::InvalidParams(format!(
                "dimension must lie in (0,2), got {d}"
            )));
        }
        Params::new(1.0 - d / 2.0, p)
    }

    /// Same index, no reinforcement.
    pub fn unreinforced(&self) -> Self {
        Params { p: 0.0, ..*self }
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Params::new(self.alpha, p)
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `1 - 2p`, the time-change exponent of the reinforcement map.
    pub fn q(&self) -> f64 {
        1.0 - 2.0 * self.p
    }

    /// Exponent `2αp/(1-2p)` of the weight `s^γ` applied to `dL_s`.
    pub fn weight_exponent(&self) -> f64 {
        2.0 * self.alpha * self.p / self.q()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_and_index_are_tied() {
        let p = Params::new(0.3, 0.1).unwrap();
        assert_eq!(p.d(), 2.0 * (1.0 - 0.3));
        let q = Params::from_dimension(1.0, 0.0).unwrap();
        assert_eq!(q.alpha(), 0.5);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(Params::new(0.5, 0.5).is_err());
        assert!(Params::new(0.5, 0.75).is_err());
        assert!(Params::new(0.0, 0.0).is_err());
        assert!(Params::new(1.0, 0.0).is_err());
        assert!(Params::new(f64::NAN, 0.0).is_err());
        assert!(Params::new(0.5, f64::NEG_INFINITY).is_err());
        assert!(Params::from_dimension(2.0, 0.0).is_err());
        assert!(Params::new(0.5, -3.0).is_ok());
    }

    #[test]
    fn serde_revalidates() {
        let bad: std::result::Result<Params, _> = serde_json::from_str(r#"{"alpha":0.5,"p":0.6}"#);
        assert!(bad.is_err());
        let ok: Params = serde_json::from_str(r#"{"alpha":0.5,"p":0.25}"#).unwrap();
        assert_eq!(ok.q(), 0.5);
    }
}
