use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval of mean rates `[lo, hi]`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RateInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::Argument(format!("invalid rate interval [{lo}, {hi}]")));
        }
        Ok(RateInterval { lo, hi })
    }

    pub fn above(lo: f64) -> Result<Self> {
        RateInterval::new(lo, f64::INFINITY)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Metastable domain for the mean rate `λ̄` paired with its trap.
///
/// `LevelSet` is `{λ̄ ≥ γ}` with trap `{λ̄ ≥ δ}`; `Band` is
/// `{p* − δ ≤ λ̄ ≤ p* + δ}` with trap `{p* − γ ≤ λ̄ ≤ p* + γ}`.
/// In both cases `0 < γ < δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    LevelSet { gamma: f64, delta: f64 },
    Band { p_star: f64, delta: f64, gamma: f64 },
}

impl DomainSpec {
    pub fn level_set(gamma: f64, delta: f64) -> Result<Self> {
        let d = DomainSpec::LevelSet { gamma, delta };
        d.validate()?;
        Ok(d)
    }

    pub fn band(p_star: f64, delta: f64, gamma: f64) -> Result<Self> {
        let d = DomainSpec::Band { p_star, delta, gamma };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let (gamma, delta) = match *self {
            DomainSpec::LevelSet { gamma, delta } => (gamma, delta),
            DomainSpec::Band { p_star, delta, gamma } => {
                if !(p_star - delta > 0.0) {
                    return Err(Error::Argument(format!(
                        "band needs p* − δ > 0 (p* = {p_star}, δ = {delta})"
                    )));
                }
                (gamma, delta)
            }
        };
        if !(gamma > 0.0 && gamma < delta && delta.is_finite()) {
            return Err(Error::Argument(format!("need 0 < γ < δ, got γ = {gamma}, δ = {delta}")));
        }
        Ok(())
    }

    pub fn domain(&self) -> RateInterval {
        match *self {
            DomainSpec::LevelSet { gamma, .. } => RateInterval {
                lo: gamma,
                hi: f64::INFINITY,
            },
            DomainSpec::Band { p_star, delta, .. } => RateInterval {
                lo: p_star - delta,
                hi: p_star + delta,
            },
        }
    }

    pub fn trap(&self) -> RateInterval {
        match *self {
            DomainSpec::LevelSet { delta, .. } => RateInterval {
                lo: delta,
                hi: f64::INFINITY,
            },
            DomainSpec::Band { p_star, gamma, .. } => RateInterval {
                lo: p_star - gamma,
                hi: p_star + gamma,
            },
        }
    }
}
