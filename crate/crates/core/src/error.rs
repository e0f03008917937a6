use std::fmt;

use thiserror::Error;

use crate::regime::Regime;

pub type Result<T> = std::result::Result<T, Error>;

/// Per-regime outcome of the no-arbitrage check.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeViolation {
    pub regime: Regime,
    /// `(r - c) / h`, or `None` when the jump size is zero.
    pub ratio: Option<f64>,
}

impl fmt::Display for RegimeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio {
            Some(ratio) => write!(
                f,
                "regime {}: (r - c)/h = {ratio:e} is not positive",
                self.regime
            ),
            None => write!(
                f,
                "regime {}: jump size h is zero, a market without jumps has no martingale measure",
                self.regime
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("velocities coincide (c+ = c- = {0}); the linear transform is undefined")]
    DegenerateVelocities(f64),

    #[error("arbitrage: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Arbitrage(Vec<RegimeViolation>),

    #[error("series truncation budget of {terms} terms exhausted (remaining tail bound {tail:e})")]
    Truncation { terms: usize, tail: f64 },

    #[error("series diverges: {0}")]
    Divergence(&'static str),

    #[error("Bessel argument {0} exceeds the supported range")]
    BesselOverflow(f64),

    #[error("root finding failed: {0}")]
    RootNotFound(String),

    #[error("budget {budget} is not below the perfect-hedge price {perfect_price}")]
    InfeasibleBudget { budget: f64, perfect_price: f64 },

    #[error("shortfall probability {epsilon} cannot be attained: {reason}")]
    InfeasibleEpsilon { epsilon: f64, reason: String },

    #[error("grid rejected: {0}")]
    InvalidGrid(&'static str),

    #[error("config: {0}")]
    Config(String),
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}
