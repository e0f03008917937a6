//! No-arbitrage conditions, the martingale measure and its density process.

use crate::error::{Error, RegimeViolation, Result};
use crate::regime::{ln_kappa, ModelParams, Regime, RegimePath};

/// Risk-neutral intensities together with the Girsanov parameters that
/// change the physical measure into the martingale measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleIntensities {
    pub lambda_star_plus: f64,
    pub lambda_star_minus: f64,
    pub c_star_plus: f64,
    pub c_star_minus: f64,
    pub h_star_plus: f64,
    pub h_star_minus: f64,
}

impl MartingaleIntensities {
    pub fn lambda_star(&self, sigma: Regime) -> f64 {
        sigma.pick(self.lambda_star_plus, self.lambda_star_minus)
    }

    pub fn c_star(&self, sigma: Regime) -> f64 {
        sigma.pick(self.c_star_plus, self.c_star_minus)
    }

    pub fn h_star(&self, sigma: Regime) -> f64 {
        sigma.pick(self.h_star_plus, self.h_star_minus)
    }
}

/// Per-regime violations of `(r - c) / h > 0`; empty when the market is free
/// of arbitrage.
pub fn arbitrage_violations(params: &ModelParams) -> Vec<RegimeViolation> {
    [Regime::Plus, Regime::Minus]
        .into_iter()
        .filter_map(|regime| {
            let h = params.h(regime);
            if h == 0.0 {
                return Some(RegimeViolation { regime, ratio: None });
            }
            let ratio = (params.r(regime) - params.c(regime)) / h;
            if ratio > 0.0 && ratio.is_finite() {
                None
            } else {
                Some(RegimeViolation {
                    regime,
                    ratio: Some(ratio),
                })
            }
        })
        .collect()
}

pub fn no_arbitrage_check(params: &ModelParams) -> Result<()> {
    let violations = arbitrage_violations(params);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Arbitrage(violations))
    }
}

pub fn martingale_intensities(params: &ModelParams) -> Result<MartingaleIntensities> {
    params.validate()?;
    no_arbitrage_check(params)?;
    let star = |sigma: Regime| (params.r(sigma) - params.c(sigma)) / params.h(sigma);
    let (lsp, lsm) = (star(Regime::Plus), star(Regime::Minus));
    let c_star_plus = params.lambda_plus - lsp;
    let c_star_minus = params.lambda_minus - lsm;
    Ok(MartingaleIntensities {
        lambda_star_plus: lsp,
        lambda_star_minus: lsm,
        c_star_plus,
        c_star_minus,
        h_star_plus: -c_star_plus / params.lambda_plus,
        h_star_minus: -c_star_minus / params.lambda_minus,
    })
}

/// The market seen under the martingale measure: intensities replaced by
/// `lambda*`.
pub fn risk_neutral_params(params: &ModelParams) -> Result<ModelParams> {
    let m = martingale_intensities(params)?;
    Ok(params.with_intensities(m.lambda_star_plus, m.lambda_star_minus))
}

/// `ln Z(t)` where `Z(t) = exp(X*(t)) kappa*_{N(t)}`.
pub fn ln_girsanov_density(path: &RegimePath, m: &MartingaleIntensities, t: f64) -> Result<f64> {
    let x = path.telegraph_value(m.c_star_plus, m.c_star_minus, t)?;
    let n = path.switch_count(t)?;
    Ok(x + ln_kappa(n, path.sigma0(), m.h_star_plus, m.h_star_minus))
}

pub fn girsanov_density(path: &RegimePath, params: &ModelParams, t: f64) -> Result<f64> {
    let m = martingale_intensities(params)?;
    Ok(ln_girsanov_density(path, &m, t)?.exp())
}
