//! The European call as a series over the number of regime switches.

use crate::error::{positive, Error, Result};
use crate::measure::{martingale_intensities, MartingaleIntensities};
use crate::pricer::series::{bond, region, rho_n, u_n, Region, SeriesParams};
use crate::regime::{ln_kappa, ModelParams, Regime};
use crate::special::poisson_tail;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CallSpec {
    pub strike: f64,
    pub maturity: f64,
}

impl CallSpec {
    pub fn new(strike: f64, maturity: f64) -> Result<CallSpec> {
        positive("strike", strike)?;
        positive("maturity", maturity)?;
        Ok(CallSpec { strike, maturity })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControls {
    pub tail_epsilon: f64,
    pub max_terms: usize,
}

impl Default for SeriesControls {
    fn default() -> Self {
        SeriesControls {
            tail_epsilon: 1e-12,
            max_terms: 400,
        }
    }
}

impl SeriesControls {
    pub fn validate(&self) -> Result<()> {
        positive("tail_epsilon", self.tail_epsilon)?;
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter {
                name: "max_terms",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Constants of the discounting transform `r_sigma = a_r c_sigma + b_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskNeutralRates {
    pub a_r: f64,
    pub b_r: f64,
    pub a_bar: f64,
}

impl RiskNeutralRates {
    pub fn new(params: &ModelParams, m: &MartingaleIntensities) -> Result<RiskNeutralRates> {
        let (a_r, b_r) = crate::regime::linear_transform_coeffs(
            params.c_plus,
            params.c_minus,
            params.r_plus,
            params.r_minus,
        )?;
        Ok(RiskNeutralRates {
            a_r,
            b_r,
            a_bar: (m.lambda_star_plus + params.r_plus) - (m.lambda_star_minus + params.r_minus),
        })
    }
}

/// Direction in which the jump shifts `b_n = ln kappa_n` move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeCase {
    /// `(1 + h_-)(1 + h_+) < 1`: shifts decrease, the series ends in zeros.
    Decreasing,
    /// `(1 + h_-)(1 + h_+) > 1`: shifts increase, the series ends in full
    /// discounted masses.
    Increasing,
    /// `(1 + h_-)(1 + h_+) = 1`: shifts take two values.
    Neutral,
}

impl RegimeCase {
    pub fn of(h_plus: f64, h_minus: f64) -> RegimeCase {
        let product = (1.0 + h_plus) * (1.0 + h_minus);
        if product < 1.0 {
            RegimeCase::Decreasing
        } else if product > 1.0 {
            RegimeCase::Increasing
        } else {
            RegimeCase::Neutral
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeCase::Decreasing => "decreasing",
            RegimeCase::Increasing => "increasing",
            RegimeCase::Neutral => "neutral",
        }
    }
}

/// Term-by-term record of a call price.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceBreakdown {
    /// `ln(K / S0)`.
    pub y: f64,
    /// `b_n = ln kappa_{n, sigma}` for every evaluated term.
    pub shifts: Vec<f64>,
    pub u_terms: Vec<f64>,
    pub big_u_terms: Vec<f64>,
    /// Closed-form remainder added after the last evaluated term when the
    /// remaining terms are all full masses (`u`, `U`).
    pub explicit_tail: (f64, f64),
    pub u: f64,
    pub big_u: f64,
    pub price: f64,
    pub regime_case: RegimeCase,
    /// Decreasing case: `n_- = min{n : y - b_n > c_- T}`; increasing case:
    /// `m_+ = max{n : y - b_n > c_+ T}`, over the evaluated terms.
    pub lower_index: Option<usize>,
    /// Decreasing case: `n_+ = min{n : y - b_n > c_+ T}`; increasing case:
    /// `m_- = max{n : y - b_n > c_- T}`.
    pub upper_index: Option<usize>,
    /// Bound on the contribution of the terms that were not evaluated.
    pub tail_bound: f64,
    /// Zero-coupon bond `E*[B(T)^{-1}]`.
    pub bond: f64,
    /// Model-free lower bound `S0 - K E*[B(T)^{-1}]`.
    pub parity_bound: f64,
}

impl PriceBreakdown {
    pub fn terms(&self) -> usize {
        self.u_terms.len()
    }
}

/// Everything needed to price calls in one market, for any spot, strike,
/// time to maturity and starting regime.
#[derive(Debug, Clone)]
pub struct CallPricer {
    pub u_params: SeriesParams,
    pub big_u_params: SeriesParams,
    pub h_plus: f64,
    pub h_minus: f64,
}

impl CallPricer {
    pub fn new(params: &ModelParams) -> Result<CallPricer> {
        let m = martingale_intensities(params)?;
        Ok(CallPricer {
            u_params: SeriesParams::risk_neutral(params, &m),
            big_u_params: SeriesParams::share_measure(params, &m)?,
            h_plus: params.h_plus,
            h_minus: params.h_minus,
        })
    }

    pub fn shift(&self, n: usize, sigma: Regime) -> f64 {
        ln_kappa(n, sigma, self.h_plus, self.h_minus)
    }

    /// Poisson bound on the terms with index `>= n`.
    pub fn tail_bound(&self, n: usize, spot: f64, strike: f64, tau: f64) -> f64 {
        spot * poisson_tail(n, self.big_u_params.lambda_max() * tau)
            + strike * poisson_tail(n, self.u_params.lambda_max() * tau)
    }

    pub fn price(
        &self,
        spot: f64,
        strike: f64,
        tau: f64,
        sigma: Regime,
        controls: &SeriesControls,
    ) -> Result<PriceBreakdown> {
        positive("spot", spot)?;
        positive("strike", strike)?;
        positive("maturity", tau)?;
        controls.validate()?;
        let (su, sbu) = (&self.u_params, &self.big_u_params);
        let y = (strike / spot).ln();
        let case = RegimeCase::of(self.h_plus, self.h_minus);
        let bond_u = bond(tau, sigma, su);

        let mut shifts = Vec::new();
        let mut u_terms = Vec::new();
        let mut big_u_terms = Vec::new();
        let mut regions = Vec::new();
        let (mut rho_sum, mut rho_bar_sum) = (0.0, 0.0);
        let mut explicit_tail = (0.0, 0.0);
        let mut tail_bound = f64::INFINITY;
        let mut done = false;

        for n in 0..controls.max_terms {
            let b = self.shift(n, sigma);
            let yn = y - b;
            let reg = region(yn, tau, su);
            let (un, bun) = match reg {
                Region::Above => (0.0, 0.0),
                _ => (u_n(yn, tau, n, sigma, su)?, u_n(yn, tau, n, sigma, sbu)?),
            };
            shifts.push(b);
            u_terms.push(un);
            big_u_terms.push(bun);
            regions.push(reg);

            let settled = |r: Region| n >= 1 && regions[n - 1] == r && reg == r;
            match case {
                RegimeCase::Decreasing if settled(Region::Above) => {
                    tail_bound = 0.0;
                    done = true;
                }
                RegimeCase::Increasing => {
                    rho_sum += rho_n(tau, n, sigma, su)?;
                    rho_bar_sum += rho_n(tau, n, sigma, sbu)?;
                    if settled(Region::Below) {
                        explicit_tail = ((bond_u - rho_sum).max(0.0), (1.0 - rho_bar_sum).max(0.0));
                        tail_bound = 0.0;
                        done = true;
                    }
                }
                _ => {}
            }
            if !done {
                tail_bound = self.tail_bound(n + 1, spot, strike, tau);
                done = tail_bound < controls.tail_epsilon;
            }
            if done {
                break;
            }
        }
        if !done {
            return Err(Error::Truncation {
                terms: controls.max_terms,
                tail: tail_bound,
            });
        }

        let u = u_terms.iter().sum::<f64>() + explicit_tail.0;
        let big_u = big_u_terms.iter().sum::<f64>() + explicit_tail.1;
        let price = (spot * big_u - strike * u).max(0.0);

        let c_lo = su.c_minus * tau;
        let c_hi = su.c_plus * tau;
        let above_lo = |n: &usize| y - shifts[*n] > c_lo;
        let above_hi = |n: &usize| y - shifts[*n] > c_hi;
        let (lower_index, upper_index) = match case {
            RegimeCase::Decreasing => (
                (0..shifts.len()).find(above_lo),
                (0..shifts.len()).find(above_hi),
            ),
            RegimeCase::Increasing => (
                (0..shifts.len()).rev().find(above_hi),
                (0..shifts.len()).rev().find(above_lo),
            ),
            RegimeCase::Neutral => (None, None),
        };

        Ok(PriceBreakdown {
            y,
            shifts,
            u_terms,
            big_u_terms,
            explicit_tail,
            u,
            big_u,
            price,
            regime_case: case,
            lower_index,
            upper_index,
            tail_bound,
            bond: bond_u,
            parity_bound: spot - strike * bond_u,
        })
    }
}

/// Price of the call struck at `spec.strike` with maturity `spec.maturity`
/// in the market `params`, starting from `params.s0` and `params.sigma0`.
pub fn call_price(params: &ModelParams, spec: &CallSpec, controls: &SeriesControls) -> Result<PriceBreakdown> {
    CallPricer::new(params)?.price(params.s0, spec.strike, spec.maturity, params.sigma0, controls)
}
