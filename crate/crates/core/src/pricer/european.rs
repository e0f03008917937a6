//! Value `F(t, x, sigma)` of a general European claim `f(S(T))` by
//! integrating the payoff against the risk-neutral switch-count densities.

use crate::densities::{p_n_continuous, DensityParams};
use crate::error::{finite, positive, Error, Result};
use crate::measure::{martingale_intensities, MartingaleIntensities};
use crate::pricer::call::{RiskNeutralRates, SeriesControls};
use crate::pricer::series::{rho_n, SeriesParams};
use crate::quadrature::{break_points, Quadrature};
use crate::regime::{ln_kappa, ModelParams, Regime};
use crate::special::poisson_tail;

/// Terminal payoff as a function of the stock price.
pub trait Payoff: Sync {
    fn value(&self, s: f64) -> f64;

    /// Stock prices where the payoff is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Call {
    pub strike: f64,
}

impl Payoff for Call {
    fn value(&self, s: f64) -> f64 {
        (s - self.strike).max(0.0)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.strike]
    }
}

/// `f(s) = s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stock;

impl Payoff for Stock {
    fn value(&self, s: f64) -> f64 {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl Payoff for Constant {
    fn value(&self, _: f64) -> f64 {
        self.0
    }
}

/// A smooth payoff given by a closure.
pub struct Smooth<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Payoff for Smooth<F> {
    fn value(&self, s: f64) -> f64 {
        (self.0)(s)
    }
}

/// Risk-neutral ingredients for valuing claims in one market.
#[derive(Debug, Clone)]
pub struct EuropeanPricer {
    params: ModelParams,
    intensities: MartingaleIntensities,
    series: SeriesParams,
    densities: Option<(DensityParams, RiskNeutralRates)>,
}

impl EuropeanPricer {
    pub fn new(params: &ModelParams) -> Result<EuropeanPricer> {
        let m = martingale_intensities(params)?;
        let densities = if params.c_plus > params.c_minus {
            let dp = DensityParams::new(params.c_plus, params.c_minus, m.lambda_star_plus, m.lambda_star_minus)?;
            Some((dp, RiskNeutralRates::new(params, &m)?))
        } else {
            None
        };
        Ok(EuropeanPricer {
            params: *params,
            intensities: m,
            series: SeriesParams::risk_neutral(params, &m),
            densities,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn intensities(&self) -> &MartingaleIntensities {
        &self.intensities
    }

    /// `F` with `tau = T - t` left to maturity, spot `x` and current regime
    /// `sigma`.
    pub fn value<P: Payoff + ?Sized>(
        &self,
        payoff: &P,
        tau: f64,
        x: f64,
        sigma: Regime,
        controls: &SeriesControls,
    ) -> Result<f64> {
        positive("x", x)?;
        finite("tau", tau)?;
        controls.validate()?;
        if tau < 0.0 {
            return Err(Error::TimeOutOfRange { t: tau, horizon: 0.0 });
        }
        if tau == 0.0 {
            return Ok(payoff.value(x));
        }
        let p = &self.params;
        let mu = self.series.lambda_max() * tau;
        let quad = Quadrature::with_tolerance(1e-14 * x.max(1.0), 1e-12);
        let kinks = payoff.kinks();
        let mut total = 0.0;
        let mut prev = f64::INFINITY;
        for n in 0..controls.max_terms {
            let ln_k = ln_kappa(n, sigma, p.h_plus, p.h_minus);
            let term = match &self.densities {
                None => rho_n(tau, n, sigma, &self.series)? * payoff.value(x * (p.c_plus * tau + ln_k).exp()),
                Some((dp, rates)) if n == 0 => {
                    let c = dp.c(sigma);
                    (-(dp.lambda(sigma) + rates.a_r * c + rates.b_r) * tau).exp()
                        * payoff.value(x * (c * tau + ln_k).exp())
                }
                Some((dp, rates)) => {
                    let (lo, hi) = (dp.c_minus * tau, dp.c_plus * tau);
                    let interior = kinks.iter().map(|k| (k / x).ln() - ln_k);
                    let points = break_points(lo, hi, interior);
                    let a_r = rates.a_r;
                    let est = quad.integrate_breaks(
                        |y| (-a_r * y).exp() * payoff.value(x * (y + ln_k).exp()) * p_n_continuous(y, tau, n, sigma, dp),
                        &points,
                    );
                    (-rates.b_r * tau).exp() * est.value
                }
            };
            total += term;
            let small = |v: f64| v.abs() <= controls.tail_epsilon * total.abs().max(1.0);
            if n >= 1 && small(term) && small(prev) && poisson_tail(n + 1, mu) < controls.tail_epsilon {
                return Ok(total);
            }
            prev = term;
        }
        Err(Error::Truncation {
            terms: controls.max_terms,
            tail: prev.abs(),
        })
    }
}

/// `F(t, x, sigma)` for the claim `payoff(S(T))`.
pub fn european_price_f<P: Payoff + ?Sized>(
    t: f64,
    x: f64,
    sigma: Regime,
    payoff: &P,
    params: &ModelParams,
    maturity: f64,
    controls: &SeriesControls,
) -> Result<f64> {
    if !(0.0..=maturity).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: maturity });
    }
    EuropeanPricer::new(params)?.value(payoff, maturity - t, x, sigma, controls)
}
