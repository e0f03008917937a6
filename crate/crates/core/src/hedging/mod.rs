//! Perfect hedging of European claims: hedge ratios, the fundamental
//! equation residual and a self-financing replication backtest.

mod backtest;
mod call;

pub use backtest::{grid_time, replicate, replication_backtest, sample_paths, BacktestReport, PathReport};
pub use call::CallValuation;

use crate::densities::{DifferenceScheme, Residual};
use crate::error::{positive, Error, Result};
use crate::measure::{martingale_intensities, MartingaleIntensities};
use crate::pricer::call::SeriesControls;
use crate::pricer::european::{EuropeanPricer, Payoff};
use crate::regime::{ModelParams, Regime};

/// Values along a deterministic stretch of the state path.
pub type Stretch<'a> = Box<dyn Fn(f64) -> Result<f64> + Send + Sync + 'a>;

/// Option value `F(t, x, sigma)` of a claim with a fixed maturity.
pub trait Valuation: Sync {
    fn params(&self) -> &ModelParams;

    fn maturity(&self) -> f64;

    fn payoff(&self, s: f64) -> f64;

    /// Stock prices where the payoff is not smooth.
    fn kinks(&self) -> Vec<f64>;

    fn value(&self, t: f64, x: f64, sigma: Regime) -> Result<f64>;

    /// `t -> F(t, x0 e^{c_motion (t - t0)}, sigma)` for `t0 <= t <= T`: the
    /// value seen while the market stays in regime `motion`.
    fn along<'a>(&'a self, t0: f64, x0: f64, motion: Regime, sigma: Regime) -> Result<Stretch<'a>> {
        let c = self.params().c(motion);
        Ok(Box::new(move |t| self.value(t, x0 * (c * (t - t0)).exp(), sigma)))
    }
}

/// `F(t, x, sigma) = x`, the value of holding one share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StockValuation {
    pub params: ModelParams,
    pub maturity: f64,
}

impl Valuation for StockValuation {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn payoff(&self, s: f64) -> f64 {
        s
    }

    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    fn value(&self, t: f64, x: f64, _: Regime) -> Result<f64> {
        check_time(t, self.maturity)?;
        Ok(x)
    }
}

/// `F` for an arbitrary payoff, by quadrature against the densities.
pub struct PayoffValuation<P> {
    pricer: EuropeanPricer,
    payoff: P,
    maturity: f64,
    controls: SeriesControls,
}

impl<P: Payoff> PayoffValuation<P> {
    pub fn new(params: &ModelParams, payoff: P, maturity: f64, controls: SeriesControls) -> Result<Self> {
        positive("maturity", maturity)?;
        controls.validate()?;
        Ok(PayoffValuation {
            pricer: EuropeanPricer::new(params)?,
            payoff,
            maturity,
            controls,
        })
    }
}

impl<P: Payoff> Valuation for PayoffValuation<P> {
    fn params(&self) -> &ModelParams {
        self.pricer.params()
    }

    fn maturity(&self) -> f64 {
        self.maturity
    }

    fn payoff(&self, s: f64) -> f64 {
        self.payoff.value(s)
    }

    fn kinks(&self) -> Vec<f64> {
        self.payoff.kinks()
    }

    fn value(&self, t: f64, x: f64, sigma: Regime) -> Result<f64> {
        check_time(t, self.maturity)?;
        self.pricer.value(&self.payoff, self.maturity - t, x, sigma, &self.controls)
    }
}

fn check_time(t: f64, maturity: f64) -> Result<()> {
    if !(0.0..=maturity).contains(&t) {
        return Err(Error::TimeOutOfRange { t, horizon: maturity });
    }
    Ok(())
}

fn jump_size(params: &ModelParams, sigma: Regime) -> Result<f64> {
    let h = params.h(sigma);
    if h == 0.0 {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "hedge ratio needs a nonzero jump",
        });
    }
    Ok(h)
}

/// Stock units held between switches:
/// `(F(t, S(1 + h_sigma), -sigma) - F(t, S, sigma)) / (S h_sigma)`.
pub fn hedge_ratio<V: Valuation + ?Sized>(v: &V, t: f64, s: f64, sigma: Regime) -> Result<f64> {
    positive("S", s)?;
    let h = jump_size(v.params(), sigma)?;
    let after = v.value(t, s * (1.0 + h), -sigma)?;
    let before = v.value(t, s, sigma)?;
    Ok((after - before) / (s * h))
}

/// Stock units held at a switch time `tau`, from the state just before it.
pub fn hedge_ratio_at_jump<V: Valuation + ?Sized>(v: &V, tau: f64, s_before: f64, sigma_before: Regime) -> Result<f64> {
    hedge_ratio(v, tau, s_before, sigma_before)
}

/// Portfolio of `phi` shares and `psi` bonds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HedgePosition {
    pub phi: f64,
    pub psi: f64,
    pub capital: f64,
}

impl HedgePosition {
    /// Holds `phi` shares and puts the rest of `capital` in the bond.
    pub fn rebalance(phi: f64, capital: f64, s: f64, b: f64) -> HedgePosition {
        HedgePosition {
            phi,
            psi: (capital - phi * s) / b,
            capital,
        }
    }

    pub fn value(&self, s: f64, b: f64) -> f64 {
        self.phi * s + self.psi * b
    }
}

/// Largest violation of the fundamental equation
/// `dF/dt + c x dF/dx - (r + lambda*) F + lambda* F(t, x (1 + h), -sigma) = 0`
/// over the grid points `(t, x)`, with steps `spacing` in `t` and relative
/// steps `spacing` in `x`.
///
/// `Characteristic` takes one forward Euler step `(t, x) -> (t + d, x (1 + c d))`
/// along the characteristic and is first order; `Central` uses central
/// differences in both variables. Both are exact for `F` linear in `x` and
/// constant in `t`.
/// Grids whose stencils come within `2 spacing` (in `ln x`) of the
/// no-switch characteristic through a payoff kink are rejected.
pub fn pde_residual<V: Valuation + ?Sized>(
    v: &V,
    points: &[(f64, f64)],
    sigma: Regime,
    spacing: f64,
    scheme: DifferenceScheme,
) -> Result<Residual> {
    positive("spacing", spacing)?;
    let params = v.params();
    let m: MartingaleIntensities = martingale_intensities(params)?;
    let (c, r, h, ls) = (params.c(sigma), params.r(sigma), params.h(sigma), m.lambda_star(sigma));
    let maturity = v.maturity();
    let kinks = v.kinks();
    let mut max = 0.0f64;
    for &(t, x) in points {
        if t - spacing < 0.0 || t + spacing >= maturity || !(x > 0.0) {
            return Err(Error::InvalidGrid("stencil leaves (0, T) x (0, inf)"));
        }
        for (xs, regime) in [(x, sigma), (x * (1.0 + h), -sigma)] {
            let tau = maturity - t;
            for k in &kinks {
                let d = (xs / k).ln() + params.c(regime) * tau;
                if d.abs() < 2.0 * spacing + c.abs() * spacing {
                    return Err(Error::InvalidGrid("stencil touches a payoff kink"));
                }
            }
        }
        let f = v.value(t, x, sigma)?;
        let transport = match scheme {
            DifferenceScheme::Characteristic => {
                (v.value(t + spacing, x * (1.0 + c * spacing), sigma)? - f) / spacing
            }
            DifferenceScheme::Central => {
                let dt = (v.value(t + spacing, x, sigma)? - v.value(t - spacing, x, sigma)?) / (2.0 * spacing);
                let dlx = (v.value(t, x * (1.0 + spacing), sigma)? - v.value(t, x * (1.0 - spacing), sigma)?)
                    / (2.0 * spacing);
                dt + c * dlx
            }
        };
        let jump = v.value(t, x * (1.0 + h), -sigma)?;
        max = max.max((transport - (r + ls) * f + ls * jump).abs());
    }
    Ok(Residual { max, spacing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricer::european::{Call, Constant, Smooth, Stock};

    pub(crate) fn params() -> ModelParams {
        ModelParams {
            c_plus: 0.2,
            c_minus: -0.1,
            lambda_plus: 1.0,
            lambda_minus: 0.8,
            h_plus: -0.3,
            h_minus: 0.2,
            r_plus: 0.05,
            r_minus: 0.03,
            s0: 100.0,
            sigma0: Regime::Plus,
        }
    }

    #[test]
    fn trivial_ratios() {
        let c = SeriesControls::default();
        let stock = PayoffValuation::new(&params(), Stock, 1.0, c).unwrap();
        let flat = ModelParams { r_minus: 0.05, ..params() };
        let bond = PayoffValuation::new(&flat, Constant(100.0), 1.0, c).unwrap();
        for sigma in [Regime::Plus, Regime::Minus] {
            assert!((hedge_ratio(&stock, 0.3, 90.0, sigma).unwrap() - 1.0).abs() < 1e-8);
            assert!(hedge_ratio(&bond, 0.3, 90.0, sigma).unwrap().abs() < 1e-8);
            assert!((hedge_ratio_at_jump(&stock, 0.7, 110.0, sigma).unwrap() - 1.0).abs() < 1e-8);
        }
        let deep = PayoffValuation::new(&params(), Call { strike: 1e-6 }, 1.0, c).unwrap();
        assert!((hedge_ratio(&deep, 0.2, 100.0, Regime::Minus).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn stock_solves_fundamental_equation() {
        let exact = StockValuation { params: params(), maturity: 1.0 };
        let v = PayoffValuation::new(&params(), Stock, 1.0, SeriesControls::default()).unwrap();
        let pts = [(0.3, 80.0), (0.5, 100.0), (0.6, 130.0)];
        for sigma in [Regime::Plus, Regime::Minus] {
            for scheme in [DifferenceScheme::Characteristic, DifferenceScheme::Central] {
                let res = pde_residual(&exact, &pts, sigma, 1e-3, scheme).unwrap();
                assert!(res.max < 1e-10, "{res:?}");
                let res = pde_residual(&v, &pts, sigma, 1e-2, scheme).unwrap();
                assert!(res.max < 1e-6, "{res:?}");
            }
        }
        assert_eq!(v.value(1.0, 42.0, Regime::Minus).unwrap(), 42.0);
    }

    #[test]
    fn smooth_payoff_residual_orders() {
        let v = PayoffValuation::new(
            &params().with_spot(1.0, Regime::Plus),
            Smooth(|s: f64| s * s * (-s).exp()),
            1.0,
            SeriesControls::default(),
        )
        .unwrap();
        let pts = [(0.4, 0.8), (0.5, 1.5)];
        let r = |h, scheme| pde_residual(&v, &pts, Regime::Plus, h, scheme).unwrap().max;
        let first = r(0.02, DifferenceScheme::Characteristic) / r(0.01, DifferenceScheme::Characteristic);
        assert!((first - 2.0).abs() < 0.5, "{first}");
        let second = r(0.02, DifferenceScheme::Central) / r(0.01, DifferenceScheme::Central);
        assert!((second - 4.0).abs() < 1.0, "{second}");
    }

    #[test]
    fn kink_rejected() {
        let v = PayoffValuation::new(&params(), Call { strike: 100.0 }, 1.0, SeriesControls::default()).unwrap();
        let x = 100.0 * (-0.2f64 * 0.5).exp();
        assert!(matches!(
            pde_residual(&v, &[(0.5, x)], Regime::Plus, 1e-3, DifferenceScheme::Central),
            Err(Error::InvalidGrid(_))
        ));
    }
}
