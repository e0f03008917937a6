//! Call values along stretches between switches.
//!
//! While the regime stays `+` the coordinate `p` of every term `u_n` is
//! constant and the term is a polynomial in `q` times an exponential; in
//! regime `-` the same holds with the roles of `p` and `q` exchanged after
//! reflecting the market. The polynomials are built once per stretch.

use super::{check_time, Stretch, Valuation};
use crate::error::{positive, Result};
use crate::pricer::call::{CallPricer, CallSpec, SeriesControls};
use crate::pricer::series::{horner, rho_n, PTable, SeriesParams};
use crate::regime::{ModelParams, Regime};
use crate::special::poisson_tail;

/// Call with strike and maturity of `spec` in the market `params`.
#[derive(Debug, Clone)]
pub struct CallValuation {
    params: ModelParams,
    pricer: CallPricer,
    spec: CallSpec,
    controls: SeriesControls,
    terms: usize,
    rho_grid: Option<RhoGrid>,
}

/// `rho_n(T - t_k)` on a uniform time grid for both series and regimes.
#[derive(Debug, Clone)]
struct RhoGrid {
    steps: usize,
    values: Vec<f64>,
}

const SERIES: [usize; 2] = [0, 1];

impl CallValuation {
    pub fn new(params: &ModelParams, spec: CallSpec, controls: SeriesControls) -> Result<CallValuation> {
        controls.validate()?;
        let pricer = CallPricer::new(params)?;
        let rate = pricer.u_params.lambda_max().max(pricer.big_u_params.lambda_max()) * spec.maturity;
        let terms = (1..controls.max_terms)
            .find(|&n| poisson_tail(n, rate) < controls.tail_epsilon)
            .unwrap_or(controls.max_terms);
        Ok(CallValuation {
            params: *params,
            pricer,
            spec,
            controls,
            terms,
            rho_grid: None,
        })
    }

    /// Caches the discounted switch-count weights at `grid_time(k, steps, T)`.
    pub fn with_time_grid(mut self, steps: usize) -> Result<CallValuation> {
        let mut values = Vec::with_capacity((steps + 1) * self.terms * 4);
        for k in 0..=steps {
            let tau = self.spec.maturity - super::grid_time(k, steps, self.spec.maturity);
            for n in 0..self.terms {
                for s in SERIES {
                    for sigma in [Regime::Plus, Regime::Minus] {
                        values.push(if tau > 0.0 { rho_n(tau, n, sigma, self.series(s))? } else { 0.0 });
                    }
                }
            }
        }
        self.rho_grid = Some(RhoGrid { steps, values });
        Ok(self)
    }

    pub fn spec(&self) -> &CallSpec {
        &self.spec
    }

    /// Number of switch counts kept by the stretch evaluator.
    pub fn terms(&self) -> usize {
        self.terms
    }

    fn series(&self, s: usize) -> &SeriesParams {
        if s == 0 {
            &self.pricer.u_params
        } else {
            &self.pricer.big_u_params
        }
    }

    fn rho(&self, t: f64, n: usize, s: usize, sigma: Regime) -> Result<f64> {
        let maturity = self.spec.maturity;
        if let Some(g) = &self.rho_grid {
            let k = (t / maturity * g.steps as f64).round();
            if k >= 0.0 && (k as usize) <= g.steps && super::grid_time(k as usize, g.steps, maturity) == t {
                let idx = ((k as usize * self.terms + n) * 2 + s) * 2 + sigma.pick(0, 1);
                return Ok(g.values[idx]);
            }
        }
        rho_n(maturity - t, n, sigma, self.series(s))
    }

    fn stretch(&self, t0: f64, x0: f64, motion: Regime, sigma: Regime) -> Result<CallStretch<'_>> {
        check_time(t0, self.spec.maturity)?;
        positive("x", x0)?;
        let sp = &self.pricer.u_params;
        let dc = sp.dc();
        let tau0 = self.spec.maturity - t0;
        let y0 = (self.spec.strike / x0).ln();
        let sigma_eff = motion.pick(sigma, -sigma);
        let mut plans = Vec::with_capacity(self.terms);
        for n in 0..self.terms {
            let yn = y0 - self.pricer.shift(n, sigma);
            let fixed = match motion {
                Regime::Plus => (sp.c_plus * tau0 - yn) / dc,
                Regime::Minus => (yn - sp.c_minus * tau0) / dc,
            };
            let mut polys: [Option<Poly>; 2] = [None, None];
            if fixed >= 0.0 {
                for s in SERIES {
                    let base = self.series(s);
                    let eff = motion.pick(*base, base.reflected());
                    let table = PTable::new(fixed, eff.a(), n)?;
                    let rate_fixed = eff.lambda_minus + eff.r_minus;
                    let rate_var = eff.lambda_plus + eff.r_plus;
                    polys[s] = Some(Poly {
                        scale: ((rate_var - rate_fixed) * fixed + eff.ln_lambda_n(n, sigma_eff)).exp(),
                        coeffs: table.v_coeffs(n, sigma_eff),
                    });
                }
            }
            plans.push(TermPlan { fixed, polys });
        }
        let rate_var = |s: usize| {
            let eff = motion.pick(*self.series(s), self.series(s).reflected());
            eff.lambda_plus + eff.r_plus
        };
        Ok(CallStretch {
            owner: self,
            t0,
            x0,
            motion,
            sigma,
            rate_var: [rate_var(0), rate_var(1)],
            plans,
        })
    }
}

#[derive(Debug, Clone)]
struct Poly {
    scale: f64,
    coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct TermPlan {
    fixed: f64,
    polys: [Option<Poly>; 2],
}

struct CallStretch<'a> {
    owner: &'a CallValuation,
    t0: f64,
    x0: f64,
    motion: Regime,
    sigma: Regime,
    rate_var: [f64; 2],
    plans: Vec<TermPlan>,
}

impl CallStretch<'_> {
    fn value(&self, t: f64) -> Result<f64> {
        let owner = self.owner;
        let maturity = owner.spec.maturity;
        let x = self.x0 * (owner.params.c(self.motion) * (t - self.t0)).exp();
        if t >= maturity {
            return Ok((x - owner.spec.strike).max(0.0));
        }
        let tau = maturity - t;
        let mut sums = [0.0; 2];
        let decay = [(-self.rate_var[0] * tau).exp(), (-self.rate_var[1] * tau).exp()];
        for (n, plan) in self.plans.iter().enumerate() {
            let var = tau - plan.fixed;
            // which closed form applies, in the coordinates of the stretch
            let (zero, certain) = match self.motion {
                Regime::Plus => (plan.fixed < 0.0, var < 0.0),
                Regime::Minus => (var < 0.0, plan.fixed < 0.0),
            };
            if zero {
                continue;
            }
            for s in SERIES {
                let rho = || owner.rho(t, n, s, self.sigma);
                let term = if certain {
                    rho()?
                } else {
                    let poly = plan.polys[s].as_ref().expect("built for nonnegative coordinate");
                    let w = poly.scale * decay[s] * horner(&poly.coeffs, var);
                    match self.motion {
                        Regime::Plus => w,
                        Regime::Minus => rho()? - w,
                    }
                };
                sums[s] += term;
            }
        }
        Ok(x * sums[1] - owner.spec.strike * sums[0])
    }
}

impl Valuation for CallValuation {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn maturity(&self) -> f64 {
        self.spec.maturity
    }

    fn payoff(&self, s: f64) -> f64 {
        (s - self.spec.strike).max(0.0)
    }

    fn kinks(&self) -> Vec<f64> {
        vec![self.spec.strike]
    }

    fn value(&self, t: f64, x: f64, sigma: Regime) -> Result<f64> {
        check_time(t, self.spec.maturity)?;
        if t == self.spec.maturity {
            positive("x", x)?;
            return Ok(self.payoff(x));
        }
        Ok(self
            .pricer
            .price(x, self.spec.strike, self.spec.maturity - t, sigma, &self.controls)?
            .price)
    }

    fn along<'a>(&'a self, t0: f64, x0: f64, motion: Regime, sigma: Regime) -> Result<Stretch<'a>> {
        if self.pricer.u_params.dc() <= 0.0 {
            let c = self.params.c(motion);
            return Ok(Box::new(move |t| self.value(t, x0 * (c * (t - t0)).exp(), sigma)));
        }
        let stretch = self.stretch(t0, x0, motion, sigma)?;
        Ok(Box::new(move |t| stretch.value(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hedging::tests::params;

    #[test]
    fn stretches_match_direct_pricing() {
        let spec = CallSpec::new(100.0, 1.0).unwrap();
        let v = CallValuation::new(&params(), spec, SeriesControls::default()).unwrap();
        let cached = v.clone().with_time_grid(50).unwrap();
        for motion in [Regime::Plus, Regime::Minus] {
            for sigma in [Regime::Plus, Regime::Minus] {
                for x0 in [70.0, 95.0, 100.0, 112.0, 160.0] {
                    let a = v.along(0.1, x0, motion, sigma).unwrap();
                    let b = cached.along(0.1, x0, motion, sigma).unwrap();
                    for k in 5..=50 {
                        let t = crate::hedging::grid_time(k, 50, 1.0);
                        let x = x0 * (params().c(motion) * (t - 0.1)).exp();
                        let direct = v.value(t, x, sigma).unwrap();
                        let fast = a(t).unwrap();
                        assert!((fast - direct).abs() < 1e-10 * x0, "{motion} {sigma} {x0} {t}: {fast} {direct}");
                        assert!((b(t).unwrap() - fast).abs() < 1e-12 * x0);
                    }
                }
            }
        }
    }
}
