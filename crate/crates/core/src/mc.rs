//! Monte Carlo oracle: plain path averages under the physical or the
//! martingale intensities, the no-jump arbitrage, and the diffusion limit.

use rand::Rng;
use rand_distr::Exp1;

use crate::densities::{mgf, DensityParams};
use crate::error::{finite, positive, Error, Result};
use crate::measure::{martingale_intensities, MartingaleIntensities};
use crate::par::{map_chunks, Execution, CHUNK};
use crate::pricer::european::Payoff;
use crate::quantile::QuantileSolution;
use crate::regime::{ln_kappa, ModelParams, Regime};
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Count, mean and centred sum of squares of a batch.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n / n,
            m2: self.m2 + o.m2 + d * d * self.n * o.n / n,
        }
    }
}

/// Averages `sample(i)` over paths `0..n_paths`. Chunks are reduced in
/// index order, so the result does not depend on the worker count.
fn estimate<F>(n_paths: usize, seed: u64, exec: Execution, sample: F) -> Result<McEstimate>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    if n_paths < 2 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            reason: "need at least two paths for a standard error",
        });
    }
    let parts = map_chunks(n_paths, CHUNK, exec, |s, e| -> Result<Moments> {
        let mut m = Moments::default();
        for i in s..e {
            m.push(sample(i)?);
        }
        Ok(m)
    });
    let mut total = Moments::default();
    for p in parts {
        total = total.merge(p?);
    }
    let var = total.m2 / (total.n - 1.0);
    Ok(McEstimate {
        mean: total.mean,
        std_error: (var / total.n).sqrt(),
        n_paths,
        seed,
    })
}

/// Switch count and time spent in regime `+` on `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalState {
    pub switches: usize,
    pub time_plus: f64,
}

impl TerminalState {
    /// `int_0^t v_{eps(s)} ds`.
    pub fn integrate(&self, v_plus: f64, v_minus: f64, t: f64) -> f64 {
        v_plus * self.time_plus + v_minus * (t - self.time_plus)
    }
}

/// Draws the terminal state of the regime process without storing the path.
pub fn sample_terminal<R: Rng + ?Sized>(lambda_plus: f64, lambda_minus: f64, sigma0: Regime, t: f64, rng: &mut R) -> TerminalState {
    let (mut now, mut sigma, mut switches, mut time_plus) = (0.0, sigma0, 0usize, 0.0);
    loop {
        let hold: f64 = rng.sample::<f64, _>(Exp1) / sigma.pick(lambda_plus, lambda_minus);
        let end = (now + hold).min(t);
        if sigma == Regime::Plus {
            time_plus += end - now;
        }
        if now + hold >= t {
            return TerminalState { switches, time_plus };
        }
        now += hold;
        sigma = -sigma;
        switches += 1;
    }
}

/// Simulation and weighting used by `mc_price`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMeasure {
    /// Physical intensities, no weight.
    Physical,
    /// Martingale intensities simulated directly.
    Martingale,
    /// Physical intensities weighted by the density `dP*/dP`.
    Reweighted,
}

impl McMeasure {
    pub fn parse(s: &str) -> Option<McMeasure> {
        match s {
            "physical" => Some(McMeasure::Physical),
            "martingale" => Some(McMeasure::Martingale),
            "reweighted" => Some(McMeasure::Reweighted),
            _ => None,
        }
    }
}

/// Terminal quantities of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    pub switches: usize,
    /// Telegraph part `X(T)`.
    pub x: f64,
    pub stock: f64,
    /// `B(T)^{-1}`.
    pub discount: f64,
    /// `dP*/dP` on the path for `McMeasure::Reweighted`, 1 otherwise.
    pub weight: f64,
}

/// `E[weight f(path end)]` over paths simulated under `measure`.
pub fn mc_expectation<F>(
    params: &ModelParams,
    maturity: f64,
    n_paths: usize,
    seed: u64,
    measure: McMeasure,
    exec: Execution,
    f: F,
) -> Result<McEstimate>
where
    F: Fn(&PathEnd) -> f64 + Sync + Send,
{
    positive("maturity", maturity)?;
    params.validate_dynamics()?;
    let m: Option<MartingaleIntensities> = match measure {
        McMeasure::Physical => None,
        _ => Some(martingale_intensities(params)?),
    };
    let (lp, lm) = match (measure, &m) {
        (McMeasure::Martingale, Some(m)) => (m.lambda_star_plus, m.lambda_star_minus),
        _ => (params.lambda_plus, params.lambda_minus),
    };
    let p = *params;
    estimate(n_paths, seed, exec, |i| {
        let mut rng = path_rng(seed, i as u64);
        let st = sample_terminal(lp, lm, p.sigma0, maturity, &mut rng);
        let x = st.integrate(p.c_plus, p.c_minus, maturity);
        let weight = match (measure, &m) {
            (McMeasure::Reweighted, Some(m)) => (st.integrate(m.c_star_plus, m.c_star_minus, maturity)
                + ln_kappa(st.switches, p.sigma0, m.h_star_plus, m.h_star_minus))
            .exp(),
            _ => 1.0,
        };
        let end = PathEnd {
            switches: st.switches,
            x,
            stock: p.s0 * (x + ln_kappa(st.switches, p.sigma0, p.h_plus, p.h_minus)).exp(),
            discount: (-st.integrate(p.r_plus, p.r_minus, maturity)).exp(),
            weight,
        };
        Ok(weight * f(&end))
    })
}

/// `E[B(T)^{-1} payoff(S(T))]` under `measure`.
pub fn mc_price<P: Payoff + ?Sized>(
    params: &ModelParams,
    payoff: &P,
    maturity: f64,
    n_paths: usize,
    seed: u64,
    measure: McMeasure,
    exec: Execution,
) -> Result<McEstimate> {
    mc_expectation(params, maturity, n_paths, seed, measure, exec, |e| e.discount * payoff.value(e.stock))
}

/// Fraction of physical paths whose terminal state lies in the success set
/// of `solution`. A randomized atom is resolved with one extra uniform draw.
pub fn mc_success_probability(solution: &QuantileSolution, n_paths: usize, seed: u64, exec: Execution) -> Result<McEstimate> {
    let p = *solution.problem().params();
    let maturity = solution.problem().spec().maturity;
    estimate(n_paths, seed, exec, |i| {
        let mut rng = path_rng(seed, i as u64);
        let st = sample_terminal(p.lambda_plus, p.lambda_minus, p.sigma0, maturity, &mut rng);
        let x = st.integrate(p.c_plus, p.c_minus, maturity);
        let share = solution.membership(st.switches, x)?;
        Ok(if share >= 1.0 || (share > 0.0 && rng.random::<f64>() < share) { 1.0 } else { 0.0 })
    })
}

/// Outcome of the buy-at-`A`, sell-at-`A`-or-`B` strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageReport {
    /// Terminal profit of each path, financed by borrowing at zero rate.
    pub profits: Vec<f64>,
    pub min_profit: f64,
    /// `P(profit > 0)`.
    pub positive: McEstimate,
    /// `P(S(t2) = B)`.
    pub hit_upper: McEstimate,
    /// Mean profit.
    pub mean_profit: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Trade {
    profit: f64,
    hit_upper: bool,
}

/// Buys one share at the first time `S >= A` and sells it at the next time
/// `S <= A` or `S >= B`, or at `T`. Crossings are exact: `ln S` is linear
/// between switches.
fn trade<R: Rng + ?Sized>(p: &ModelParams, lp: f64, lm: f64, la: f64, lb: f64, maturity: f64, rng: &mut R) -> Trade {
    let (mut now, mut sigma, mut x) = (0.0, p.sigma0, p.s0.ln());
    let mut entry: Option<f64> = None;
    loop {
        // holding times are memoryless, so a stretch may be cut and redrawn
        let hold: f64 = rng.sample::<f64, _>(Exp1) / sigma.pick(lp, lm);
        let end = (now + hold).min(maturity);
        let c = p.c(sigma);
        let x_end = x + c * (end - now);
        match entry {
            None => {
                if x < la && x_end >= la {
                    // opened on a continuous crossing, moving up
                    entry = Some(la);
                    now += (la - x) / c;
                    x = la;
                    continue;
                }
            }
            Some(e) => {
                if x_end >= lb && x < lb {
                    return Trade { profit: lb.exp() - e.exp(), hit_upper: true };
                }
                if x > la && x_end <= la {
                    return Trade { profit: la.exp() - e.exp(), hit_upper: false };
                }
            }
        }
        x = x_end;
        now = end;
        if now >= maturity {
            return Trade {
                profit: entry.map_or(0.0, |e| x.exp() - e.exp()),
                hit_upper: false,
            };
        }
        // switch with its jump
        x += (1.0 + p.h(sigma)).ln();
        sigma = -sigma;
        match entry {
            None if x >= la => {
                entry = Some(x);
                if x >= lb {
                    return Trade { profit: 0.0, hit_upper: false };
                }
            }
            Some(e) if x <= la || x >= lb => {
                return Trade { profit: x.exp() - e.exp(), hit_upper: x >= lb };
            }
            _ => {}
        }
    }
}

/// Runs the threshold strategy on `n_paths` paths with intensities `(lp, lm)`.
/// With `h = 0` and `r = 0` it is an arbitrage; with jumps satisfying the
/// martingale condition and the martingale intensities its mean profit is 0.
#[allow(clippy::too_many_arguments)]
pub fn threshold_strategy(
    params: &ModelParams,
    intensities: (f64, f64),
    a: f64,
    b: f64,
    maturity: f64,
    n_paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<ArbitrageReport> {
    positive("maturity", maturity)?;
    finite("A", a)?;
    finite("B", b)?;
    if params.r_plus != 0.0 || params.r_minus != 0.0 {
        return Err(Error::InvalidParameter {
            name: "r",
            value: params.r_plus.abs().max(params.r_minus.abs()),
            reason: "the threshold strategy is run with zero interest",
        });
    }
    let top = params.s0 * (params.c_plus * maturity).exp();
    if !(params.s0 < a && a < b && b < top) {
        return Err(Error::InvalidParameter {
            name: "A, B",
            value: a,
            reason: "need S0 < A < B < S0 exp(c+ T)",
        });
    }
    let (lp, lm) = intensities;
    positive("lambda+", lp)?;
    positive("lambda-", lm)?;
    let p = *params;
    let (la, lb) = (a.ln(), b.ln());
    let trades: Vec<Trade> = map_chunks(n_paths, CHUNK, exec, |s, e| {
        (s..e)
            .map(|i| trade(&p, lp, lm, la, lb, maturity, &mut path_rng(seed, i as u64)))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let profits: Vec<f64> = trades.iter().map(|t| t.profit).collect();
    let stat = |f: &(dyn Fn(usize) -> f64 + Sync)| estimate(n_paths, seed, Execution::Sequential, |i| Ok(f(i)));
    Ok(ArbitrageReport {
        min_profit: profits.iter().copied().fold(f64::INFINITY, f64::min),
        positive: stat(&|i| if profits[i] > 0.0 { 1.0 } else { 0.0 })?,
        hit_upper: stat(&|i| if trades[i].hit_upper { 1.0 } else { 0.0 })?,
        mean_profit: stat(&|i| profits[i])?,
        profits,
    })
}

/// The strategy in a market without jumps and with zero rates, under the
/// physical intensities.
pub fn arbitrage_demo(params: &ModelParams, a: f64, b: f64, maturity: f64, n_paths: usize, seed: u64, exec: Execution) -> Result<ArbitrageReport> {
    if params.h_plus != 0.0 || params.h_minus != 0.0 {
        return Err(Error::InvalidParameter {
            name: "h",
            value: params.h_plus.abs().max(params.h_minus.abs()),
            reason: "the arbitrage demonstration needs a market without jumps",
        });
    }
    threshold_strategy(params, (params.lambda_plus, params.lambda_minus), a, b, maturity, n_paths, seed, exec)
}

/// Limit drift and volatilities of a scaling sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitBase {
    pub v_c: f64,
    pub v_a: f64,
    pub mu: f64,
    pub lambda0: f64,
}

/// One member of the scaling sequence: symmetric intensities `lambda`,
/// velocities `a +- c`, equal jumps `h` with `ln (1 + h)^2 = B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMarket {
    pub lambda: f64,
    pub c: f64,
    pub a: f64,
    pub big_b: f64,
    pub h: f64,
}

impl LimitBase {
    pub fn variance(&self) -> f64 {
        self.v_c * self.v_c + self.v_a * self.v_a
    }

    /// `lambda = lambda0 level`, `c = v_c sqrt(lambda)`, `a = -v_a sqrt(lambda)`
    /// and `B = 2 (mu - a) / lambda`, so that `c^2 / lambda`, `a^2 / lambda`
    /// and `a + lambda B / 2` equal their limits exactly.
    pub fn market(&self, level: f64) -> Result<ScaledMarket> {
        positive("level", level)?;
        positive("lambda0", self.lambda0)?;
        let lambda = self.lambda0 * level;
        let a = -self.v_a * lambda.sqrt();
        let big_b = 2.0 * (self.mu - a) / lambda;
        Ok(ScaledMarket {
            lambda,
            c: self.v_c * lambda.sqrt(),
            a,
            big_b,
            h: (big_b / 2.0).exp() - 1.0,
        })
    }

    /// `exp(mu z t + v^2 z^2 t / 2)`.
    pub fn limit_mgf(&self, z: f64, t: f64) -> f64 {
        (self.mu * z * t + 0.5 * self.variance() * z * z * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub level: f64,
    pub market: ScaledMarket,
    /// `(z, mgf for sigma = +, mgf for sigma = -, limit)`.
    pub values: Vec<(f64, f64, f64, f64)>,
    /// Largest relative distance to the limit over `z` and both regimes.
    pub max_rel_error: f64,
}

/// Distance between the moment generating function of `ln(S(t)/S0)` and its
/// geometric Brownian limit along the scaling sequence.
pub fn limit_scaling_check(base: &LimitBase, levels: &[f64], zs: &[f64], t: f64) -> Result<Vec<LimitRow>> {
    positive("t", t)?;
    levels
        .iter()
        .map(|&level| {
            let mk = base.market(level)?;
            if mk.c <= 0.0 {
                return Err(Error::DegenerateVelocities(mk.a));
            }
            let dp = DensityParams::new(mk.a + mk.c, mk.a - mk.c, mk.lambda, mk.lambda)?;
            let mut values = Vec::with_capacity(zs.len());
            let mut max_rel_error = 0.0f64;
            for &z in zs {
                let plus = mgf(z, t, Regime::Plus, &dp, mk.h, mk.h)?;
                let minus = mgf(z, t, Regime::Minus, &dp, mk.h, mk.h)?;
                let limit = base.limit_mgf(z, t);
                max_rel_error = max_rel_error.max((plus / limit - 1.0).abs()).max((minus / limit - 1.0).abs());
                values.push((z, plus, minus, limit));
            }
            Ok(LimitRow { level, market: mk, values, max_rel_error })
        })
        .collect()
}
