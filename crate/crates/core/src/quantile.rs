//! Quantile hedging of a call: the success set that maximizes the
//! probability of covering the claim under a budget, and its dual.

use crate::error::{Error, Result};
use crate::measure::{martingale_intensities, MartingaleIntensities};
use crate::pricer::call::{call_price, CallPricer, CallSpec, SeriesControls};
use crate::pricer::series::{u_n, SeriesParams};
use crate::regime::{linear_transform_coeffs, ln_kappa, ModelParams, Regime};
use crate::special::poisson_tail;

/// Shape of each slice `{N(T) = n}` of the success set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdCase {
    /// `-a <= 1`: `{X(T) <= y_n}`.
    Single,
    /// `-a > 1`: `{X(T) <= y_n^(1)} u {X(T) >= y_n^(2)}`.
    Double,
}

impl ThresholdCase {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdCase::Single => "single_threshold",
            ThresholdCase::Double => "double_threshold",
        }
    }
}

/// A slice of the success set, in whatever coordinate the caller uses
/// (`z = e^X kappa_n` or `X`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Values up to and including the bound.
    Below(f64),
    /// Values outside the open interval.
    Outside(f64, f64),
    /// Every value: the constraint never binds.
    All,
}

impl Threshold {
    pub fn map(self, f: impl Fn(f64) -> f64) -> Threshold {
        match self {
            Threshold::Below(z) => Threshold::Below(f(z)),
            Threshold::Outside(z1, z2) => Threshold::Outside(f(z1), f(z2)),
            Threshold::All => Threshold::All,
        }
    }

    pub fn contains(self, v: f64) -> bool {
        match self {
            Threshold::Below(z) => v <= z,
            Threshold::Outside(z1, z2) => v <= z1 || v >= z2,
            Threshold::All => true,
        }
    }
}

/// Budget strictly between zero and the perfect-hedge price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub v0: f64,
}

impl Budget {
    pub fn new(v0: f64, perfect_price: f64) -> Result<Budget> {
        if !(v0 > 0.0) || v0 >= perfect_price {
            return Err(Error::InfeasibleBudget {
                budget: v0,
                perfect_price,
            });
        }
        Ok(Budget { v0 })
    }
}

/// Everything about one call that does not depend on `gamma`.
#[derive(Debug, Clone)]
pub struct QuantileProblem {
    params: ModelParams,
    spec: CallSpec,
    m: MartingaleIntensities,
    pricer: CallPricer,
    physical: SeriesParams,
    /// `dP*/dP = e^{a X(T) + b T} kappa*`.
    pub a: f64,
    pub b: f64,
    pub case: ThresholdCase,
    pub perfect_price: f64,
    terms: usize,
    /// `u_n`, `U_n` at `ln(K/S0) - b_n`, the full call.
    full: Vec<(f64, f64)>,
    /// No-switch atom: `ln gamma` above which it leaves the success set
    /// (`None` when its payoff is zero), its cost and its probability.
    atom_ln_gamma: Option<f64>,
    atom_cost: f64,
    atom_prob: f64,
}

const ROOT_ITERATIONS: usize = 400;

impl QuantileProblem {
    pub fn new(params: &ModelParams, spec: &CallSpec, controls: &SeriesControls) -> Result<QuantileProblem> {
        controls.validate()?;
        let m = martingale_intensities(params)?;
        let (a, b) = linear_transform_coeffs(params.c_plus, params.c_minus, m.c_star_plus, m.c_star_minus)?;
        let pricer = CallPricer::new(params)?;
        let physical = SeriesParams::physical(params);
        let perfect_price = call_price(params, spec, controls)?.price;
        let rate = pricer
            .u_params
            .lambda_max()
            .max(pricer.big_u_params.lambda_max())
            .max(physical.lambda_max())
            * spec.maturity;
        let terms = (1..controls.max_terms)
            .find(|&n| poisson_tail(n, rate) < controls.tail_epsilon)
            .ok_or(Error::Truncation {
                terms: controls.max_terms,
                tail: poisson_tail(controls.max_terms, rate),
            })?;
        let y = (spec.strike / params.s0).ln();
        let sigma = params.sigma0;
        let full = (0..terms)
            .map(|n| {
                let yn = y - pricer.shift(n, sigma);
                Ok((
                    u_n(yn, spec.maturity, n, sigma, &pricer.u_params)?,
                    u_n(yn, spec.maturity, n, sigma, &pricer.big_u_params)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let sigma_t = params.c(sigma) * spec.maturity;
        let atom_payoff = (params.s0 * sigma_t.exp() - spec.strike).max(0.0);
        let m_lambda = m.lambda_star(sigma);
        Ok(QuantileProblem {
            atom_ln_gamma: (atom_payoff > 0.0).then(|| -a * sigma_t - b * spec.maturity - atom_payoff.ln()),
            atom_cost: (-(m_lambda + params.r(sigma)) * spec.maturity).exp() * atom_payoff,
            atom_prob: (-params.lambda(sigma) * spec.maturity).exp(),
            params: *params,
            spec: *spec,
            m,
            pricer,
            physical,
            a,
            b,
            case: if -a <= 1.0 { ThresholdCase::Single } else { ThresholdCase::Double },
            perfect_price,
            terms,
            full,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spec(&self) -> &CallSpec {
        &self.spec
    }

    /// Number of switch counts summed.
    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `ln(gamma kappa*_n kappa_n^{-a} e^{bT})`.
    fn ln_coeff(&self, n: usize, gamma: f64) -> f64 {
        let p = &self.params;
        let sigma = p.sigma0;
        gamma.ln() + ln_kappa(n, sigma, self.m.h_star_plus, self.m.h_star_minus)
            - self.a * ln_kappa(n, sigma, p.h_plus, p.h_minus)
            + self.b * self.spec.maturity
    }

    /// `g(d) = ln z^{-a} - ln(C (S0 z - K))` with `ln z = ln(K/S0) + d`, `d > 0`.
    fn excess_gap(&self, n: usize, gamma: f64, d: f64) -> f64 {
        let (s0, k) = (self.params.s0, self.spec.strike);
        -self.a * ((k / s0).ln() + d) - self.ln_coeff(n, gamma) - k.ln() - ln_expm1(d)
    }

    /// Thresholds in the excess log-moneyness `d = ln z - ln(K/S0)`, where
    /// roots close to the strike stay resolved. A root below the smallest
    /// positive double is reported as `0`.
    pub fn threshold_excess(&self, n: usize, gamma: f64) -> Result<Threshold> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
                reason: "must be positive and finite",
            });
        }
        let alpha = -self.a;
        let g = |d: f64| self.excess_gap(n, gamma, d);
        match self.case {
            ThresholdCase::Single => {
                if alpha == 1.0 && self.ln_coeff(n, gamma) + self.params.s0.ln() <= 0.0 {
                    return Ok(Threshold::All);
                }
                Ok(Threshold::Below(bisect_ln(&g, 1.0, true)?))
            }
            ThresholdCase::Double => {
                let d_min = (alpha / (alpha - 1.0)).ln();
                if g(d_min) > 0.0 {
                    return Ok(Threshold::All);
                }
                let d1 = bisect_between(&g, None, d_min)?;
                let d2 = bisect_between(&g, Some(d_min), f64::INFINITY)?;
                Ok(Threshold::Outside(d1, d2))
            }
        }
    }

    /// Solutions `z > K/S0` of `z^{-a} = gamma kappa*_n kappa_n^{-a} e^{bT} (S0 z - K)`.
    pub fn threshold_z(&self, n: usize, gamma: f64) -> Result<Threshold> {
        let w0 = (self.spec.strike / self.params.s0).ln();
        Ok(self.threshold_excess(n, gamma)?.map(|d| (w0 + d).exp()))
    }

    /// Thresholds for `X(T)`: `y_n = ln z_n - b_n`.
    pub fn threshold_y(&self, n: usize, gamma: f64) -> Result<Threshold> {
        let shift = (self.spec.strike / self.params.s0).ln() - self.pricer.shift(n, self.params.sigma0);
        Ok(self.threshold_excess(n, gamma)?.map(|d| shift + d))
    }

    /// Relative residual `|1 - C (S0 z - K) / z^{-a}|` of the threshold
    /// equation at the excess `d`.
    pub fn threshold_residual(&self, n: usize, gamma: f64, d: f64) -> f64 {
        (-self.excess_gap(n, gamma, d)).exp_m1().abs()
    }

    /// Membership of `{N(T) = n, X(T) = x}` in the success set straight from
    /// the density-ratio inequality `dP/dP* >= gamma f`.
    pub fn density_rule(&self, n: usize, x: f64, gamma: f64) -> bool {
        let p = &self.params;
        let sigma = p.sigma0;
        let ln_ratio = -self.a * x
            - self.b * self.spec.maturity
            - ln_kappa(n, sigma, self.m.h_star_plus, self.m.h_star_minus);
        let payoff = (p.s0 * (x + ln_kappa(n, sigma, p.h_plus, p.h_minus)).exp() - self.spec.strike).max(0.0);
        payoff == 0.0 || ln_ratio >= gamma.ln() + payoff.ln()
    }

    fn slice_weights(&self, sp: &SeriesParams, n: usize, th: Threshold) -> Result<f64> {
        let (t, sigma) = (self.spec.maturity, self.params.sigma0);
        Ok(match th {
            Threshold::Below(y) => u_n(y, t, n, sigma, sp)?,
            Threshold::Outside(y1, y2) => u_n(y1, t, n, sigma, sp)? - u_n(y2, t, n, sigma, sp)?,
            Threshold::All => 0.0,
        })
    }

    /// Cost `E*[B(T)^{-1} f 1_A]` of the claim restricted to the success set
    /// for `gamma`.
    pub fn budget(&self, gamma: f64) -> Result<f64> {
        Ok(self.budget_continuous(gamma)? + self.atom_cost * self.atom_included(gamma))
    }

    /// 1 when the no-switch atom belongs to the success set for `gamma`.
    pub fn atom_included(&self, gamma: f64) -> f64 {
        match self.atom_ln_gamma {
            Some(lg) if gamma.ln() > lg => 0.0,
            _ => 1.0,
        }
    }

    /// Budget carried by the slices with at least one switch.
    fn budget_continuous(&self, gamma: f64) -> Result<f64> {
        let (s0, k) = (self.params.s0, self.spec.strike);
        let mut total = 0.0;
        for n in 1..self.terms {
            let th = self.threshold_y(n, gamma)?;
            let (u_full, big_u_full) = self.full[n];
            let u = u_full - self.slice_weights(&self.pricer.u_params, n, th)?;
            let big_u = big_u_full - self.slice_weights(&self.pricer.big_u_params, n, th)?;
            total += s0 * big_u - k * u;
        }
        Ok(total)
    }

    /// `P_sigma` of the success set for `gamma`.
    pub fn success(&self, gamma: f64) -> Result<f64> {
        Ok(self.success_continuous(gamma)? + self.atom_prob * self.atom_included(gamma))
    }

    fn success_continuous(&self, gamma: f64) -> Result<f64> {
        let mut miss = 0.0;
        for n in 1..self.terms {
            miss += self.slice_weights(&self.physical, n, self.threshold_y(n, gamma)?)?;
        }
        Ok((1.0 - self.atom_prob - miss).clamp(0.0, 1.0))
    }

    /// `P_sigma(S(T) <= K)`: the success probability with no capital.
    pub fn free_success(&self) -> Result<f64> {
        let y = (self.spec.strike / self.params.s0).ln();
        let mut miss = 0.0;
        for n in 0..self.terms {
            let yn = y - self.pricer.shift(n, self.params.sigma0);
            miss += u_n(yn, self.spec.maturity, n, self.params.sigma0, &self.physical)?;
        }
        Ok((1.0 - miss).clamp(0.0, 1.0))
    }

    fn solution(&self, gamma: f64, atom_fraction: f64) -> Result<QuantileSolution> {
        let thresholds = (0..self.terms)
            .map(|n| self.threshold_y(n, gamma))
            .collect::<Result<Vec<_>>>()?;
        Ok(QuantileSolution {
            gamma,
            case: self.case,
            thresholds,
            atom_fraction,
            success_probability: self.success_continuous(gamma)? + self.atom_prob * atom_fraction,
            budget: self.budget_continuous(gamma)? + self.atom_cost * atom_fraction,
            residual: 0.0,
            problem: self.clone(),
        })
    }

    /// When `target` falls in the jump that the atom causes in `level`,
    /// the randomized solution at the atom's `gamma`.
    fn on_atom(&self, target: f64, rest: impl Fn(f64) -> Result<f64>, weight: f64) -> Result<Option<QuantileSolution>> {
        let Some(lg) = self.atom_ln_gamma else { return Ok(None) };
        let gamma = lg.exp();
        let without = rest(gamma)?;
        if weight > 0.0 && without <= target && target <= without + weight {
            return Ok(Some(self.solution(gamma, (target - without) / weight)?));
        }
        Ok(None)
    }

    /// `gamma` with `budget(gamma) = v0`.
    pub fn solve_budget(&self, budget: Budget) -> Result<QuantileSolution> {
        let v0 = budget.v0;
        if v0 >= self.perfect_price {
            return Err(Error::InfeasibleBudget {
                budget: v0,
                perfect_price: self.perfect_price,
            });
        }
        let mut sol = match self.on_atom(v0, |g| self.budget_continuous(g), self.atom_cost)? {
            Some(sol) => sol,
            None => {
                let f = |lg: f64| self.budget(lg.exp()).map(|v| v - v0);
                let gamma = bisect_decreasing(&f, -self.params.s0.ln())?.exp();
                self.solution(gamma, self.atom_included(gamma))?
            }
        };
        sol.residual = (sol.budget - v0).abs();
        if sol.residual > 1e-9 * self.params.s0 {
            return Err(Error::RootNotFound(format!(
                "budget equation residual {:.3e} at gamma = {:.6e}",
                sol.residual, sol.gamma
            )));
        }
        Ok(sol)
    }

    /// Least budget whose success set has probability `1 - epsilon`.
    pub fn solve_dual(&self, epsilon: f64) -> Result<QuantileSolution> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InfeasibleEpsilon {
                epsilon,
                reason: "must lie in (0, 1)".into(),
            });
        }
        let target = 1.0 - epsilon;
        if self.free_success()? >= target {
            return Err(Error::InfeasibleEpsilon {
                epsilon,
                reason: "P(S(T) <= K) already reaches 1 - epsilon without capital".into(),
            });
        }
        let mut sol = match self.on_atom(target, |g| self.success_continuous(g), self.atom_prob)? {
            Some(sol) => sol,
            None => {
                let f = |lg: f64| self.success(lg.exp()).map(|p| p - target);
                let gamma = bisect_decreasing(&f, -self.params.s0.ln())?.exp();
                self.solution(gamma, self.atom_included(gamma))?
            }
        };
        sol.residual = (sol.success_probability - target).abs();
        if sol.residual > 1e-9 {
            return Err(Error::InfeasibleEpsilon {
                epsilon,
                reason: format!("success probability {} missed by {:.3e}", target, sol.residual),
            });
        }
        Ok(sol)
    }
}

/// Root of a decreasing `f` of `ln gamma`, bracketing outward from `start`.
fn bisect_decreasing<F: Fn(f64) -> Result<f64>>(f: &F, start: f64) -> Result<f64> {
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    let mut guard = 0;
    while f(lo)? <= 0.0 {
        lo -= step;
        step *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::RootNotFound("no lower bracket for gamma".into()));
        }
    }
    step = 1.0;
    guard = 0;
    while f(hi)? > 0.0 {
        hi += step;
        step *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::RootNotFound("no upper bracket for gamma".into()));
        }
    }
    for _ in 0..ROOT_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 * lo.abs().max(1.0) {
            break;
        }
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root in `d > 0` of a function that is positive for small `d` and
/// negative for large `d` (`decreasing = true`), by bisection in `ln d`.
/// `ln(e^d - 1)` without overflow for large `d`.
fn ln_expm1(d: f64) -> f64 {
    if d > 1.0 {
        d + (-(-d).exp()).ln_1p()
    } else {
        d.exp_m1().ln()
    }
}

fn bisect_ln<G: Fn(f64) -> f64>(g: &G, start: f64, decreasing: bool) -> Result<f64> {
    let sign = if decreasing { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (start, start);
    let mut guard = 0;
    while sign * g(lo) <= 0.0 {
        lo *= 0.5;
        guard += 1;
        if lo == 0.0 {
            // closer to the strike than any positive double
            return Ok(0.0);
        }
        if guard > 2000 {
            return Err(Error::RootNotFound("threshold below the strike".into()));
        }
    }
    guard = 0;
    while sign * g(hi) > 0.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(Error::RootNotFound("threshold beyond every bracket".into()));
        }
    }
    refine(g, lo, hi, sign)
}

fn refine<G: Fn(f64) -> f64>(g: &G, mut lo: f64, mut hi: f64, sign: f64) -> Result<f64> {
    for _ in 0..ROOT_ITERATIONS {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi || hi / lo - 1.0 < 1e-15 {
            break;
        }
        if sign * g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Root of a convex `g` on one side of its minimum at `d_min`: in
/// `(0, d_min]` when `from` is `None`, in `[d_min, to)` otherwise.
fn bisect_between<G: Fn(f64) -> f64>(g: &G, from: Option<f64>, to: f64) -> Result<f64> {
    match from {
        None => {
            // decreasing on (0, d_min]
            let mut lo = to;
            let mut guard = 0;
            while g(lo) <= 0.0 {
                lo *= 0.5;
                guard += 1;
                if lo == 0.0 {
                    return Ok(0.0);
                }
                if guard > 2000 {
                    return Err(Error::RootNotFound("lower threshold not bracketed".into()));
                }
            }
            refine(g, lo, to, 1.0)
        }
        Some(d_min) => {
            // increasing on [d_min, inf)
            let mut hi = d_min.max(1e-300) * 2.0;
            let mut guard = 0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
                guard += 1;
                if guard > 2000 || !hi.is_finite() {
                    return Err(Error::RootNotFound("upper threshold not bracketed".into()));
                }
            }
            refine(g, d_min, hi, -1.0)
        }
    }
}

/// Success set, its probability and its cost for one `gamma`.
#[derive(Debug, Clone)]
pub struct QuantileSolution {
    pub gamma: f64,
    pub case: ThresholdCase,
    /// Per switch count, in terms of `X(T)`.
    pub thresholds: Vec<Threshold>,
    /// Share of the no-switch atom in the success set. Strictly between 0
    /// and 1 only when the budget falls in the jump the atom causes; the
    /// optimal test is then randomized on the atom.
    pub atom_fraction: f64,
    pub success_probability: f64,
    /// Cost of the claim restricted to the success set.
    pub budget: f64,
    /// `|budget - v0|` for the primal problem, `|P - (1 - epsilon)|` for the dual.
    pub residual: f64,
    problem: QuantileProblem,
}

impl QuantileSolution {
    pub fn problem(&self) -> &QuantileProblem {
        &self.problem
    }

    /// Probability that terminal state `(N(T), X(T)) = (n, x)` is counted
    /// as a success: 0 or 1 except on a randomized atom.
    pub fn membership(&self, n: usize, x: f64) -> Result<f64> {
        if n == 0 {
            return Ok(self.atom_fraction);
        }
        let th = match self.thresholds.get(n) {
            Some(th) => *th,
            None => self.problem.threshold_y(n, self.gamma)?,
        };
        Ok(if th.contains(x) { 1.0 } else { 0.0 })
    }

    /// Number of switch counts whose slice is restricted by the budget.
    pub fn binding_thresholds(&self) -> usize {
        self.thresholds.iter().filter(|t| !matches!(t, Threshold::All)).count()
    }
}

/// Per-`n` threshold equation solved on `z > K/S0`.
pub fn threshold_z(n: usize, gamma: f64, params: &ModelParams, spec: &CallSpec) -> Result<Threshold> {
    QuantileProblem::new(params, spec, &SeriesControls::default())?.threshold_z(n, gamma)
}

/// The success set bought with budget `v0`.
pub fn solve_budget_gamma(v0: f64, params: &ModelParams, spec: &CallSpec, controls: &SeriesControls) -> Result<QuantileSolution> {
    let problem = QuantileProblem::new(params, spec, controls)?;
    let budget = Budget::new(v0, problem.perfect_price)?;
    problem.solve_budget(budget)
}

/// Success probability of a solution, from the physical switch-count law.
pub fn success_probability(solution: &QuantileSolution) -> Result<f64> {
    let p = &solution.problem;
    Ok(p.success_continuous(solution.gamma)? + p.atom_prob * solution.atom_fraction)
}

/// The smallest budget achieving success probability `1 - epsilon`.
pub fn solve_dual(epsilon: f64, params: &ModelParams, spec: &CallSpec, controls: &SeriesControls) -> Result<QuantileSolution> {
    QuantileProblem::new(params, spec, controls)?.solve_dual(epsilon)
}

/// Budget `p c` for a claim paid only on survival with probability `p`.
pub fn insurance_budget(survival_prob: f64, params: &ModelParams, spec: &CallSpec, controls: &SeriesControls) -> Result<f64> {
    if !(survival_prob > 0.0 && survival_prob <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "survival_prob",
            value: survival_prob,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(survival_prob * call_price(params, spec, controls)?.price)
}

/// Market in which the physical and martingale intensities agree and are
/// equal in both regimes.
pub fn martingale_family(lambda: f64, c_plus: f64, c_minus: f64, r_plus: f64, r_minus: f64, s0: f64, sigma0: Regime) -> ModelParams {
    ModelParams {
        c_plus,
        c_minus,
        lambda_plus: lambda,
        lambda_minus: lambda,
        h_plus: (r_plus - c_plus) / lambda,
        h_minus: (r_minus - c_minus) / lambda,
        r_plus,
        r_minus,
        s0,
        sigma0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
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

    fn spec() -> CallSpec {
        CallSpec::new(100.0, 1.0).unwrap()
    }

    #[test]
    fn thresholds_solve_their_equation() {
        let prob = QuantileProblem::new(&params(), &spec(), &SeriesControls::default()).unwrap();
        let mut last = f64::INFINITY;
        for lg in [-8.0, -5.0, -3.0, -1.0, 2.0] {
            let gamma = f64::exp(lg);
            for n in 0..6 {
                match prob.threshold_excess(n, gamma).unwrap() {
                    Threshold::Below(d) => {
                        assert!(d > 0.0);
                        assert!(prob.threshold_residual(n, gamma, d) < 1e-12);
                    }
                    Threshold::Outside(d1, d2) => {
                        assert!(prob.threshold_residual(n, gamma, d1) < 1e-12);
                        assert!(prob.threshold_residual(n, gamma, d2) < 1e-12);
                    }
                    Threshold::All => {}
                }
            }
            if let Threshold::Below(z) = prob.threshold_z(1, gamma).unwrap() {
                assert!(z < last);
                last = z;
            }
        }
    }

    #[test]
    fn linear_case_closed_form() {
        // -a = 1 with S0 = K = 1: z = gC / (gC - 1)
        let prob = QuantileProblem {
            a: -1.0,
            b: 0.0,
            case: ThresholdCase::Single,
            ..QuantileProblem::new(&params().with_spot(1.0, Regime::Plus), &CallSpec::new(1.0, 1.0).unwrap(), &SeriesControls::default())
                .unwrap()
        };
        for gamma in [1.5, 3.0, 40.0] {
            let gc = prob.ln_coeff(0, gamma).exp();
            let Threshold::Below(z) = prob.threshold_z(0, gamma).unwrap() else { panic!() };
            assert!((z / (gc / (gc - 1.0)) - 1.0).abs() < 1e-12);
        }
        assert_eq!(prob.threshold_z(0, 0.5).unwrap(), Threshold::All);
    }

    #[test]
    fn budget_round_trip() {
        let c = SeriesControls::default();
        let prob = QuantileProblem::new(&params(), &spec(), &c).unwrap();
        let full = prob.perfect_price;
        let mut last = 0.0;
        for frac in [0.25, 0.5, 0.75] {
            let sol = prob.solve_budget(Budget::new(frac * full, full).unwrap()).unwrap();
            assert!(sol.residual <= 1e-9 * 100.0);
            assert!(sol.success_probability > last);
            assert!((success_probability(&sol).unwrap() - sol.success_probability).abs() < 1e-15);
            last = sol.success_probability;
            let dual = prob.solve_dual(1.0 - sol.success_probability).unwrap();
            assert!((dual.gamma / sol.gamma - 1.0).abs() < 1e-8, "{} {}", dual.gamma, sol.gamma);
        }
        assert!(matches!(
            solve_budget_gamma(full * 1.01, &params(), &spec(), &c),
            Err(Error::InfeasibleBudget { .. })
        ));
        let near = prob.solve_budget(Budget::new(full * (1.0 - 1e-9), full).unwrap()).unwrap();
        assert!(near.success_probability > 1.0 - 1e-5);
    }

    #[test]
    fn atom_is_randomized_inside_its_jump() {
        let prob = QuantileProblem::new(&params(), &spec(), &SeriesControls::default()).unwrap();
        let gamma = prob.atom_ln_gamma.unwrap().exp();
        let base = prob.budget_continuous(gamma).unwrap();
        let v0 = base + 0.3 * prob.atom_cost;
        let sol = prob.solve_budget(Budget::new(v0, prob.perfect_price).unwrap()).unwrap();
        assert!((sol.atom_fraction - 0.3).abs() < 1e-12);
        assert!(sol.residual < 1e-12);
        let dual = prob.solve_dual(1.0 - sol.success_probability).unwrap();
        assert!((dual.budget / v0 - 1.0).abs() < 1e-10);
        let just_above = prob.budget(gamma * (1.0 - 1e-9)).unwrap();
        let just_below = prob.budget(gamma * (1.0 + 1e-9)).unwrap();
        assert!((just_above - just_below - prob.atom_cost).abs() < 1e-6);
    }

    #[test]
    fn double_threshold_market() {
        // strong negative a: the + velocity carries far less martingale drift
        let p = ModelParams {
            c_plus: 0.05,
            c_minus: -0.05,
            lambda_plus: 0.5,
            lambda_minus: 3.0,
            h_plus: -0.02,
            h_minus: 0.05,
            r_plus: 0.03,
            r_minus: 0.03,
            s0: 100.0,
            sigma0: Regime::Minus,
        };
        let c = SeriesControls::default();
        let prob = QuantileProblem::new(&p, &spec(), &c).unwrap();
        assert_eq!(prob.case, ThresholdCase::Double, "a = {}", prob.a);
        let sol = prob.solve_budget(Budget::new(0.5 * prob.perfect_price, prob.perfect_price).unwrap()).unwrap();
        assert!(sol.thresholds.iter().any(|t| matches!(t, Threshold::Outside(..))));
        assert!(sol.thresholds.iter().any(|t| matches!(t, Threshold::All)));
        for n in 0..6 {
            for x in [-0.08, -0.02, 0.0, 0.03, 0.06] {
                let rule = prob.density_rule(n + 1, x, sol.gamma);
                assert_eq!(sol.membership(n + 1, x).unwrap() == 1.0, rule, "{n} {x}");
            }
        }
    }

    #[test]
    fn martingale_family_threshold() {
        let p = martingale_family(1.2, 0.2, -0.1, 0.05, 0.05, 100.0, Regime::Plus);
        let prob = QuantileProblem::new(&p, &spec(), &SeriesControls::default()).unwrap();
        assert!(prob.a.abs() < 1e-15 && prob.b.abs() < 1e-15);
        let gamma = 0.2;
        for n in 0..5 {
            let Threshold::Below(z) = prob.threshold_z(n, gamma).unwrap() else { panic!() };
            assert!((z - (100.0 + 1.0 / gamma) / 100.0).abs() < 1e-12);
        }
        assert!((insurance_budget(0.9, &p, &spec(), &SeriesControls::default()).unwrap()
            - 0.9 * prob.perfect_price)
            .abs()
            < 1e-12);
    }
}
