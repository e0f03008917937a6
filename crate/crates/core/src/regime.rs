//! The two-state switching process and the processes driven by it: the
//! telegraph process, the jump process, the stock and the bank account.

use std::fmt;
use std::ops::Neg;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{finite, positive, Error, Result};
use crate::rng::path_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Plus,
    Minus,
}

impl Regime {
    pub fn from_sign(sign: i32) -> Option<Regime> {
        match sign {
            1 => Some(Regime::Plus),
            -1 => Some(Regime::Minus),
            _ => None,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Regime::Plus => 1.0,
            Regime::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Regime {
        -self
    }

    /// Picks the value belonging to this regime.
    #[inline]
    pub fn pick<T>(self, plus: T, minus: T) -> T {
        match self {
            Regime::Plus => plus,
            Regime::Minus => minus,
        }
    }

    /// Regime after `n` switches starting from `self`.
    #[inline]
    pub fn after(self, n: usize) -> Regime {
        if n.is_multiple_of(2) {
            self
        } else {
            -self
        }
    }
}

impl Neg for Regime {
    type Output = Regime;

    fn neg(self) -> Regime {
        match self {
            Regime::Plus => Regime::Minus,
            Regime::Minus => Regime::Plus,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.pick("+1", "-1"))
    }
}

/// Full market specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub c_plus: f64,
    pub c_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub s0: f64,
    pub sigma0: Regime,
}

impl ModelParams {
    /// Checks every market invariant: positive intensities, rates and spot,
    /// jumps above -1 and `c_minus <= c_plus`.
    pub fn validate(&self) -> Result<()> {
        self.validate_dynamics()?;
        positive("r_plus", self.r_plus)?;
        positive("r_minus", self.r_minus)?;
        Ok(())
    }

    /// The subset of invariants needed to simulate paths (rates may be zero).
    pub fn validate_dynamics(&self) -> Result<()> {
        finite("c_plus", self.c_plus)?;
        finite("c_minus", self.c_minus)?;
        positive("lambda_plus", self.lambda_plus)?;
        positive("lambda_minus", self.lambda_minus)?;
        positive("s0", self.s0)?;
        for (name, h) in [("h_plus", self.h_plus), ("h_minus", self.h_minus)] {
            if !(h > -1.0 && h.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: h,
                    reason: "jump size must exceed -1",
                });
            }
        }
        for (name, r) in [("r_plus", self.r_plus), ("r_minus", self.r_minus)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: r,
                    reason: "interest rate must be nonnegative",
                });
            }
        }
        if self.c_minus > self.c_plus {
            return Err(Error::InvalidParameter {
                name: "c_minus",
                value: self.c_minus,
                reason: "must not exceed c_plus",
            });
        }
        Ok(())
    }

    #[inline]
    pub fn c(&self, sigma: Regime) -> f64 {
        sigma.pick(self.c_plus, self.c_minus)
    }

    #[inline]
    pub fn lambda(&self, sigma: Regime) -> f64 {
        sigma.pick(self.lambda_plus, self.lambda_minus)
    }

    #[inline]
    pub fn h(&self, sigma: Regime) -> f64 {
        sigma.pick(self.h_plus, self.h_minus)
    }

    #[inline]
    pub fn r(&self, sigma: Regime) -> f64 {
        sigma.pick(self.r_plus, self.r_minus)
    }

    /// Same market with the switching intensities replaced.
    pub fn with_intensities(&self, lambda_plus: f64, lambda_minus: f64) -> ModelParams {
        ModelParams {
            lambda_plus,
            lambda_minus,
            ..*self
        }
    }

    pub fn with_spot(&self, s0: f64, sigma0: Regime) -> ModelParams {
        ModelParams {
            s0,
            sigma0,
            ..*self
        }
    }
}

/// One realization of the switching process on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    sigma0: Regime,
    switch_times: Vec<f64>,
    horizon: f64,
}

impl RegimePath {
    pub fn new(sigma0: Regime, switch_times: Vec<f64>, horizon: f64) -> Result<RegimePath> {
        positive("horizon", horizon)?;
        let mut prev = 0.0;
        for &s in &switch_times {
            if !(s > prev && s <= horizon) {
                return Err(Error::InvalidParameter {
                    name: "switch_times",
                    value: s,
                    reason: "switch times must be strictly increasing within (0, horizon]",
                });
            }
            prev = s;
        }
        Ok(RegimePath {
            sigma0,
            switch_times,
            horizon,
        })
    }

    /// Samples switch times with exponential waits whose rates alternate
    /// `lambda_{sigma0}, lambda_{-sigma0}, ...`.
    pub fn sample<R: Rng + ?Sized>(
        lambda_plus: f64,
        lambda_minus: f64,
        sigma0: Regime,
        horizon: f64,
        rng: &mut R,
    ) -> RegimePath {
        let mut switch_times = Vec::new();
        let mut t = 0.0;
        let mut sigma = sigma0;
        loop {
            let wait: f64 = rng.sample(Exp1);
            t += wait / sigma.pick(lambda_plus, lambda_minus);
            if t > horizon {
                break;
            }
            // An exponential draw of exactly zero would repeat the previous
            // time; it has probability zero but keep the invariant anyway.
            if switch_times.last().is_some_and(|&last| t <= last) || t <= 0.0 {
                continue;
            }
            switch_times.push(t);
            sigma = -sigma;
        }
        RegimePath {
            sigma0,
            switch_times,
            horizon,
        }
    }

    pub fn sigma0(&self) -> Regime {
        self.sigma0
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            })
        }
    }

    #[inline]
    fn count_unchecked(&self, t: f64) -> usize {
        self.switch_times.partition_point(|&s| s <= t)
    }

    /// Right-continuous regime at `t`.
    pub fn regime_at(&self, t: f64) -> Result<Regime> {
        self.check(t)?;
        Ok(self.sigma0.after(self.count_unchecked(t)))
    }

    /// Number of switch times in `[0, t]`.
    pub fn switch_count(&self, t: f64) -> Result<usize> {
        self.check(t)?;
        Ok(self.count_unchecked(t))
    }

    /// Time integral over `[0, t]` of a regime-indexed rate.
    pub fn integrate(&self, v_plus: f64, v_minus: f64, t: f64) -> Result<f64> {
        self.check(t)?;
        let mut total = 0.0;
        let mut start = 0.0;
        let mut sigma = self.sigma0;
        for &s in &self.switch_times {
            if s > t {
                break;
            }
            total += sigma.pick(v_plus, v_minus) * (s - start);
            start = s;
            sigma = -sigma;
        }
        Ok(total + sigma.pick(v_plus, v_minus) * (t - start))
    }

    pub fn telegraph_value(&self, c_plus: f64, c_minus: f64, t: f64) -> Result<f64> {
        self.integrate(c_plus, c_minus, t)
    }

    /// Sum of the jump sizes indexed by the pre-switch regime over switches in `[0, t]`.
    pub fn jump_value(&self, h_plus: f64, h_minus: f64, t: f64) -> Result<f64> {
        let n = self.switch_count(t)?;
        let from_start = n.div_ceil(2) as f64;
        let from_other = (n / 2) as f64;
        let (h0, h1) = match self.sigma0 {
            Regime::Plus => (h_plus, h_minus),
            Regime::Minus => (h_minus, h_plus),
        };
        Ok(from_start * h0 + from_other * h1)
    }

    /// `S0 * exp(X(t)) * kappa_{N(t), sigma0}`.
    pub fn stock_price(&self, params: &ModelParams, t: f64) -> Result<f64> {
        let x = self.telegraph_value(params.c_plus, params.c_minus, t)?;
        let n = self.count_unchecked(t);
        let ln_k = ln_kappa(n, self.sigma0, params.h_plus, params.h_minus);
        Ok(params.s0 * (x + ln_k).exp())
    }

    pub fn bond_price(&self, params: &ModelParams, t: f64) -> Result<f64> {
        Ok(self.integrate(params.r_plus, params.r_minus, t)?.exp())
    }

    /// Number of switches, telegraph value and regime at the horizon.
    pub fn terminal_state(&self, v_plus: f64, v_minus: f64) -> (usize, f64, Regime) {
        let n = self.switch_times.len();
        let x = self
            .integrate(v_plus, v_minus, self.horizon)
            .expect("horizon is in range");
        (n, x, self.sigma0.after(n))
    }
}

/// Samples one path of the switching process; path index 0 of `seed`.
pub fn sample_path(params: &ModelParams, horizon: f64, seed: u64) -> Result<RegimePath> {
    positive("horizon", horizon)?;
    positive("lambda_plus", params.lambda_plus)?;
    positive("lambda_minus", params.lambda_minus)?;
    let mut rng = path_rng(seed, 0);
    Ok(RegimePath::sample(
        params.lambda_plus,
        params.lambda_minus,
        params.sigma0,
        horizon,
        &mut rng,
    ))
}

/// Product of `(1 + h)` over `n` switches starting in `sigma`.
pub fn kappa(n: usize, sigma: Regime, h_plus: f64, h_minus: f64) -> f64 {
    let k = (n / 2) as i32;
    let (h_start, h_other) = match sigma {
        Regime::Plus => (h_plus, h_minus),
        Regime::Minus => (h_minus, h_plus),
    };
    let pair = (1.0 + h_start).powi(k) * (1.0 + h_other).powi(k);
    if n % 2 == 1 {
        pair * (1.0 + h_start)
    } else {
        pair
    }
}

/// `ln kappa_{n, sigma}`, computed additively so that consecutive pairs of
/// switches shift it by exactly the same amount.
pub fn ln_kappa(n: usize, sigma: Regime, h_plus: f64, h_minus: f64) -> f64 {
    let (l_start, l_other) = match sigma {
        Regime::Plus => (h_plus.ln_1p(), h_minus.ln_1p()),
        Regime::Minus => (h_minus.ln_1p(), h_plus.ln_1p()),
    };
    let pairs = (n / 2) as f64;
    let base = pairs * (l_start + l_other);
    if n % 2 == 1 {
        base + l_start
    } else {
        base
    }
}

/// Coefficients `(a, b)` with `a * c + b = c_tilde` in both regimes.
pub fn linear_transform_coeffs(
    c_plus: f64,
    c_minus: f64,
    c_tilde_plus: f64,
    c_tilde_minus: f64,
) -> Result<(f64, f64)> {
    let dc = c_plus - c_minus;
    if dc == 0.0 {
        return Err(Error::DegenerateVelocities(c_plus));
    }
    let a = (c_tilde_plus - c_tilde_minus) / dc;
    let b = (c_plus * c_tilde_minus - c_minus * c_tilde_plus) / dc;
    Ok((a, b))
}

/// Constants of the conditional-mean formulas for `X` and `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstants {
    pub h_sum: f64,
    pub lambda_sum: f64,
    pub gamma: f64,
    pub g: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl MomentConstants {
    pub fn new(params: &ModelParams) -> MomentConstants {
        let (lp, lm) = (params.lambda_plus, params.lambda_minus);
        let lambda_sum = lp + lm;
        MomentConstants {
            h_sum: params.h_plus + params.h_minus,
            lambda_sum,
            gamma: lp * lm / lambda_sum,
            g: (params.c_plus * lm + params.c_minus * lp) / lambda_sum,
            a_plus: (lp * params.h_plus - lm * params.h_minus) / lambda_sum,
            a_minus: (lm * params.h_minus - lp * params.h_plus) / lambda_sum,
            d_plus: (params.c_plus - params.c_minus) / lambda_sum,
            d_minus: (params.c_minus - params.c_plus) / lambda_sum,
        }
    }
}

/// Conditional means of the increments `(J(s + dt) - J(s), X(s + dt) - X(s))`
/// given the regime `sigma_s` at time `s`.
pub fn conditional_means(params: &ModelParams, sigma_s: Regime, dt: f64) -> Result<(f64, f64)> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must be nonnegative",
        });
    }
    let m = MomentConstants::new(params);
    let transient = -(-m.lambda_sum * dt).exp_m1() / m.lambda_sum;
    let lambda = params.lambda(sigma_s);
    let (a, d) = sigma_s.pick((m.a_plus, m.d_plus), (m.a_minus, m.d_minus));
    Ok((
        m.gamma * m.h_sum * dt + lambda * a * transient,
        m.g * dt + lambda * d * transient,
    ))
}

/// `(lambda_- h_- + c_-, lambda_+ h_+ + c_+)`; both vanish exactly when
/// `X + J` is a martingale.
pub fn martingale_defect(params: &ModelParams) -> (f64, f64) {
    (
        params.lambda_minus * params.h_minus + params.c_minus,
        params.lambda_plus * params.h_plus + params.c_plus,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(sigma0: Regime, times: &[f64]) -> RegimePath {
        RegimePath::new(sigma0, times.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn regime_is_right_continuous() {
        assert_eq!(path(Regime::Plus, &[]).regime_at(1.0).unwrap(), Regime::Plus);
        assert_eq!(path(Regime::Plus, &[0.5]).regime_at(0.5).unwrap(), Regime::Minus);
        assert_eq!(
            path(Regime::Minus, &[0.2, 0.7]).regime_at(0.3).unwrap(),
            Regime::Plus
        );
        assert!(path(Regime::Plus, &[]).regime_at(1.5).is_err());
        assert!(path(Regime::Plus, &[]).regime_at(-0.1).is_err());
    }

    #[test]
    fn switch_count_examples() {
        assert_eq!(path(Regime::Plus, &[]).switch_count(0.4).unwrap(), 0);
        let p = path(Regime::Plus, &[0.2, 0.7]);
        assert_eq!(p.switch_count(0.7).unwrap(), 2);
        assert_eq!(p.switch_count(0.69).unwrap(), 1);
    }

    #[test]
    fn telegraph_examples() {
        let p = path(Regime::Plus, &[]);
        assert_eq!(p.telegraph_value(0.3, -0.2, 0.8).unwrap(), 0.3 * 0.8);
        let s = 0.35;
        let p = path(Regime::Plus, &[s]);
        for t in [0.4, 0.7, 1.0] {
            let x = p.telegraph_value(1.0, -1.0, t).unwrap();
            assert!((x - (2.0 * s - t)).abs() < 1e-15);
        }
    }

    #[test]
    fn jump_examples() {
        let (hp, hm) = (-0.2, 0.1);
        assert_eq!(path(Regime::Plus, &[]).jump_value(hp, hm, 1.0).unwrap(), 0.0);
        let v = path(Regime::Plus, &[0.1, 0.2]).jump_value(hp, hm, 1.0).unwrap();
        assert!((v - (hp + hm)).abs() < 1e-15);
        let v = path(Regime::Minus, &[0.1, 0.2, 0.3])
            .jump_value(hp, hm, 1.0)
            .unwrap();
        assert!((v - (2.0 * hm + hp)).abs() < 1e-15);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(0, Regime::Plus, -0.2, 0.1), 1.0);
        assert!((kappa(2, Regime::Plus, -0.2, 0.1) - 0.88).abs() < 1e-15);
        assert!((kappa(3, Regime::Plus, -0.2, 0.1) - 0.704).abs() < 1e-15);
        for n in 0..12 {
            for sigma in [Regime::Plus, Regime::Minus] {
                let direct = kappa(n, sigma, -0.2, 0.1);
                let via_log = ln_kappa(n, sigma, -0.2, 0.1).exp();
                assert!((direct - via_log).abs() < 1e-14);
                if n > 0 {
                    // recursive definition
                    let rec = kappa(n - 1, -sigma, -0.2, 0.1) * (1.0 + sigma.pick(-0.2, 0.1));
                    assert!((direct - rec).abs() < 1e-15);
                }
            }
        }
    }

    fn params() -> ModelParams {
        ModelParams {
            c_plus: 0.2,
            c_minus: -0.1,
            lambda_plus: 1.0,
            lambda_minus: 0.8,
            h_plus: -0.3,
            h_minus: 0.5,
            r_plus: 0.05,
            r_minus: 0.03,
            s0: 100.0,
            sigma0: Regime::Plus,
        }
    }

    #[test]
    fn stock_and_bond_prices() {
        let p = params();
        let no_switch = RegimePath::new(Regime::Plus, vec![], 1.0).unwrap();
        let s = no_switch.stock_price(&p, 0.6).unwrap();
        assert!((s - 100.0 * (0.2f64 * 0.6).exp()).abs() < 1e-12);
        assert_eq!(no_switch.bond_price(&p, 0.0).unwrap(), 1.0);
        assert!((no_switch.bond_price(&p, 0.6).unwrap() - (0.05f64 * 0.6).exp()).abs() < 1e-15);

        let tau = 0.4;
        let one = RegimePath::new(Regime::Plus, vec![tau], 1.0).unwrap();
        let before = p.s0 * (p.c_plus * tau).exp();
        let at = one.stock_price(&p, tau).unwrap();
        assert!((at - before * (1.0 + p.h_plus)).abs() < 1e-12);

        let flat = ModelParams {
            r_minus: 0.05,
            ..p
        };
        assert!((one.bond_price(&flat, 0.9).unwrap() - (0.05f64 * 0.9).exp()).abs() < 1e-14);

        let nojump = ModelParams {
            h_plus: 0.0,
            h_minus: 0.0,
            ..p
        };
        let x = one.telegraph_value(nojump.c_plus, nojump.c_minus, 0.9).unwrap();
        assert_eq!(one.stock_price(&nojump, 0.9).unwrap(), 100.0 * x.exp());
    }

    #[test]
    fn linear_transform() {
        assert_eq!(linear_transform_coeffs(0.3, -0.1, 0.3, -0.1).unwrap(), (1.0, 0.0));
        assert_eq!(linear_transform_coeffs(1.0, -1.0, 3.0, 1.0).unwrap(), (1.0, 2.0));
        let p = params();
        let (a, b) = linear_transform_coeffs(p.c_plus, p.c_minus, p.r_plus, p.r_minus).unwrap();
        assert!((a * p.c_plus + b - p.r_plus).abs() < 1e-16);
        assert!((a * p.c_minus + b - p.r_minus).abs() < 1e-16);
        assert!(matches!(
            linear_transform_coeffs(0.1, 0.1, 0.2, 0.3),
            Err(Error::DegenerateVelocities(_))
        ));
    }

    #[test]
    fn conditional_means_examples() {
        let p = params();
        assert_eq!(conditional_means(&p, Regime::Plus, 0.0).unwrap(), (0.0, 0.0));
        let (c, l) = (0.4, 2.0);
        let sym = ModelParams {
            c_plus: c,
            c_minus: -c,
            lambda_plus: l,
            lambda_minus: l,
            h_plus: -c / l,
            h_minus: c / l,
            ..p
        };
        for dt in [0.1, 1.0, 5.0] {
            for sigma in [Regime::Plus, Regime::Minus] {
                let (j, x) = conditional_means(&sym, sigma, dt).unwrap();
                assert!((j + x).abs() < 1e-14);
            }
        }
        assert!(conditional_means(&sym, Regime::Plus, -1.0).is_err());
    }

    #[test]
    fn defect_examples() {
        let p = ModelParams {
            c_plus: 1.0,
            c_minus: -1.0,
            lambda_plus: 2.0,
            lambda_minus: 2.0,
            h_plus: -0.5,
            h_minus: 0.5,
            ..params()
        };
        assert_eq!(martingale_defect(&p), (0.0, 0.0));
        let q = ModelParams {
            h_plus: 0.0,
            h_minus: 0.0,
            ..p
        };
        assert_eq!(martingale_defect(&q).1, 1.0);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p = params();
        let a = sample_path(&p, 3.0, 11).unwrap();
        let b = sample_path(&p, 3.0, 11).unwrap();
        assert_eq!(a, b);
        assert!(sample_path(&p, 0.0, 11).is_err());
        let times = a.switch_times();
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert!(times.iter().all(|&s| s > 0.0 && s <= 3.0));
    }

    #[test]
    fn validate_rejects_bad_params() {
        assert!(params().validate().is_ok());
        let bad = [
            ModelParams { lambda_plus: 0.0, ..params() },
            ModelParams { h_minus: -1.0, ..params() },
            ModelParams { c_minus: 0.5, ..params() },
            ModelParams { r_plus: 0.0, ..params() },
            ModelParams { s0: -1.0, ..params() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
