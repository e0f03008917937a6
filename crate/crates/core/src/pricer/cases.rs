//! Special parameter families with simpler call formulas: the Merton jump
//! model (no velocity switching) and the symmetric family with equal
//! intensities and opposite jumps.

use crate::error::{positive, Error, Result};
use crate::pricer::call::{CallPricer, CallSpec, SeriesControls};
use crate::regime::{ln_kappa, ModelParams, Regime};
use crate::special::{ln_binomial, ln_factorial, poisson_pmf, poisson_tail};

/// `P(N <= n)` for `N ~ Poisson(mu)`; zero for negative `n`.
pub fn poisson_cdf(n: i64, mu: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    // past this index the remaining mass is below double precision
    let cap = (mu + 40.0 * mu.sqrt() + 100.0) as i64;
    if n > cap {
        return 1.0;
    }
    (0..=n as usize).map(|k| poisson_pmf(k, mu)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonPrice {
    pub price: f64,
    pub u: f64,
    pub big_u: f64,
    /// Largest jump count for which the call ends in the money (decreasing
    /// branch) or out of the money (increasing branch).
    pub n0: i64,
    pub lambda_star: f64,
}

/// Call price when `dS = S(t-)(c dt - h dN)` with `N` Poisson and a constant
/// rate `r`.
///
/// The call finishes in the money iff `N ln(1 - h) > ln(K/S0) - cT`; both
/// branches use `n0 = ceil((ln(K/S0) - cT) / ln(1 - h)) - 1`, the last jump
/// count on the `N ln(1 - h) <= ln(K/S0) - cT` side boundary excluded.
pub fn merton_price(c: f64, r: f64, h: f64, s0: f64, strike: f64, maturity: f64) -> Result<MertonPrice> {
    positive("s0", s0)?;
    positive("strike", strike)?;
    positive("maturity", maturity)?;
    let decreasing = h > 0.0 && h < 1.0 && c > r;
    let increasing = h < 0.0 && c < r;
    if !(decreasing || increasing) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "need 0 < h < 1 with c > r, or h < 0 with c < r",
        });
    }
    let lambda_star = (c - r) / h;
    let x = ((strike / s0).ln() - c * maturity) / (-h).ln_1p();
    let n0 = if x.is_finite() {
        (x.ceil() as i64).saturating_sub(1)
    } else {
        i64::MAX / 2
    };
    let mu = lambda_star * maturity;
    let mu_bar = lambda_star * (1.0 - h) * maturity;
    let tail = |n: i64, mu: f64| {
        if n < 0 {
            1.0
        } else {
            poisson_tail(n as usize + 1, mu)
        }
    };
    let (u, big_u) = if decreasing {
        ((-r * maturity).exp() * poisson_cdf(n0, mu), poisson_cdf(n0, mu_bar))
    } else {
        ((-r * maturity).exp() * tail(n0, mu), tail(n0, mu_bar))
    };
    Ok(MertonPrice {
        price: (s0 * big_u - strike * u).max(0.0),
        u,
        big_u,
        n0,
        lambda_star,
    })
}

/// The formula exactly as displayed for the Merton example, whose index is
/// one larger than [`merton_price`] uses. Kept to document the discrepancy.
pub fn merton_price_literal(c: f64, r: f64, h: f64, s0: f64, strike: f64, maturity: f64) -> Result<f64> {
    let base = merton_price(c, r, h, s0, strike, maturity)?;
    let n0 = base.n0 + 1;
    let mu = base.lambda_star * maturity;
    let mu_bar = base.lambda_star * (1.0 - h) * maturity;
    let (u, big_u) = if h > 0.0 {
        ((-r * maturity).exp() * poisson_cdf(n0, mu), poisson_cdf(n0, mu_bar))
    } else {
        (
            (-r * maturity).exp() * (1.0 - poisson_cdf(n0, mu)),
            1.0 - poisson_cdf(n0, mu_bar),
        )
    };
    Ok(s0 * big_u - strike * u)
}

/// Market of the Merton family inside the general model.
pub fn merton_params(c: f64, r: f64, h: f64, lambda: f64, s0: f64) -> ModelParams {
    ModelParams {
        c_plus: c,
        c_minus: c,
        lambda_plus: lambda,
        lambda_minus: lambda,
        h_plus: -h,
        h_minus: -h,
        r_plus: r,
        r_minus: r,
        s0,
        sigma0: Regime::Plus,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCheck {
    /// `u` summed from the binomial form of the symmetric family.
    pub u_explicit: f64,
    /// `u` from the general series.
    pub u_series: f64,
    pub big_u: f64,
    /// `S0 U - K u_explicit`.
    pub price: f64,
    pub series_price: f64,
    pub lambda_star: f64,
    /// `n_{+-} = ceil((ln(K/S0) - (c +- r) T) / ln(1 - h^2))`.
    pub n_plus: i64,
    pub n_minus: i64,
}

/// `(lambda, r, c, h)` when `params` belongs to the symmetric family
/// `lambda_+ = lambda_-`, `r_+ = r_-`, `c_+- = r +- c`, `h_+- = -+h`.
pub fn symmetric_family(params: &ModelParams) -> Result<(f64, f64, f64, f64)> {
    let c = 0.5 * (params.c_plus - params.c_minus);
    let r = 0.5 * (params.c_plus + params.c_minus);
    let h = params.h_minus;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    let ok = params.lambda_plus == params.lambda_minus
        && params.r_plus == params.r_minus
        && close(params.r_plus, r)
        && params.h_plus == -h
        && h > 0.0
        && h < 1.0
        && c > 0.0;
    if !ok {
        return Err(Error::InvalidParameter {
            name: "params",
            value: f64::NAN,
            reason: "not in the symmetric family (equal intensities and rates, c = r +- c, h = -+h)",
        });
    }
    Ok((params.lambda_plus, params.r_plus, c, h))
}

/// Evaluates `u` of the symmetric family from its explicit binomial double
/// sum and compares with the general series.
pub fn symmetric_price_check(
    params: &ModelParams,
    spec: &CallSpec,
    controls: &SeriesControls,
) -> Result<SymmetricCheck> {
    let (_, r, c, h) = symmetric_family(params)?;
    let sigma = params.sigma0;
    let t = spec.maturity;
    let y = (spec.strike / params.s0).ln();
    let lambda_star = c / h;
    let (c_plus, c_minus) = (params.c_plus, params.c_minus);
    let ln_l = lambda_star.ln();
    let discount = -(lambda_star + r) * t;

    let mut u_explicit = 0.0;
    let mut n = 0usize;
    loop {
        let yn = y - ln_kappa(n, sigma, params.h_plus, params.h_minus);
        let term = if yn < c_minus * t {
            (discount + n as f64 * (lambda_star * t).ln() - ln_factorial(n)).exp()
        } else if yn > c_plus * t {
            0.0
        } else {
            let p = (c_plus * t - yn) / (2.0 * c);
            let q = (yn - c_minus * t) / (2.0 * c);
            let m = match sigma {
                Regime::Plus => Some(n / 2),
                Regime::Minus => n.checked_sub(1).map(|k| k / 2),
            };
            let inner: f64 = m.map_or(0.0, |m| {
                (0..=m)
                    .map(|k| {
                        let pw = |base: f64, e: usize| if e == 0 { 1.0 } else { base.powi(e as i32) };
                        ln_binomial(n, k).exp() * pw(q, k) * pw(p, n - k)
                    })
                    .sum()
            });
            (discount + n as f64 * ln_l - ln_factorial(n)).exp() * inner
        };
        u_explicit += term;
        n += 1;
        if poisson_tail(n, lambda_star * t) < controls.tail_epsilon * 1e-2 || n >= controls.max_terms {
            break;
        }
    }

    let series = CallPricer::new(params)?.price(params.s0, spec.strike, t, sigma, controls)?;
    let ln_q = (-h * h).ln_1p();
    let n_pm = |s: f64| ((y - (c + s * r) * t) / ln_q).ceil() as i64;
    Ok(SymmetricCheck {
        u_explicit,
        u_series: series.u,
        big_u: series.big_u,
        price: (params.s0 * series.big_u - spec.strike * u_explicit).max(0.0),
        series_price: series.price,
        lambda_star,
        n_plus: n_pm(1.0),
        n_minus: n_pm(-1.0),
    })
}
