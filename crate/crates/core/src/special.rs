//! Special functions on the ranges this crate needs: modified Bessel
//! functions of orders 0 and 1, rising factorials, the confluent
//! hypergeometric function and a few Poisson helpers.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest Bessel argument accepted; beyond it the series overflows `f64`.
pub const BESSEL_MAX_ARG: f64 = 700.0;

const TABLE_LEN: usize = 1024;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return ln_factorial_table()[n];
    }
    // Stirling series; at n >= 1024 the omitted terms are below 1e-20.
    let x = (n + 1) as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Sums `sum_k term_k` with `term_0 = 1` and
/// `term_{k+1} = term_k * w / ((k + 1) * (k + 1 + shift))`.
fn bessel_series(w: f64, shift: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= w / (k * (k + shift));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

fn check_bessel_arg(z: f64) -> Result<()> {
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "z",
            value: z,
            reason: "Bessel argument must be nonnegative",
        });
    }
    if z > BESSEL_MAX_ARG {
        return Err(Error::BesselOverflow(z));
    }
    Ok(())
}

/// `I_0(z) = sum (z/2)^{2n} / (n!)^2`.
pub fn bessel_i0(z: f64) -> Result<f64> {
    check_bessel_arg(z)?;
    Ok(bessel_series(0.25 * z * z, 0.0))
}

/// `I_1(z) = I_0'(z)`.
pub fn bessel_i1(z: f64) -> Result<f64> {
    Ok(z * bessel_i1_over_z(z)?)
}

/// `I_1(z) / z`, finite at the origin where it equals 1/2.
pub fn bessel_i1_over_z(z: f64) -> Result<f64> {
    check_bessel_arg(z)?;
    Ok(0.5 * bessel_series(0.25 * z * z, 1.0))
}

/// Rising factorial `(m)_k = m (m + 1) ... (m + k - 1)`.
pub fn pochhammer(m: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m + i) as f64)
}

fn series_budget(z: f64) -> usize {
    1000 + 20 * z.abs().ceil() as usize
}

fn hyp1f1_series(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..series_budget(z) {
        let kf = k as f64;
        let ratio = (alpha + kf) * z / ((beta + kf) * (kf + 1.0));
        term *= ratio;
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && ratio.abs() < 1.0) {
            return Ok(sum);
        }
    }
    Err(Error::Divergence("confluent hypergeometric series exceeded its term budget"))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta <= 0.0 && beta.fract() == 0.0 {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must not be a nonpositive integer",
        });
    }
    Ok(())
}

/// Kummer's confluent hypergeometric function `1F1(alpha; beta; z)`.
///
/// For negative `z` with `beta - alpha >= 0` the Kummer transformation
/// `e^z 1F1(beta - alpha; beta; -z)` is summed instead, which has only
/// positive terms.
pub fn hyp1f1(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    check_beta(beta)?;
    if z < 0.0 && beta - alpha >= 0.0 && beta > 0.0 {
        Ok(z.exp() * hyp1f1_series(beta - alpha, beta, -z)?)
    } else {
        hyp1f1_series(alpha, beta, z)
    }
}

/// `ln 1F1(alpha; beta; z)` for `alpha, beta > 0` and `beta >= alpha`
/// whenever `z < 0`, where the function is positive.
pub fn ln_hyp1f1(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    check_beta(beta)?;
    if z < 0.0 && beta - alpha >= 0.0 && beta > 0.0 {
        Ok(z + hyp1f1_series(beta - alpha, beta, -z)?.ln())
    } else {
        let v = hyp1f1_series(alpha, beta, z)?;
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::InvalidParameter {
                name: "z",
                value: z,
                reason: "confluent hypergeometric value is not positive",
            })
        }
    }
}

pub fn poisson_ln_pmf(n: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * mu.ln() - mu - ln_factorial(n)
}

pub fn poisson_pmf(n: usize, mu: f64) -> f64 {
    poisson_ln_pmf(n, mu).exp()
}

/// `P(N >= n)` for `N ~ Poisson(mu)`.
pub fn poisson_tail(n: usize, mu: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if (n as f64) <= mu {
        let head: f64 = (0..n).map(|k| poisson_pmf(k, mu)).sum();
        return (1.0 - head).max(0.0);
    }
    let mut term = poisson_pmf(n, mu);
    let mut sum = term;
    let mut k = n;
    while term > 1e-18 * sum && term > 0.0 {
        k += 1;
        term *= mu / k as f64;
        sum += term;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        // continuity between the table and Stirling
        let direct: f64 = (1..=1030).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(1030) - direct).abs() < 1e-9);
        assert!((ln_binomial(6, 2) - 15f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_i1(0.0).unwrap(), 0.0);
        assert!((bessel_i0(1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i1(1.0).unwrap() - 0.565_159_103_992_485_0).abs() < 1e-15);
        let i0_10 = 2_815.716_628_466_254;
        assert!((bessel_i0(10.0).unwrap() / i0_10 - 1.0).abs() < 1e-14);
        assert!(matches!(bessel_i0(800.0), Err(Error::BesselOverflow(_))));
        assert!(bessel_i0(-1.0).is_err());
    }

    #[test]
    fn bessel_derivative_identity() {
        let h = 1e-5;
        for z in [0.3, 1.0, 2.5, 7.0, 20.0] {
            let d = (bessel_i0(z + h).unwrap() - bessel_i0(z - h).unwrap()) / (2.0 * h);
            let i1 = bessel_i1(z).unwrap();
            assert!((d / i1 - 1.0).abs() < 1e-6, "z = {z}");
        }
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(3, 0), 1.0);
        assert_eq!(pochhammer(3, 2), 12.0);
        assert_eq!(pochhammer(0, 1), 0.0);
        assert_eq!(pochhammer(1, 5), 120.0);
    }

    #[test]
    fn hyp1f1_identities() {
        assert_eq!(hyp1f1(2.5, 3.0, 0.0).unwrap(), 1.0);
        for z in [-10.0, -1.0, -0.1, 0.5, 3.0, 20.0] {
            let v = hyp1f1(1.0, 1.0, z).unwrap();
            assert!((v / f64::exp(z) - 1.0).abs() < 1e-12, "z = {z}");
        }
        let v = hyp1f1(1.0, 2.0, -1.0).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        // 1F1(1; 2; z) = (e^z - 1) / z
        for z in [-30.0, -2.0, 4.0] {
            let exact = f64::exp_m1(z) / z;
            assert!((hyp1f1(1.0, 2.0, z).unwrap() / exact - 1.0).abs() < 1e-13);
            assert!((ln_hyp1f1(1.0, 2.0, z).unwrap() - exact.ln()).abs() < 1e-13);
        }
        assert!(hyp1f1(1.0, -2.0, 1.0).is_err());
    }

    #[test]
    fn poisson_helpers() {
        let mu = 2.3;
        let total: f64 = (0..60).map(|k| poisson_pmf(k, mu)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for n in [0, 1, 2, 5, 12] {
            let tail: f64 = (n..80).map(|k| poisson_pmf(k, mu)).sum();
            assert!((poisson_tail(n, mu) - tail).abs() < 1e-15 + 1e-12 * tail);
        }
        assert_eq!(poisson_pmf(0, 0.0), 1.0);
        assert_eq!(poisson_pmf(3, 0.0), 0.0);
    }
}
