//! Transition densities of the telegraph process split by the number of
//! switches, the closed Bessel form of the total density, and the
//! moment-generating function of the jump telegraph process.

use crate::error::{positive, Error, Result};
use crate::quadrature::{break_points, Quadrature};
use crate::regime::{ln_kappa, Regime};
use crate::special::{bessel_i0, bessel_i1_over_z, ln_factorial, poisson_tail};

/// Velocities and switch intensities of a telegraph process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub c_plus: f64,
    pub c_minus: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl DensityParams {
    pub fn new(c_plus: f64, c_minus: f64, lambda_plus: f64, lambda_minus: f64) -> Result<Self> {
        positive("lambda_plus", lambda_plus)?;
        positive("lambda_minus", lambda_minus)?;
        if !(c_plus > c_minus) || !c_plus.is_finite() || !c_minus.is_finite() {
            return Err(Error::DegenerateVelocities(c_plus));
        }
        Ok(DensityParams {
            c_plus,
            c_minus,
            lambda_plus,
            lambda_minus,
        })
    }

    pub fn dc(&self) -> f64 {
        self.c_plus - self.c_minus
    }

    pub fn nu(&self) -> f64 {
        (self.lambda_plus - self.lambda_minus) / self.dc()
    }

    pub fn lambda_tilde(&self) -> f64 {
        (self.lambda_minus * self.c_plus - self.lambda_plus * self.c_minus) / self.dc()
    }

    pub fn c(&self, sigma: Regime) -> f64 {
        sigma.pick(self.c_plus, self.c_minus)
    }

    pub fn lambda(&self, sigma: Regime) -> f64 {
        sigma.pick(self.lambda_plus, self.lambda_minus)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_plus.max(self.lambda_minus)
    }

    /// Swaps the roles of the two regimes for the reflected process `-X`.
    pub fn reflected(&self) -> DensityParams {
        DensityParams {
            c_plus: -self.c_minus,
            c_minus: -self.c_plus,
            lambda_plus: self.lambda_minus,
            lambda_minus: self.lambda_plus,
        }
    }
}

/// Law of `X(t)` near a point: the point mass of the no-switch trajectory
/// and the density of the absolutely continuous part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub atom_location: f64,
    pub atom_weight: f64,
    pub continuous: f64,
}

fn check_time(t: f64) -> Result<()> {
    positive("t", t)
}

/// `ln q_n(x, t)` on the closed support, `None` where the kernel vanishes.
fn ln_q(x: f64, t: f64, n: usize, sigma: Regime, dp: &DensityParams) -> Option<f64> {
    let dc = dp.dc();
    let a = dp.c_plus * t - x;
    let b = x - dp.c_minus * t;
    if a < 0.0 || b < 0.0 {
        return None;
    }
    let ln_pow = |base: f64, k: usize| -> Option<f64> {
        if k == 0 {
            Some(0.0)
        } else if base > 0.0 {
            Some(k as f64 * base.ln())
        } else {
            None
        }
    };
    let (lp, lm) = (dp.lambda_plus.ln(), dp.lambda_minus.ln());
    let k = n / 2;
    let kf = k as f64;
    let ln_dc = dc.ln();
    if n % 2 == 1 {
        let rates = match sigma {
            Regime::Plus => (kf + 1.0) * lp + kf * lm,
            Regime::Minus => kf * lp + (kf + 1.0) * lm,
        };
        Some(
            rates - n as f64 * ln_dc + ln_pow(a, k)? + ln_pow(b, k)?
                - 2.0 * ln_factorial(k),
        )
    } else {
        // even n >= 2: the regime we start in is visited one more time than
        // the other, the extra interval length factors as B for + and A for -
        let (pa, pb) = match sigma {
            Regime::Plus => (k - 1, k),
            Regime::Minus => (k, k - 1),
        };
        Some(
            kf * (lp + lm) - n as f64 * ln_dc + ln_pow(a, pa)? + ln_pow(b, pb)?
                - ln_factorial(k - 1)
                - ln_factorial(k),
        )
    }
}

/// The polynomial kernel `q_n`, `n >= 1`; zero outside `[c_- t, c_+ t]`.
pub fn q_n(x: f64, t: f64, n: usize, sigma: Regime, dp: &DensityParams) -> Result<f64> {
    check_time(t)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "the no-switch term is an atom, see p_n",
        });
    }
    Ok(ln_q(x, t, n, sigma, dp).map_or(0.0, f64::exp))
}

/// Density of `X(t)` on `{N(t) = n}`, with the atom for `n = 0`.
pub fn p_n(x: f64, t: f64, n: usize, sigma: Regime, dp: &DensityParams) -> Result<DensityValue> {
    check_time(t)?;
    let atom_location = dp.c(sigma) * t;
    if n == 0 {
        return Ok(DensityValue {
            atom_location,
            atom_weight: (-dp.lambda(sigma) * t).exp(),
            continuous: 0.0,
        });
    }
    let continuous = ln_q(x, t, n, sigma, dp)
        .map_or(0.0, |lq| (lq - dp.lambda_tilde() * t - dp.nu() * x).exp());
    Ok(DensityValue {
        atom_location,
        atom_weight: 0.0,
        continuous,
    })
}

/// Continuous part of `p_n` for `n >= 1`, without argument checks.
pub(crate) fn p_n_continuous(x: f64, t: f64, n: usize, sigma: Regime, dp: &DensityParams) -> f64 {
    ln_q(x, t, n, sigma, dp).map_or(0.0, |lq| (lq - dp.lambda_tilde() * t - dp.nu() * x).exp())
}

/// Total law of `X(t)`: atom plus the Bessel form of the continuous part.
/// At the support end points the one-sided limit is returned.
pub fn density_total(x: f64, t: f64, sigma: Regime, dp: &DensityParams) -> Result<DensityValue> {
    check_time(t)?;
    let atom_location = dp.c(sigma) * t;
    let atom_weight = (-dp.lambda(sigma) * t).exp();
    let dc = dp.dc();
    let a = dp.c_plus * t - x;
    let b = x - dp.c_minus * t;
    if a < 0.0 || b < 0.0 {
        return Ok(DensityValue {
            atom_location,
            atom_weight,
            continuous: 0.0,
        });
    }
    let lpm = dp.lambda_plus * dp.lambda_minus;
    let z = 2.0 * (lpm * a * b).sqrt() / dc;
    let tail = match sigma {
        Regime::Plus => b,
        Regime::Minus => a,
    };
    let bracket = dp.lambda(sigma) / dc * bessel_i0(z)?
        + lpm / (dc * dc) * tail * 2.0 * bessel_i1_over_z(z)?;
    Ok(DensityValue {
        atom_location,
        atom_weight,
        continuous: (-dp.lambda_tilde() * t - dp.nu() * x).exp() * bracket,
    })
}

/// Number of switch-count terms needed for the alternating Poisson tail to
/// drop below `eps`.
pub fn poisson_terms(rate_max: f64, t: f64, eps: f64, cap: usize) -> Option<usize> {
    let mu = rate_max * t;
    (1..=cap).find(|&n| poisson_tail(n, mu) < eps)
}

/// `E[exp(z (X(t) + ln kappa_{N(t)}))]` for the jump telegraph process.
pub fn mgf(z: f64, t: f64, sigma: Regime, dp: &DensityParams, h_plus: f64, h_minus: f64) -> Result<f64> {
    check_time(t)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    let quad = Quadrature::with_tolerance(1e-14, 1e-13);
    let (lo, hi) = (dp.c_minus * t, dp.c_plus * t);
    let points = break_points(lo, hi, []);
    let mut total = (z * dp.c(sigma) * t - dp.lambda(sigma) * t).exp();
    let mut prev_pair = f64::INFINITY;
    let mut last = 0.0;
    for n in 1..=400 {
        let shift = z * ln_kappa(n, sigma, h_plus, h_minus);
        let term = quad
            .integrate_breaks(|x| (z * x + shift).exp() * p_n_continuous(x, t, n, sigma, dp), &points)
            .value;
        total += term;
        // ratio test on consecutive (odd, even) pairs: even and odd switch
        // counts carry different jump factors
        if n % 2 == 0 {
            let pair = last + term;
            let ratio = pair / prev_pair;
            if n > 2 && ratio < 0.5 && pair * ratio / (1.0 - ratio) < 1e-10 * total.abs() {
                return Ok(total);
            }
            prev_pair = pair;
        }
        last = term;
    }
    Err(Error::Divergence("moment generating function series did not settle"))
}

/// Finite-difference operator used by the residual checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceScheme {
    /// Central differences in `t` and `x` separately; second order.
    Central,
    /// One-sided difference along the characteristic `x + c t`; first order.
    Characteristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub spacing: f64,
}

/// Maximum over `points` of
/// `|d_t p + c d_x p + lambda p - lambda prev|` for user-supplied `p` and
/// `prev`, in the regime with velocity `c` and intensity `lambda`.
pub fn transport_residual<P, Q>(
    p: P,
    prev: Q,
    c: f64,
    lambda: f64,
    points: &[(f64, f64)],
    spacing: f64,
    scheme: DifferenceScheme,
) -> f64
where
    P: Fn(f64, f64) -> f64,
    Q: Fn(f64, f64) -> f64,
{
    let d = spacing;
    points
        .iter()
        .map(|&(x, t)| {
            let transport = match scheme {
                DifferenceScheme::Central => {
                    (p(x, t + d) - p(x, t - d)) / (2.0 * d) + c * (p(x + d, t) - p(x - d, t)) / (2.0 * d)
                }
                DifferenceScheme::Characteristic => (p(x + c * d, t + d) - p(x, t)) / d,
            };
            (transport + lambda * p(x, t) - lambda * prev(x, t)).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the forward equation satisfied by `p_n^{(sigma)}` at interior
/// points `(x, t)`.
pub fn kolmogorov_residual(
    n: usize,
    sigma: Regime,
    dp: &DensityParams,
    points: &[(f64, f64)],
    spacing: f64,
    scheme: DifferenceScheme,
) -> Result<Residual> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "the residual is defined for n >= 1",
        });
    }
    positive("spacing", spacing)?;
    let c = dp.c(sigma);
    let reach = spacing * (1.0 + c.abs());
    for &(x, t) in points {
        let lo = dp.c_minus * (t - spacing);
        let hi = dp.c_plus * (t - spacing);
        if !(t - spacing > 0.0 && x - reach > lo.max(dp.c_minus * (t + spacing)) && x + reach < hi.min(dp.c_plus * (t + spacing))) {
            return Err(Error::InvalidGrid("stencil touches the support boundary"));
        }
    }
    let p = |x: f64, t: f64| p_n_continuous(x, t, n, sigma, dp);
    let prev = |x: f64, t: f64| {
        if n == 1 {
            0.0
        } else {
            p_n_continuous(x, t, n - 1, -sigma, dp)
        }
    };
    Ok(Residual {
        max: transport_residual(p, prev, c, dp.lambda(sigma), points, spacing, scheme),
        spacing,
    })
}
