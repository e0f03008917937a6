//! Building blocks of the call-price series: the functions `P_n`, `rho_n`,
//! the combinatorial coefficients `beta_{k,j}`, `phi_{k,n}` and the
//! polynomials `v_n`, and the per-switch-count terms `u_n`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::measure::MartingaleIntensities;
use crate::regime::{ModelParams, Regime};
use crate::special::{ln_factorial, ln_hyp1f1, pochhammer};

/// Intensities, velocities and killing rates entering one family of
/// `u_n` terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesParams {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub r_plus: f64,
    pub r_minus: f64,
}

impl SeriesParams {
    /// Martingale-measure intensities and the market rates (the `u` family).
    pub fn risk_neutral(params: &ModelParams, m: &MartingaleIntensities) -> SeriesParams {
        SeriesParams {
            lambda_plus: m.lambda_star_plus,
            lambda_minus: m.lambda_star_minus,
            c_plus: params.c_plus,
            c_minus: params.c_minus,
            r_plus: params.r_plus,
            r_minus: params.r_minus,
        }
    }

    /// Intensities `lambda*_sigma (1 + h_sigma)` and zero rates (the `U` family).
    pub fn share_measure(params: &ModelParams, m: &MartingaleIntensities) -> Result<SeriesParams> {
        let lp = m.lambda_star_plus * (1.0 + params.h_plus);
        let lm = m.lambda_star_minus * (1.0 + params.h_minus);
        for (name, v) in [("lambda_bar_plus", lp), ("lambda_bar_minus", lm)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "share-measure intensity must be positive",
                });
            }
        }
        Ok(SeriesParams {
            lambda_plus: lp,
            lambda_minus: lm,
            c_plus: params.c_plus,
            c_minus: params.c_minus,
            r_plus: 0.0,
            r_minus: 0.0,
        })
    }

    /// Physical intensities and zero rates: plain probabilities.
    pub fn physical(params: &ModelParams) -> SeriesParams {
        SeriesParams {
            lambda_plus: params.lambda_plus,
            lambda_minus: params.lambda_minus,
            c_plus: params.c_plus,
            c_minus: params.c_minus,
            r_plus: 0.0,
            r_minus: 0.0,
        }
    }

    pub fn a(&self) -> f64 {
        (self.lambda_plus + self.r_plus) - (self.lambda_minus + self.r_minus)
    }

    pub fn dc(&self) -> f64 {
        self.c_plus - self.c_minus
    }

    pub fn lambda(&self, sigma: Regime) -> f64 {
        sigma.pick(self.lambda_plus, self.lambda_minus)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_plus.max(self.lambda_minus)
    }

    /// `ln Lambda_n = ceil(n/2) ln lambda_sigma + floor(n/2) ln lambda_{-sigma}`.
    pub fn ln_lambda_n(&self, n: usize, sigma: Regime) -> f64 {
        let (own, other) = (self.lambda(sigma).ln(), self.lambda(-sigma).ln());
        n.div_ceil(2) as f64 * own + (n / 2) as f64 * other
    }

    /// Parameters of the reflected process `-X`, with regime labels swapped so
    /// that `+` still carries the larger velocity.
    pub fn reflected(&self) -> SeriesParams {
        SeriesParams {
            lambda_plus: self.lambda_minus,
            lambda_minus: self.lambda_plus,
            c_plus: -self.c_minus,
            c_minus: -self.c_plus,
            r_plus: self.r_minus,
            r_minus: self.r_plus,
        }
    }

    /// `(p, q)` coordinates of `(y, t)`: the times spent in the `-` and `+`
    /// regimes by a path that ends at `y`.
    pub fn coordinates(&self, y: f64, t: f64) -> (f64, f64) {
        let dc = self.dc();
        ((self.c_plus * t - y) / dc, (y - self.c_minus * t) / dc)
    }
}

/// `m_n^{(sigma)}`: `floor(n/2)` for `+`, `floor((n-1)/2)` for `-`.
fn m_index(n: usize, sigma: Regime) -> usize {
    match sigma {
        Regime::Plus => n / 2,
        Regime::Minus => (n - 1) / 2,
    }
}

/// `ln P_n^{(sigma)}(t)`.
pub fn ln_p_fn(t: f64, n: usize, sigma: Regime, a: f64) -> Result<f64> {
    if n == 0 {
        return Ok(sigma.pick(-a * t, 0.0));
    }
    if t == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let m = m_index(n, sigma) as f64;
    Ok(n as f64 * t.ln() - ln_factorial(n) + ln_hyp1f1(m + 1.0, n as f64 + 1.0, -a * t)?)
}

/// `P_n^{(sigma)}(t) = t^n / n! 1F1(m_n + 1; n + 1; -a t)`.
pub fn p_fn(t: f64, n: usize, sigma: Regime, a: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be nonnegative",
        });
    }
    Ok(ln_p_fn(t, n, sigma, a)?.exp())
}

/// Discounted probability of exactly `n` switches by `t`.
pub fn rho_n(t: f64, n: usize, sigma: Regime, sp: &SeriesParams) -> Result<f64> {
    let ln_p = ln_p_fn(t, n, sigma, sp.a())?;
    Ok((-(sp.lambda_minus + sp.r_minus) * t + sp.ln_lambda_n(n, sigma) + ln_p).exp())
}

/// `sum_n rho_n(t)`: the zero-coupon bond under the intensities of `sp`,
/// from the exponential of the 2x2 generator.
pub fn bond(t: f64, sigma: Regime, sp: &SeriesParams) -> f64 {
    let m11 = -(sp.lambda_plus + sp.r_plus);
    let m22 = -(sp.lambda_minus + sp.r_minus);
    let s = 0.5 * (m11 + m22);
    let half_gap = 0.5 * (m11 - m22);
    let d = (half_gap * half_gap + sp.lambda_plus * sp.lambda_minus).sqrt();
    let (ch, sh_over_d) = ((d * t).cosh(), if d > 0.0 { (d * t).sinh() / d } else { t });
    // row sums of exp(M t) = e^{s t} (cosh(d t) I + sinh(d t)/d (M - s I))
    let row = match sigma {
        Regime::Plus => ch + sh_over_d * (m11 - s + sp.lambda_plus),
        Regime::Minus => ch + sh_over_d * (m22 - s + sp.lambda_minus),
    };
    (s * t).exp() * row
}

const BETA_K: usize = 256;

fn beta_table() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..BETA_K)
            .map(|k| {
                (0..k)
                    .map(|j| beta_direct(k, j))
                    .collect()
            })
            .collect()
    })
}

/// `beta_{k,j} = (k - j)_{floor(j/2)} / floor(j/2)!` for `0 <= j < k`.
pub fn beta_coeff(k: usize, j: usize) -> Result<f64> {
    if k == 0 || j >= k {
        return Err(Error::InvalidParameter {
            name: "j",
            value: j as f64,
            reason: "beta coefficients need 0 <= j < k",
        });
    }
    if k < BETA_K {
        return Ok(beta_table()[k][j]);
    }
    Ok(beta_direct(k, j))
}

// (k - j)_h / h! is the binomial coefficient C(k - j + h - 1, h); build it
// with exact integer steps while they fit.
fn beta_direct(k: usize, j: usize) -> f64 {
    let h = (j / 2) as u128;
    let top = (k - j) as u128 + h - 1;
    let mut c: u128 = 1;
    for i in 1..=h {
        match c.checked_mul(top - h + i) {
            Some(v) => c = v / i,
            None => return pochhammer((k - j) as u64, h as u64) / ln_factorial(h as usize).exp(),
        }
    }
    c as f64
}

/// Values `P_m^{(+)}(p)` and `P_m^{(-)}(p)` for `m <= max_n` at a fixed `p`.
#[derive(Debug, Clone)]
pub struct PTable {
    plus: Vec<f64>,
    minus: Vec<f64>,
    a: f64,
}

impl PTable {
    pub fn new(p: f64, a: f64, max_n: usize) -> Result<PTable> {
        let mut plus = Vec::with_capacity(max_n + 1);
        let mut minus = Vec::with_capacity(max_n + 1);
        for m in 0..=max_n {
            let pm = p_fn(p, m, Regime::Minus, a)?;
            // odd orders coincide for both regimes
            let pp = if m % 2 == 1 { pm } else { p_fn(p, m, Regime::Plus, a)? };
            plus.push(pp);
            minus.push(pm);
        }
        Ok(PTable { plus, minus, a })
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn get(&self, m: usize, sigma: Regime) -> f64 {
        sigma.pick(self.plus[m], self.minus[m])
    }

    /// `phi_{k,n}`: `P_{2n+1}` for `k = 0`, otherwise
    /// `sum_{j<k} a^{k-j-1} beta_{k,j} P^{(-)}_{2n-j}`.
    pub fn phi(&self, k: usize, n: usize) -> f64 {
        if k == 0 {
            return self.minus[2 * n + 1];
        }
        let mut acc = 0.0;
        let mut a_pow = 1.0;
        // j runs downward so the power of a grows with the loop
        for j in (0..k).rev() {
            let beta = if k < BETA_K {
                beta_table()[k][j]
            } else {
                beta_coeff(k, j).expect("j < k")
            };
            acc += a_pow * beta * self.minus[2 * n - j];
            a_pow *= self.a;
        }
        acc
    }

    /// Coefficients of `v_n^{(sigma)}(p, q)` as a polynomial in `q`.
    pub fn v_coeffs(&self, n: usize, sigma: Regime) -> Vec<f64> {
        if n == 0 {
            return vec![sigma.pick(self.plus[0], 0.0)];
        }
        let mut coeffs = vec![self.get(n, sigma)];
        let m = n / 2;
        let mut inv_fact = 1.0;
        let (range, shift): (std::ops::RangeInclusive<usize>, fn(usize, usize) -> (usize, usize)) =
            match (n % 2, sigma) {
                (1, _) => (1..=m, |k, m| (k, m)),
                (_, Regime::Minus) => (1..=m.saturating_sub(1), |k, m| (k + 1, m)),
                (_, Regime::Plus) => (1..=m, |k, m| (k - 1, m - 1)),
            };
        for k in range {
            inv_fact /= k as f64;
            let (kk, nn) = shift(k, m);
            coeffs.push(self.phi(kk, nn) * inv_fact);
        }
        coeffs
    }
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    for (name, v) in [("p", p), ("q", q)] {
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter {
                name,
                value: v,
                reason: "must be nonnegative",
            });
        }
    }
    Ok(())
}

/// `phi_{k,n}(p)` for `0 <= k <= n`.
pub fn phi_kn(k: usize, n: usize, p: f64, a: f64) -> Result<f64> {
    if k > n {
        return Err(Error::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "phi_{k,n} needs k <= n",
        });
    }
    Ok(PTable::new(p, a, 2 * n + 1)?.phi(k, n))
}

/// `v_n^{(sigma)}(p, q)` for `p, q >= 0`.
pub fn v_n(p: f64, q: f64, n: usize, sigma: Regime, a: f64) -> Result<f64> {
    check_pq(p, q)?;
    let table = PTable::new(p, a, n.max(1))?;
    Ok(horner(&table.v_coeffs(n, sigma), q))
}

/// Middle-region value `e^{-(lambda_+ + r_+) q - (lambda_- + r_-) p} Lambda_n v_n(p, q)`.
pub fn w_n(p: f64, q: f64, n: usize, sigma: Regime, sp: &SeriesParams) -> Result<f64> {
    let v = v_n(p, q, n, sigma, sp.a())?;
    Ok(v * w_prefactor(p, q, n, sigma, sp).exp())
}

pub(crate) fn w_prefactor(p: f64, q: f64, n: usize, sigma: Regime, sp: &SeriesParams) -> f64 {
    -(sp.lambda_plus + sp.r_plus) * q - (sp.lambda_minus + sp.r_minus) * p + sp.ln_lambda_n(n, sigma)
}

/// Which closed-form branch applies at `(y, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `y > c_+ t`: the event is empty.
    Above,
    /// `c_- t <= y <= c_+ t`.
    Middle,
    /// `y < c_- t`: the event is certain on `{N = n}`.
    Below,
}

pub fn region(y: f64, t: f64, sp: &SeriesParams) -> Region {
    if sp.dc() == 0.0 {
        return if y < sp.c_plus * t { Region::Below } else { Region::Above };
    }
    let (p, q) = sp.coordinates(y, t);
    if p < 0.0 {
        Region::Above
    } else if q < 0.0 {
        Region::Below
    } else {
        Region::Middle
    }
}

/// `u_n^{(sigma)}(y, t)`: discounted weight of `{X(t) > y, N(t) = n}`.
pub fn u_n(y: f64, t: f64, n: usize, sigma: Regime, sp: &SeriesParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            reason: "must be positive",
        });
    }
    match region(y, t, sp) {
        Region::Above => Ok(0.0),
        Region::Below => rho_n(t, n, sigma, sp),
        Region::Middle => {
            let (p, q) = sp.coordinates(y, t);
            w_n(p, q, n, sigma, sp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp() -> SeriesParams {
        SeriesParams {
            lambda_plus: 0.9,
            lambda_minus: 0.4,
            c_plus: 0.25,
            c_minus: -0.15,
            r_plus: 0.04,
            r_minus: 0.07,
        }
    }

    #[test]
    fn p_functions() {
        assert_eq!(p_fn(1.3, 0, Regime::Minus, 0.7).unwrap(), 1.0);
        assert!((p_fn(1.3, 0, Regime::Plus, 0.7).unwrap() - (-0.91f64).exp()).abs() < 1e-15);
        for n in 1..8 {
            let exact = 1.5f64.powi(n as i32) / (1..=n).product::<usize>() as f64;
            for sigma in [Regime::Plus, Regime::Minus] {
                assert!((p_fn(1.5, n, sigma, 0.0).unwrap() / exact - 1.0).abs() < 1e-13);
            }
        }
        for a in [-1.3, 0.4, 2.0] {
            for n in 0..10 {
                let t = 0.8;
                let lhs = p_fn(t, 2 * n, Regime::Minus, a).unwrap() - p_fn(t, 2 * n, Regime::Plus, a).unwrap();
                let rhs = a * p_fn(t, 2 * n + 1, Regime::Plus, a).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs(), "a = {a}, n = {n}");
            }
        }
    }

    #[test]
    fn rho_in_poisson_case() {
        let s = SeriesParams {
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            c_plus: 1.0,
            c_minus: -1.0,
            r_plus: 0.0,
            r_minus: 0.0,
        };
        let v = rho_n(1.0, 2, Regime::Plus, &s).unwrap();
        assert!((v - (-1.0f64).exp() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rho_sums_to_bond() {
        let s = sp();
        for sigma in [Regime::Plus, Regime::Minus] {
            let total: f64 = (0..80).map(|n| rho_n(2.0, n, sigma, &s).unwrap()).sum();
            assert!((total - bond(2.0, sigma, &s)).abs() < 1e-14);
        }
        let flat = SeriesParams { r_plus: 0.05, r_minus: 0.05, ..s };
        assert!((bond(2.0, Regime::Plus, &flat) - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn beta_values_and_recurrences() {
        for k in 1..=20 {
            assert_eq!(beta_coeff(k, 0).unwrap(), 1.0);
            if k > 1 {
                assert_eq!(beta_coeff(k, 1).unwrap(), 1.0);
            }
        }
        assert_eq!(beta_coeff(4, 2).unwrap(), 2.0);
        assert!(beta_coeff(3, 3).is_err());
        for k in 2..=20 {
            for m in 0..k {
                if 2 * m + 1 < k {
                    assert_eq!(beta_coeff(k, 2 * m + 1).unwrap(), beta_coeff(k - 1, 2 * m).unwrap());
                }
                if 2 * m + 1 < k && m >= 1 {
                    let lhs = beta_coeff(k, 2 * m).unwrap() - beta_coeff(k, 2 * m + 1).unwrap();
                    assert_eq!(lhs, beta_coeff(k - 1, 2 * m - 1).unwrap());
                }
            }
        }
    }

    #[test]
    fn v_in_zero_a_case_is_binomial() {
        let (p, q) = (0.7, 0.45);
        for n in 0..9 {
            for sigma in [Regime::Plus, Regime::Minus] {
                let v = v_n(p, q, n, sigma, 0.0).unwrap();
                let m = if n == 0 {
                    if sigma == Regime::Plus { Some(0) } else { None }
                } else {
                    Some(m_index(n, sigma))
                };
                let expect = m.map_or(0.0, |m| {
                    (0..=m)
                        .map(|k| {
                            (crate::special::ln_binomial(n, k) - ln_factorial(n)).exp()
                                * q.powi(k as i32)
                                * p.powi((n - k) as i32)
                        })
                        .sum::<f64>()
                });
                assert!((v - expect).abs() < 1e-14, "n = {n} {sigma}");
            }
        }
        assert!((v_n(0.3, 0.2, 0, Regime::Plus, 1.1).unwrap() - (-0.33f64).exp()).abs() < 1e-15);
        assert!(v_n(-0.1, 0.2, 1, Regime::Plus, 0.0).is_err());
    }

    #[test]
    fn reflection_identity() {
        // v^{(s)}(p, q; a) + v^{(-s)}(q, p; -a) = e^{a q} P_n^{(s)}(p + q; a)
        let (p, q) = (0.8, 0.35);
        for a in [-0.9, 0.3, 1.7] {
            for n in 1..12 {
                for sigma in [Regime::Plus, Regime::Minus] {
                    let lhs = v_n(p, q, n, sigma, a).unwrap() + v_n(q, p, n, -sigma, -a).unwrap();
                    let rhs = (a * q).exp() * p_fn(p + q, n, sigma, a).unwrap();
                    assert!((lhs / rhs - 1.0).abs() < 1e-12, "a = {a} n = {n}");
                }
            }
        }
    }

    #[test]
    fn u_regions_and_example() {
        let s = SeriesParams {
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            c_plus: 1.0,
            c_minus: -1.0,
            r_plus: 0.0,
            r_minus: 0.0,
        };
        let v = u_n(0.0, 1.0, 1, Regime::Plus, &s).unwrap();
        assert!((v - (-1.0f64).exp() * 0.5).abs() < 1e-15);
        let s = sp();
        assert_eq!(u_n(0.3, 1.0, 3, Regime::Plus, &s).unwrap(), 0.0);
        assert_eq!(
            u_n(-0.2, 1.0, 3, Regime::Minus, &s).unwrap(),
            rho_n(1.0, 3, Regime::Minus, &s).unwrap()
        );
        // continuity across both region boundaries for n >= 1
        let t = 1.0;
        for n in 1..6 {
            for sigma in [Regime::Plus, Regime::Minus] {
                let e = 1e-9;
                let hi = u_n(s.c_plus * t - e, t, n, sigma, &s).unwrap();
                assert!(hi.abs() < 1e-7, "n = {n}");
                let lo = u_n(s.c_minus * t + e, t, n, sigma, &s).unwrap();
                let rho = rho_n(t, n, sigma, &s).unwrap();
                assert!((lo - rho).abs() < 1e-7);
            }
        }
        assert!(u_n(0.0, 0.0, 1, Regime::Plus, &s).is_err());
    }
}
