//! Reference computations used by the integration tests. None of them
//! reuse the closed forms under test.
#![allow(dead_code)]

use jump_telegraph::densities::{p_n, DensityParams};
use jump_telegraph::regime::{kappa, ModelParams, Regime};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};

/// `P(N(t) = n | sigma(0) = sigma)` for `n <= n_max` by RK4 on
/// `pi_n' = -lambda_sigma pi_n + lambda_sigma pi_{n-1}^{(-sigma)}`.
pub fn switch_law(lambda_plus: f64, lambda_minus: f64, sigma: Regime, t: f64, n_max: usize) -> Vec<f64> {
    let steps = 4000usize.max((t * 4000.0) as usize);
    let h = t / steps as f64;
    // state[0][n] = pi_n^{(+)}, state[1][n] = pi_n^{(-)}
    let rhs = |s: &[Vec<f64>; 2]| -> [Vec<f64>; 2] {
        let mut out = [vec![0.0; n_max + 1], vec![0.0; n_max + 1]];
        for (i, l) in [lambda_plus, lambda_minus].into_iter().enumerate() {
            for n in 0..=n_max {
                let prev = if n == 0 { 0.0 } else { s[1 - i][n - 1] };
                out[i][n] = -l * s[i][n] + l * prev;
            }
        }
        out
    };
    let axpy = |s: &[Vec<f64>; 2], k: &[Vec<f64>; 2], c: f64| -> [Vec<f64>; 2] {
        let mut out = s.clone();
        for i in 0..2 {
            for n in 0..=n_max {
                out[i][n] += c * k[i][n];
            }
        }
        out
    };
    let mut s = [vec![0.0; n_max + 1], vec![0.0; n_max + 1]];
    s[0][0] = 1.0;
    s[1][0] = 1.0;
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&axpy(&s, &k1, h / 2.0));
        let k3 = rhs(&axpy(&s, &k2, h / 2.0));
        let k4 = rhs(&axpy(&s, &k3, h));
        for i in 0..2 {
            for n in 0..=n_max {
                s[i][n] += h / 6.0 * (k1[i][n] + 2.0 * k2[i][n] + 2.0 * k3[i][n] + k4[i][n]);
            }
        }
    }
    match sigma {
        Regime::Plus => s[0].clone(),
        Regime::Minus => s[1].clone(),
    }
}

const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre rule on `panels` equal pieces.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let c = a + (i as f64 + 0.5) * w;
        let h = 0.5 * w;
        for k in 0..5 {
            total += GL_W[k] * h * (f(c - h * GL_X[k]) + f(c + h * GL_X[k]));
        }
    }
    total
}

/// Risk-neutral market pieces used by the quadrature oracles.
pub struct StarMarket {
    pub dp: DensityParams,
    pub a_r: f64,
    pub b_r: f64,
    pub h_plus: f64,
    pub h_minus: f64,
}

impl StarMarket {
    pub fn new(p: &ModelParams) -> StarMarket {
        let ls_plus = (p.r_plus - p.c_plus) / p.h_plus;
        let ls_minus = (p.r_minus - p.c_minus) / p.h_minus;
        let dc = p.c_plus - p.c_minus;
        StarMarket {
            dp: DensityParams::new(p.c_plus, p.c_minus, ls_plus, ls_minus).unwrap(),
            a_r: (p.r_plus - p.r_minus) / dc,
            b_r: (p.c_plus * p.r_minus - p.c_minus * p.r_plus) / dc,
            h_plus: p.h_plus,
            h_minus: p.h_minus,
        }
    }

    /// `e^{-b_r t} int_y^inf e^{-a_r x} p*_n(x, t) dx`, atom included.
    pub fn u_n(&self, y: f64, t: f64, n: usize, sigma: Regime) -> f64 {
        self.weighted(y, t, n, sigma, -self.a_r) * (-self.b_r * t).exp()
    }

    /// `kappa_n e^{-b_r t} int_y^inf e^{(1 - a_r) x} p*_n(x, t) dx`.
    pub fn big_u_n(&self, y: f64, t: f64, n: usize, sigma: Regime) -> f64 {
        kappa(n, sigma, self.h_plus, self.h_minus)
            * self.weighted(y, t, n, sigma, 1.0 - self.a_r)
            * (-self.b_r * t).exp()
    }

    fn weighted(&self, y: f64, t: f64, n: usize, sigma: Regime, slope: f64) -> f64 {
        let dp = &self.dp;
        if n == 0 {
            let v = p_n(0.0, t, 0, sigma, dp).unwrap();
            return if v.atom_location > y {
                v.atom_weight * (slope * v.atom_location).exp()
            } else {
                0.0
            };
        }
        let lo = y.max(dp.c_minus * t);
        let hi = dp.c_plus * t;
        gauss_legendre(
            |x| (slope * x).exp() * p_n(x, t, n, sigma, dp).unwrap().continuous,
            lo,
            hi,
            64,
        )
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `I_0(1)` from 200 terms of its series in exact rationals.
pub fn bessel_i0_at_one() -> f64 {
    let mut sum = BigRational::zero();
    for n in 0..200u32 {
        let f = factorial(n);
        let denom = BigInt::from(4u32).pow(n) * &f * &f;
        sum += BigRational::new(BigInt::one(), denom);
    }
    sum.to_f64().unwrap()
}

/// `1F1(1; 2; -1) = sum (-1)^n / (n + 1)!` from 200 exact terms.
pub fn hyp1f1_1_2_minus_one() -> f64 {
    let mut sum = BigRational::zero();
    for n in 0..200u32 {
        let sign = if n % 2 == 0 { BigInt::one() } else { -BigInt::one() };
        sum += BigRational::new(sign, factorial(n + 1));
    }
    sum.to_f64().unwrap()
}
