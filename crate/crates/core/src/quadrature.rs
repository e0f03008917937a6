//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

impl Quadrature {
    pub fn with_tolerance(abs_tol: f64, rel_tol: f64) -> Quadrature {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Quadrature::default()
        }
    }

    /// Integrates `f` over `[a, b]`, bisecting the interval with the largest
    /// error estimate until the total estimate meets the tolerance.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Estimate {
        self.integrate_breaks(f, &[a, b])
    }

    /// Integrates over consecutive intervals of a sorted list of break points.
    pub fn integrate_breaks<F: Fn(f64) -> f64>(&self, f: F, points: &[f64]) -> Estimate {
        let mut heap = BinaryHeap::new();
        for w in points.windows(2) {
            if w[1] > w[0] {
                heap.push(kronrod(&f, w[0], w[1]));
            }
        }
        let total = |heap: &BinaryHeap<Segment>| {
            heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
        };
        let (mut value, mut error) = total(&heap);
        while heap.len() < self.max_intervals {
            if error <= self.abs_tol.max(self.rel_tol * value.abs()) {
                break;
            }
            let worst = match heap.pop() {
                Some(s) => s,
                None => break,
            };
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                heap.push(worst);
                break;
            }
            let left = kronrod(&f, worst.a, mid);
            let right = kronrod(&f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }
        // recompute to shed accumulated rounding from the running updates
        let (value, error) = total(&heap);
        Estimate { value, error }
    }
}

/// Sorted, deduplicated break points: the interval ends plus any interior
/// points that fall strictly inside.
pub fn break_points(a: f64, b: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = interior.into_iter().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x.powi(6) - 3.0 * x + 1.0, -1.0, 2.0);
        let exact = (2f64.powi(7) + 1.0) / 7.0 - 1.5 * (4.0 - 1.0) + 3.0;
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn smooth_and_kinked_integrands() {
        let q = Quadrature::default();
        let r = q.integrate(f64::exp, 0.0, 3.0);
        assert!((r.value - (3f64.exp() - 1.0)).abs() < 1e-11);
        let r = q.integrate_breaks(|x: f64| (x - 0.3).abs(), &break_points(0.0, 1.0, [0.3]));
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-15);
        // integrable endpoint singularity
        let r = q.integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0);
        assert!((r.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn break_points_are_sorted_and_clipped() {
        assert_eq!(break_points(0.0, 1.0, [0.7, 2.0, 0.2, 0.7]), vec![0.0, 0.2, 0.7, 1.0]);
    }
}
