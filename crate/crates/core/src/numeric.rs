//! Small numerical utilities shared across the crate: ordered/pairwise
//! summation, adaptive Gauss–Kronrod quadrature, and bisection root-finding.

use crate::real::Real;

/// Terms at or below this length are summed by a plain left fold; longer
/// slices switch to pairwise splitting to keep rounding error logarithmic.
const PAIRWISE_CUTOFF: usize = 1024;

/// Sum in the order given: left fold below [`PAIRWISE_CUTOFF`], pairwise above.
///
/// The left fold is deliberate — short sums are bit-for-bit reproducible and
/// prefix sums of a left fold equal the folds of the prefixes, which the Haar
/// statistics rely on.
pub fn sum_in_order<R: Real>(xs: &[R]) -> R {
    if xs.len() <= PAIRWISE_CUTOFF {
        xs.iter().fold(R::zero(), |acc, &x| acc + x)
    } else {
        let mid = xs.len() / 2;
        sum_in_order(&xs[..mid]) + sum_in_order(&xs[mid..])
    }
}

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1]
// (positive abscissae; the rule is symmetric).
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// One Gauss–Kronrod 15(7) evaluation on `[a, b]`; returns `(kronrod, gauss)`.
fn gk15<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R) -> (R, R) {
    let half = (b - a) * R::of(0.5);
    let center = (a + b) * R::of(0.5);
    let mut kronrod = R::zero();
    let mut gauss = R::zero();
    for (i, (&node, &wk)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let offset = half * R::of(node);
        let pair = if i == 7 {
            f(center)
        } else {
            f(center - offset) + f(center + offset)
        };
        kronrod = kronrod + R::of(wk) * pair;
        if i % 2 == 1 {
            gauss = gauss + R::of(GAUSS_WEIGHTS[i / 2]) * pair;
        } else if i == 7 {
            gauss = gauss + R::of(GAUSS_WEIGHTS[3]) * pair;
        }
    }
    (kronrod * half, gauss * half)
}

fn adaptive_gk<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R, tol: R, depth: u32, ok: &mut bool) -> R {
    let (k, g) = gk15(f, a, b);
    if (k - g).abs() <= tol {
        return k;
    }
    if depth >= 48 {
        *ok = false;
        return k;
    }
    let mid = (a + b) * R::of(0.5);
    let half_tol = tol * R::of(0.5);
    adaptive_gk(f, a, mid, half_tol, depth + 1, ok)
        + adaptive_gk(f, mid, b, half_tol, depth + 1, ok)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`, bisecting wherever
/// the embedded error estimate is above the interval's share of the absolute
/// tolerance budget. Returns the value and whether every interval met its
/// share (false means the recursion depth cap was hit first).
pub fn integrate_checked<R: Real, F: Fn(R) -> R>(f: F, a: R, b: R, abs_tol: R) -> (R, bool) {
    if a == b {
        return (R::zero(), true);
    }
    let mut ok = true;
    let v = adaptive_gk(&f, a, b, abs_tol, 0, &mut ok);
    (v, ok)
}

/// [`integrate_checked`] without the convergence report, for callers with
/// integrands known to be tame.
pub fn integrate<R: Real, F: Fn(R) -> R>(f: F, a: R, b: R, abs_tol: R) -> R {
    integrate_checked(f, a, b, abs_tol).0
}

/// Bisection for a root of `f` on `[lo, hi]`, assuming `f(lo)` and `f(hi)`
/// bracket zero; runs `iters` halvings and returns the midpoint.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: u32) -> f64 {
    let rising = f(hi) >= f(lo);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v >= 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_fold_on_short_slices() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let fold: f64 = xs.iter().sum();
        assert_eq!(sum_in_order(&xs), fold);
    }

    #[test]
    fn pairwise_sum_is_accurate_on_long_slices() {
        let xs = vec![0.1f64; 1 << 16];
        let exact = 0.1 * (1 << 16) as f64;
        assert!((sum_in_order(&xs) - exact).abs() < 1e-9);
    }

    #[test]
    fn quadrature_hits_polynomials_exactly() {
        // GK15 is exact for polynomials well past degree 20.
        let v = integrate(|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 1.0, 1e-12);
        assert!((v - (0.25 - 1.0 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn quadrature_handles_sharp_peaks() {
        // A narrow Runge-style peak: 1/(1 + ((x-0.3)/0.005)^2) integrates to
        // w * (atan((1-p)/w) + atan(p/w)) with p=0.3, w=0.005.
        let (p, w): (f64, f64) = (0.3, 0.005);
        let exact = w * (((1.0 - p) / w).atan() + (p / w).atan());
        let v = integrate(|x: f64| 1.0 / (1.0 + ((x - p) / w).powi(2)), 0.0, 1.0, 1e-10);
        assert!((v - exact).abs() < 1e-9, "got {v}, want {exact}");
    }

    #[test]
    fn bisect_finds_square_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 80);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bisect_handles_decreasing_functions() {
        let r = bisect(|x| 2.0 - x * x, 0.0, 2.0, 80);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
    }
}
