//! Quadrature, bracketing root finders and a small least-squares helper.
//!
//! The integrator is a globally adaptive Gauss–Kronrod (7/15) scheme: the
//! interval with the largest error estimate is bisected until the summed
//! estimate drops below the requested absolute tolerance. Semi-infinite
//! ranges are mapped onto `[0, 1)` with `x = a + s·t/(1−t)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 4000;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
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
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the finite interval `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, abs_error: 0.0 };
    }
    if a > b {
        let r = integrate(f, b, a, tol);
        return Integral { value: -r.value, abs_error: r.abs_error };
    }
    let (value, error) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total_err = error;
    while total_err > tol && heap.len() < MAX_SEGMENTS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine precision
            heap.push(Segment { error: 0.0, ..worst });
            total_err = heap.iter().map(|s| s.error).sum();
            if total_err <= tol {
                break;
            }
            continue;
        }
        let (lv, le) = gk15(&f, worst.a, mid);
        let (rv, re) = gk15(&f, mid, worst.b);
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let mut segments: Vec<_> = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segments.iter().map(|s| s.value).sum();
    let abs_error = segments.iter().map(|s| s.error).sum();
    Integral { value, abs_error }
}

/// Integrates `f` over `[a, +inf)`; `scale` sets the width of the mapping.
pub fn integrate_upper_tail<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> Integral {
    integrate(
        |t| {
            let u = 1.0 - t;
            let x = a + scale * t / u;
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (u * u)
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integrates `f` over `(-inf, b]`; `scale` sets the width of the mapping.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, scale: f64, tol: f64) -> Integral {
    integrate_upper_tail(|x| f(2.0 * b - x), b, scale, tol)
}

/// Integrates over `[lo, hi]` where either end may be infinite, splitting at
/// the supplied interior points (kinks or jumps of the integrand).
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    scale: f64,
    tol: f64,
) -> Integral {
    if !(lo < hi) {
        return Integral { value: 0.0, abs_error: 0.0 };
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut points = Vec::with_capacity(cuts.len() + 2);
    points.push(lo);
    points.extend(cuts);
    points.push(hi);
    let pieces = (points.len() - 1) as f64;
    let mut out = Integral { value: 0.0, abs_error: 0.0 };
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let piece_tol = tol / pieces;
        let r = match (a.is_finite(), b.is_finite()) {
            (true, true) => integrate(&f, a, b, piece_tol),
            (true, false) => integrate_upper_tail(&f, a, scale, piece_tol),
            (false, true) => integrate_lower_tail(&f, b, scale, piece_tol),
            (false, false) => {
                let l = integrate_lower_tail(&f, 0.0, scale, piece_tol / 2.0);
                let u = integrate_upper_tail(&f, 0.0, scale, piece_tol / 2.0);
                Integral { value: l.value + u.value, abs_error: l.abs_error + u.abs_error }
            }
        };
        out.value += r.value;
        out.abs_error += r.abs_error;
    }
    out
}

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign (or zero).
/// Stops once the bracket is narrower than `width_tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, width_tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    for _ in 0..400 {
        if hi - lo <= width_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinary least-squares line fit; returns `(slope, intercept, slope_std_error)`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, se)
}
