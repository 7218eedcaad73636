//! One-dimensional quadrature: Gauss–Legendre rules, globally adaptive
//! Gauss–Kronrod (7/15) and tanh-sinh for integrands with algebraic endpoint
//! singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    (p1, n * (z * p1 - p0) / (z * z - 1.0))
}

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
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

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Segment {
        a,
        b,
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive Gauss–Kronrod integration over the finite interval [a, b].
///
/// Subdivides the segment with the largest error estimate until the total
/// error is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Integral> {
    const MAX_SEGMENTS: usize = 5000;
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    let first = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] after {MAX_SEGMENTS} segments (estimate {total}, error {err})"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point; accept what we have
            heap.push(Segment { error: 0.0, ..worst });
            err = heap.iter().map(|s| s.error).sum();
            if err == 0.0 {
                break;
            }
            continue;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if err < 0.0 {
            err = heap.iter().map(|s| s.error).sum();
        }
    }
    // re-sum to shed accumulated update roundoff
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Integral { value, error })
}

/// Adaptive integration over [a, ∞) through x = a + s/(1-s).
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, rel_tol: f64, abs_tol: f64) -> Result<Integral> {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one_minus = 1.0 - s;
            let x = a + s / one_minus;
            let v = f(x) / (one_minus * one_minus);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// Tanh-sinh quadrature on [a, b].
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so integrands like |x-a|^p stay accurate next to the
/// endpoints.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    if half <= 0.0 {
        return 0.0;
    }
    let eval = |f: &mut F, t: f64| -> f64 {
        // x = mid + half·tanh(u), u = π/2·sinh(t)
        let u = 0.5 * PI * t.sinh();
        let cosh_u = u.cosh();
        let w = 0.5 * PI * t.cosh() / (cosh_u * cosh_u);
        if w < 1e-300 {
            return 0.0;
        }
        // 1 - tanh|u| = 2 / (e^{2|u|} + 1)
        let comp = 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let (x, da, db) = if u >= 0.0 {
            let db = half * comp;
            (b - db, 2.0 * half - db, db)
        } else {
            let da = half * comp;
            (a + da, da, 2.0 * half - da)
        };
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let v = f(x, da, db) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let t_max = 6.5;
    let mut h = 1.0;
    let mut sum = eval(&mut f, 0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(&mut f, t) + eval(&mut f, -t);
        k += 1;
    }
    let mut estimate = sum * h * half;
    for _level in 0..10 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += eval(&mut f, t) + eval(&mut f, -t);
            k += 2;
        }
        let next = sum * h * half;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * estimate.abs() {
            break;
        }
    }
    estimate
}
