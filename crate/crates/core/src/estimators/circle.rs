//! Exact-geometry estimators on the circle: roots of u - t are bracketed on a
//! scan grid and refined, and every measure is computed from them.

use std::f64::consts::{PI, SQRT_2};

use crate::manifold::{BasisFn, EigenspaceSpec};
use crate::quad::tanh_sinh;

const TWO_PI: f64 = 2.0 * PI;

/// u(θ) = Σ_k a_k cos kθ + b_k sin kθ with the √2 normalization folded in.
#[derive(Debug, Clone)]
pub(crate) struct TrigPoly {
    k: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TrigPoly {
    pub(crate) fn new(spec: &EigenspaceSpec, coeffs: &[f64]) -> Self {
        let mut ks: Vec<u32> = Vec::new();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (f, c) in spec.basis().iter().zip(coeffs) {
            let BasisFn::Circle { k, sine } = *f else {
                panic!("trigonometric polynomial from a non-circle basis")
            };
            let i = match ks.iter().position(|x| *x == k) {
                Some(i) => i,
                None => {
                    ks.push(k);
                    a.push(0.0);
                    b.push(0.0);
                    ks.len() - 1
                }
            };
            if sine {
                b[i] += SQRT_2 * c;
            } else {
                a[i] += SQRT_2 * c;
            }
        }
        Self {
            k: ks.into_iter().map(f64::from).collect(),
            a,
            b,
        }
    }

    #[inline]
    pub(crate) fn value(&self, x: f64) -> f64 {
        let mut u = 0.0;
        for i in 0..self.k.len() {
            let (s, c) = (self.k[i] * x).sin_cos();
            u += self.a[i] * c + self.b[i] * s;
        }
        u
    }

    /// (u, u', u'').
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> (f64, f64, f64) {
        let (mut u, mut du, mut d2u) = (0.0, 0.0, 0.0);
        for i in 0..self.k.len() {
            let k = self.k[i];
            let (s, c) = (k * x).sin_cos();
            let v = self.a[i] * c + self.b[i] * s;
            u += v;
            du += k * (self.b[i] * c - self.a[i] * s);
            d2u -= k * k * v;
        }
        (u, du, d2u)
    }
}

/// A simple root of u - t with the slope u' there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub theta: f64,
    pub slope: f64,
}

/// Safeguarded Newton iteration for a zero of `g` bracketed by [a, b].
fn refine<F: Fn(f64) -> (f64, f64)>(g: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let (ga, _) = g(a);
    let neg_at_a = ga < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (gx, dx) = g(x);
        if gx == 0.0 {
            return x;
        }
        if (gx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= tol {
            return 0.5 * (a + b);
        }
        let newton = x - gx / dx;
        x = if dx != 0.0 && newton > a && newton < b && (newton - x).abs() < 0.5 * (b - a) {
            if (newton - x).abs() < 0.25 * tol {
                return newton;
            }
            newton
        } else {
            0.5 * (a + b)
        };
    }
    x
}

/// All roots of u = level on [0, 2π), sorted, from a scan grid of `n` nodes.
///
/// Sign changes are refined by safeguarded Newton to 1e-12; intervals
/// without a sign change but with opposite end slopes are checked for a
/// close pair of roots around the interior extremum. A scan node within
/// 1e-13 of the level shifts the grid by half a step.
pub(crate) fn roots(p: &TrigPoly, level: f64, n: usize) -> Vec<Root> {
    let h = TWO_PI / n as f64;
    let mut offset = 0.0;
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(n + 1);
    for attempt in 0..3 {
        samples.clear();
        let mut hit = false;
        for j in 0..n {
            let x = offset + j as f64 * h;
            let (u, du, _) = p.eval(x);
            let g = u - level;
            hit |= g.abs() < 1e-13;
            samples.push((g, du));
        }
        if !hit || attempt == 2 {
            break;
        }
        offset += 0.5 * h / (attempt + 1) as f64;
    }
    samples.push(samples[0]);
    let g = |x: f64| {
        let (u, du, _) = p.eval(x);
        (u - level, du)
    };
    let dg = |x: f64| {
        let (_, du, d2u) = p.eval(x);
        (du, d2u)
    };
    let mut out = Vec::new();
    for j in 0..n {
        let a = offset + j as f64 * h;
        let b = a + h;
        let (ga, da) = samples[j];
        let (gb, db) = samples[j + 1];
        if (ga < 0.0) != (gb < 0.0) {
            let x = refine(g, a, b, 1e-12);
            out.push(Root {
                theta: x.rem_euclid(TWO_PI),
                slope: p.eval(x).1,
            });
        } else if (da < 0.0) != (db < 0.0) && (ga < 0.0) == (da > 0.0) {
            // extremum heading toward the level: minimum above it or
            // maximum below it
            let c = refine(dg, a, b, 1e-14);
            let (gc, _) = g(c);
            if (gc < 0.0) != (ga < 0.0) {
                for (lo, hi) in [(a, c), (c, b)] {
                    let x = refine(g, lo, hi, 1e-12);
                    out.push(Root {
                        theta: x.rem_euclid(TWO_PI),
                        slope: p.eval(x).1,
                    });
                }
            }
        }
    }
    out.sort_by(|x, y| x.theta.total_cmp(&y.theta));
    out
}

/// Riemannian length of {u ≥ level}.
pub(crate) fn excursion_length(p: &TrigPoly, level: f64, rs: &[Root]) -> f64 {
    if rs.is_empty() {
        return if p.value(0.0) >= level { TWO_PI } else { 0.0 };
    }
    let mut total = 0.0;
    for i in 0..rs.len() {
        let a = rs[i].theta;
        let b = if i + 1 < rs.len() { rs[i + 1].theta } else { rs[0].theta + TWO_PI };
        if p.value(0.5 * (a + b)) >= level {
            total += b - a;
        }
    }
    total
}

/// ∫ |u|^a dθ/2π between consecutive zeros of u, by tanh-sinh with the
/// first-order model |u| ≈ |u'(r)|·dist next to each zero.
pub(crate) fn integral_abs_power(p: &TrigPoly, a: f64, rs: &[Root]) -> f64 {
    if rs.is_empty() {
        let v = tanh_sinh(|x, _, _| p.value(x).abs().powf(a), 0.0, TWO_PI, 1e-12);
        return v / TWO_PI;
    }
    let mut total = 0.0;
    for i in 0..rs.len() {
        let (ra, rb) = (rs[i], if i + 1 < rs.len() { rs[i + 1] } else { rs[0] });
        let lo = ra.theta;
        let hi = if i + 1 < rs.len() { rb.theta } else { rb.theta + TWO_PI };
        let len = hi - lo;
        if len <= 0.0 {
            continue;
        }
        let near = 1e-6 * len.min(1.0);
        total += tanh_sinh(
            |x, da, db| {
                let v = if da < near {
                    ra.slope.abs() * da
                } else if db < near {
                    rb.slope.abs() * db
                } else {
                    p.value(x).abs()
                };
                v.powf(a)
            },
            lo,
            hi,
            1e-12,
        );
    }
    total / TWO_PI
}

/// Maximum of |u| over the scan grid, then refined at the best node by a
/// root of u' in the neighbouring intervals. Returns (grid max, refined max).
pub(crate) fn sup_abs(p: &TrigPoly, n: usize) -> (f64, f64) {
    let h = TWO_PI / n as f64;
    let (mut best, mut arg) = (-1.0, 0usize);
    for j in 0..n {
        let v = p.value(j as f64 * h).abs();
        if v > best {
            best = v;
            arg = j;
        }
    }
    let x0 = arg as f64 * h;
    let dg = |x: f64| {
        let (_, du, d2u) = p.eval(x);
        (du, d2u)
    };
    let mut refined = best;
    for (lo, hi) in [(x0 - h, x0), (x0, x0 + h)] {
        let (dl, _) = dg(lo);
        let (dh, _) = dg(hi);
        if (dl < 0.0) != (dh < 0.0) {
            let c = refine(dg, lo, hi, 1e-15);
            refined = refined.max(p.value(c).abs());
        }
    }
    (best, refined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::make_circle_space;

    #[test]
    fn sine_has_two_roots() {
        let spec = make_circle_space(&[1]).unwrap();
        let p = TrigPoly::new(&spec, &[0.0, 1.0]);
        let rs = roots(&p, 0.0, 16);
        assert_eq!(rs.len(), 2);
        assert!((rs[0].theta).abs() < 1e-12 || (rs[0].theta - TWO_PI).abs() < 1e-12);
        assert!((rs[1].theta - PI).abs() < 1e-12);
        assert!((rs.iter().map(|r| 1.0 / r.slope.abs()).sum::<f64>() - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn close_root_pairs_are_found() {
        // √2 cos(θ - π/8) exceeds 0.999·√2 only on a 0.089-wide arc
        // centred inside the first scan interval [0, π/4]
        let spec = make_circle_space(&[1]).unwrap();
        let c = PI / 8.0;
        let p = TrigPoly::new(&spec, &[c.cos(), c.sin()]);
        let rs = roots(&p, 0.999 * SQRT_2, 8);
        assert_eq!(rs.len(), 2);
    }

    #[test]
    fn abs_power_integrals() {
        let spec = make_circle_space(&[1]).unwrap();
        let p = TrigPoly::new(&spec, &[0.0, 1.0]);
        let rs = roots(&p, 0.0, 16);
        // ∫ 4 sin⁴ dp = 3/2
        assert!((integral_abs_power(&p, 4.0, &rs) - 1.5).abs() < 1e-12);
        assert!((integral_abs_power(&p, 2.0, &rs) - 1.0).abs() < 1e-12);
        // ∫ |√2 sin θ| dp = 2√2/π
        assert!((integral_abs_power(&p, 1.0, &rs) - 2.0 * SQRT_2 / PI).abs() < 1e-12);
        // for d = 1 every unit u is a rotation of √2 sin θ, so the integral
        // equals the moment E(-1/2, 1)
        let want = crate::closedform::moment_formula(-0.5, 1).unwrap();
        assert!((integral_abs_power(&p, -0.5, &rs) - want).abs() < 1e-10);
    }

    #[test]
    fn sup_of_sine() {
        let spec = make_circle_space(&[1]).unwrap();
        let p = TrigPoly::new(&spec, &[0.3f64.cos(), 0.3f64.sin()]);
        let (grid, refined) = sup_abs(&p, 16);
        assert!(grid <= refined);
        assert!((refined - SQRT_2).abs() < 1e-10);
    }
}
