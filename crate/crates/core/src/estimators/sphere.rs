//! High-order excursion area on S² from the level curve.
//!
//! The marching-squares endpoints are moved onto the true level set along
//! their mesh edges, giving a geodesic polygon with vertices on the curve.
//! Its area is a fan of exact spherical triangles from a fixed apex; the
//! thin lens between each chord and the curve is ∫ sin h(s) ds, where h(s)
//! is the signed distance of the curve from the chord's great circle,
//! integrated by Gauss–Legendre. The polygon area is only known modulo 4π,
//! which the piecewise-linear mesh estimate resolves.

use std::f64::consts::PI;

use super::surface::Segment;
use crate::manifold::{cross, dot, normalize, BasisEvaluator, MeshCell, Point, SurfaceMesh};
use crate::quad::gauss_legendre;

const LENS_NODES: usize = 6;
/// Apex of the triangle fan, off every grid symmetry axis.
const APEX: [f64; 3] = [0.300_586_716_705_200_54, -0.500_977_861_175_334_3, 0.811_584_135_104_041_5];

pub(crate) struct CurveArea<'a, 'e> {
    pub mesh: &'a SurfaceMesh,
    pub ev: &'e mut BasisEvaluator<'a>,
    pub coeffs: &'a [f64],
    pub level: f64,
}

impl CurveArea<'_, '_> {
    fn g(&mut self, p: [f64; 3]) -> f64 {
        self.ev.value(self.coeffs, &Point::Sphere(p)) - self.level
    }

    /// Zero of u - level on the cell edge containing the local point `l`,
    /// bracketed by the edge's corners (Illinois regula falsi).
    fn edge_zero(&mut self, cell: &MeshCell, w: &[f64; 4], l: [f64; 2]) -> [f64; 3] {
        // corners in cell order: (0,0), (1,0), (1,1), (0,1)
        let (i, j) = if l[1] == 0.0 {
            (0, 1)
        } else if l[0] == 1.0 {
            (1, 2)
        } else if l[1] == 1.0 {
            (2, 3)
        } else {
            (3, 0)
        };
        let arc = |f: f64| normalize(lerp(&cell.corners[i], &cell.corners[j], f));
        let (mut a, mut b) = (0.0, 1.0);
        let (mut ga, mut gb) = (w[i], w[j]);
        let mut side = 0;
        for _ in 0..100 {
            if b - a <= 1e-15 {
                break;
            }
            let x = ((a * gb - b * ga) / (gb - ga)).clamp(a, b);
            let gx = self.g(arc(x));
            if gx == 0.0 {
                return arc(x);
            }
            if (gx < 0.0) == (ga < 0.0) {
                a = x;
                ga = gx;
                if side == -1 {
                    gb *= 0.5;
                }
                side = -1;
            } else {
                b = x;
                gb = gx;
                if side == 1 {
                    ga *= 0.5;
                }
                side = 1;
            }
            if (b - a).abs() < 1e-15 || gx.abs() < 1e-15 {
                return arc(x);
            }
        }
        arc(0.5 * (a + b))
    }

    /// ∫_0^L sin h(s) ds for the curve between the chord endpoints a, b,
    /// where positive h lies to the left of a → b.
    fn lens(&mut self, a: [f64; 3], b: [f64; 3], nodes: &(Vec<f64>, Vec<f64>)) -> Option<f64> {
        let len = cross(&a, &b).iter().map(|x| x * x).sum::<f64>().sqrt().atan2(dot(&a, &b));
        if len == 0.0 {
            return Some(0.0);
        }
        let ab = dot(&a, &b);
        let e = normalize([b[0] - ab * a[0], b[1] - ab * a[1], b[2] - ab * a[2]]);
        let n = cross(&a, &e);
        let mut total = 0.0;
        for (x, w) in nodes.0.iter().zip(&nodes.1) {
            let s = 0.5 * len * (1.0 + x);
            let (ss, cs) = s.sin_cos();
            let q = [cs * a[0] + ss * e[0], cs * a[1] + ss * e[1], cs * a[2] + ss * e[2]];
            let at = |h: f64| {
                let (sh, ch) = h.sin_cos();
                [ch * q[0] + sh * n[0], ch * q[1] + sh * n[1], ch * q[2] + sh * n[2]]
            };
            // secant from the chord, which is already within the sagitta
            let (mut h0, mut f0) = (0.0, self.g(q));
            let mut h1 = 1e-3 * len;
            let mut f1 = self.g(at(h1));
            let mut h = h0;
            let mut converged = f0 == 0.0;
            for _ in 0..50 {
                if converged {
                    break;
                }
                if f1 == f0 {
                    // flat at rounding level: both iterates are zeros
                    converged = (h1 - h0).abs() <= 1e-10 * len + 1e-12;
                    h = h1;
                    break;
                }
                let h2 = h1 - f1 * (h1 - h0) / (f1 - f0);
                if !(h2.abs() < len) {
                    return None;
                }
                h0 = h1;
                f0 = f1;
                h1 = h2;
                f1 = self.g(at(h1));
                h = h1;
                // the absolute floor is the rounding noise of g near the curve
                converged = (h1 - h0).abs() <= 1e-13 * (len + 1.0) || f1 == 0.0;
            }
            if !converged {
                return None;
            }
            total += w * h.sin();
        }
        Some(0.5 * len * total)
    }

    /// Area of {u ≥ level}, or `None` when the curve cannot be followed
    /// (near-critical level). `g` holds mesh node values of u - level.
    pub fn area(&mut self, g: &[f64], segments: &[Segment], pl_area: f64) -> Option<f64> {
        if segments.is_empty() {
            return Some(pl_area);
        }
        let nodes = gauss_legendre(LENS_NODES);
        let mut total = 0.0;
        for seg in segments {
            let cell = &self.mesh.cells[seg.cell as usize];
            let w = cell.nodes.map(|k| g[k as usize]);
            let mut a = self.edge_zero(cell, &w, seg.local[0]);
            let mut b = self.edge_zero(cell, &w, seg.local[1]);
            if !left_is_inside(cell, &w, seg) {
                std::mem::swap(&mut a, &mut b);
            }
            total += solid_angle(&APEX, &a, &b) - self.lens(a, b, &nodes)?;
        }
        let k = ((pl_area - total) / (4.0 * PI)).round();
        let area = total + 4.0 * PI * k;
        // the two estimates differ by the O(h²) mesh error only
        ((area - pl_area).abs() < 0.05 * 4.0 * PI).then_some(area)
    }
}

fn lerp(a: &[f64; 3], b: &[f64; 3], f: f64) -> [f64; 3] {
    [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2])]
}

/// Whether {g ≥ 0} lies to the left of the segment's local direction, seen
/// from outside the sphere.
fn left_is_inside(cell: &MeshCell, w: &[f64; 4], seg: &Segment) -> bool {
    let [la, lb] = seg.local;
    let (s, t) = (0.5 * (la[0] + lb[0]), 0.5 * (la[1] + lb[1]));
    // gradient of the bilinear interpolant at the segment midpoint
    let gs = (1.0 - t) * (w[1] - w[0]) + t * (w[2] - w[3]);
    let gt = (1.0 - s) * (w[3] - w[0]) + s * (w[2] - w[1]);
    let d = [lb[0] - la[0], lb[1] - la[1]];
    let local_left = d[0] * gt - d[1] * gs > 0.0;
    // orientation of the local (s, t) frame against the outward normal
    let c = &cell.corners;
    let e1 = [c[1][0] - c[0][0], c[1][1] - c[0][1], c[1][2] - c[0][2]];
    let e2 = [c[3][0] - c[0][0], c[3][1] - c[0][1], c[3][2] - c[0][2]];
    let right_handed = dot(&cross(&e1, &e2), &c[0]) > 0.0;
    local_left == right_handed
}

/// Signed area of the geodesic triangle (p, a, b) (Van Oosterom–Strackee).
fn solid_angle(p: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let num = dot(p, &cross(a, b));
    let den = 1.0 + dot(p, a) + dot(p, b) + dot(a, b);
    2.0 * num.atan2(den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apex_is_unit() {
        assert!((dot(&APEX, &APEX) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn octant_triangle() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let z = [0.0, 0.0, 1.0];
        assert!((solid_angle(&x, &y, &z) - 0.5 * PI).abs() < 1e-15);
        assert!((solid_angle(&x, &z, &y) + 0.5 * PI).abs() < 1e-15);
    }
}
