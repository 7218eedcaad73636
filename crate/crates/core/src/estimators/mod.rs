//! Measurements of one random polynomial u: level-set measures, excursion
//! volumes, Leray measures, L^p and sup norms, and common zeros.
//!
//! A [`Workspace`] holds the read-only grids and basis tables for one spec
//! and resolution and is shared between worker threads; [`Field`] is the
//! per-sample view with node values computed once.

mod circle;
mod sphere;
pub mod surface;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use circle::Root;
pub use surface::{CrossingCount, Segment};

use crate::error::{domain, Error, Result};
use crate::manifold::{quadrature_grid, BasisTable, EigenspaceSpec, ManifoldKind, Point, QuadratureGrid, SurfaceMesh};
use crate::sampling::PolynomialSample;
use circle::TrigPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MarchingSquares,
    SignScan,
    Quadrature,
    EpsShell,
    Coarea,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub resolution: usize,
    pub method: Method,
    /// Some |∇u| on the level set fell below the critical threshold.
    pub near_critical: bool,
}

/// A level set of a function on a 2-manifold as cell-confined segments.
#[derive(Debug, Clone, Default)]
pub struct LevelPolyline {
    pub segments: Vec<Segment>,
    pub total_length: f64,
}

impl LevelPolyline {
    /// Writes one `x0,y0,z0,x1,y1,z1` row per segment.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x0", "y0", "z0", "x1", "y1", "z1"])?;
        for s in &self.segments {
            let [a, b] = s.ends;
            wr.serialize((a[0], a[1], a[2], b[0], b[1], b[2]))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sup norm with a Lipschitz certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupNorm {
    /// max |u| over the grid nodes.
    pub grid_max: f64,
    /// After local ascent from the best node; never below `grid_max`.
    pub refined_max: f64,
    /// grid_max + κ·|u|·covering radius.
    pub certified_upper: f64,
}

/// Shared read-only data for measuring samples of one spec.
#[derive(Debug, Clone)]
pub struct Workspace {
    spec: EigenspaceSpec,
    resolution: usize,
    geometry: Geometry,
}

#[derive(Debug, Clone)]
enum Geometry {
    Circle { scan: usize },
    Surface(Box<SurfaceData>),
}

#[derive(Debug, Clone)]
struct SurfaceData {
    mesh: SurfaceMesh,
    mesh_table: BasisTable,
    quad: QuadratureGrid,
    quad_table: BasisTable,
    /// Extent of each quadrature node's cell along the two frame vectors.
    extents: Vec<[f64; 2]>,
}

impl Workspace {
    /// On the circle `resolution` is the scan-grid size (at least 8 per
    /// unit of the top frequency); on surfaces it is the number of cells
    /// along a closed geodesic.
    pub fn new(spec: &EigenspaceSpec, resolution: usize) -> Result<Self> {
        let geometry = match spec.manifold.kind {
            ManifoldKind::Circle => {
                let kmax = spec.max_frequency() as usize;
                if resolution < 8 * kmax || resolution < 8 {
                    return Err(Error::Resolution(format!(
                        "scan grid of {resolution} nodes is below 8 per unit of the top frequency {kmax}"
                    )));
                }
                Geometry::Circle { scan: resolution }
            }
            _ => {
                let mesh = SurfaceMesh::for_spec(spec, resolution)?;
                let quad = quadrature_grid(&spec.manifold, resolution)?;
                let mesh_table = BasisTable::new(spec, &mesh.nodes, false);
                let quad_table = BasisTable::new(spec, &quad.points, true);
                let extents = node_extents(spec, &quad);
                Geometry::Surface(Box::new(SurfaceData {
                    mesh,
                    mesh_table,
                    quad,
                    quad_table,
                    extents,
                }))
            }
        };
        Ok(Self {
            spec: spec.clone(),
            resolution,
            geometry,
        })
    }

    pub fn spec(&self) -> &EigenspaceSpec {
        &self.spec
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn mesh(&self) -> Option<&SurfaceMesh> {
        match &self.geometry {
            Geometry::Surface(s) => Some(&s.mesh),
            Geometry::Circle { .. } => None,
        }
    }

    pub fn quadrature(&self) -> Option<&QuadratureGrid> {
        match &self.geometry {
            Geometry::Surface(s) => Some(&s.quad),
            Geometry::Circle { .. } => None,
        }
    }

    /// Prepares a sample for measurement.
    pub fn field<'w>(&'w self, u: &PolynomialSample) -> Field<'w> {
        assert_eq!(u.coeffs.len(), self.spec.dim(), "sample does not belong to this spec");
        let repr = match &self.geometry {
            Geometry::Circle { .. } => Repr::Circle(TrigPoly::new(&self.spec, &u.coeffs)),
            Geometry::Surface(s) => {
                let mut vals = vec![0.0; s.mesh.nodes.len()];
                s.mesh_table.combine(&u.coeffs, &mut vals);
                Repr::Surface { mesh_vals: vals }
            }
        };
        Field {
            ws: self,
            coeffs: u.coeffs.clone(),
            norm: u.norm,
            repr,
        }
    }
}

/// Frame-aligned cell extents of the quadrature nodes, with
/// extent_0·extent_1 equal to the node's share ϖ·w of the area.
fn node_extents(spec: &EigenspaceSpec, quad: &QuadratureGrid) -> Vec<[f64; 2]> {
    let h = 2.0 * PI / quad.resolution as f64;
    let varpi = spec.manifold.total_volume;
    quad.points
        .iter()
        .zip(&quad.weights)
        .map(|(p, w)| match p {
            Point::Sphere(v) => {
                let hphi = v[0].hypot(v[1]) * h;
                [varpi * w / hphi, hphi]
            }
            _ => [h, h],
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Repr {
    Circle(TrigPoly),
    Surface { mesh_vals: Vec<f64> },
}

/// One sample prepared for measurement.
#[derive(Debug, Clone)]
pub struct Field<'w> {
    ws: &'w Workspace,
    coeffs: Vec<f64>,
    norm: f64,
    repr: Repr,
}

impl<'w> Field<'w> {
    fn scan(&self) -> usize {
        match self.ws.geometry {
            Geometry::Circle { scan } => scan,
            Geometry::Surface(_) => unreachable!("scan grid requested on a surface"),
        }
    }

    fn surface(&self) -> &'w SurfaceData {
        match &self.ws.geometry {
            Geometry::Surface(s) => s,
            Geometry::Circle { .. } => unreachable!("surface data requested on the circle"),
        }
    }

    /// Roots of u = level on the circle.
    pub fn roots(&self, level: f64) -> Result<Vec<Root>> {
        match &self.repr {
            Repr::Circle(p) => Ok(circle::roots(p, level, self.scan())),
            Repr::Surface { .. } => domain("roots are defined on the circle only"),
        }
    }

    /// Level polyline of u = level on a 2-manifold.
    pub fn polyline(&self, level: f64) -> Result<LevelPolyline> {
        let Repr::Surface { mesh_vals } = &self.repr else {
            return domain("level polylines need a 2-manifold");
        };
        let g: Vec<f64> = mesh_vals.iter().map(|v| v - level).collect();
        let mut segments = Vec::new();
        surface::marching_squares(&self.surface().mesh, &g, &mut segments);
        let total_length = segments.iter().map(|s| s.length).sum();
        Ok(LevelPolyline { segments, total_length })
    }

    /// ℎ^{m-1} of the level set: a root count on the circle, a length on
    /// surfaces.
    pub fn level_measure(&self, level: f64) -> MeasureEstimate {
        let (value, method) = match &self.repr {
            Repr::Circle(p) => (circle::roots(p, level, self.scan()).len() as f64, Method::SignScan),
            Repr::Surface { .. } => (
                self.polyline(level).expect("surface field").total_length,
                Method::MarchingSquares,
            ),
        };
        self.estimate(value, method, false)
    }

    /// ℎ^m of {u ≥ level}.
    ///
    /// Circle: exact from the roots. Torus: linear interpolation on the two
    /// triangles of each cell. Sphere: boundary integral along the true
    /// level curve, falling back to the triangle estimate (and flagging the
    /// result) when the curve cannot be followed.
    pub fn excursion(&self, level: f64) -> MeasureEstimate {
        let (pl, exact) = self.excursion_parts(level);
        self.estimate(exact.unwrap_or(pl), Method::Quadrature, exact.is_none())
    }

    /// Mesh estimate and, where available, the curve-following value. The
    /// second is `None` when the curve could not be followed; it equals the
    /// first where the mesh estimate is already exact.
    fn excursion_parts(&self, level: f64) -> (f64, Option<f64>) {
        match &self.repr {
            Repr::Circle(p) => {
                let v = circle::excursion_length(p, level, &circle::roots(p, level, self.scan()));
                (v, Some(v))
            }
            Repr::Surface { mesh_vals } => {
                let mesh = &self.surface().mesh;
                let g: Vec<f64> = mesh_vals.iter().map(|v| v - level).collect();
                let pl = surface::excursion_area(mesh, &g);
                if mesh.kind != ManifoldKind::Sphere2 {
                    return (pl, Some(pl));
                }
                let mut segments = Vec::new();
                surface::marching_squares(mesh, &g, &mut segments);
                let mut ev = self.ws.spec.evaluator();
                let mut curve = sphere::CurveArea {
                    mesh,
                    ev: &mut ev,
                    coeffs: &self.coeffs,
                    level,
                };
                (pl, curve.area(&g, &segments, pl))
            }
        }
    }

    /// (ℎ^m(U^{t-ε}) - ℎ^m(U^{t+ε}))/(2ε), with O(ε²) bias at regular levels.
    /// Both volumes come from the same estimator so the mesh bias cancels.
    pub fn leray_shell(&self, level: f64, epsilon: f64) -> Result<MeasureEstimate> {
        if !(epsilon > 0.0) {
            return domain(format!("shell half-width {epsilon} must be positive"));
        }
        let (lo_pl, lo) = self.excursion_parts(level - epsilon);
        let (hi_pl, hi) = self.excursion_parts(level + epsilon);
        let (diff, near) = match (lo, hi) {
            (Some(a), Some(b)) => (a - b, false),
            _ => (lo_pl - hi_pl, true),
        };
        let value = (diff / (2.0 * epsilon)).max(0.0);
        Ok(self.estimate(value, Method::EpsShell, near))
    }

    /// ∫_{L} dℎ^{m-1}/|∇u|: Σ 1/|u'| over roots on the circle, midpoint
    /// rule per polyline segment on surfaces.
    pub fn leray_coarea(&self, level: f64) -> MeasureEstimate {
        let floor = 1e-10 * self.norm.max(f64::MIN_POSITIVE);
        let mut near = false;
        let mut inv = |g: f64| {
            if g < floor {
                near = true;
                1.0 / floor
            } else {
                1.0 / g
            }
        };
        let value = match &self.repr {
            Repr::Circle(p) => circle::roots(p, level, self.scan()).iter().map(|r| inv(r.slope.abs())).sum(),
            Repr::Surface { .. } => {
                let mesh = &self.surface().mesh;
                let mut ev = self.ws.spec.evaluator();
                let line = self.polyline(level).expect("surface field");
                let mut total = 0.0;
                for s in &line.segments {
                    let cell = &mesh.cells[s.cell as usize];
                    let mid = [
                        0.5 * (s.local[0][0] + s.local[1][0]),
                        0.5 * (s.local[0][1] + s.local[1][1]),
                    ];
                    let p = mesh.point(&mesh.interpolate(cell, mid[0], mid[1]));
                    let (_, g) = ev.value_grad(&self.coeffs, &p);
                    total += s.length * inv(g[0].hypot(g[1]));
                }
                total
            }
        };
        self.estimate(value, Method::Coarea, near)
    }

    /// ∫_M |u|^a dp for a > -1.
    ///
    /// Circle: exact zeros and tanh-sinh between them. Surfaces: quadrature
    /// grid; for a < 0 nodes within two cell widths of the nodal set use the
    /// exact cell average of |u|^a for the linear model u(p) + ∇u·x.
    pub fn int_abs_pow(&self, a: f64) -> Result<f64> {
        if !(a > -1.0) {
            return domain(format!("exponent {a} must exceed -1"));
        }
        Ok(match &self.repr {
            Repr::Circle(p) => circle::integral_abs_power(p, a, &circle::roots(p, 0.0, self.scan())),
            Repr::Surface { .. } => {
                let s = self.surface();
                let n = s.quad.len();
                let mut vals = vec![0.0; n];
                s.quad_table.combine(&self.coeffs, &mut vals);
                if a >= 0.0 {
                    vals.iter().zip(&s.quad.weights).map(|(v, w)| w * v.abs().powf(a)).sum()
                } else {
                    let mut grads = vec![[0.0; 2]; n];
                    s.quad_table.combine_grad(&self.coeffs, &mut grads);
                    let mut total = 0.0;
                    for j in 0..n {
                        let [hx, hy] = s.extents[j];
                        let (p, q) = (grads[j][0].abs() * hx, grads[j][1].abs() * hy);
                        let u0 = vals[j];
                        let f = if u0.abs() < 2.0 * (p + q) {
                            cell_average_abs_pow(u0, p, q, a)
                        } else {
                            u0.abs().powf(a)
                        };
                        total += s.quad.weights[j] * f;
                    }
                    total
                }
            }
        })
    }

    /// ‖u‖_a = (∫ |u|^a dp)^{1/a} for a ≥ 1.
    pub fn lp_norm(&self, a: f64) -> Result<f64> {
        if !(a >= 1.0) {
            return domain(format!("norm exponent {a} must be at least 1"));
        }
        Ok(self.int_abs_pow(a)?.powf(1.0 / a))
    }

    /// Sup norm: grid maximum, local ascent, and the Lipschitz certificate
    /// with κ = c·s scaled by |u|.
    pub fn sup_norm(&self) -> SupNorm {
        let lip = self.ws.spec.kappa() * self.norm;
        match &self.repr {
            Repr::Circle(p) => {
                let n = self.scan();
                let (grid_max, refined) = circle::sup_abs(p, n);
                SupNorm {
                    grid_max,
                    refined_max: refined.max(grid_max),
                    certified_upper: grid_max + lip * PI / n as f64,
                }
            }
            Repr::Surface { .. } => {
                let s = self.surface();
                let mut vals = vec![0.0; s.quad.len()];
                s.quad_table.combine(&self.coeffs, &mut vals);
                let (mut best, mut arg) = (-1.0, 0);
                for (j, v) in vals.iter().enumerate() {
                    if v.abs() > best {
                        best = v.abs();
                        arg = j;
                    }
                }
                let sign = vals[arg].signum();
                let refined = self.ascend(s.quad.points[arg], sign, best);
                SupNorm {
                    grid_max: best,
                    refined_max: refined.max(best),
                    certified_upper: best + lip * s.quad.covering_radius,
                }
            }
        }
    }

    /// Gradient ascent of sign·u with backtracking.
    fn ascend(&self, start: Point, sign: f64, start_value: f64) -> f64 {
        let spec = &self.ws.spec;
        let mut ev = spec.evaluator();
        let curvature = spec.max_eigenvalue() * spec.c() * self.norm.max(f64::MIN_POSITIVE);
        let mut x = start;
        let (v, g) = ev.value_grad(&self.coeffs, &x);
        let mut f = sign * v;
        let mut grad = [sign * g[0], sign * g[1]];
        let mut alpha = 1.0 / curvature;
        for _ in 0..500 {
            let gn = grad[0].hypot(grad[1]);
            if gn * alpha < 1e-14 {
                break;
            }
            let y = x.step([alpha * grad[0], alpha * grad[1]]);
            let (vy, gy) = ev.value_grad(&self.coeffs, &y);
            if sign * vy > f {
                x = y;
                f = sign * vy;
                grad = [sign * gy[0], sign * gy[1]];
                alpha *= 1.5;
            } else {
                alpha *= 0.5;
            }
        }
        f.max(start_value)
    }

    fn estimate(&self, value: f64, method: Method, near_critical: bool) -> MeasureEstimate {
        MeasureEstimate {
            value,
            resolution: self.ws.resolution,
            method,
            near_critical,
        }
    }
}

/// Mean of |u0 + x + y|^a over x ∈ [-p/2, p/2], y ∈ [-q/2, q/2] (p, q ≥ 0).
fn cell_average_abs_pow(u0: f64, p: f64, q: f64, a: f64) -> f64 {
    let g1 = |v: f64| v.signum() * v.abs().powf(a + 1.0) / (a + 1.0);
    let g2 = |v: f64| v.abs().powf(a + 2.0) / ((a + 1.0) * (a + 2.0));
    let (big, small) = if p >= q { (p, q) } else { (q, p) };
    if big == 0.0 {
        return u0.abs().powf(a);
    }
    if small < 1e-3 * big {
        (g1(u0 + 0.5 * big) - g1(u0 - 0.5 * big)) / big
    } else {
        let (hp, hq) = (0.5 * p, 0.5 * q);
        (g2(u0 + hp + hq) - g2(u0 - hp + hq) - g2(u0 + hp - hq) + g2(u0 - hp - hq)) / (p * q)
    }
}

/// ℎ⁰ of {u = level} on the circle.
pub fn count_zeros_circle(ws: &Workspace, u: &PolynomialSample, level: f64) -> Result<usize> {
    Ok(ws.field(u).roots(level)?.len())
}

/// Level polyline of u = level on the torus or sphere.
pub fn nodal_length_2d(ws: &Workspace, u: &PolynomialSample, level: f64) -> Result<LevelPolyline> {
    ws.field(u).polyline(level)
}

pub fn excursion_volume(ws: &Workspace, u: &PolynomialSample, level: f64) -> MeasureEstimate {
    ws.field(u).excursion(level)
}

pub fn leray_eps_shell(ws: &Workspace, u: &PolynomialSample, level: f64, epsilon: f64) -> Result<MeasureEstimate> {
    ws.field(u).leray_shell(level, epsilon)
}

pub fn leray_coarea(ws: &Workspace, u: &PolynomialSample, level: f64) -> MeasureEstimate {
    ws.field(u).leray_coarea(level)
}

pub fn lp_norm(ws: &Workspace, u: &PolynomialSample, a: f64) -> Result<f64> {
    ws.field(u).lp_norm(a)
}

pub fn integral_abs_power(ws: &Workspace, u: &PolynomialSample, a: f64) -> Result<f64> {
    ws.field(u).int_abs_pow(a)
}

pub fn sup_norm(ws: &Workspace, u: &PolynomialSample) -> SupNorm {
    ws.field(u).sup_norm()
}

/// Number of common zeros of two samples on a 2-manifold.
pub fn common_zero_count(ws: &Workspace, u1: &PolynomialSample, u2: &PolynomialSample) -> Result<CrossingCount> {
    let a = ws.field(u1).polyline(0.0)?;
    let b = ws.field(u2).polyline(0.0)?;
    Ok(surface::count_crossings(&a.segments, &b.segments))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{make_circle_space, make_sphere_space, make_torus_space, BasisFn};
    use crate::sampling::{sample_uniform_sphere, SeedPolicy};
    use std::f64::consts::SQRT_2;

    fn unit(spec: &EigenspaceSpec, f: BasisFn) -> PolynomialSample {
        let i = spec.basis().iter().position(|b| *b == f).unwrap();
        let mut c = vec![0.0; spec.dim()];
        c[i] = 1.0;
        PolynomialSample::new(c)
    }

    #[test]
    fn circle_examples() {
        let spec = make_circle_space(&[1]).unwrap();
        let ws = Workspace::new(&spec, 64).unwrap();
        let u = unit(&spec, BasisFn::Circle { k: 1, sine: true });
        assert_eq!(count_zeros_circle(&ws, &u, 0.0).unwrap(), 2);
        assert_eq!(count_zeros_circle(&ws, &u, 1.5).unwrap(), 0);
        assert!((leray_coarea(&ws, &u, 0.0).value - SQRT_2).abs() < 1e-12);
        let shell = leray_eps_shell(&ws, &u, 0.0, 1e-4).unwrap().value;
        assert!((shell - SQRT_2).abs() < 1e-8);
        assert_eq!(leray_coarea(&ws, &u, 2.0).value, 0.0);
        assert!((lp_norm(&ws, &u, 4.0).unwrap().powi(4) - 1.5).abs() < 1e-12);
        assert!((lp_norm(&ws, &u, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let sup = sup_norm(&ws, &u);
        assert!((sup.refined_max - SQRT_2).abs() < 1e-10);
        assert!(sup.certified_upper >= SQRT_2);
        assert!(Workspace::new(&make_circle_space(&[1, 9]).unwrap(), 64).is_err());
    }

    #[test]
    fn torus_level_sets() {
        let spec = make_torus_space(&[[1, 0]]).unwrap();
        let ws = Workspace::new(&spec, 128).unwrap();
        let cx = unit(&spec, BasisFn::Torus { k: [1, 0], sine: false });
        let cy = unit(&spec, BasisFn::Torus { k: [0, 1], sine: false });
        let len = nodal_length_2d(&ws, &cx, 0.0).unwrap().total_length;
        assert!((len / (4.0 * PI) - 1.0).abs() < 1e-3, "{len}");
        let n = common_zero_count(&ws, &cx, &cy).unwrap();
        assert_eq!(n.count, 4);
        assert!((excursion_volume(&ws, &cx, -2.0).value - 4.0 * PI * PI).abs() < 1e-9);
        assert!((excursion_volume(&ws, &cx, 0.0).value - 2.0 * PI * PI).abs() < 1e-3);
    }

    #[test]
    fn sphere_first_harmonic_great_circle() {
        let spec = make_sphere_space(&[1]).unwrap();
        let ws = Workspace::new(&spec, 128).unwrap();
        for seed in 0..5 {
            let u = sample_uniform_sphere(&spec, SeedPolicy::new(17, seed));
            let len = nodal_length_2d(&ws, &u, 0.0).unwrap().total_length;
            assert!((len / (2.0 * PI) - 1.0).abs() < 2e-3, "{len}");
            // a coherent state peaks at c
        }
        let q = Point::from_polar(0.9, 2.0);
        let u = PolynomialSample::coherent_state(&spec, &q);
        let sup = sup_norm(&ws, &u);
        assert!((sup.refined_max - spec.c()).abs() < 1e-9, "{sup:?}");
        assert!(sup.certified_upper - sup.grid_max <= spec.kappa() * ws.quadrature().unwrap().covering_radius + 1e-15);
    }

    #[test]
    fn sphere_excursion_follows_the_curve() {
        // degree 1: every excursion set is a cap of area 2π(1 - t)
        let spec = make_sphere_space(&[1]).unwrap();
        let ws = Workspace::new(&spec, 64).unwrap();
        for seed in 0..20 {
            let u = sample_uniform_sphere(&spec, SeedPolicy::new(8, seed));
            for t in [-0.9, -0.5, 0.0, 0.5, 0.9] {
                let e = excursion_volume(&ws, &u, t * spec.c());
                assert!(!e.near_critical);
                assert!((e.value - 2.0 * PI * (1.0 - t)).abs() < 1e-10, "t={t}: {}", e.value);
            }
        }
        // higher degree: the value barely moves under mesh refinement
        let spec = make_sphere_space(&[3, 4]).unwrap();
        let coarse = Workspace::new(&spec, 96).unwrap();
        let fine = Workspace::new(&spec, 256).unwrap();
        for seed in 0..5 {
            let u = sample_uniform_sphere(&spec, SeedPolicy::new(8, seed));
            let a = excursion_volume(&coarse, &u, 0.7);
            let b = excursion_volume(&fine, &u, 0.7);
            assert!(!a.near_critical && !b.near_critical);
            assert!((a.value - b.value).abs() < 1e-8, "{} vs {}", a.value, b.value);
        }
    }

    #[test]
    fn l2_norm_is_one_on_surfaces() {
        for spec in [make_torus_space(&[[1, 0], [2, 1]]).unwrap(), make_sphere_space(&[2, 3]).unwrap()] {
            let ws = Workspace::new(&spec, 64).unwrap();
            for seed in 0..5 {
                let u = sample_uniform_sphere(&spec, SeedPolicy::new(2, seed));
                assert!((lp_norm(&ws, &u, 2.0).unwrap() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn negative_power_on_torus_single_cosine() {
        // u = √2 cos x: ∫|u|^a dp = E(a, 1) since it is a rotated unit
        // circle polynomial in x alone
        let spec = make_torus_space(&[[1, 0]]).unwrap();
        let ws = Workspace::new(&spec, 256).unwrap();
        let u = unit(&spec, BasisFn::Torus { k: [1, 0], sine: false });
        for a in [-0.5, -0.2, 0.5] {
            let got = integral_abs_power(&ws, &u, a).unwrap();
            let want = crate::closedform::moment_formula(a, 1).unwrap();
            assert!((got / want - 1.0).abs() < 2e-3, "a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn coarea_and_shell_agree() {
        for spec in [make_torus_space(&[[1, 0], [1, 1]]).unwrap(), make_sphere_space(&[2]).unwrap()] {
            let ws = Workspace::new(&spec, 192).unwrap();
            let mut checked = 0;
            for seed in 0..100 {
                let u = sample_uniform_sphere(&spec, SeedPolicy::new(31, seed));
                let f = ws.field(&u);
                let level = 0.3;
                let co = f.leray_coarea(level);
                let sh = f.leray_shell(level, 1e-3).unwrap();
                if co.near_critical || co.value == 0.0 {
                    continue;
                }
                checked += 1;
                assert!((co.value / sh.value - 1.0).abs() < 0.01, "seed {seed}: {} vs {}", co.value, sh.value);
            }
            assert!(checked > 50);
        }
    }
}
