//! Quadrature grids, surface meshes and precomputed basis tables.

use std::f64::consts::{FRAC_PI_4, PI};

use super::{cross, dot, great_circle, normalize, EigenspaceSpec, ManifoldKind, ManifoldModel, Point};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

/// Nodes and weights realizing ∫_M f dp for the probability measure.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub kind: ManifoldKind,
    pub resolution: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Every point of M lies within this distance of some node.
    pub covering_radius: f64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Σ w_i f(p_i).
    pub fn integrate(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Builds the quadrature grid of the given resolution.
///
/// Circle: `resolution` equispaced nodes. Torus: `resolution`² uniform
/// product grid. Sphere: `resolution/2` Gauss–Legendre nodes in cos θ times
/// `resolution` uniform longitudes, exact for spherical-harmonic products of
/// total degree below `resolution`.
pub fn quadrature_grid(model: &ManifoldModel, resolution: usize) -> Result<QuadratureGrid> {
    if resolution < 8 {
        return Err(Error::Resolution(format!("quadrature resolution {resolution} < 8")));
    }
    let n = resolution;
    let h = 2.0 * PI / n as f64;
    let grid = match model.kind {
        ManifoldKind::Circle => QuadratureGrid {
            kind: model.kind,
            resolution,
            points: (0..n).map(|i| Point::Circle(i as f64 * h)).collect(),
            weights: vec![1.0 / n as f64; n],
            covering_radius: 0.5 * h,
        },
        ManifoldKind::Torus2 => {
            let mut points = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    points.push(Point::Torus([i as f64 * h, j as f64 * h]));
                }
            }
            QuadratureGrid {
                kind: model.kind,
                resolution,
                points,
                weights: vec![1.0 / (n * n) as f64; n * n],
                covering_radius: h * std::f64::consts::FRAC_1_SQRT_2,
            }
        }
        ManifoldKind::Sphere2 => {
            let nt = n / 2;
            let (x, w) = gauss_legendre(nt);
            let mut points = Vec::with_capacity(nt * n);
            let mut weights = Vec::with_capacity(nt * n);
            // largest polar gap, counting the caps around the poles
            let thetas: Vec<f64> = x.iter().rev().map(|x| x.acos()).collect();
            let mut gap = thetas[0].max(PI - thetas[nt - 1]);
            for k in 1..nt {
                gap = gap.max(0.5 * (thetas[k] - thetas[k - 1]));
            }
            for (xi, wi) in x.iter().zip(&w) {
                let s = (1.0 - xi * xi).sqrt();
                for j in 0..n {
                    let phi = j as f64 * h;
                    points.push(Point::Sphere([s * phi.cos(), s * phi.sin(), *xi]));
                    weights.push(0.5 * wi / n as f64);
                }
            }
            QuadratureGrid {
                kind: model.kind,
                resolution,
                points,
                weights,
                // meridian move to the nearest ring, then along the ring
                covering_radius: gap + 0.5 * h,
            }
        }
    };
    Ok(grid)
}

/// Basis values (and optionally gradients) at a fixed point set, stored
/// basis-major so that u = Σ c_i e_i is a sequence of contiguous axpys.
#[derive(Debug, Clone)]
pub struct BasisTable {
    dim: usize,
    n: usize,
    vals: Vec<f64>,
    grads: Option<Vec<[f64; 2]>>,
}

impl BasisTable {
    pub fn new(spec: &EigenspaceSpec, points: &[Point], with_gradients: bool) -> Self {
        let dim = spec.dim();
        let n = points.len();
        let mut vals = vec![0.0; dim * n];
        let mut grads = with_gradients.then(|| vec![[0.0; 2]; dim * n]);
        let mut ev = spec.evaluator();
        let mut v = vec![0.0; dim];
        let mut g = vec![[0.0; 2]; dim];
        for (j, p) in points.iter().enumerate() {
            ev.values_grads(p, &mut v, &mut g);
            for i in 0..dim {
                vals[i * n + j] = v[i];
                if let Some(gr) = grads.as_mut() {
                    gr[i * n + j] = g[i];
                }
            }
        }
        Self { dim, n, vals, grads }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn has_gradients(&self) -> bool {
        self.grads.is_some()
    }

    /// Writes u(p_j) into `out`.
    pub fn combine(&self, coeffs: &[f64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.dim);
        out[..self.n].fill(0.0);
        for (i, c) in coeffs.iter().enumerate() {
            let col = &self.vals[i * self.n..(i + 1) * self.n];
            for (o, e) in out.iter_mut().zip(col) {
                *o += c * e;
            }
        }
    }

    /// Writes ∇u(p_j) into `out`; panics if built without gradients.
    pub fn combine_grad(&self, coeffs: &[f64], out: &mut [[f64; 2]]) {
        let grads = self.grads.as_ref().expect("basis table built without gradients");
        out[..self.n].fill([0.0; 2]);
        for (i, c) in coeffs.iter().enumerate() {
            let col = &grads[i * self.n..(i + 1) * self.n];
            for (o, e) in out.iter_mut().zip(col) {
                o[0] += c * e[0];
                o[1] += c * e[1];
            }
        }
    }
}

/// One quadrilateral cell with corners ordered (0,0), (1,0), (1,1), (0,1)
/// in local coordinates.
#[derive(Debug, Clone, Copy)]
pub struct MeshCell {
    pub nodes: [u32; 4],
    /// Torus: unwrapped (x, y, 0); sphere: unit vectors.
    pub corners: [[f64; 3]; 4],
    /// Areas of the triangles (c0, c1, c2) and (c0, c2, c3).
    pub tri_area: [f64; 2],
}

impl MeshCell {
    pub fn area(&self) -> f64 {
        self.tri_area[0] + self.tri_area[1]
    }
}

/// Cell decomposition of a 2-manifold used by the level-set estimators.
///
/// The torus uses the uniform wraparound grid with `resolution` cells per
/// period; the sphere an equiangular cube-sphere with `ceil(resolution/4)`
/// cells per face edge, so that `resolution` cells span a great circle.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub kind: ManifoldKind,
    pub resolution: usize,
    pub nodes: Vec<Point>,
    pub cells: Vec<MeshCell>,
}

impl SurfaceMesh {
    pub fn new(kind: ManifoldKind, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::Resolution(format!("mesh resolution {resolution} < 8")));
        }
        match kind {
            ManifoldKind::Circle => Err(Error::Resolution("surface mesh needs a 2-manifold".into())),
            ManifoldKind::Torus2 => Ok(Self::torus(resolution)),
            ManifoldKind::Sphere2 => Ok(Self::sphere(resolution)),
        }
    }

    /// Mesh for a spec, rejecting resolutions with fewer than four cells per
    /// shortest wavelength 2π/√λ_max.
    pub fn for_spec(spec: &EigenspaceSpec, resolution: usize) -> Result<Self> {
        check_resolution(spec, resolution)?;
        Self::new(spec.manifold.kind, resolution)
    }

    fn torus(n: usize) -> Self {
        let h = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                nodes.push(Point::Torus([i as f64 * h, j as f64 * h]));
            }
        }
        let id = |i: usize, j: usize| ((j % n) * n + (i % n)) as u32;
        let mut cells = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let (x0, y0) = (i as f64 * h, j as f64 * h);
                let (x1, y1) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
                cells.push(MeshCell {
                    nodes: [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
                    corners: [[x0, y0, 0.0], [x1, y0, 0.0], [x1, y1, 0.0], [x0, y1, 0.0]],
                    tri_area: [0.5 * h * h; 2],
                });
            }
        }
        Self {
            kind: ManifoldKind::Torus2,
            resolution: n,
            nodes,
            cells,
        }
    }

    fn sphere(resolution: usize) -> Self {
        let f = resolution.div_ceil(4);
        // (center, u-axis, v-axis) with u × v = center
        let faces: [([f64; 3], [f64; 3], [f64; 3]); 6] = [
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            ([-1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]),
            ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
            ([0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]),
            ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
        ];
        let per_face = (f + 1) * (f + 1);
        let mut nodes = Vec::with_capacity(6 * per_face);
        let mut coords = Vec::with_capacity(6 * per_face);
        let mut cells = Vec::with_capacity(6 * f * f);
        for (k, (c, u, v)) in faces.iter().enumerate() {
            let base = k * per_face;
            for j in 0..=f {
                let tb = (-FRAC_PI_4 + j as f64 * (PI / 2.0) / f as f64).tan();
                for i in 0..=f {
                    let ta = (-FRAC_PI_4 + i as f64 * (PI / 2.0) / f as f64).tan();
                    let p = normalize([
                        c[0] + ta * u[0] + tb * v[0],
                        c[1] + ta * u[1] + tb * v[1],
                        c[2] + ta * u[2] + tb * v[2],
                    ]);
                    coords.push(p);
                    nodes.push(Point::Sphere(p));
                }
            }
            let id = |i: usize, j: usize| base + j * (f + 1) + i;
            for j in 0..f {
                for i in 0..f {
                    let ids = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
                    let corners = ids.map(|n| coords[n]);
                    cells.push(MeshCell {
                        nodes: ids.map(|n| n as u32),
                        corners,
                        tri_area: [
                            spherical_triangle_area(&corners[0], &corners[1], &corners[2]),
                            spherical_triangle_area(&corners[0], &corners[2], &corners[3]),
                        ],
                    });
                }
            }
        }
        Self {
            kind: ManifoldKind::Sphere2,
            resolution,
            nodes,
            cells,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(MeshCell::area).sum()
    }

    /// Geometry coordinates of local position (s, t) ∈ [0,1]² in a cell.
    /// Exact bilinear on the torus; bilinear then projected on the sphere,
    /// which along edges is the same as normalize(A + f(B − A)).
    #[inline]
    pub fn interpolate(&self, cell: &MeshCell, s: f64, t: f64) -> [f64; 3] {
        let c = &cell.corners;
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        let mut p = [0.0; 3];
        for k in 0..4 {
            for (pi, ci) in p.iter_mut().zip(&c[k]) {
                *pi += w[k] * ci;
            }
        }
        match self.kind {
            ManifoldKind::Sphere2 => normalize(p),
            _ => p,
        }
    }

    /// Geodesic distance between two geometry positions in the same cell.
    #[inline]
    pub fn length(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        match self.kind {
            ManifoldKind::Sphere2 => great_circle(a, b),
            _ => (a[0] - b[0]).hypot(a[1] - b[1]),
        }
    }

    /// The manifold point at a geometry position.
    #[inline]
    pub fn point(&self, g: &[f64; 3]) -> Point {
        match self.kind {
            ManifoldKind::Sphere2 => Point::Sphere(*g),
            _ => Point::Torus([g[0].rem_euclid(2.0 * PI), g[1].rem_euclid(2.0 * PI)]),
        }
    }
}

/// Rejects grids with fewer than four cells per shortest wavelength.
pub(crate) fn check_resolution(spec: &EigenspaceSpec, resolution: usize) -> Result<()> {
    let wavelength = 2.0 * PI / spec.max_eigenvalue().sqrt();
    let cell = 2.0 * PI / resolution as f64;
    if cell > 0.25 * wavelength {
        return Err(Error::Resolution(format!(
            "resolution {resolution} gives cells of {cell:.4}, more than a quarter of the shortest wavelength {wavelength:.4}"
        )));
    }
    Ok(())
}

/// Area of the spherical triangle with unit-vector vertices
/// (Van Oosterom–Strackee).
fn spherical_triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let num = dot(a, &cross(b, c)).abs();
    let den = 1.0 + dot(a, b) + dot(b, c) + dot(c, a);
    2.0 * num.atan2(den)
}
