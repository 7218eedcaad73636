//! Concrete homogeneous manifolds (circle, flat 2-torus, round 2-sphere) and
//! invariant subspaces of L²(M) spanned by Laplace eigenfunctions.
//!
//! Bases are orthonormal for the invariant *probability* measure, so that the
//! reproducing kernel satisfies Σ e_i(p)² = dim ℰ at every point.

mod grid;
mod legendre;

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

pub use grid::{quadrature_grid, BasisTable, MeshCell, QuadratureGrid, SurfaceMesh};
pub use legendre::LegendreTable;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    Torus2,
    Sphere2,
}

/// Constants (b, r0) with ℎ^m(B(p, r)) > b·ϖ·r^m for all r < r0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallConstants {
    pub b: f64,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub kind: ManifoldKind,
    /// Intrinsic dimension m.
    pub dim: u32,
    /// Riemannian volume ϖ = ℎ^m(M).
    pub total_volume: f64,
    pub ball: BallConstants,
}

impl ManifoldModel {
    pub fn new(kind: ManifoldKind) -> Self {
        match kind {
            // ℎ¹(B) = 2r, so any b < 1/π works
            ManifoldKind::Circle => Self {
                kind,
                dim: 1,
                total_volume: 2.0 * PI,
                ball: BallConstants { b: 0.31, r0: 1.0 },
            },
            // ℝ²/2πℤ²: balls are Euclidean discs for r < π, b < π/(4π²)
            ManifoldKind::Torus2 => Self {
                kind,
                dim: 2,
                total_volume: 4.0 * PI * PI,
                ball: BallConstants { b: 0.079, r0: 3.0 },
            },
            ManifoldKind::Sphere2 => Self {
                kind,
                dim: 2,
                total_volume: 4.0 * PI,
                ball: BallConstants { b: 0.12, r0: 1.5 },
            },
        }
    }

    pub fn circle() -> Self {
        Self::new(ManifoldKind::Circle)
    }

    pub fn torus() -> Self {
        Self::new(ManifoldKind::Torus2)
    }

    pub fn sphere() -> Self {
        Self::new(ManifoldKind::Sphere2)
    }

    /// Exact ℎ^m of a geodesic ball of radius r ≤ injectivity radius.
    pub fn ball_volume(&self, r: f64) -> f64 {
        match self.kind {
            ManifoldKind::Circle => 2.0 * r.min(PI),
            ManifoldKind::Torus2 => PI * r * r,
            ManifoldKind::Sphere2 => 2.0 * PI * (1.0 - r.min(PI).cos()),
        }
    }

    /// Checks ℎ^m(B(p,r)) > b ϖ r^m on a grid of r in (0, r0).
    pub fn ball_constants_hold(&self) -> bool {
        let BallConstants { b, r0 } = self.ball;
        (1..=1000).all(|i| {
            let r = r0 * i as f64 / 1000.0 * (1.0 - 1e-12);
            self.ball_volume(r) > b * self.total_volume * r.powi(self.dim as i32)
        })
    }
}

/// A point of M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    /// Angle θ on ℝ/2πℤ.
    Circle(f64),
    /// (x, y) on ℝ²/2πℤ².
    Torus([f64; 2]),
    /// Unit vector in ℝ³.
    Sphere([f64; 3]),
}

impl Point {
    /// Sphere point from polar angle θ ∈ [0, π] and longitude φ.
    pub fn from_polar(theta: f64, phi: f64) -> Self {
        let s = theta.sin();
        Point::Sphere([s * phi.cos(), s * phi.sin(), theta.cos()])
    }

    pub fn kind(&self) -> ManifoldKind {
        match self {
            Point::Circle(_) => ManifoldKind::Circle,
            Point::Torus(_) => ManifoldKind::Torus2,
            Point::Sphere(_) => ManifoldKind::Sphere2,
        }
    }

    /// Embedding coordinates used by the geometry kernels.
    pub fn coords(&self) -> [f64; 3] {
        match *self {
            Point::Circle(t) => [t, 0.0, 0.0],
            Point::Torus([x, y]) => [x, y, 0.0],
            Point::Sphere(v) => v,
        }
    }

    /// Riemannian distance.
    pub fn distance(&self, other: &Point) -> f64 {
        fn wrap(d: f64) -> f64 {
            let d = d.rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        }
        match (self, other) {
            (Point::Circle(a), Point::Circle(b)) => wrap(a - b),
            (Point::Torus(a), Point::Torus(b)) => wrap(a[0] - b[0]).hypot(wrap(a[1] - b[1])),
            (Point::Sphere(a), Point::Sphere(b)) => great_circle(a, b),
            _ => panic!("distance between points of different manifolds"),
        }
    }

    /// Moves along a tangent vector given in the orthonormal frame of
    /// [`EigenspaceSpec::eval_basis_grad`] (first-order retraction).
    pub fn step(&self, v: [f64; 2]) -> Point {
        match *self {
            Point::Circle(t) => Point::Circle((t + v[0]).rem_euclid(2.0 * PI)),
            Point::Torus([x, y]) => Point::Torus([(x + v[0]).rem_euclid(2.0 * PI), (y + v[1]).rem_euclid(2.0 * PI)]),
            Point::Sphere(p) => {
                let (e_theta, e_phi) = sphere_frame(&p);
                let q = [
                    p[0] + v[0] * e_theta[0] + v[1] * e_phi[0],
                    p[1] + v[0] * e_theta[1] + v[1] * e_phi[1],
                    p[2] + v[0] * e_theta[2] + v[1] * e_phi[2],
                ];
                Point::Sphere(normalize(q))
            }
        }
    }
}

pub(crate) fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Great-circle distance between unit vectors.
pub(crate) fn great_circle(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(&c, &c).sqrt().atan2(dot(a, b))
}

/// (cos θ, sin θ, φ) of a unit vector.
#[inline]
fn polar(p: &[f64; 3]) -> (f64, f64, f64) {
    let s = p[0].hypot(p[1]);
    let phi = if s > 0.0 { p[1].atan2(p[0]) } else { 0.0 };
    (p[2], s, phi)
}

/// Orthonormal frame (e_θ, e_φ) at a sphere point; at the poles φ = 0 is used.
fn sphere_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let (c, s, phi) = polar(p);
    let (sp, cp) = phi.sin_cos();
    ([c * cp, c * sp, -s], [-sp, cp, 0.0])
}

/// One real orthonormal eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisFn {
    /// √2 cos kθ or √2 sin kθ.
    Circle { k: u32, sine: bool },
    /// √2 cos ⟨k, x⟩ or √2 sin ⟨k, x⟩.
    Torus { k: [i32; 2], sine: bool },
    /// Real spherical harmonic of degree l; m < 0 selects sin |m|φ.
    Sphere { l: u32, m: i32 },
}

impl BasisFn {
    pub fn manifold(&self) -> ManifoldKind {
        match self {
            BasisFn::Circle { .. } => ManifoldKind::Circle,
            BasisFn::Torus { .. } => ManifoldKind::Torus2,
            BasisFn::Sphere { .. } => ManifoldKind::Sphere2,
        }
    }

    /// Eigenvalue of -Δ.
    pub fn eigenvalue(&self) -> f64 {
        match *self {
            BasisFn::Circle { k, .. } => (k as f64).powi(2),
            BasisFn::Torus { k, .. } => (k[0] as f64).powi(2) + (k[1] as f64).powi(2),
            BasisFn::Sphere { l, .. } => l as f64 * (l as f64 + 1.0),
        }
    }
}

/// An invariant block ℰ^j with -Δ = λ_j on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub lambda: f64,
    pub functions: Vec<BasisFn>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.functions.len()
    }
}

/// A finite-dimensional invariant subspace ℰ ⊥ constants with its derived
/// constants d, c, s and κ = c·s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenspaceSpec {
    pub manifold: ManifoldModel,
    pub blocks: Vec<Block>,
    basis: Vec<BasisFn>,
    dim: usize,
    s: f64,
    lmax: usize,
}

impl EigenspaceSpec {
    /// Builds a spec from explicit blocks, validating that every function
    /// lives on the manifold and is a -Δ eigenfunction with the block's λ.
    pub fn from_blocks(manifold: ManifoldModel, blocks: Vec<Block>) -> Result<Self> {
        let mut basis = Vec::new();
        let mut seen = BTreeSet::new();
        let mut lmax = 0usize;
        for b in &blocks {
            if b.functions.is_empty() {
                return Err(Error::InvalidSpec("empty block".into()));
            }
            if !(b.lambda > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "eigenvalue {} is not positive (ℰ must be orthogonal to constants)",
                    b.lambda
                )));
            }
            for f in &b.functions {
                if f.manifold() != manifold.kind {
                    return Err(Error::InvalidSpec(format!("{f:?} does not live on {:?}", manifold.kind)));
                }
                if (f.eigenvalue() - b.lambda).abs() > 1e-12 * b.lambda {
                    return Err(Error::InvalidSpec(format!("{f:?} is not in the λ={} eigenspace", b.lambda)));
                }
                if !seen.insert(format!("{f:?}")) {
                    return Err(Error::InvalidSpec(format!("{f:?} listed twice")));
                }
                if let BasisFn::Sphere { l, m } = *f {
                    if m.unsigned_abs() > l {
                        return Err(Error::InvalidSpec(format!("|m| > l in {f:?}")));
                    }
                    lmax = lmax.max(l as usize);
                }
                basis.push(*f);
            }
        }
        let dim = basis.len();
        if dim < 2 {
            return Err(Error::InvalidSpec("dim ℰ must exceed 1".into()));
        }
        let trace: f64 = blocks.iter().map(|b| b.lambda * b.dim() as f64).sum();
        let s = (trace / (manifold.dim as f64 * dim as f64)).sqrt();
        Ok(Self {
            manifold,
            blocks,
            basis,
            dim,
            s,
            lmax,
        })
    }

    pub fn basis(&self) -> &[BasisFn] {
        &self.basis
    }

    /// dim ℰ.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// d = dim ℰ - 1 = dim 𝒮.
    pub fn d(&self) -> u32 {
        (self.dim - 1) as u32
    }

    /// c = √(dim ℰ), the sharp sup bound on 𝒮.
    pub fn c(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    /// Scaling factor s with s² = Σ α_j λ_j / m.
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Lipschitz constant κ = c·s of unit-norm elements.
    pub fn kappa(&self) -> f64 {
        self.c() * self.s
    }

    /// α_j = dim ℰ^j / dim ℰ.
    pub fn alphas(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.dim() as f64 / self.dim as f64).collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.blocks.iter().map(|b| b.lambda).fold(0.0, f64::max)
    }

    pub fn max_frequency(&self) -> u32 {
        self.basis
            .iter()
            .map(|f| match *f {
                BasisFn::Circle { k, .. } => k,
                BasisFn::Torus { k, .. } => k[0].unsigned_abs().max(k[1].unsigned_abs()),
                BasisFn::Sphere { l, .. } => l,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn evaluator(&self) -> BasisEvaluator<'_> {
        BasisEvaluator {
            spec: self,
            legendre: (self.manifold.kind == ManifoldKind::Sphere2).then(|| LegendreTable::new(self.lmax)),
        }
    }

    /// All basis values at p (allocating convenience wrapper).
    pub fn eval_basis(&self, p: &Point) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.evaluator().values(p, &mut v);
        v
    }

    /// All basis values and gradients (orthonormal tangent frame) at p.
    pub fn eval_basis_grad(&self, p: &Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut v = vec![0.0; self.dim];
        let mut g = vec![[0.0; 2]; self.dim];
        self.evaluator().values_grads(p, &mut v, &mut g);
        (v, g)
    }
}

/// Reusable evaluation scratch for one spec.
pub struct BasisEvaluator<'a> {
    spec: &'a EigenspaceSpec,
    legendre: Option<LegendreTable>,
}

impl<'a> BasisEvaluator<'a> {
    pub fn spec(&self) -> &'a EigenspaceSpec {
        self.spec
    }

    pub fn values(&mut self, p: &Point, out: &mut [f64]) {
        self.eval(p, out, None);
    }

    pub fn values_grads(&mut self, p: &Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        self.eval(p, vals, Some(grads));
    }

    /// u(p) for the coefficient vector `coeffs`.
    pub fn value(&mut self, coeffs: &[f64], p: &Point) -> f64 {
        let mut buf = [0.0f64; 64];
        if self.spec.dim <= buf.len() {
            let b = &mut buf[..self.spec.dim];
            self.values(p, b);
            b.iter().zip(coeffs).map(|(e, c)| e * c).sum()
        } else {
            let mut b = vec![0.0; self.spec.dim];
            self.values(p, &mut b);
            b.iter().zip(coeffs).map(|(e, c)| e * c).sum()
        }
    }

    /// (u(p), ∇u(p)) for the coefficient vector `coeffs`.
    pub fn value_grad(&mut self, coeffs: &[f64], p: &Point) -> (f64, [f64; 2]) {
        let n = self.spec.dim;
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.values_grads(p, &mut v, &mut g);
        let mut u = 0.0;
        let mut du = [0.0; 2];
        for i in 0..n {
            u += coeffs[i] * v[i];
            du[0] += coeffs[i] * g[i][0];
            du[1] += coeffs[i] * g[i][1];
        }
        (u, du)
    }

    fn eval(&mut self, p: &Point, vals: &mut [f64], mut grads: Option<&mut [[f64; 2]]>) {
        match *p {
            Point::Circle(t) => {
                for (i, f) in self.spec.basis.iter().enumerate() {
                    let BasisFn::Circle { k, sine } = *f else {
                        panic!("circle point for non-circle basis")
                    };
                    let k = k as f64;
                    let (sn, cs) = (k * t).sin_cos();
                    let (v, dv) = if sine { (sn, k * cs) } else { (cs, -k * sn) };
                    vals[i] = SQRT_2 * v;
                    if let Some(g) = grads.as_deref_mut() {
                        g[i] = [SQRT_2 * dv, 0.0];
                    }
                }
            }
            Point::Torus([x, y]) => {
                for (i, f) in self.spec.basis.iter().enumerate() {
                    let BasisFn::Torus { k, sine } = *f else {
                        panic!("torus point for non-torus basis")
                    };
                    let (k0, k1) = (k[0] as f64, k[1] as f64);
                    let (sn, cs) = (k0 * x + k1 * y).sin_cos();
                    let (v, dv) = if sine { (sn, cs) } else { (cs, -sn) };
                    vals[i] = SQRT_2 * v;
                    if let Some(g) = grads.as_deref_mut() {
                        g[i] = [SQRT_2 * dv * k0, SQRT_2 * dv * k1];
                    }
                }
            }
            Point::Sphere(ref v) => {
                let (x, s, phi) = polar(v);
                let table = self.legendre.as_mut().expect("sphere evaluator has a Legendre table");
                table.fill(x, s);
                for (i, f) in self.spec.basis.iter().enumerate() {
                    let BasisFn::Sphere { l, m } = *f else {
                        panic!("sphere point for non-sphere basis")
                    };
                    let (l, am) = (l as usize, m.unsigned_abs() as usize);
                    if m == 0 {
                        vals[i] = table.p(l, 0);
                        if let Some(g) = grads.as_deref_mut() {
                            g[i] = [table.dp(l, 0), 0.0];
                        }
                        continue;
                    }
                    let (sn, cs) = (am as f64 * phi).sin_cos();
                    let (trig, dtrig) = if m > 0 { (cs, -sn) } else { (sn, cs) };
                    vals[i] = SQRT_2 * table.p(l, am) * trig;
                    if let Some(g) = grads.as_deref_mut() {
                        g[i] = [
                            SQRT_2 * table.dp(l, am) * trig,
                            SQRT_2 * am as f64 * table.q(l, am) * dtrig,
                        ];
                    }
                }
            }
        }
    }
}

/// ℰ = span{√2 cos kθ, √2 sin kθ : k ∈ K} on the circle ℝ/2πℤ.
pub fn make_circle_space(spectrum: &[u32]) -> Result<EigenspaceSpec> {
    let ks: BTreeSet<u32> = spectrum.iter().copied().collect();
    if ks.is_empty() {
        return Err(Error::InvalidSpec("empty circle spectrum".into()));
    }
    if ks.contains(&0) {
        return Err(Error::InvalidSpec("frequency 0 (constants) is not allowed".into()));
    }
    let blocks = ks
        .into_iter()
        .map(|k| Block {
            lambda: (k as f64).powi(2),
            functions: vec![BasisFn::Circle { k, sine: false }, BasisFn::Circle { k, sine: true }],
        })
        .collect();
    EigenspaceSpec::from_blocks(ManifoldModel::circle(), blocks)
}

/// Representative of {k, -k}: first non-zero coordinate positive.
fn sign_class(k: [i32; 2]) -> [i32; 2] {
    if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
        k
    } else {
        [-k[0], -k[1]]
    }
}

/// The BC₂-orbit of k (permutations and sign changes), one vector per ±pair.
pub fn torus_orbit(k: [i32; 2]) -> Vec<[i32; 2]> {
    let [a, b] = k;
    let all = [[a, b], [-a, b], [a, -b], [-a, -b], [b, a], [-b, a], [b, -a], [-b, -a]];
    let set: BTreeSet<[i32; 2]> = all.into_iter().map(sign_class).collect();
    set.into_iter().collect()
}

/// ℰ on ℝ²/2πℤ² spanned by √2 cos⟨k,x⟩, √2 sin⟨k,x⟩ over the BC₂-closure of
/// the generators; one block per orbit.
pub fn make_torus_space(generators: &[[i32; 2]]) -> Result<EigenspaceSpec> {
    if generators.is_empty() {
        return Err(Error::InvalidSpec("empty torus spectrum".into()));
    }
    let mut orbits: BTreeSet<Vec<[i32; 2]>> = BTreeSet::new();
    for &k in generators {
        if k == [0, 0] {
            return Err(Error::InvalidSpec("zero frequency vector (constants) is not allowed".into()));
        }
        orbits.insert(torus_orbit(k));
    }
    let blocks = orbits
        .into_iter()
        .map(|orbit| {
            let k = orbit[0];
            let lambda = (k[0] as f64).powi(2) + (k[1] as f64).powi(2);
            let functions = orbit
                .iter()
                .flat_map(|&k| [BasisFn::Torus { k, sine: false }, BasisFn::Torus { k, sine: true }])
                .collect();
            Block { lambda, functions }
        })
        .collect();
    EigenspaceSpec::from_blocks(ManifoldModel::torus(), blocks)
}

/// Real spherical harmonics of the given degrees on S², normalized for the
/// probability measure.
pub fn make_sphere_space(degrees: &[u32]) -> Result<EigenspaceSpec> {
    let ns: BTreeSet<u32> = degrees.iter().copied().collect();
    if ns.is_empty() {
        return Err(Error::InvalidSpec("empty list of degrees".into()));
    }
    if ns.contains(&0) {
        return Err(Error::InvalidSpec("degree 0 (constants) is not allowed".into()));
    }
    let blocks = ns
        .into_iter()
        .map(|l| Block {
            lambda: l as f64 * (l as f64 + 1.0),
            functions: (-(l as i32)..=l as i32).map(|m| BasisFn::Sphere { l, m }).collect(),
        })
        .collect();
    EigenspaceSpec::from_blocks(ManifoldModel::sphere(), blocks)
}

/// max_p |Σ_i e_i(p)² - dim ℰ| over the given points.
pub fn kernel_diagonal_check(spec: &EigenspaceSpec, points: &[Point]) -> f64 {
    let mut ev = spec.evaluator();
    let mut v = vec![0.0; spec.dim()];
    points
        .iter()
        .map(|p| {
            ev.values(p, &mut v);
            (v.iter().map(|x| x * x).sum::<f64>() - spec.dim() as f64).abs()
        })
        .fold(0.0, f64::max)
}
