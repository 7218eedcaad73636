//! Level-set geometry on cell meshes of 2-manifolds: marching squares,
//! sub-cell excursion areas and polyline intersections.

use crate::manifold::{MeshCell, SurfaceMesh};

/// Local coordinates of the cell corners, in cell order.
const CORNER: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

/// One piece of a level polyline, confined to a mesh cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub cell: u32,
    /// Endpoints in cell-local coordinates.
    pub local: [[f64; 2]; 2],
    /// Endpoints in geometry coordinates (torus: unwrapped (x, y, 0);
    /// sphere: unit vectors).
    pub ends: [[f64; 3]; 2],
    pub length: f64,
}

#[inline]
fn edge_point(w: &[f64; 4], e: usize) -> [f64; 2] {
    let (i, j) = (e, (e + 1) % 4);
    let f = w[i] / (w[i] - w[j]);
    [
        CORNER[i][0] + f * (CORNER[j][0] - CORNER[i][0]),
        CORNER[i][1] + f * (CORNER[j][1] - CORNER[i][1]),
    ]
}

/// Marching squares for {g = 0} where g holds node values of u - level.
/// A corner is inside when g ≥ 0; saddle cells are resolved by the sign of
/// the mean of the four corners.
pub fn marching_squares(mesh: &SurfaceMesh, g: &[f64], out: &mut Vec<Segment>) {
    out.clear();
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let w = cell.nodes.map(|n| g[n as usize]);
        let inside = w.map(|v| v >= 0.0);
        let mut crossing = [0usize; 4];
        let mut nc = 0;
        for e in 0..4 {
            if inside[e] != inside[(e + 1) % 4] {
                crossing[nc] = e;
                nc += 1;
            }
        }
        match nc {
            0 => {}
            2 => push_segment(mesh, cell, ci, &w, crossing[0], crossing[1], out),
            4 => {
                let center = 0.25 * (w[0] + w[1] + w[2] + w[3]) >= 0.0;
                if center == inside[0] {
                    // corners 0 and 2 joined through the centre: cut off 1 and 3
                    push_segment(mesh, cell, ci, &w, 0, 1, out);
                    push_segment(mesh, cell, ci, &w, 2, 3, out);
                } else {
                    push_segment(mesh, cell, ci, &w, 3, 0, out);
                    push_segment(mesh, cell, ci, &w, 1, 2, out);
                }
            }
            _ => unreachable!("a closed quadrilateral has an even number of sign changes"),
        }
    }
}

fn push_segment(mesh: &SurfaceMesh, cell: &MeshCell, ci: usize, w: &[f64; 4], e0: usize, e1: usize, out: &mut Vec<Segment>) {
    let la = edge_point(w, e0);
    let lb = edge_point(w, e1);
    let a = mesh.interpolate(cell, la[0], la[1]);
    let b = mesh.interpolate(cell, lb[0], lb[1]);
    out.push(Segment {
        cell: ci as u32,
        local: [la, lb],
        ends: [a, b],
        length: mesh.length(&a, &b),
    });
}

/// Fraction of a triangle where the linear interpolant of (a, b, c) is ≥ 0.
#[inline]
fn triangle_fraction(a: f64, b: f64, c: f64) -> f64 {
    let mut v = [a, b, c];
    v.sort_by(f64::total_cmp);
    let [v0, v1, v2] = v;
    if v0 >= 0.0 {
        1.0
    } else if v2 < 0.0 {
        0.0
    } else if v1 < 0.0 {
        // only the top vertex is inside
        v2 * v2 / ((v2 - v0) * (v2 - v1))
    } else {
        1.0 - v0 * v0 / ((v1 - v0) * (v2 - v0))
    }
}

/// ℎ² of {g ≥ 0} with g linear on the two triangles of each cell.
pub fn excursion_area(mesh: &SurfaceMesh, g: &[f64]) -> f64 {
    let mut total = 0.0;
    for cell in &mesh.cells {
        let w = cell.nodes.map(|n| g[n as usize]);
        if w.iter().all(|v| *v >= 0.0) {
            total += cell.area();
        } else if w.iter().any(|v| *v >= 0.0) {
            total += cell.tri_area[0] * triangle_fraction(w[0], w[1], w[2])
                + cell.tri_area[1] * triangle_fraction(w[0], w[2], w[3]);
        }
    }
    total
}

/// Outcome of intersecting two polylines.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrossingCount {
    pub count: usize,
    /// Crossings at an angle below 1e-3 rad (counted, but unreliable).
    pub near_tangential: usize,
    /// Crossings within 1e-12 of a segment end, i.e. on a cell edge.
    pub on_edge: usize,
}

/// Counts crossings between two polylines produced by [`marching_squares`]
/// on the same mesh, cell by cell in local coordinates.
pub fn count_crossings(p: &[Segment], q: &[Segment]) -> CrossingCount {
    let mut out = CrossingCount::default();
    let (mut i, mut j) = (0, 0);
    while i < p.len() && j < q.len() {
        let (cp, cq) = (p[i].cell, q[j].cell);
        if cp < cq {
            i += 1;
            continue;
        }
        if cq < cp {
            j += 1;
            continue;
        }
        let i_end = i + p[i..].iter().take_while(|s| s.cell == cp).count();
        let j_end = j + q[j..].iter().take_while(|s| s.cell == cq).count();
        for a in &p[i..i_end] {
            for b in &q[j..j_end] {
                if let Some((sa, sb, sin_angle)) = intersect(&a.local, &b.local) {
                    out.count += 1;
                    if sin_angle < 1e-3 {
                        out.near_tangential += 1;
                    }
                    let edge = |t: f64| t < 1e-12 || t > 1.0 - 1e-12;
                    if edge(sa) || edge(sb) {
                        out.on_edge += 1;
                    }
                }
            }
        }
        i = i_end;
        j = j_end;
    }
    out
}

/// Intersection parameters of two closed segments and |sin| of their angle.
fn intersect(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> Option<(f64, f64, f64)> {
    let r = [a[1][0] - a[0][0], a[1][1] - a[0][1]];
    let s = [b[1][0] - b[0][0], b[1][1] - b[0][1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let d = [b[0][0] - a[0][0], b[0][1] - a[0][1]];
    let t = (d[0] * s[1] - d[1] * s[0]) / den;
    let u = (d[0] * r[1] - d[1] * r[0]) / den;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        let sin = den.abs() / (r[0].hypot(r[1]) * s[0].hypot(s[1]));
        Some((t, u, sin))
    } else {
        None
    }
}
