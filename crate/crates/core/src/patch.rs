//! Multi-sided patch boundaries inside single-sheet cells: corner points on
//! cell edges, the ordered boundary loop, and boundary curves traced on the
//! cell faces.

use std::cmp::Ordering;

use thiserror::Error;

use crate::field::{FieldError, ScalarField};
use crate::geom::{newell_normal, Point3, Vec3};
use crate::partition::{classification_iso, edge_sign_changes, sign_of, ConvexCell, Plane};

/// Samples per cell edge used to detect repeated crossings.
const EDGE_SAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatchError {
    #[error("cell edge {edge} crosses the surface more than once")]
    MultipleCrossings { edge: usize },
    #[error("face {face} holds {count} corner points")]
    FaceCorners { face: usize, count: usize },
    #[error("corner points form {loops} disjoint loops")]
    MultipleLoops { loops: usize },
    #[error("no corner points in cell")]
    NoCorners,
    #[error("boundary curve corrector diverged at ({x}, {y}, {z})")]
    CorrectorDivergence { x: f64, y: f64, z: f64 },
    #[error("boundary curve march exceeded {limit} without reaching its end corner")]
    TraceTooLong { limit: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Per-cell tolerances, all derived from the field scale (largest `|F|` at
/// the cell vertices) and the cell diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub scale: f64,
    /// `|F|` bound for roots on edges and rays.
    pub root: f64,
    /// Bracket width for edge roots, relative to edge length.
    pub x_rel: f64,
    /// `|F|` bound for traced boundary curves.
    pub curve: f64,
    /// Distance bound to a face plane.
    pub plane: f64,
}

impl Tolerances {
    pub fn for_cell(field: &ScalarField, cell: &ConvexCell) -> Self {
        let scale = cell
            .vertices
            .iter()
            .map(|&v| field.value(v).abs())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        Self::with_scale(scale, cell.diameter())
    }

    /// Tolerances for an explicit field scale, e.g. one shared by all cells
    /// of a partition so neighbours resolve shared roots identically.
    pub fn with_scale(scale: f64, diameter: f64) -> Self {
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        Tolerances {
            scale,
            root: 1e-10 * scale,
            x_rel: 1e-12,
            curve: 1e-8 * (1.0 + scale),
            plane: 1e-9 * diameter,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSide {
    pub face: usize,
    pub face_plane: Plane,
    /// From corner `i` to corner `i + 1`; the endpoints are the corners
    /// themselves. Just the two corners until traced.
    pub polyline: Vec<Point3>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchBoundary {
    pub corners: Vec<Point3>,
    /// Hosting cell edge of each corner.
    pub corner_edges: Vec<usize>,
    /// Unit cell-edge direction at each corner, pointing to the positive side.
    pub corner_edge_dirs: Vec<Vec3>,
    pub sides: Vec<PatchSide>,
}

impl PatchBoundary {
    pub fn n(&self) -> usize {
        self.corners.len()
    }

    pub fn is_traced(&self) -> bool {
        self.sides.iter().any(|s| s.polyline.len() > 2)
    }
}

/// Edge endpoints in lexicographic order, so both cells sharing an edge
/// see the same parameterization.
fn canonical(a: Point3, b: Point3) -> (Point3, Point3, bool) {
    if a.lex_cmp(b) == Ordering::Greater {
        (b, a, true)
    } else {
        (a, b, false)
    }
}

#[inline]
fn at(a: Point3, b: Point3, t: f64) -> Point3 {
    if t == 1.0 {
        b
    } else {
        a.lerp(b, t)
    }
}

/// Bisection root on segment `a..b` whose endpoints classify differently.
pub(crate) fn bisect_segment(
    field: &ScalarField,
    a: Point3,
    b: Point3,
    iso: f64,
    tol_root: f64,
    tol_t: f64,
) -> Result<Point3, FieldError> {
    let sa = sign_of(field.try_value(a)?, iso);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (field.try_value(a)?.abs(), a);
    let fb = field.try_value(b)?;
    if fb.abs() < best.0 {
        best = (fb.abs(), b);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = at(a, b, mid);
        let f = field.try_value(p)?;
        if f.abs() < best.0 {
            best = (f.abs(), p);
        }
        if best.0 < tol_root && hi - lo < tol_t {
            break;
        }
        if sign_of(f, iso) == sa {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Ok(best.1)
}

/// Roots on every cell edge whose endpoints lie on different sides.
pub fn find_corner_points(field: &ScalarField, cell: &ConvexCell) -> Result<Vec<(usize, Point3)>, PatchError> {
    find_corner_points_with(field, cell, &Tolerances::for_cell(field, cell))
}

pub fn find_corner_points_with(
    field: &ScalarField,
    cell: &ConvexCell,
    tol: &Tolerances,
) -> Result<Vec<(usize, Point3)>, PatchError> {
    let iso = classification_iso(field, cell);
    let mut out = Vec::new();
    for e in 0..cell.edges.len() {
        let (a, b) = cell.edge_points(e);
        let (a, b, _) = canonical(a, b);
        let sa = sign_of(field.try_value(a)?, iso);
        let sb = sign_of(field.try_value(b)?, iso);
        let changes = edge_sign_changes(field, a, b, EDGE_SAMPLES, iso).ok_or(FieldError::Evaluation {
            x: a.x,
            y: a.y,
            z: a.z,
        })?;
        if sa == sb {
            if changes > 0 {
                return Err(PatchError::MultipleCrossings { edge: e });
            }
            continue;
        }
        if changes > 1 {
            return Err(PatchError::MultipleCrossings { edge: e });
        }
        out.push((e, bisect_segment(field, a, b, iso, tol.root, tol.x_rel)?));
    }
    Ok(out)
}

/// Unit direction of cell edge `e`, toward its positive endpoint.
pub(crate) fn edge_direction(field: &ScalarField, cell: &ConvexCell, e: usize, iso: f64) -> Vec3 {
    let (a, b) = cell.edge_points(e);
    let d = (b - a).normalize();
    if sign_of(field.value(b), iso) == Some(true) {
        d
    } else {
        -d
    }
}

/// Orders the corners into one loop by walking faces. The loop runs
/// counter-clockwise seen from the positive side: its right-hand normal
/// agrees with the summed field gradient at the corners.
pub fn build_boundary_loop(
    field: &ScalarField,
    cell: &ConvexCell,
    corners: &[(usize, Point3)],
) -> Result<PatchBoundary, PatchError> {
    if corners.is_empty() {
        return Err(PatchError::NoCorners);
    }
    let iso = classification_iso(field, cell);
    let mut at_edge = vec![None; cell.edges.len()];
    for (i, &(e, _)) in corners.iter().enumerate() {
        at_edge[e] = Some(i);
    }
    // per corner: the two faces it connects through
    let mut links: Vec<Vec<(usize, usize)>> = vec![Vec::new(); corners.len()];
    for (f, face) in cell.faces.iter().enumerate() {
        let on: Vec<usize> = face.edges.iter().filter_map(|&e| at_edge[e]).collect();
        match on.len() {
            0 => {}
            2 => {
                links[on[0]].push((f, on[1]));
                links[on[1]].push((f, on[0]));
            }
            count => return Err(PatchError::FaceCorners { face: f, count }),
        }
    }
    if let Some(i) = links.iter().position(|l| l.len() != 2) {
        return Err(PatchError::FaceCorners {
            face: cell.edges[corners[i].0].faces[0],
            count: links[i].len(),
        });
    }

    let mut order = vec![0usize];
    let mut faces = Vec::new();
    let mut prev_face = usize::MAX;
    let mut cur = 0;
    loop {
        let &(f, next) = links[cur].iter().find(|(f, _)| *f != prev_face).unwrap();
        faces.push(f);
        if next == 0 {
            break;
        }
        if order.len() > corners.len() {
            return Err(PatchError::MultipleLoops { loops: 0 });
        }
        order.push(next);
        prev_face = f;
        cur = next;
    }
    if order.len() != corners.len() {
        let mut seen = vec![false; corners.len()];
        let mut loops = 0;
        for s in 0..corners.len() {
            if seen[s] {
                continue;
            }
            loops += 1;
            let (mut c, mut pf) = (s, usize::MAX);
            while !seen[c] {
                seen[c] = true;
                let &(f, n) = links[c].iter().find(|(f, _)| *f != pf).unwrap();
                pf = f;
                c = n;
            }
        }
        return Err(PatchError::MultipleLoops { loops });
    }

    let pts: Vec<Point3> = order.iter().map(|&i| corners[i].1).collect();
    let mut grad = Vec3::ZERO;
    for &p in &pts {
        grad += field.gradient(p)?.normalize();
    }
    if newell_normal(&pts).dot(grad) < 0.0 {
        // reverse traversal, keeping corner 0 first
        order[1..].reverse();
        faces.reverse();
    }

    let corner_edges: Vec<usize> = order.iter().map(|&i| corners[i].0).collect();
    let corner_pts: Vec<Point3> = order.iter().map(|&i| corners[i].1).collect();
    let n = corner_pts.len();
    let sides = (0..n)
        .map(|i| PatchSide {
            face: faces[i],
            face_plane: cell.face_plane(faces[i]),
            polyline: vec![corner_pts[i], corner_pts[(i + 1) % n]],
        })
        .collect();
    Ok(PatchBoundary {
        corner_edge_dirs: corner_edges.iter().map(|&e| edge_direction(field, cell, e, iso)).collect(),
        corners: corner_pts,
        corner_edges,
        sides,
    })
}

/// Newton steps along the in-plane gradient until `|F| < tol`; the result
/// lies in `plane`.
pub fn snap_in_plane(field: &ScalarField, plane: &Plane, p: Point3, tol: f64) -> Result<Point3, PatchError> {
    let n = plane.normal;
    let mut q = plane.project(p);
    for _ in 0..20 {
        let f = field.try_value(q)?;
        if f.abs() < tol {
            return Ok(q);
        }
        let g = field.gradient(q)?;
        let gp = g - n * g.dot(n);
        let gg = gp.norm_squared();
        if gg == 0.0 {
            break;
        }
        q = plane.project(q - gp * (f / gg));
    }
    Err(PatchError::CorrectorDivergence { x: q.x, y: q.y, z: q.z })
}

/// Predictor-corrector march along `F = 0` within `plane` from `a` to `b`.
pub fn trace_boundary_curve(
    field: &ScalarField,
    plane: &Plane,
    a: Point3,
    b: Point3,
    step: f64,
    tol_curve: f64,
) -> Result<Vec<Point3>, PatchError> {
    let n = plane.normal;
    let chord = a.distance(b);
    let limit = 10.0 * chord;
    let mut out = vec![a];
    if chord < 1.5 * step {
        out.push(b);
        return Ok(out);
    }
    let mut p = a;
    let mut t_prev = (b - a) / chord;
    let mut length = 0.0;
    loop {
        let g = field.gradient(p)?;
        let mut t = n.cross(g).normalize();
        if t == Vec3::ZERO {
            t = t_prev;
        } else if t.dot(t_prev) < 0.0 {
            t = -t;
        }
        let q = snap_in_plane(field, plane, p + t * step, tol_curve)?;
        length += q.distance(p);
        if length > limit {
            return Err(PatchError::TraceTooLong { limit });
        }
        if q.distance(b) < 1.5 * step {
            // drop a point that would sit almost on top of b
            if q.distance(b) > 0.25 * step {
                out.push(q);
            }
            out.push(b);
            return Ok(out);
        }
        out.push(q);
        t_prev = (q - p).normalize();
        p = q;
    }
}

/// Replaces every side's straight chord by a traced curve. Each curve is
/// traced from its lexicographically smaller end, so the two cells sharing a
/// face produce the same polyline.
pub fn trace_sides(field: &ScalarField, boundary: &mut PatchBoundary, step: f64, tol_curve: f64) -> Result<(), PatchError> {
    let n = boundary.n();
    for i in 0..n {
        let a = boundary.corners[i];
        let b = boundary.corners[(i + 1) % n];
        let (s, e, flipped) = canonical(a, b);
        let plane = boundary.sides[i].face_plane;
        let mut line = trace_boundary_curve(field, &plane, s, e, step, tol_curve)?;
        if flipped {
            line.reverse();
        }
        boundary.sides[i].polyline = line;
    }
    Ok(())
}

/// Default trace step for a face: 1/32 of its diagonal (largest vertex
/// distance on the face).
pub fn default_trace_step(cell: &ConvexCell, face: usize) -> f64 {
    let vs = &cell.faces[face].vertices;
    let mut d: f64 = 0.0;
    for (i, &a) in vs.iter().enumerate() {
        for &b in &vs[i + 1..] {
            d = d.max(cell.vertices[a].distance(cell.vertices[b]));
        }
    }
    d / 32.0
}
