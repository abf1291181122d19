//! Heuristic single-sheet classifier.
//!
//! A cell holds a single sheet when, at the sampling resolution,
//! (a) the negative and the positive samples inside the cell each form one
//! 6-connected component, (b) every face sees either no crossing or exactly
//! two crossings on its edge cycle, with each sign connected on the face,
//! (c) every cell edge changes sign at most once, and (d) the crossings pair
//! up across faces into exactly one boundary loop. A surface that touches no
//! cell edge (e.g. a closed sheet floating inside the cell) fails (d).

use super::ConvexCell;
use crate::field::ScalarField;
use crate::geom::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheetClass {
    NoSurface,
    SingleSheet,
    MultiSheetOrAmbiguous,
}

/// Isolevel used to classify signs: `F = 0` exactly counts as negative.
pub(crate) fn classification_iso(field: &ScalarField, cell: &ConvexCell) -> f64 {
    let scale = cell
        .vertices
        .iter()
        .map(|&v| field.value(v).abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    1e-12 * if scale > 0.0 { scale } else { 1.0 }
}

/// `Some(true)` for positive, `Some(false)` for negative, `None` if the field
/// is undefined.
#[inline]
pub(crate) fn sign_of(v: f64, iso: f64) -> Option<bool> {
    if v.is_nan() {
        None
    } else {
        Some(v > iso)
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Number of same-sign components per sign on a sampled graph.
fn components(signs: &[Option<bool>], neighbours: &[(usize, usize)]) -> (usize, usize) {
    let mut dsu = Dsu::new(signs.len());
    for &(a, b) in neighbours {
        if signs[a].is_some() && signs[a] == signs[b] {
            dsu.union(a, b);
        }
    }
    let (mut neg, mut pos) = (0, 0);
    for i in 0..signs.len() {
        if dsu.find(i) == i {
            match signs[i] {
                Some(true) => pos += 1,
                Some(false) => neg += 1,
                None => {}
            }
        }
    }
    (neg, pos)
}

enum Outcome {
    Ambiguous,
    Signs { neg: bool, pos: bool },
}

fn volume_check(field: &ScalarField, cell: &ConvexCell, n: usize, iso: f64) -> Outcome {
    let (lo, hi) = cell.bounds();
    let eps = cell.eps();
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
    let mut signs = vec![None; n * n * n];
    let mut inside = vec![false; n * n * n];
    let step = (hi - lo) / (n - 1) as f64;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = Vec3::new(
                    if i == n - 1 { hi.x } else { lo.x + step.x * i as f64 },
                    if j == n - 1 { hi.y } else { lo.y + step.y * j as f64 },
                    if k == n - 1 { hi.z } else { lo.z + step.z * k as f64 },
                );
                if cell.aabb.is_some() || cell.contains(p, eps) {
                    let s = sign_of(field.value(p), iso);
                    if s.is_none() {
                        return Outcome::Ambiguous;
                    }
                    signs[idx(i, j, k)] = s;
                    inside[idx(i, j, k)] = true;
                }
            }
        }
    }
    let mut nb = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let a = idx(i, j, k);
                if !inside[a] {
                    continue;
                }
                if i + 1 < n && inside[idx(i + 1, j, k)] {
                    nb.push((a, idx(i + 1, j, k)));
                }
                if j + 1 < n && inside[idx(i, j + 1, k)] {
                    nb.push((a, idx(i, j + 1, k)));
                }
                if k + 1 < n && inside[idx(i, j, k + 1)] {
                    nb.push((a, idx(i, j, k + 1)));
                }
            }
        }
    }
    let (neg, pos) = components(&signs, &nb);
    if neg > 1 || pos > 1 {
        return Outcome::Ambiguous;
    }
    Outcome::Signs { neg: neg > 0, pos: pos > 0 }
}

fn face_check(field: &ScalarField, cell: &ConvexCell, face: usize, n: usize, iso: f64) -> Outcome {
    let plane = cell.face_plane(face);
    let helper = if plane.normal.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    let u = plane.normal.cross(helper).normalize();
    let v = plane.normal.cross(u);
    let origin = plane.normal * plane.offset;
    let poly: Vec<(f64, f64)> = cell.faces[face]
        .vertices
        .iter()
        .map(|&i| {
            let d = cell.vertices[i] - origin;
            (d.dot(u), d.dot(v))
        })
        .collect();
    let (mut umin, mut vmin, mut umax, mut vmax) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(a, b) in &poly {
        umin = umin.min(a);
        umax = umax.max(a);
        vmin = vmin.min(b);
        vmax = vmax.max(b);
    }
    let tol = cell.eps();
    // Loops are CCW seen from outside, i.e. CCW in (u, v) since u × v = n.
    let inside = |a: f64, b: f64| {
        (0..poly.len()).all(|i| {
            let (x0, y0) = poly[i];
            let (x1, y1) = poly[(i + 1) % poly.len()];
            let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
            (x1 - x0) * (b - y0) - (y1 - y0) * (a - x0) >= -tol * len
        })
    };
    let idx = |i: usize, j: usize| j * n + i;
    let mut signs = vec![None; n * n];
    let mut present = vec![false; n * n];
    for j in 0..n {
        for i in 0..n {
            let a = umin + (umax - umin) * i as f64 / (n - 1) as f64;
            let b = vmin + (vmax - vmin) * j as f64 / (n - 1) as f64;
            if inside(a, b) {
                let p: Point3 = origin + u * a + v * b;
                let s = sign_of(field.value(p), iso);
                if s.is_none() {
                    return Outcome::Ambiguous;
                }
                signs[idx(i, j)] = s;
                present[idx(i, j)] = true;
            }
        }
    }
    let mut nb = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if !present[idx(i, j)] {
                continue;
            }
            if i + 1 < n && present[idx(i + 1, j)] {
                nb.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < n && present[idx(i, j + 1)] {
                nb.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    let (neg, pos) = components(&signs, &nb);
    if neg > 1 || pos > 1 {
        return Outcome::Ambiguous;
    }
    Outcome::Signs { neg: neg > 0, pos: pos > 0 }
}

/// Number of sign changes along a cell edge sampled at `m` points, counted
/// from the endpoint classification inwards.
pub(crate) fn edge_sign_changes(field: &ScalarField, a: Point3, b: Point3, m: usize, iso: f64) -> Option<usize> {
    let mut prev = sign_of(field.value(a), iso)?;
    let mut changes = 0;
    for s in 1..m {
        let p = if s == m - 1 { b } else { a.lerp(b, s as f64 / (m - 1) as f64) };
        let cur = sign_of(field.value(p), iso)?;
        if cur != prev {
            changes += 1;
        }
        prev = cur;
    }
    Some(changes)
}

/// Classifies a cell by sampling the field sign on a grid of
/// `samples_per_axis` points per axis (at least 4), on each face, and along
/// each edge at twice that density.
pub fn sheet_test(field: &ScalarField, cell: &ConvexCell, samples_per_axis: usize) -> SheetClass {
    let n = samples_per_axis.max(4);
    let iso = classification_iso(field, cell);

    let mut any_neg = false;
    let mut any_pos = false;

    let mut crossing = vec![false; cell.edges.len()];
    for (e, c) in crossing.iter_mut().enumerate() {
        let (a, b) = cell.edge_points(e);
        match edge_sign_changes(field, a, b, 2 * n, iso) {
            None => return SheetClass::MultiSheetOrAmbiguous,
            Some(0) => {}
            Some(1) => *c = true,
            Some(_) => return SheetClass::MultiSheetOrAmbiguous,
        }
    }
    for &v in &cell.vertices {
        match sign_of(field.value(v), iso) {
            Some(true) => any_pos = true,
            Some(false) => any_neg = true,
            None => return SheetClass::MultiSheetOrAmbiguous,
        }
    }

    match volume_check(field, cell, n, iso) {
        Outcome::Ambiguous => return SheetClass::MultiSheetOrAmbiguous,
        Outcome::Signs { neg, pos } => {
            any_neg |= neg;
            any_pos |= pos;
        }
    }

    let mut dsu = Dsu::new(cell.edges.len());
    for (f, face) in cell.faces.iter().enumerate() {
        let crossings: Vec<usize> = face.edges.iter().copied().filter(|&e| crossing[e]).collect();
        let (neg, pos) = match face_check(field, cell, f, n, iso) {
            Outcome::Ambiguous => return SheetClass::MultiSheetOrAmbiguous,
            Outcome::Signs { neg, pos } => (neg, pos),
        };
        any_neg |= neg;
        any_pos |= pos;
        match crossings.len() {
            0 if neg && pos => return SheetClass::MultiSheetOrAmbiguous,
            0 => {}
            2 => dsu.union(crossings[0], crossings[1]),
            _ => return SheetClass::MultiSheetOrAmbiguous,
        }
    }

    if !(any_neg && any_pos) {
        return SheetClass::NoSurface;
    }
    let mut loops = 0;
    for e in 0..cell.edges.len() {
        if crossing[e] && dsu.find(e) == e {
            loops += 1;
        }
    }
    if loops == 1 {
        SheetClass::SingleSheet
    } else {
        SheetClass::MultiSheetOrAmbiguous
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{builtin_field, parse_builtin};
    use crate::partition::{box_cell, cell_from_planes, Plane};

    fn sphere() -> ScalarField {
        builtin_field(&parse_builtin("sphere(1)").unwrap()).unwrap()
    }

    fn cell(lo: f64, hi: f64) -> ConvexCell {
        box_cell(Vec3::splat(lo), Vec3::splat(hi)).unwrap()
    }

    /// Independent oracle: connected components of each sign on a dense grid.
    fn dense_components(field: &ScalarField, lo: Vec3, hi: Vec3, n: usize) -> (usize, usize) {
        let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;
        let mut signs = vec![None; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let t = Vec3::new(i as f64, j as f64, k as f64) / (n - 1) as f64;
                    let p = Vec3::new(
                        lo.x + (hi.x - lo.x) * t.x,
                        lo.y + (hi.y - lo.y) * t.y,
                        lo.z + (hi.z - lo.z) * t.z,
                    );
                    signs[idx(i, j, k)] = Some(field.value(p) > 0.0);
                }
            }
        }
        let mut nb = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    if i + 1 < n {
                        nb.push((idx(i, j, k), idx(i + 1, j, k)));
                    }
                    if j + 1 < n {
                        nb.push((idx(i, j, k), idx(i, j + 1, k)));
                    }
                    if k + 1 < n {
                        nb.push((idx(i, j, k), idx(i, j, k + 1)));
                    }
                }
            }
        }
        components(&signs, &nb)
    }

    #[test]
    fn box_outside_sphere_is_empty() {
        assert_eq!(sheet_test(&sphere(), &cell(-2.0, -1.0), 8), SheetClass::NoSurface);
    }

    #[test]
    fn sphere_octant_is_single_sheet() {
        let f = sphere();
        assert_eq!(dense_components(&f, Vec3::ZERO, Vec3::splat(2.0), 40), (1, 1));
        assert_eq!(sheet_test(&f, &cell(0.0, 2.0), 8), SheetClass::SingleSheet);
    }

    #[test]
    fn two_parallel_sheets_are_ambiguous() {
        let f = ScalarField::from_expr("x^2-0.04").unwrap();
        assert_eq!(sheet_test(&f, &cell(-1.0, 1.0), 8), SheetClass::MultiSheetOrAmbiguous);
    }

    #[test]
    fn enclosed_sphere_has_no_boundary_loop() {
        assert_eq!(sheet_test(&sphere(), &cell(-2.0, 2.0), 8), SheetClass::MultiSheetOrAmbiguous);
    }

    #[test]
    fn tube_through_two_faces_is_ambiguous() {
        // cylinder along z crossing top and bottom faces: two loops
        let f = ScalarField::from_expr("x^2+y^2-0.25").unwrap();
        assert_eq!(sheet_test(&f, &cell(-1.0, 1.0), 8), SheetClass::MultiSheetOrAmbiguous);
    }

    #[test]
    fn general_cell_with_plane() {
        let planes: Vec<Plane> = [
            [-1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.3, 0.2, 1.0, 1.2],
        ]
        .iter()
        .map(|&a| Plane::from_array(a).unwrap())
        .collect();
        let c = cell_from_planes(&planes).unwrap();
        let f = ScalarField::from_expr("z - 0.5 - 0.1*x").unwrap();
        assert_eq!(sheet_test(&f, &c, 8), SheetClass::SingleSheet);
    }
}
