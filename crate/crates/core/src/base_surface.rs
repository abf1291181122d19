//! Base meshes spanning a patch boundary, built before projection: the
//! barycentric combination of the corners, or a transfinite mean-value
//! interpolant of the traced boundary curves.

use std::cmp::Ordering;

use thiserror::Error;

use crate::domain::{mean_value_weights, BaryCoords, DomainError, DomainMesh, VertexKind};
use crate::geom::{Point3, Vec3};
use crate::patch::PatchBoundary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Corners,
    Transfinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaseError {
    #[error("domain has {domain} sides but the patch has {patch}")]
    SideCountMismatch { domain: usize, patch: usize },
    #[error("side {0} has zero length")]
    DegenerateSide(usize),
    #[error("side {0} needs a polyline with at least 2 points")]
    MissingPolyline(usize),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseMesh {
    pub kind: BaseKind,
    pub positions: Vec<Point3>,
    pub bary: Vec<BaryCoords>,
    pub vertex_kinds: Vec<VertexKind>,
    pub triangles: Vec<[u32; 3]>,
}

fn check_sides(boundary: &PatchBoundary, dm: &DomainMesh) -> Result<(), BaseError> {
    if boundary.n() != dm.n() {
        return Err(BaseError::SideCountMismatch {
            domain: dm.n(),
            patch: boundary.n(),
        });
    }
    Ok(())
}

/// Point `j / r` of the way from `a` to `b`, evaluated from the
/// lexicographically smaller end so that both patches sharing the segment
/// get bit-identical results.
pub(crate) fn canonical_lerp(a: Point3, b: Point3, j: usize, r: usize) -> Point3 {
    if a.lex_cmp(b) == Ordering::Greater {
        b.lerp(a, (r - j) as f64 / r as f64)
    } else {
        a.lerp(b, j as f64 / r as f64)
    }
}

/// `p(u, v) = Σ λ_i(u, v) · p_i`, with side vertices placed on the straight
/// segment between their corners.
pub fn base_mesh_corners(boundary: &PatchBoundary, dm: &DomainMesh) -> Result<BaseMesh, BaseError> {
    check_sides(boundary, dm)?;
    let n = dm.n();
    let r = dm.resolution;
    let c = &boundary.corners;
    let positions = dm
        .vertices
        .iter()
        .map(|v| match v.kind {
            VertexKind::Corner(i) => c[i],
            VertexKind::Side { side, j } => canonical_lerp(c[side], c[(side + 1) % n], j, r),
            VertexKind::Interior => {
                let mut p = Vec3::ZERO;
                for (l, ci) in v.bary.0.iter().zip(c) {
                    p += *ci * *l;
                }
                p
            }
        })
        .collect();
    Ok(finish(BaseKind::Corners, positions, dm))
}

fn finish(kind: BaseKind, positions: Vec<Point3>, dm: &DomainMesh) -> BaseMesh {
    BaseMesh {
        kind,
        positions,
        bary: dm.vertices.iter().map(|v| v.bary.clone()).collect(),
        vertex_kinds: dm.vertices.iter().map(|v| v.kind).collect(),
        triangles: dm.triangles.clone(),
    }
}

/// Polyline with cumulative chord lengths, stored from its lexicographically
/// smaller end.
struct ArcPolyline {
    points: Vec<Point3>,
    cumulative: Vec<f64>,
    flipped: bool,
}

impl ArcPolyline {
    fn new(line: &[Point3], side: usize) -> Result<Self, BaseError> {
        if line.len() < 2 {
            return Err(BaseError::MissingPolyline(side));
        }
        let flipped = line[0].lex_cmp(line[line.len() - 1]) == Ordering::Greater;
        let mut points: Vec<Point3> = line.to_vec();
        if flipped {
            points.reverse();
        }
        // collapse zero-length segments
        points.dedup();
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            cumulative.push(cumulative.last().unwrap() + w[0].distance(w[1]));
        }
        if *cumulative.last().unwrap() <= 0.0 {
            return Err(BaseError::DegenerateSide(side));
        }
        Ok(Self {
            points,
            cumulative,
            flipped,
        })
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Point at arc-length fraction `num / den` measured from the side's own
    /// start corner.
    fn at_fraction(&self, num: usize, den: usize) -> Point3 {
        let num = if self.flipped { den - num } else { num };
        if num == 0 {
            return self.points[0];
        }
        if num == den {
            return *self.points.last().unwrap();
        }
        self.at_length(self.total() * num as f64 / den as f64)
    }

    fn at_length(&self, s: f64) -> Point3 {
        let k = self.cumulative.partition_point(|&c| c <= s).clamp(1, self.points.len() - 1);
        let (s0, s1) = (self.cumulative[k - 1], self.cumulative[k]);
        let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.points[k - 1].lerp(self.points[k], t.clamp(0.0, 1.0))
    }

    /// Points with their arc-length fraction, in the side's own direction,
    /// excluding the end corner.
    fn samples(&self) -> Vec<(f64, Point3)> {
        let total = self.total();
        let mut out: Vec<(f64, Point3)> = self
            .points
            .iter()
            .zip(&self.cumulative)
            .map(|(p, c)| (c / total, *p))
            .collect();
        if self.flipped {
            out.reverse();
            for s in &mut out {
                s.0 = 1.0 - s.0;
            }
        }
        out.pop();
        out
    }
}

/// Transfinite mean-value interpolation of the boundary polylines.
pub fn base_mesh_transfinite(boundary: &PatchBoundary, dm: &DomainMesh) -> Result<BaseMesh, BaseError> {
    check_sides(boundary, dm)?;
    let n = dm.n();
    let r = dm.resolution;
    let arcs = boundary
        .sides
        .iter()
        .enumerate()
        .map(|(i, s)| ArcPolyline::new(&s.polyline, i))
        .collect::<Result<Vec<_>, _>>()?;

    let dc = &dm.domain.corners;
    let mut poly2: Vec<[f64; 2]> = Vec::new();
    let mut values: Vec<Point3> = Vec::new();
    for (i, arc) in arcs.iter().enumerate() {
        let (a, b) = (dc[i], dc[(i + 1) % n]);
        for (t, p) in arc.samples() {
            let uv = if t == 0.0 {
                a
            } else {
                [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t]
            };
            poly2.push(uv);
            values.push(p);
        }
    }

    let mut positions = Vec::with_capacity(dm.vertices.len());
    for v in &dm.vertices {
        let p = match v.kind {
            VertexKind::Corner(i) => boundary.corners[i],
            VertexKind::Side { side, j } => arcs[side].at_fraction(j, r),
            VertexKind::Interior => {
                let w = mean_value_weights(&poly2, v.uv)?;
                let mut p = Vec3::ZERO;
                for (wi, q) in w.iter().zip(&values) {
                    p += *q * *wi;
                }
                p
            }
        };
        positions.push(p);
    }
    Ok(finish(BaseKind::Transfinite, positions, dm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::triangulate_ngon;
    use crate::partition::Plane;
    use crate::patch::PatchSide;

    fn boundary(corners: Vec<Point3>) -> PatchBoundary {
        let n = corners.len();
        PatchBoundary {
            corner_edges: vec![0; n],
            corner_edge_dirs: vec![Vec3::Z; n],
            sides: (0..n)
                .map(|i| PatchSide {
                    face: i,
                    face_plane: Plane::new(Vec3::X, 0.0).unwrap(),
                    polyline: vec![corners[i], corners[(i + 1) % n]],
                })
                .collect(),
            corners,
        }
    }

    fn pentagon() -> PatchBoundary {
        boundary(vec![
            Vec3::new(0.0, 0.0, 0.3),
            Vec3::new(1.0, 0.1, 0.3),
            Vec3::new(1.2, 0.9, 0.3),
            Vec3::new(0.4, 1.4, 0.3),
            Vec3::new(-0.3, 0.8, 0.3),
        ])
    }

    #[test]
    fn corners_reproduced_and_center_averaged() {
        let b = boundary(vec![Vec3::X, Vec3::Y, Vec3::Z]);
        let dm = triangulate_ngon(3, 3).unwrap();
        let m = base_mesh_corners(&b, &dm).unwrap();
        assert!(m.positions[0].distance(Vec3::splat(1.0 / 3.0)) < 1e-15);
        for i in 0..3 {
            assert_eq!(m.positions[dm.corner_index(i)], b.corners[i]);
        }
        assert_eq!(m.triangles, dm.triangles);
        assert!(base_mesh_corners(&b, &triangulate_ngon(4, 3).unwrap()).is_err());
    }

    #[test]
    fn coplanar_corners_stay_planar() {
        let b = pentagon();
        let dm = triangulate_ngon(5, 6).unwrap();
        for m in [base_mesh_corners(&b, &dm).unwrap(), base_mesh_transfinite(&b, &dm).unwrap()] {
            for p in &m.positions {
                assert!((p.z - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn straight_polylines_match_corners_only() {
        let mut b = pentagon();
        let dm = triangulate_ngon(5, 5).unwrap();
        let corners = base_mesh_corners(&b, &dm).unwrap();
        for i in 0..5 {
            let (a, c) = (b.corners[i], b.corners[(i + 1) % 5]);
            b.sides[i].polyline = (0..=9).map(|k| if k == 9 { c } else { a.lerp(c, k as f64 / 9.0) }).collect();
        }
        let tf = base_mesh_transfinite(&b, &dm).unwrap();
        for (p, q) in corners.positions.iter().zip(&tf.positions) {
            assert!(p.distance(*q) < 1e-9, "{p:?} vs {q:?}");
        }
    }

    #[test]
    fn transfinite_boundary_on_polylines() {
        // quarter circles on a sphere octant
        let f = |t: f64, i: usize| {
            let (c, s) = ((t * std::f64::consts::FRAC_PI_2).cos(), (t * std::f64::consts::FRAC_PI_2).sin());
            match i {
                0 => Vec3::new(c, s, 0.0),
                1 => Vec3::new(0.0, c, s),
                _ => Vec3::new(s, 0.0, c),
            }
        };
        let mut b = boundary(vec![Vec3::X, Vec3::Y, Vec3::Z]);
        for i in 0..3 {
            b.sides[i].polyline = (0..=40).map(|k| f(k as f64 / 40.0, i)).collect();
            b.sides[i].polyline[40] = b.corners[(i + 1) % 3];
        }
        let dm = triangulate_ngon(3, 4).unwrap();
        let m = base_mesh_transfinite(&b, &dm).unwrap();
        for (p, k) in m.positions.iter().zip(&m.vertex_kinds) {
            match *k {
                VertexKind::Corner(i) => assert_eq!(*p, b.corners[i]),
                VertexKind::Side { side, .. } => {
                    assert!((p.norm() - 1.0).abs() < 1e-3);
                    assert_eq!(p.to_array()[(side + 2) % 3], 0.0);
                }
                VertexKind::Interior => assert!(p.norm() < 1.0),
            }
        }
    }

    #[test]
    fn zero_length_side_is_rejected() {
        let mut b = pentagon();
        b.sides[2].polyline = vec![b.corners[2], b.corners[2]];
        assert!(matches!(
            base_mesh_transfinite(&b, &triangulate_ngon(5, 2).unwrap()),
            Err(BaseError::DegenerateSide(2))
        ));
    }
}
