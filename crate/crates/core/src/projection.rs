//! Projection of base meshes onto the isosurface by ray marching along
//! directions interpolated from the cell edges at the patch corners.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_surface::{BaseKind, BaseMesh};
use crate::domain::VertexKind;
use crate::field::{FieldError, ScalarField};
use crate::geom::{Point3, Vec3};
use crate::mesh::TriangleMesh;
use crate::partition::ConvexCell;
use crate::patch::{PatchBoundary, Tolerances};

/// Interpolated directions shorter than this are treated as vanishing.
pub const MIN_DIRECTION_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Longest march, in cell diameters.
    pub max_march_distance: f64,
    /// March step, in cell diameters.
    pub march_step: f64,
    /// Largest accepted angle between ray and gradient, in degrees.
    pub angle_threshold: f64,
    /// Absolute `|F|` tolerance at hits; derived from the field scale of each
    /// cell when unset.
    pub tol_root: Option<f64>,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            max_march_distance: 2.0,
            march_step: 1.0 / 256.0,
            angle_threshold: 80.0,
            tol_root: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("angle threshold must lie in (0, 90), got {0}")]
    InvalidThreshold(f64),
    #[error("march step and distance must be positive")]
    InvalidMarch,
    #[error("corner {0} is not on a cell edge")]
    CornerOffEdge(usize),
    #[error("no sign change within {distance} along the ray")]
    Miss { distance: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        if !(self.angle_threshold > 0.0 && self.angle_threshold < 90.0) {
            return Err(ProjectionError::InvalidThreshold(self.angle_threshold));
        }
        if !(self.march_step > 0.0 && self.max_march_distance > 0.0) {
            return Err(ProjectionError::InvalidMarch);
        }
        Ok(())
    }

    /// Absolute march parameters for a cell.
    pub fn resolve(&self, field: &ScalarField, cell: &ConvexCell) -> MarchParams {
        self.resolve_with(&Tolerances::for_cell(field, cell), cell.diameter())
    }

    pub fn resolve_with(&self, tol: &Tolerances, diam: f64) -> MarchParams {
        MarchParams {
            step: self.march_step * diam,
            max_distance: self.max_march_distance * diam,
            tol_root: self.tol_root.unwrap_or(tol.root),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchParams {
    pub step: f64,
    pub max_distance: f64,
    pub tol_root: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    /// Signed distance travelled along the direction.
    pub t: f64,
    /// Angle between the ray line and the gradient at the hit, in degrees.
    pub angle: f64,
    /// Unit gradient at the hit; zero where the gradient vanishes.
    pub normal: Vec3,
}

/// Angle in degrees between the line along `d` and the gradient at `p`.
pub fn ray_gradient_angle(field: &ScalarField, p: Point3, d: Vec3) -> Result<f64, FieldError> {
    Ok(angle_and_normal(field, p, d)?.0)
}

fn angle_and_normal(field: &ScalarField, p: Point3, d: Vec3) -> Result<(f64, Vec3), FieldError> {
    let g = field.gradient(p)?;
    Ok(match g.try_normalize() {
        Some(g) => (d.dot(g).abs().min(1.0).acos().to_degrees(), g),
        None => (90.0, Vec3::ZERO),
    })
}

/// Marches from `p` along `±d` (backwards when `F(p) > 0`, since directions
/// point into the positive half-space) until the sign flips, then bisects.
pub fn project_vertex(field: &ScalarField, p: Point3, d: Vec3, mp: &MarchParams) -> Result<Hit, ProjectionError> {
    let f0 = field.try_value(p)?;
    if f0 == 0.0 {
        let (angle, normal) = angle_and_normal(field, p, d)?;
        return Ok(Hit {
            point: p,
            t: 0.0,
            angle,
            normal,
        });
    }
    let s = if f0 > 0.0 { -1.0 } else { 1.0 };
    let flipped = |f: f64| if f0 > 0.0 { f <= 0.0 } else { f >= 0.0 };
    let at = |t: f64| p + d * (s * t);

    let mut t0 = 0.0;
    let mut best = (f0.abs(), p, 0.0);
    let bracket = loop {
        if t0 >= mp.max_distance {
            return Err(ProjectionError::Miss {
                distance: mp.max_distance,
            });
        }
        let t1 = (t0 + mp.step).min(mp.max_distance);
        let f = field.try_value(at(t1))?;
        if flipped(f) {
            if f.abs() < best.0 {
                best = (f.abs(), at(t1), t1);
            }
            break (t0, t1);
        }
        t0 = t1;
    };
    let (mut lo, mut hi) = bracket;
    for _ in 0..200 {
        if best.0 < mp.tol_root {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = at(mid);
        let f = field.try_value(q)?;
        if f.abs() < best.0 {
            best = (f.abs(), q, mid);
        }
        if flipped(f) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, point, t) = best;
    let (angle, normal) = angle_and_normal(field, point, d)?;
    Ok(Hit {
        point,
        t: s * t,
        angle,
        normal,
    })
}

/// Unit direction along the cell edge hosting each corner, toward the edge
/// endpoint with `F > 0`.
pub fn corner_directions(field: &ScalarField, cell: &ConvexCell, boundary: &PatchBoundary) -> Result<Vec<Vec3>, ProjectionError> {
    let eps = 1e-9 * cell.diameter();
    let iso = crate::partition::classification_iso(field, cell);
    boundary
        .corners
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut best = (f64::INFINITY, usize::MAX);
            for e in 0..cell.edges.len() {
                let (a, b) = cell.edge_points(e);
                let ab = b - a;
                let t = ((c - a).dot(ab) / ab.norm_squared()).clamp(0.0, 1.0);
                let d = c.distance(a + ab * t);
                if d < best.0 {
                    best = (d, e);
                }
            }
            if best.0 > eps {
                return Err(ProjectionError::CornerOffEdge(i));
            }
            Ok(crate::patch::edge_direction(field, cell, best.1, iso))
        })
        .collect()
}

/// `normalize(Σ λ_i d_i)` per vertex, `None` where the sum vanishes. Side
/// vertices combine only their two corner directions, summed from the
/// lexicographically smaller corner so neighbouring patches agree bitwise.
pub fn interpolate_directions(corner_dirs: &[Vec3], base: &BaseMesh) -> Vec<Option<Vec3>> {
    let n = corner_dirs.len();
    let mut corners = vec![Vec3::ZERO; n];
    for (p, k) in base.positions.iter().zip(&base.vertex_kinds) {
        if let VertexKind::Corner(i) = *k {
            corners[i] = *p;
        }
    }
    base.vertex_kinds
        .iter()
        .zip(&base.bary)
        .map(|(k, bary)| {
            let v = match *k {
                VertexKind::Corner(i) => return Some(corner_dirs[i]),
                VertexKind::Side { side, .. } => {
                    let next = (side + 1) % n;
                    let (wa, wb) = (bary.0[side], bary.0[next]);
                    if corners[side].lex_cmp(corners[next]) == Ordering::Greater {
                        corner_dirs[next] * wb + corner_dirs[side] * wa
                    } else {
                        corner_dirs[side] * wa + corner_dirs[next] * wb
                    }
                }
                VertexKind::Interior => {
                    let mut v = Vec3::ZERO;
                    for (l, d) in bary.0.iter().zip(corner_dirs) {
                        v += *d * *l;
                    }
                    v
                }
            };
            if v.norm() < MIN_DIRECTION_NORM {
                None
            } else {
                Some(v.normalize())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    Angle { vertex: usize, angle: f64, threshold: f64 },
    Miss { vertex: usize },
    VanishingDirection { vertex: usize },
    Field { vertex: usize, message: String },
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::Angle { vertex, angle, threshold } => write!(
                f,
                "vertex {vertex}: ray/gradient angle {angle:.3} deg exceeds angle threshold {threshold} deg"
            ),
            RejectReason::Miss { vertex } => write!(f, "vertex {vertex}: ray found no surface"),
            RejectReason::VanishingDirection { vertex } => write!(f, "vertex {vertex}: projection direction vanishes"),
            RejectReason::Field { vertex, message } => write!(f, "vertex {vertex}: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatchStatus {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPatch {
    /// Projected positions, with unit field gradients as normals.
    pub mesh: TriangleMesh,
    pub vertex_kinds: Vec<VertexKind>,
    pub directions: Vec<Vec3>,
    /// Signed ray parameter of the hit; 0 for vertices left in place.
    pub hit_t: Vec<f64>,
    /// Ray/gradient angle in degrees; 0 for vertices left in place.
    pub angles: Vec<f64>,
    pub status: PatchStatus,
}

impl ProjectedPatch {
    pub fn is_accepted(&self) -> bool {
        self.status == PatchStatus::Accepted
    }

    pub fn max_angle(&self) -> f64 {
        self.angles.iter().cloned().fold(0.0, f64::max)
    }
}

enum VertexOutcome {
    Fixed(Point3, Vec3),
    Hit(Hit, Vec3),
    Fail(RejectReason, Point3, Vec3),
}

/// Projects every movable vertex of `base`. Corners never move; side
/// vertices of a transfinite base stay on their traced curves. The patch is
/// accepted when every projected vertex hit the surface at an angle below
/// the threshold.
pub fn project_patch(
    field: &ScalarField,
    base: &BaseMesh,
    corner_dirs: &[Vec3],
    mp: &MarchParams,
    angle_threshold: f64,
) -> ProjectedPatch {
    let dirs = interpolate_directions(corner_dirs, base);
    let outcomes: Vec<VertexOutcome> = (0..base.positions.len())
        .into_par_iter()
        .map(|v| {
            let p = base.positions[v];
            let kind = base.vertex_kinds[v];
            let Some(d) = dirs[v] else {
                return VertexOutcome::Fail(RejectReason::VanishingDirection { vertex: v }, p, Vec3::ZERO);
            };
            let fixed = match kind {
                VertexKind::Corner(_) => true,
                VertexKind::Side { .. } => base.kind == BaseKind::Transfinite,
                VertexKind::Interior => false,
            };
            if fixed {
                return VertexOutcome::Fixed(p, d);
            }
            match project_vertex(field, p, d, mp) {
                Ok(hit) => VertexOutcome::Hit(hit, d),
                Err(ProjectionError::Miss { .. }) => VertexOutcome::Fail(RejectReason::Miss { vertex: v }, p, d),
                Err(e) => VertexOutcome::Fail(
                    RejectReason::Field {
                        vertex: v,
                        message: e.to_string(),
                    },
                    p,
                    d,
                ),
            }
        })
        .collect();

    let count = outcomes.len();
    let mut positions = Vec::with_capacity(count);
    let mut directions = Vec::with_capacity(count);
    let mut hit_t = Vec::with_capacity(count);
    let mut angles = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    let unit_gradient = |p: Point3| field.gradient(p).ok().and_then(|g| g.try_normalize()).unwrap_or(Vec3::ZERO);
    let mut failure: Option<RejectReason> = None;
    let mut worst: Option<(usize, f64)> = None;
    for (v, o) in outcomes.into_iter().enumerate() {
        match o {
            VertexOutcome::Fixed(p, d) => {
                normals.push(unit_gradient(p));
                positions.push(p);
                directions.push(d);
                hit_t.push(0.0);
                angles.push(0.0);
            }
            VertexOutcome::Hit(h, d) => {
                normals.push(h.normal);
                positions.push(h.point);
                directions.push(d);
                hit_t.push(h.t);
                angles.push(h.angle);
                if h.angle >= angle_threshold && worst.is_none_or(|(_, a)| h.angle > a) {
                    worst = Some((v, h.angle));
                }
            }
            VertexOutcome::Fail(reason, p, d) => {
                normals.push(unit_gradient(p));
                positions.push(p);
                directions.push(d);
                hit_t.push(0.0);
                angles.push(90.0);
                failure.get_or_insert(reason);
            }
        }
    }
    let status = match (failure, worst) {
        (Some(r), _) => PatchStatus::Rejected(r),
        (None, Some((vertex, angle))) => PatchStatus::Rejected(RejectReason::Angle {
            vertex,
            angle,
            threshold: angle_threshold,
        }),
        (None, None) => PatchStatus::Accepted,
    };
    ProjectedPatch {
        mesh: TriangleMesh {
            positions,
            triangles: base.triangles.clone(),
            normals: Some(normals),
            channels: Default::default(),
        },
        vertex_kinds: base.vertex_kinds.clone(),
        directions,
        hit_t,
        angles,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_surface::{base_mesh_corners, base_mesh_transfinite};
    use crate::domain::triangulate_ngon;
    use crate::partition::box_cell;
    use crate::patch::{build_boundary_loop, find_corner_points, trace_sides};

    fn sphere() -> ScalarField {
        ScalarField::from_expr("x^2+y^2+z^2-1").unwrap()
    }

    fn params() -> MarchParams {
        MarchParams {
            step: 0.01,
            max_distance: 10.0,
            tol_root: 1e-10,
        }
    }

    #[test]
    fn radial_ray() {
        let d = Vec3::splat(1.0).normalize();
        let h = project_vertex(&sphere(), Vec3::splat(0.5), d, &params()).unwrap();
        assert!(h.point.distance(d) < 1e-9);
        assert!(sphere().value(h.point).abs() < 1e-9);
        assert!(h.angle < 1e-5);
    }

    #[test]
    fn start_on_surface_is_unchanged() {
        let h = project_vertex(&sphere(), Vec3::X, Vec3::Y, &params()).unwrap();
        assert_eq!(h.point, Vec3::X);
        assert_eq!(h.t, 0.0);
    }

    #[test]
    fn grazing_plane_angle() {
        let f = ScalarField::from_expr("z").unwrap();
        let th = 85f64.to_radians();
        let d = Vec3::new(th.sin(), 0.0, th.cos());
        let h = project_vertex(&f, Vec3::new(0.0, 0.0, 0.4), d, &params()).unwrap();
        // closed form: backwards along d until z = 0, at t = -0.4 / cos θ
        let t = -0.4 / th.cos();
        // |F| < tol_root bounds the error along the ray by tol_root / cos θ
        assert!((h.t - t).abs() < params().tol_root / th.cos());
        assert!(h.point.z.abs() < 1e-10);
        assert!((h.angle - 85.0).abs() < 1e-9);
    }

    #[test]
    fn miss_is_reported() {
        let f = ScalarField::from_expr("z+10").unwrap();
        assert!(matches!(
            project_vertex(&f, Vec3::ZERO, Vec3::X, &params()),
            Err(ProjectionError::Miss { .. })
        ));
    }

    fn octant() -> (ScalarField, ConvexCell, PatchBoundary) {
        let f = sphere();
        let cell = box_cell(Vec3::ZERO, Vec3::splat(2.0)).unwrap();
        let b = build_boundary_loop(&f, &cell, &find_corner_points(&f, &cell).unwrap()).unwrap();
        (f, cell, b)
    }

    #[test]
    fn corner_dirs_and_interpolation() {
        let (f, cell, b) = octant();
        let dirs = corner_directions(&f, &cell, &b).unwrap();
        for (c, d) in b.corners.iter().zip(&dirs) {
            assert!(c.distance(*d) < 1e-9);
        }
        let base = base_mesh_corners(&b, &triangulate_ngon(3, 4).unwrap()).unwrap();
        let di = interpolate_directions(&dirs, &base);
        assert!(di[0].unwrap().distance(Vec3::splat(1.0).normalize()) < 1e-12);
        for (k, d) in base.vertex_kinds.iter().zip(&di) {
            if let VertexKind::Corner(i) = k {
                assert_eq!(d.unwrap(), dirs[*i]);
            }
        }
    }

    #[test]
    fn in_plane_side_direction() {
        let base = BaseMesh {
            kind: BaseKind::Corners,
            positions: vec![Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.5, 0.5)],
            bary: vec![
                crate::domain::BaryCoords(vec![1.0, 0.0, 0.0]),
                crate::domain::BaryCoords(vec![0.0, 1.0, 0.0]),
                crate::domain::BaryCoords(vec![0.0, 0.0, 1.0]),
                crate::domain::BaryCoords(vec![0.0, 0.5, 0.5]),
            ],
            vertex_kinds: vec![
                VertexKind::Corner(0),
                VertexKind::Corner(1),
                VertexKind::Corner(2),
                VertexKind::Side { side: 1, j: 1 },
            ],
            triangles: vec![],
        };
        let dirs = [Vec3::X, Vec3::Y, Vec3::Z];
        let d = interpolate_directions(&dirs, &base)[3].unwrap();
        assert_eq!(d.x, 0.0);
        assert!(d.distance(Vec3::new(0.0, 0.5, 0.5).normalize()) < 1e-15);
    }

    #[test]
    fn octant_patch_is_accepted() {
        let (f, cell, b) = octant();
        let dirs = corner_directions(&f, &cell, &b).unwrap();
        let base = base_mesh_corners(&b, &triangulate_ngon(3, 4).unwrap()).unwrap();
        let mp = ProjectionConfig::default().resolve(&f, &cell);
        let pp = project_patch(&f, &base, &dirs, &mp, 80.0);
        assert!(pp.is_accepted(), "{:?}", pp.status);
        for (i, p) in pp.mesh.positions.iter().enumerate() {
            assert!(f.value(*p).abs() < 1e-9);
            if let VertexKind::Side { side, .. } = pp.vertex_kinds[i] {
                assert!(b.sides[side].face_plane.signed_distance(*p).abs() < 1e-9);
            }
            if let VertexKind::Corner(c) = pp.vertex_kinds[i] {
                assert_eq!(*p, b.corners[c]);
            }
        }
    }

    #[test]
    fn transfinite_boundary_untouched() {
        let (f, cell, mut b) = octant();
        let tol = Tolerances::for_cell(&f, &cell);
        trace_sides(&f, &mut b, 2.0 * 2f64.sqrt() / 32.0, tol.curve).unwrap();
        let dirs = corner_directions(&f, &cell, &b).unwrap();
        let base = base_mesh_transfinite(&b, &triangulate_ngon(3, 4).unwrap()).unwrap();
        let pp = project_patch(&f, &base, &dirs, &ProjectionConfig::default().resolve(&f, &cell), 80.0);
        assert!(pp.is_accepted());
        for (i, k) in pp.vertex_kinds.iter().enumerate() {
            if k.is_boundary() {
                assert_eq!(pp.mesh.positions[i], base.positions[i]);
            }
        }
    }

    #[test]
    fn deterministic_across_pools() {
        let (f, cell, b) = octant();
        let dirs = corner_directions(&f, &cell, &b).unwrap();
        let base = base_mesh_corners(&b, &triangulate_ngon(3, 8).unwrap()).unwrap();
        let mp = ProjectionConfig::default().resolve(&f, &cell);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| project_patch(&f, &base, &dirs, &mp, 80.0));
        let b2 = project_patch(&f, &base, &dirs, &mp, 80.0);
        assert_eq!(a, b2);
    }

    #[test]
    fn config_validation() {
        assert!(ProjectionConfig::default().validate().is_ok());
        let bad = ProjectionConfig {
            angle_threshold: 90.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
