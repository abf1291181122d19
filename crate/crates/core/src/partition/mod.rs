//! Convex plane-bounded cells and the octree that isolates one surface sheet
//! per cell.

mod cell;
mod octree;
mod sheet;

use thiserror::Error;

pub use cell::{box_cell, cell_from_planes};
pub(crate) use octree::child_box;
pub use octree::{build_octree, NodeStatus, OctreeNode, OctreeParams};
pub use sheet::{sheet_test, SheetClass};
pub(crate) use sheet::{classification_iso, edge_sign_changes, sign_of};

use crate::geom::{Point3, Vec3};

/// Oriented plane `n·p = d`; the positive side is `n·p > d`. Cells lie on the
/// non-positive side of their planes, so normals point outward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Plane {
    /// Builds a plane from a possibly unnormalized normal. Both `n` and `d`
    /// are divided by `|n|`.
    pub fn new(normal: Vec3, offset: f64) -> Result<Plane, PartitionError> {
        let len = normal.norm();
        if !(len > 0.0 && len.is_finite() && offset.is_finite()) {
            return Err(PartitionError::InvalidPlane);
        }
        Ok(Plane {
            normal: normal / len,
            offset: offset / len,
        })
    }

    /// Plane from `[nx, ny, nz, d]`.
    pub fn from_array(a: [f64; 4]) -> Result<Plane, PartitionError> {
        Plane::new(Vec3::new(a[0], a[1], a[2]), a[3])
    }

    #[inline]
    pub fn signed_distance(&self, p: Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Orthogonal projection of `p` onto the plane.
    #[inline]
    pub fn project(&self, p: Point3) -> Point3 {
        p - self.normal * self.signed_distance(p)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("plane normal must be nonzero and finite")]
    InvalidPlane,
    #[error("half-space intersection is unbounded")]
    Unbounded,
    #[error("half-space intersection is empty or degenerate")]
    Empty,
    #[error("degenerate box: min {min:?} must be below max {max:?} on every axis")]
    DegenerateBox { min: [f64; 3], max: [f64; 3] },
    #[error("inconsistent cell topology: {0}")]
    Topology(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellEdge {
    pub vertices: [usize; 2],
    pub faces: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFace {
    pub plane: usize,
    /// Vertex loop, counter-clockwise seen from outside.
    pub vertices: Vec<usize>,
    /// Index into `ConvexCell::edges` of the edge from `vertices[i]` to
    /// `vertices[i + 1]`.
    pub edges: Vec<usize>,
}

/// Bounded convex polyhedron with full incidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCell {
    pub planes: Vec<Plane>,
    pub vertices: Vec<Point3>,
    pub edges: Vec<CellEdge>,
    pub faces: Vec<CellFace>,
    /// Set for axis-aligned boxes built by [`box_cell`].
    pub aabb: Option<(Point3, Point3)>,
}

impl ConvexCell {
    pub fn bounds(&self) -> (Point3, Point3) {
        if let Some(b) = self.aabb {
            return b;
        }
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for &v in &self.vertices {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        if let Some((lo, hi)) = self.aabb {
            return lo.distance(hi);
        }
        let mut d: f64 = 0.0;
        for (i, &a) in self.vertices.iter().enumerate() {
            for &b in &self.vertices[i + 1..] {
                d = d.max(a.distance(b));
            }
        }
        d
    }

    pub fn centroid(&self) -> Point3 {
        let mut c = Vec3::ZERO;
        for &v in &self.vertices {
            c += v;
        }
        c / self.vertices.len() as f64
    }

    /// Incidence tolerance `1e-9 · diameter`.
    pub fn eps(&self) -> f64 {
        1e-9 * self.diameter()
    }

    pub fn contains(&self, p: Point3, eps: f64) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) <= eps)
    }

    pub fn face_plane(&self, face: usize) -> Plane {
        self.planes[self.faces[face].plane]
    }

    pub fn edge_points(&self, edge: usize) -> (Point3, Point3) {
        let [a, b] = self.edges[edge].vertices;
        (self.vertices[a], self.vertices[b])
    }
}
