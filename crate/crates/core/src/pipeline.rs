//! End-to-end tessellation: partition, per-cell patches, base meshes,
//! projection, and welding of accepted patches.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_surface::{base_mesh_corners, base_mesh_transfinite, BaseError, BaseKind};
use crate::domain::{triangulate_ngon, DomainError, DomainMesh, VertexKind};
use crate::field::ScalarField;
use crate::geom::Point3;
use crate::mesh::{default_weld_tolerance, weld, TriangleMesh};
use crate::partition::{
    box_cell, build_octree, sheet_test, ConvexCell, NodeStatus, OctreeParams, PartitionError, SheetClass,
};
use crate::patch::{
    build_boundary_loop, default_trace_step, find_corner_points_with, snap_in_plane, trace_sides, PatchBoundary, PatchError,
    Tolerances,
};
use crate::projection::{corner_directions, project_patch, PatchStatus, ProjectedPatch, ProjectionConfig, ProjectionError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("domain resolution must be at least 1")]
    InvalidResolution,
    #[error("octree box must have min < max on every axis")]
    InvalidBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TessellateOptions {
    /// Domain resolution `r`: samples per patch side.
    pub resolution: usize,
    pub base: BaseKind,
    pub projection: ProjectionConfig,
    /// Extra subdivision levels tried on rejected box cells.
    pub retry_depth: u32,
    /// Weld tolerance; `1e-9` times the mesh diagonal when unset.
    pub weld_tolerance: Option<f64>,
    /// Samples per cell edge for the sheet test of explicit cells.
    pub samples_per_axis: usize,
}

impl Default for TessellateOptions {
    fn default() -> Self {
        Self {
            resolution: 4,
            base: BaseKind::Corners,
            projection: ProjectionConfig::default(),
            retry_depth: 0,
            weld_tolerance: None,
            samples_per_axis: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Partition {
    Octree {
        min: Point3,
        max: Point3,
        params: OctreeParams,
    },
    Cells(Vec<ConvexCell>),
}

/// A patch that passed projection.
#[derive(Debug, Clone)]
pub struct PatchRecord {
    /// Index of the hosting cell in the flattened cell list.
    pub cell: usize,
    pub cell_diameter: f64,
    pub boundary: PatchBoundary,
    pub patch: ProjectedPatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub cell: usize,
    pub bounds: (Point3, Point3),
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Tessellation {
    /// Welded union of the accepted patches.
    pub mesh: TriangleMesh,
    pub patches: Vec<PatchRecord>,
    pub rejected: Vec<Rejection>,
    /// Cells visited, including empty ones.
    pub cells: usize,
}

impl Tessellation {
    pub fn all_accepted(&self) -> bool {
        self.rejected.is_empty()
    }
}

enum Job {
    Cell(ConvexCell, bool),
    Rejected(ConvexCell, String),
}

enum CellResult {
    Empty,
    Accepted(Box<(PatchBoundary, ProjectedPatch)>),
    Rejected(String),
}

struct Context<'a> {
    field: &'a ScalarField,
    opts: &'a TessellateOptions,
    scale: f64,
    /// Triangulated n-gon domains, built on first use.
    domains: Vec<OnceLock<Result<DomainMesh, DomainError>>>,
}

/// Largest finite `|F|` over a set of points.
fn field_scale(field: &ScalarField, points: impl Iterator<Item = Point3>) -> f64 {
    points.map(|p| field.value(p).abs()).filter(|v| v.is_finite()).fold(0.0, f64::max)
}

impl Context<'_> {
    fn domain(&self, n: usize) -> Result<&DomainMesh, DomainError> {
        match self.domains.get(n) {
            Some(slot) => slot.get_or_init(|| triangulate_ngon(n, self.opts.resolution)).as_ref().map_err(Clone::clone),
            None => Err(DomainError::InvalidSides(n)),
        }
    }

    fn patch(&self, cell: &ConvexCell) -> Result<Option<(PatchBoundary, ProjectedPatch)>, String> {
        let tol = Tolerances::with_scale(self.scale, cell.diameter());
        let corners = find_corner_points_with(self.field, cell, &tol).map_err(|e| e.to_string())?;
        if corners.is_empty() {
            return Ok(None);
        }
        let mut boundary = build_boundary_loop(self.field, cell, &corners).map_err(|e: PatchError| e.to_string())?;
        let dm = self.domain(boundary.n()).map_err(|e| e.to_string())?;
        let base = match self.opts.base {
            BaseKind::Corners => base_mesh_corners(&boundary, dm),
            BaseKind::Transfinite => {
                let step = boundary
                    .sides
                    .iter()
                    .map(|s| default_trace_step(cell, s.face))
                    .fold(f64::INFINITY, f64::min);
                trace_sides(self.field, &mut boundary, step, tol.curve).map_err(|e| e.to_string())?;
                base_mesh_transfinite(&boundary, dm)
            }
        }
        .map_err(|e: BaseError| e.to_string())?;
        let mut base = base;
        if self.opts.base == BaseKind::Transfinite {
            // side samples sit on chords of the traced polyline
            for (p, kind) in base.positions.iter_mut().zip(&base.vertex_kinds) {
                if let VertexKind::Side { side, .. } = *kind {
                    *p = snap_in_plane(self.field, &boundary.sides[side].face_plane, *p, tol.root)
                        .map_err(|e| e.to_string())?;
                }
            }
        }
        let dirs = corner_directions(self.field, cell, &boundary).map_err(|e| e.to_string())?;
        let mp = self.opts.projection.resolve_with(&tol, cell.diameter());
        let patch = project_patch(self.field, &base, &dirs, &mp, self.opts.projection.angle_threshold);
        Ok(Some((boundary, patch)))
    }

    fn run(&self, cell: &ConvexCell) -> CellResult {
        match self.patch(cell) {
            Ok(None) => CellResult::Empty,
            Ok(Some((b, p))) => match &p.status {
                PatchStatus::Accepted => CellResult::Accepted(Box::new((b, p))),
                PatchStatus::Rejected(r) => CellResult::Rejected(r.to_string()),
            },
            Err(e) => CellResult::Rejected(e),
        }
    }
}

fn octree_jobs(field: &ScalarField, min: Point3, max: Point3, params: &OctreeParams) -> Vec<Job> {
    let root = build_octree(field, min, max, params);
    root.leaves()
        .into_iter()
        .filter_map(|leaf| {
            let cell = box_cell(leaf.min, leaf.max).ok()?;
            match leaf.status {
                NodeStatus::SingleSheet => Some(Job::Cell(cell, true)),
                NodeStatus::DepthLimited => {
                    Some(Job::Rejected(cell, "cell holds several sheets at the depth limit".to_string()))
                }
                _ => None,
            }
        })
        .collect()
}

fn box_children(cell: &ConvexCell) -> Vec<ConvexCell> {
    let (min, max) = cell.bounds();
    (0..8)
        .filter_map(|i| {
            let (lo, hi) = crate::partition::child_box(min, max, i);
            box_cell(lo, hi).ok()
        })
        .collect()
}

fn is_box(cell: &ConvexCell) -> bool {
    cell.faces.len() == 6
        && cell.vertices.len() == 8
        && cell.planes.iter().all(|p| {
            let n = p.normal;
            [n.x, n.y, n.z].iter().filter(|c| **c == 0.0).count() == 2
        })
}

/// Processes a cell; rejected boxes are split and retried while `depth`
/// allows. Results are appended in a fixed order.
fn process(
    ctx: &Context<'_>,
    cell: ConvexCell,
    depth: u32,
    out: &mut Vec<(ConvexCell, CellResult)>,
) {
    let result = ctx.run(&cell);
    if let CellResult::Rejected(_) = result {
        if depth > 0 && is_box(&cell) {
            let children: Vec<_> = box_children(&cell)
                .into_par_iter()
                .map(|c| {
                    let mut sub = Vec::new();
                    match sheet_test(ctx.field, &c, ctx.opts.samples_per_axis) {
                        SheetClass::NoSurface => {}
                        _ => process(ctx, c, depth - 1, &mut sub),
                    }
                    sub
                })
                .collect();
            out.extend(children.into_iter().flatten());
            return;
        }
    }
    out.push((cell, result));
}

/// Tessellates the surface over `partition`. Cells run in parallel; the
/// output order (and thus every index) depends only on the partition.
pub fn tessellate(
    field: &ScalarField,
    partition: &Partition,
    opts: &TessellateOptions,
) -> Result<Tessellation, PipelineError> {
    opts.projection.validate()?;
    if opts.resolution < 1 {
        return Err(PipelineError::InvalidResolution);
    }
    let (jobs, scale) = match partition {
        Partition::Octree { min, max, params } => {
            if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                return Err(PipelineError::InvalidBox);
            }
            let root = box_cell(*min, *max)?;
            (octree_jobs(field, *min, *max, params), field_scale(field, root.vertices.iter().copied()))
        }
        Partition::Cells(cells) => {
            let scale = field_scale(field, cells.iter().flat_map(|c| c.vertices.iter().copied()));
            let jobs = cells
                .par_iter()
                .map(|c| match sheet_test(field, c, opts.samples_per_axis) {
                    SheetClass::NoSurface => None,
                    SheetClass::SingleSheet => Some(Job::Cell(c.clone(), false)),
                    SheetClass::MultiSheetOrAmbiguous => {
                        Some(Job::Rejected(c.clone(), "cell holds several sheets or an ambiguous sheet".to_string()))
                    }
                })
                .collect::<Vec<_>>()
                .into_iter()
                .flatten()
                .collect();
            (jobs, scale)
        }
    };
    let max_n = jobs
        .iter()
        .map(|j| match j {
            Job::Cell(c, _) | Job::Rejected(c, _) => c.edges.len(),
        })
        .max()
        .unwrap_or(0);
    let domains = (0..=max_n).map(|_| OnceLock::new()).collect();
    let ctx = Context {
        field,
        opts,
        scale,
        domains,
    };

    let results: Vec<Vec<(ConvexCell, CellResult)>> = jobs
        .into_par_iter()
        .map(|job| {
            let mut out = Vec::new();
            match job {
                Job::Cell(cell, retry) => process(&ctx, cell, if retry { opts.retry_depth } else { 0 }, &mut out),
                Job::Rejected(cell, reason) => out.push((cell, CellResult::Rejected(reason))),
            }
            out
        })
        .collect();

    let mut patches = Vec::new();
    let mut rejected = Vec::new();
    let mut cells = 0;
    for (cell, result) in results.into_iter().flatten() {
        let index = cells;
        cells += 1;
        match result {
            CellResult::Empty => {}
            CellResult::Accepted(b) => {
                let (boundary, patch) = *b;
                patches.push(PatchRecord {
                    cell: index,
                    cell_diameter: cell.diameter(),
                    boundary,
                    patch,
                });
            }
            CellResult::Rejected(reason) => rejected.push(Rejection {
                cell: index,
                bounds: cell.bounds(),
                reason,
            }),
        }
    }
    let meshes: Vec<TriangleMesh> = patches
        .iter()
        .map(|p| {
            let mut m = p.patch.mesh.clone();
            m.channels.insert("projection_angle".into(), p.patch.angles.clone());
            m
        })
        .collect();
    let tol = opts.weld_tolerance.unwrap_or_else(|| default_weld_tolerance(&meshes));
    Ok(Tessellation {
        mesh: weld(&meshes, tol),
        patches,
        rejected,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::mesh::manifold_audit;

    fn sphere() -> ScalarField {
        ScalarField::from_expr("x^2+y^2+z^2-1").unwrap()
    }

    fn octree(depth: u32) -> Partition {
        Partition::Octree {
            min: Vec3::splat(-1.5),
            max: Vec3::splat(1.5),
            params: OctreeParams {
                max_depth: depth,
                min_depth: depth,
                samples_per_axis: 8,
            },
        }
    }

    #[test]
    fn sphere_closes_up() {
        let f = sphere();
        let t = tessellate(&f, &octree(2), &TessellateOptions::default()).unwrap();
        assert!(t.all_accepted(), "{:?}", t.rejected);
        let report = manifold_audit(&t.mesh);
        assert!(report.closed, "{report:?}");
        assert_eq!(report.euler, 2);
        for p in &t.mesh.positions {
            assert!(f.value(*p).abs() < 1e-8);
        }
    }

    #[test]
    fn transfinite_sphere_closes_up() {
        let f = sphere();
        let opts = TessellateOptions {
            base: BaseKind::Transfinite,
            ..Default::default()
        };
        let t = tessellate(&f, &octree(2), &opts).unwrap();
        assert!(t.all_accepted(), "{:?}", t.rejected);
        let report = manifold_audit(&t.mesh);
        assert!(report.closed, "{report:?}");
        assert_eq!(report.euler, 2);
        // side samples are snapped too, so every vertex is on the sphere
        let worst = t.mesh.positions.iter().map(|&p| f.value(p).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn corners_weld_exactly() {
        let f = sphere();
        let exact = TessellateOptions {
            weld_tolerance: Some(0.0),
            ..Default::default()
        };
        let a = tessellate(&f, &octree(2), &exact).unwrap();
        let b = tessellate(&f, &octree(2), &TessellateOptions::default()).unwrap();
        assert_eq!(a.mesh.positions, b.mesh.positions);
        assert_eq!(a.mesh.triangles, b.mesh.triangles);
    }

    #[test]
    fn rejected_cells_are_listed() {
        // octant rays on a centred sphere are radial; an ellipsoid is not
        let f = ScalarField::from_expr("x^2+4*y^2+z^2-1").unwrap();
        let opts = TessellateOptions {
            projection: ProjectionConfig {
                angle_threshold: 1.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let t = tessellate(&f, &octree(1), &opts).unwrap();
        assert_eq!(t.patches.len(), 0);
        assert_eq!(t.rejected.len(), 8);
        assert!(t.rejected[0].reason.contains("angle threshold"));
    }

    #[test]
    fn explicit_cells() {
        let f = ScalarField::from_expr("x + 0.15*y - 0.15*z - 0.6").unwrap();
        let cells = vec![
            box_cell(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(0.0, 1.0, 1.0)).unwrap(),
            box_cell(Vec3::new(0.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)).unwrap(),
        ];
        let t = tessellate(&f, &Partition::Cells(cells), &TessellateOptions::default()).unwrap();
        assert!(t.all_accepted());
        assert_eq!(t.patches.len(), 1);
        assert_eq!(manifold_audit(&t.mesh).boundary_loops, 1);
    }

    #[test]
    fn invalid_threshold_is_an_error() {
        let opts = TessellateOptions {
            projection: ProjectionConfig {
                angle_threshold: 95.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(tessellate(&sphere(), &octree(1), &opts).is_err());
    }
}
