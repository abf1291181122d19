//! Marching Cubes on a uniform grid, plus uniform Laplacian fairing.

mod tables;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geom::{Point3, Vec3};
use crate::mesh::{manifold_audit, TriangleMesh};
use tables::{EDGE_TABLE, TRI_TABLE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("grid needs min < max on every axis and a positive spacing")]
    InvalidGrid,
    #[error("grid would have {0} samples")]
    TooLarge(usize),
    #[error("field is not finite at ({x}, {y}, {z})")]
    NonFinite { x: f64, y: f64, z: f64 },
    #[error("fairing needs a manifold mesh ({0} non-manifold edges)")]
    NonManifold(usize),
    #[error("fairing step must lie in (0, 1), got {0}")]
    InvalidStep(f64),
}

/// Lattice `min + spacing · (i, j, k)`, extended past `max` if the extent is
/// not a multiple of the spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: Point3,
    pub max: Point3,
    pub spacing: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), McError> {
        let ok = self.spacing > 0.0
            && self.spacing.is_finite()
            && (0..3).all(|a| self.min[a] < self.max[a] && self.min[a].is_finite() && self.max[a].is_finite());
        if !ok {
            return Err(McError::InvalidGrid);
        }
        let d = self.dims();
        let count = d[0].saturating_mul(d[1]).saturating_mul(d[2]);
        if count > 1 << 31 {
            return Err(McError::TooLarge(count));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let cells = ((self.max[a] - self.min[a]) / self.spacing - 1e-9).ceil().max(1.0);
            cells as usize + 1
        })
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        Vec3::new(
            self.min.x + i as f64 * self.spacing,
            self.min.y + j as f64 * self.spacing,
            self.min.z + k as f64 * self.spacing,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub spec: GridSpec,
    pub dims: [usize; 3],
    /// x-fastest.
    pub values: Vec<f64>,
}

impl SampleGrid {
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }
}

/// Samples the field at every lattice point, one z-slab per task.
pub fn sample_grid(field: &ScalarField, spec: &GridSpec) -> Result<SampleGrid, McError> {
    spec.validate()?;
    let dims = spec.dims();
    let slabs: Vec<Vec<f64>> = (0..dims[2])
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::with_capacity(dims[0] * dims[1]);
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = spec.point(i, j, k);
                    let v = field.value(p);
                    if !v.is_finite() {
                        return Err(McError::NonFinite { x: p.x, y: p.y, z: p.z });
                    }
                    out.push(v);
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    Ok(SampleGrid {
        spec: *spec,
        dims,
        values: slabs.concat(),
    })
}

/// Corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Table edge → (offset of its lower lattice point, axis).
const EDGES: [([usize; 3], usize); 12] = [
    ([0, 0, 0], 0),
    ([1, 0, 0], 1),
    ([0, 1, 0], 0),
    ([0, 0, 0], 1),
    ([0, 0, 1], 0),
    ([1, 0, 1], 1),
    ([0, 1, 1], 0),
    ([0, 0, 1], 1),
    ([0, 0, 0], 2),
    ([1, 0, 0], 2),
    ([1, 1, 0], 2),
    ([0, 1, 0], 2),
];

/// Vertex key: lattice index times 4 plus the edge axis, or plus 3 when the
/// crossing sits exactly on a lattice point.
type Key = u64;

fn edge_vertex(grid: &SampleGrid, iso: f64, p: [usize; 3], axis: usize) -> (Key, Point3) {
    let mut q = p;
    q[axis] += 1;
    let fa = grid.value(p[0], p[1], p[2]) - iso;
    let fb = grid.value(q[0], q[1], q[2]) - iso;
    let t = fa / (fa - fb);
    let lattice = |p: [usize; 3]| grid.index(p[0], p[1], p[2]) as u64 * 4;
    if t <= 0.0 {
        return (lattice(p) + 3, grid.spec.point(p[0], p[1], p[2]));
    }
    if t >= 1.0 {
        return (lattice(q) + 3, grid.spec.point(q[0], q[1], q[2]));
    }
    let a = grid.spec.point(p[0], p[1], p[2]);
    let b = grid.spec.point(q[0], q[1], q[2]);
    (lattice(p) + axis as u64, a.lerp(b, t))
}

/// Polygonizes the zero set (of `F - iso`) of a sampled grid. Vertices on
/// shared grid edges are shared; triangles face the positive side.
pub fn polygonize(grid: &SampleGrid, iso: f64) -> TriangleMesh {
    let [nx, ny, nz] = grid.dims;
    let slabs: Vec<(Vec<[Key; 3]>, Vec<(Key, Point3)>)> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut tris = Vec::new();
            let mut verts = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for (c, o) in CORNERS.iter().enumerate() {
                        if grid.value(i + o[0], j + o[1], k + o[2]) < iso {
                            case |= 1 << c;
                        }
                    }
                    if EDGE_TABLE[case] == 0 {
                        continue;
                    }
                    let mut keys = [0u64; 12];
                    for (e, (o, axis)) in EDGES.iter().enumerate() {
                        if EDGE_TABLE[case] & (1 << e) != 0 {
                            let (key, p) = edge_vertex(grid, iso, [i + o[0], j + o[1], k + o[2]], *axis);
                            keys[e] = key;
                            verts.push((key, p));
                        }
                    }
                    for t in TRI_TABLE[case].chunks(3) {
                        if t[0] < 0 {
                            break;
                        }
                        // table winding faces the low side; swap to face F > 0
                        tris.push([keys[t[0] as usize], keys[t[2] as usize], keys[t[1] as usize]]);
                    }
                }
            }
            (tris, verts)
        })
        .collect();

    let mut index: HashMap<Key, u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for (tris, verts) in slabs {
        for (key, p) in verts {
            index.entry(key).or_insert_with(|| {
                positions.push(p);
                (positions.len() - 1) as u32
            });
        }
        for t in tris {
            let t = t.map(|k| index[&k]);
            if t[0] != t[1] && t[1] != t[2] && t[0] != t[2] {
                triangles.push(t);
            }
        }
    }
    TriangleMesh::new(positions, triangles)
}

pub fn marching_cubes(field: &ScalarField, spec: &GridSpec) -> Result<TriangleMesh, McError> {
    Ok(polygonize(&sample_grid(field, spec)?, 0.0))
}

/// Uniform-weight Laplacian smoothing `v ← v + λ (centroid(N(v)) − v)` with
/// boundary vertices held fixed.
pub fn laplacian_fairing(mesh: &TriangleMesh, iterations: usize, lambda: f64) -> Result<TriangleMesh, McError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(McError::InvalidStep(lambda));
    }
    let report = manifold_audit(mesh);
    if report.nonmanifold_edges > 0 {
        return Err(McError::NonManifold(report.nonmanifold_edges));
    }
    let mut out = mesh.clone();
    if iterations == 0 {
        return Ok(out);
    }
    out.normals = None;
    let adj = mesh.adjacency();
    let fixed = mesh.boundary_vertices();
    let mut pos = mesh.positions.clone();
    for _ in 0..iterations {
        pos = pos
            .par_iter()
            .enumerate()
            .map(|(v, &p)| {
                if fixed[v] || adj[v].is_empty() {
                    return p;
                }
                let mut c = Vec3::ZERO;
                for &u in &adj[v] {
                    c += pos[u as usize];
                }
                c = c / adj[v].len() as f64;
                p + (c - p) * lambda
            })
            .collect();
    }
    out.positions = pos;
    Ok(out)
}
