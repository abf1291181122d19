//! Indexed triangle meshes: welding, manifold audit, and OBJ/PLY files.

mod io;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use io::{export, export_obj, export_ply, import, ColorMap, MeshFormat, PlyOptions};

use crate::geom::{Point3, Vec3};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} of {count}")]
    IndexOutOfRange { triangle: usize, index: u32, count: usize },
    #[error("triangle {0} repeats a vertex")]
    DegenerateTriangle(usize),
    #[error("channel '{name}' has {len} values for {count} vertices")]
    ChannelLength { name: String, len: usize, count: usize },
    #[error("no channel named '{0}'")]
    MissingChannel(String),
    #[error("mesh is not manifold: {0} edges with more than two triangles")]
    NonManifold(usize),
    #[error("{path}:{line}: {msg}")]
    Malformed { path: String, line: usize, msg: String },
    #[error("unsupported mesh format '{0}'")]
    UnsupportedFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub positions: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
    /// Named per-vertex scalars.
    pub channels: BTreeMap<String, Vec<f64>>,
}

impl TriangleMesh {
    pub fn new(positions: Vec<Point3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            positions,
            triangles,
            ..Default::default()
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.positions.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= count {
                    return Err(MeshError::IndexOutOfRange { triangle: t, index, count });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::DegenerateTriangle(t));
            }
        }
        for (name, ch) in &self.channels {
            if ch.len() != count {
                return Err(MeshError::ChannelLength {
                    name: name.clone(),
                    len: ch.len(),
                    count,
                });
            }
        }
        if let Some(n) = &self.normals {
            if n.len() != count {
                return Err(MeshError::ChannelLength {
                    name: "normals".into(),
                    len: n.len(),
                    count,
                });
            }
        }
        Ok(())
    }

    pub fn corners(&self, t: usize) -> [Point3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.positions[a as usize], self.positions[b as usize], self.positions[c as usize]]
    }

    /// Unnormalized normal, twice the triangle area in length.
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(c - a)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| 0.5 * self.triangle_normal(t).norm()).sum()
    }

    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let mut it = self.positions.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p))))
    }

    pub fn diagonal(&self) -> f64 {
        self.bounds().map_or(0.0, |(lo, hi)| lo.distance(hi))
    }

    /// Area-weighted average of incident triangle normals.
    pub fn area_weighted_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::ZERO; self.positions.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let tn = self.triangle_normal(t);
            for &v in tri {
                n[v as usize] += tn;
            }
        }
        n.into_iter().map(|v| v.normalize()).collect()
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut nb: Vec<Vec<u32>> = vec![Vec::new(); self.positions.len()];
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                nb[a as usize].push(b);
                nb[b as usize].push(a);
            }
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    /// Undirected edge `(min, max)` → incident triangles.
    pub fn edge_map(&self) -> BTreeMap<(u32, u32), Vec<usize>> {
        let mut map: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                map.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        map
    }

    /// Per-vertex flag: touches a boundary or non-manifold edge.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flag = vec![false; self.positions.len()];
        for (&(a, b), tris) in &self.edge_map() {
            if tris.len() != 2 {
                flag[a as usize] = true;
                flag[b as usize] = true;
            }
        }
        flag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ManifoldReport {
    pub closed: bool,
    pub euler: i64,
    pub boundary_loops: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    /// Edges whose two triangles traverse them in the same direction.
    pub inconsistent_edges: usize,
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

/// Edge-incidence audit. The Euler characteristic counts referenced
/// vertices only.
pub fn manifold_audit(mesh: &TriangleMesh) -> ManifoldReport {
    let edges = mesh.edge_map();
    let mut used = vec![false; mesh.positions.len()];
    for t in &mesh.triangles {
        for &v in t {
            used[v as usize] = true;
        }
    }
    let v = used.iter().filter(|&&u| u).count() as i64;
    let mut boundary_edges = 0;
    let mut nonmanifold_edges = 0;
    let mut inconsistent_edges = 0;
    let mut dsu = Dsu::new(mesh.positions.len());
    let mut on_boundary = vec![false; mesh.positions.len()];
    for (&(a, b), tris) in &edges {
        match tris.len() {
            1 => {
                boundary_edges += 1;
                dsu.union(a as usize, b as usize);
                on_boundary[a as usize] = true;
                on_boundary[b as usize] = true;
            }
            2 => {
                let forward = |t: usize| {
                    let tri = mesh.triangles[t];
                    (0..3).any(|e| tri[e] == a && tri[(e + 1) % 3] == b)
                };
                if forward(tris[0]) == forward(tris[1]) {
                    inconsistent_edges += 1;
                }
            }
            _ => nonmanifold_edges += 1,
        }
    }
    let boundary_loops = (0..mesh.positions.len())
        .filter(|&i| on_boundary[i] && dsu.find(i) == i)
        .count();
    ManifoldReport {
        closed: boundary_edges == 0 && nonmanifold_edges == 0,
        euler: v - edges.len() as i64 + mesh.triangles.len() as i64,
        boundary_loops,
        boundary_edges,
        nonmanifold_edges,
        inconsistent_edges,
    }
}

/// Concatenates `meshes` and merges vertices closer than `tolerance`. The
/// first vertex of each merged group keeps its position; channels present in
/// every input are averaged over the group. Triangles collapsed by the merge
/// are dropped.
pub fn weld(meshes: &[TriangleMesh], tolerance: f64) -> TriangleMesh {
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    for m in meshes {
        let base = positions.len() as u32;
        positions.extend_from_slice(&m.positions);
        triangles.extend(m.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    let count = positions.len();
    let mut dsu = Dsu::new(count);
    if tolerance > 0.0 {
        // buckets wider than the tolerance: a point only probes the
        // neighbouring bucket on axes where it lies within `tolerance` of a
        // bucket wall
        let size = 16.0 * tolerance;
        let key = |p: Point3| [(p.x / size).floor(), (p.y / size).floor(), (p.z / size).floor()].map(|k| k as i64);
        let mut head: HashMap<[i64; 3], usize> = HashMap::with_capacity(count);
        let mut next = vec![usize::MAX; count];
        for (i, &p) in positions.iter().enumerate() {
            let k = key(p);
            let mut offsets = [[0i64; 2]; 3];
            let mut lens = [1usize; 3];
            for (a, c) in [p.x, p.y, p.z].into_iter().enumerate() {
                let lo = k[a] as f64 * size;
                if c - lo <= tolerance {
                    offsets[a][lens[a]] = -1;
                    lens[a] += 1;
                } else if lo + size - c <= tolerance {
                    offsets[a][lens[a]] = 1;
                    lens[a] += 1;
                }
            }
            for &dx in &offsets[0][..lens[0]] {
                for &dy in &offsets[1][..lens[1]] {
                    for &dz in &offsets[2][..lens[2]] {
                        let mut j = head.get(&[k[0] + dx, k[1] + dy, k[2] + dz]).copied().unwrap_or(usize::MAX);
                        while j != usize::MAX {
                            if positions[j].distance(p) <= tolerance {
                                dsu.union(i, j);
                            }
                            j = next[j];
                        }
                    }
                }
            }
            if let Some(h) = head.insert(k, i) {
                next[i] = h;
            }
        }
    } else {
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        for (i, p) in positions.iter().enumerate() {
            // +0.0 and -0.0 are the same point
            let bits = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
            match seen.get(&bits) {
                Some(&j) => dsu.union(i, j),
                None => {
                    seen.insert(bits, i);
                }
            }
        }
    }

    let mut remap = vec![u32::MAX; count];
    let mut reps = Vec::new();
    for i in 0..count {
        let r = dsu.find(i);
        if remap[r] == u32::MAX {
            remap[r] = reps.len() as u32;
            reps.push(r);
        }
        remap[i] = remap[r];
    }
    let out_positions: Vec<Point3> = reps.iter().map(|&r| positions[r]).collect();
    let out_triangles: Vec<[u32; 3]> = triangles
        .iter()
        .map(|t| t.map(|v| remap[v as usize]))
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();

    let group_sizes = {
        let mut s = vec![0usize; reps.len()];
        for &r in &remap {
            s[r as usize] += 1;
        }
        s
    };
    let mut channels = BTreeMap::new();
    if let Some(first) = meshes.first() {
        for name in first.channels.keys() {
            if !meshes.iter().all(|m| m.channels.contains_key(name)) {
                continue;
            }
            let values: Vec<f64> = meshes.iter().flat_map(|m| m.channels[name].iter().copied()).collect();
            let mut acc = vec![0.0; reps.len()];
            for (i, v) in values.iter().enumerate() {
                acc[remap[i] as usize] += v;
            }
            for (a, &s) in acc.iter_mut().zip(&group_sizes) {
                *a /= s as f64;
            }
            channels.insert(name.clone(), acc);
        }
    }
    let normals = if !meshes.is_empty() && meshes.iter().all(|m| m.normals.is_some()) {
        let mut acc = vec![Vec3::ZERO; reps.len()];
        for (i, n) in meshes.iter().flat_map(|m| m.normals.as_ref().unwrap().iter()).enumerate() {
            acc[remap[i] as usize] += *n;
        }
        Some(acc.into_iter().map(|n| n.normalize()).collect())
    } else {
        None
    };
    TriangleMesh {
        positions: out_positions,
        triangles: out_triangles,
        normals,
        channels,
    }
}

/// Default weld tolerance: `1e-9` times the bounding-box diagonal.
pub fn default_weld_tolerance(meshes: &[TriangleMesh]) -> f64 {
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for m in meshes {
        if let Some((a, b)) = m.bounds() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    if lo.x.is_finite() {
        1e-9 * lo.distance(hi)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0), Vec3::Y],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    fn tetra() -> TriangleMesh {
        TriangleMesh::new(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z],
            vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]],
        )
    }

    #[test]
    fn audits() {
        let r = manifold_audit(&quad());
        assert_eq!((r.closed, r.euler, r.boundary_loops, r.nonmanifold_edges), (false, 1, 1, 0));
        assert_eq!(r.inconsistent_edges, 0);
        let r = manifold_audit(&tetra());
        assert_eq!((r.closed, r.euler, r.boundary_loops), (true, 2, 0));
        assert_eq!(r.inconsistent_edges, 0);

        let mut flipped = quad();
        flipped.triangles[1] = [0, 3, 2];
        let r = manifold_audit(&flipped);
        assert_eq!((r.nonmanifold_edges, r.inconsistent_edges), (0, 1));
    }

    #[test]
    fn weld_two_halves() {
        let a = TriangleMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::new(1.0, 1.0, 0.0)], vec![[0, 1, 2]]);
        let b = TriangleMesh::new(vec![Vec3::ZERO, Vec3::new(1.0, 1.0, 0.0), Vec3::Y], vec![[0, 1, 2]]);
        let w = weld(&[a.clone(), b.clone()], 0.0);
        assert_eq!(w.vertex_count(), 4);
        assert_eq!(manifold_audit(&w).boundary_loops, 1);
        assert_eq!(w.area(), 1.0);

        let mut b2 = b;
        b2.positions[0] = Vec3::new(1e-12, 0.0, 0.0);
        assert_eq!(weld(&[a.clone(), b2.clone()], 0.0).vertex_count(), 5);
        let w = weld(&[a, b2], 1e-9);
        assert_eq!(w.vertex_count(), 4);
        assert_eq!(w.positions[0], Vec3::ZERO);
    }

    #[test]
    fn weld_single_is_identity() {
        let mut q = quad();
        q.channels.insert("h".into(), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(weld(&[q.clone()], 0.0), q);
        assert_eq!(weld(&[q.clone()], 1e-6), q);
    }

    #[test]
    fn weld_averages_channels() {
        let mut a = TriangleMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]]);
        a.channels.insert("c".into(), vec![1.0, 0.0, 0.0]);
        let mut b = TriangleMesh::new(vec![Vec3::ZERO, Vec3::Y, Vec3::new(-1.0, 0.0, 0.0)], vec![[0, 1, 2]]);
        b.channels.insert("c".into(), vec![3.0, 5.0, 0.0]);
        let w = weld(&[a, b], 0.0);
        assert_eq!(w.channels["c"], vec![2.0, 0.0, 2.5, 0.0]);
    }

    #[test]
    fn validate_catches_bad_meshes() {
        let mut m = quad();
        assert!(m.validate().is_ok());
        m.triangles.push([0, 0, 1]);
        assert!(matches!(m.validate(), Err(MeshError::DegenerateTriangle(2))));
        m.triangles[2] = [0, 1, 9];
        assert!(m.validate().is_err());
    }
}
