//! Mesh quality metrics: discrete curvatures, isophotes, valences, triangle
//! shape, and field residuals.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::ScalarField;
use crate::geom::Vec3;
use crate::mesh::{manifold_audit, ManifoldReport, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("vertex {0} has a zero-length normal")]
    ZeroNormal(usize),
    #[error("isophotes need at least one band")]
    NoBands,
}

/// Per-vertex scalar with a reliability flag; boundary vertices and
/// vertices touching degenerate triangles are unreliable.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexScalar {
    pub values: Vec<f64>,
    pub reliable: Vec<bool>,
}

impl VertexScalar {
    pub fn reliable_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.reliable).filter(|(_, r)| **r).map(|(v, _)| *v)
    }

    /// Root-mean-square deviation of the reliable values from `target`.
    pub fn rms_error(&self, target: f64) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for v in self.reliable_values() {
            s += (v - target) * (v - target);
            n += 1;
        }
        if n == 0 {
            f64::NAN
        } else {
            (s / n as f64).sqrt()
        }
    }
}

fn cot(a: Vec3, b: Vec3) -> f64 {
    a.dot(b) / a.cross(b).norm()
}

/// Mixed Voronoi area per vertex, with the obtuse-triangle fallback.
pub fn mixed_areas(mesh: &TriangleMesh) -> Vec<f64> {
    let mut area = vec![0.0; mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let idx = mesh.triangles[t];
        let p = mesh.corners(t);
        let ta = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
        if ta == 0.0 {
            continue;
        }
        let obtuse = (0..3).find(|&k| (p[(k + 1) % 3] - p[k]).dot(p[(k + 2) % 3] - p[k]) < 0.0);
        for k in 0..3 {
            let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            area[idx[k] as usize] += match obtuse {
                None => {
                    // 1/8 (|PR|² cot Q + |PQ|² cot R)
                    let cot_q = cot(p[k] - q, r - q);
                    let cot_r = cot(p[k] - r, q - r);
                    ((r - p[k]).norm_squared() * cot_q + (q - p[k]).norm_squared() * cot_r) / 8.0
                }
                Some(o) if o == k => ta / 2.0,
                Some(_) => ta / 4.0,
            };
        }
    }
    area
}

/// Triangles whose doubled area is below `1e-10` times the squared mean
/// edge length. Marching Cubes emits such slivers when a grid value is
/// nearly zero.
fn degenerate_triangles(mesh: &TriangleMesh) -> Vec<bool> {
    let (mut sum, mut count) = (0.0, 0usize);
    for t in 0..mesh.triangle_count() {
        let p = mesh.corners(t);
        for k in 0..3 {
            sum += p[k].distance(p[(k + 1) % 3]);
            count += 1;
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let eps = 1e-10 * mean * mean;
    (0..mesh.triangle_count())
        .map(|t| {
            let n = mesh.triangle_normal(t).norm();
            n == 0.0 || n <= eps
        })
        .collect()
}

fn degenerate_flags(mesh: &TriangleMesh, degenerate: &[bool]) -> Vec<bool> {
    let mut bad = mesh.boundary_vertices();
    for t in 0..mesh.triangle_count() {
        if degenerate[t] {
            for &v in &mesh.triangles[t] {
                bad[v as usize] = true;
            }
        }
    }
    bad
}

/// Cotangent Laplace–Beltrami mean curvature `H = |Δp| / 2`. Signed (positive
/// where the surface bends away from its normals, e.g. a sphere with outward
/// normals) when the mesh carries normals; unsigned otherwise.
pub fn mean_curvature(mesh: &TriangleMesh) -> VertexScalar {
    let n = mesh.vertex_count();
    let degenerate = degenerate_triangles(mesh);
    let mut lap = vec![Vec3::ZERO; n];
    for t in 0..mesh.triangle_count() {
        if degenerate[t] {
            continue;
        }
        let idx = mesh.triangles[t];
        let p = mesh.corners(t);
        for k in 0..3 {
            // edge opposite corner k, weighted by cot of the angle at k
            let (a, b) = ((k + 1) % 3, (k + 2) % 3);
            let w = cot(p[a] - p[k], p[b] - p[k]);
            let d = p[b] - p[a];
            lap[idx[a] as usize] += d * w;
            lap[idx[b] as usize] -= d * w;
        }
    }
    let area = mixed_areas(mesh);
    let bad = degenerate_flags(mesh, &degenerate);
    let values = (0..n)
        .map(|v| {
            if area[v] <= 0.0 {
                return f64::NAN;
            }
            let l = lap[v] / (2.0 * area[v]);
            let h = 0.5 * l.norm();
            match &mesh.normals {
                Some(normals) if l.dot(normals[v]) > 0.0 => -h,
                _ => h,
            }
        })
        .collect::<Vec<_>>();
    let reliable = (0..n).map(|v| !bad[v] && values[v].is_finite()).collect();
    VertexScalar { values, reliable }
}

/// Sum of incident triangle angles per vertex.
pub fn angle_sums(mesh: &TriangleMesh) -> Vec<f64> {
    let mut sum = vec![0.0; mesh.vertex_count()];
    for t in 0..mesh.triangle_count() {
        let idx = mesh.triangles[t];
        let p = mesh.corners(t);
        for k in 0..3 {
            sum[idx[k] as usize] += (p[(k + 1) % 3] - p[k]).angle(p[(k + 2) % 3] - p[k]);
        }
    }
    sum
}

/// Angle-defect Gaussian curvature `(2π − Σθ) / A_mixed`.
pub fn gaussian_curvature(mesh: &TriangleMesh) -> VertexScalar {
    let sums = angle_sums(mesh);
    let area = mixed_areas(mesh);
    let bad = degenerate_flags(mesh, &degenerate_triangles(mesh));
    let values: Vec<f64> = (0..mesh.vertex_count())
        .map(|v| if area[v] > 0.0 { (TAU - sums[v]) / area[v] } else { f64::NAN })
        .collect();
    let reliable = (0..values.len()).map(|v| !bad[v] && values[v].is_finite()).collect();
    VertexScalar { values, reliable }
}

/// `Σ_v K_v · A_v` over all referenced vertices, i.e. the total angle defect.
/// Equals `2π χ` on closed meshes.
pub fn total_curvature(mesh: &TriangleMesh) -> f64 {
    let sums = angle_sums(mesh);
    let mut used = vec![false; mesh.vertex_count()];
    for t in &mesh.triangles {
        for &v in t {
            used[v as usize] = true;
        }
    }
    (0..sums.len()).filter(|&v| used[v]).map(|v| TAU - sums[v]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Isophotes {
    /// `n · view`.
    pub raw: Vec<f64>,
    /// Band index in `0..bands` of `raw` over `[-1, 1]`.
    pub banded: Vec<f64>,
}

pub fn isophotes(mesh: &TriangleMesh, view: Vec3, bands: usize) -> Result<Isophotes, QualityError> {
    if bands == 0 {
        return Err(QualityError::NoBands);
    }
    let view = view.normalize();
    let normals = match &mesh.normals {
        Some(n) => n.clone(),
        None => mesh.area_weighted_normals(),
    };
    let mut raw = Vec::with_capacity(normals.len());
    let mut banded = Vec::with_capacity(normals.len());
    for (v, n) in normals.iter().enumerate() {
        let n = n.try_normalize().ok_or(QualityError::ZeroNormal(v))?;
        let d = n.dot(view).clamp(-1.0, 1.0);
        raw.push(d);
        let b = (((d + 1.0) / 2.0) * bands as f64).floor() as usize;
        banded.push(b.min(bands - 1) as f64);
    }
    Ok(Isophotes { raw, banded })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValenceHistogram {
    pub interior: BTreeMap<usize, usize>,
    pub boundary: BTreeMap<usize, usize>,
}

impl ValenceHistogram {
    pub fn support(&self) -> std::collections::BTreeSet<usize> {
        self.interior.keys().chain(self.boundary.keys()).copied().collect()
    }

    pub fn total(&self) -> usize {
        self.interior.values().sum::<usize>() + self.boundary.values().sum::<usize>()
    }
}

/// Vertex degrees, split by whether the vertex touches a boundary edge.
pub fn valence_histogram(mesh: &TriangleMesh) -> ValenceHistogram {
    let adj = mesh.adjacency();
    let boundary = mesh.boundary_vertices();
    let mut h = ValenceHistogram::default();
    for (v, nb) in adj.iter().enumerate() {
        let map = if boundary[v] { &mut h.boundary } else { &mut h.interior };
        *map.entry(nb.len()).or_default() += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Percentiles {
    pub min: f64,
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

/// Linear-interpolated percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let x = q * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let f = x - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + (sorted[i + 1] - sorted[i]) * f
    } else {
        sorted[i]
    }
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        let mut s: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        s.sort_by(f64::total_cmp);
        Percentiles {
            min: percentile(&s, 0.0),
            p5: percentile(&s, 0.05),
            p25: percentile(&s, 0.25),
            p50: percentile(&s, 0.5),
            p75: percentile(&s, 0.75),
            p95: percentile(&s, 0.95),
            max: percentile(&s, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleQuality {
    /// Smallest interior angle per triangle, degrees.
    pub min_angles: Vec<f64>,
    /// Circumradius over shortest edge per triangle.
    pub ratios: Vec<f64>,
}

impl TriangleQuality {
    pub fn min_angle_percentiles(&self) -> Percentiles {
        Percentiles::of(&self.min_angles)
    }

    pub fn ratio_percentiles(&self) -> Percentiles {
        Percentiles::of(&self.ratios)
    }
}

pub fn triangle_quality(mesh: &TriangleMesh) -> TriangleQuality {
    let (min_angles, ratios) = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let p = mesh.corners(t);
            let min_angle = (0..3)
                .map(|k| (p[(k + 1) % 3] - p[k]).angle(p[(k + 2) % 3] - p[k]))
                .fold(f64::INFINITY, f64::min)
                .to_degrees();
            let e = [p[1].distance(p[2]), p[2].distance(p[0]), p[0].distance(p[1])];
            let area2 = (p[1] - p[0]).cross(p[2] - p[0]).norm();
            let circumradius = e[0] * e[1] * e[2] / (2.0 * area2);
            let shortest = e.iter().cloned().fold(f64::INFINITY, f64::min);
            (min_angle, circumradius / shortest)
        })
        .unzip();
    TriangleQuality { min_angles, ratios }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub max: f64,
    pub rms: f64,
    pub mean: f64,
}

/// Statistics of `|F|` over the mesh vertices.
pub fn field_residuals(mesh: &TriangleMesh, field: &ScalarField) -> Residuals {
    let n = mesh.vertex_count();
    if n == 0 {
        return Residuals {
            max: 0.0,
            rms: 0.0,
            mean: 0.0,
        };
    }
    let vals: Vec<f64> = mesh.positions.par_iter().map(|&p| field.value(p).abs()).collect();
    Residuals {
        max: vals.iter().cloned().fold(0.0, f64::max),
        rms: (vals.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt(),
        mean: vals.iter().sum::<f64>() / n as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarStats {
    pub count: usize,
    pub mean: f64,
    pub rms: f64,
    pub min: f64,
    pub max: f64,
}

impl ScalarStats {
    pub fn of(s: &VertexScalar) -> Self {
        let v: Vec<f64> = s.reliable_values().collect();
        let n = v.len();
        let nf = n.max(1) as f64;
        ScalarStats {
            count: n,
            mean: v.iter().sum::<f64>() / nf,
            rms: (v.iter().map(|x| x * x).sum::<f64>() / nf).sqrt(),
            min: v.iter().cloned().fold(f64::INFINITY, f64::min),
            max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub vertices: usize,
    pub triangles: usize,
    pub manifold: ManifoldReport,
    pub valence: ValenceHistogram,
    pub min_angle: Percentiles,
    pub aspect_ratio: Percentiles,
    pub mean_curvature: ScalarStats,
    pub curvature_signed: bool,
    pub gaussian_curvature: ScalarStats,
    pub total_curvature: f64,
    pub residual: Option<Residuals>,
    /// Per-vertex channels: `mean_curvature`, `gaussian_curvature`,
    /// `isophote`, `isophote_band`.
    pub channels: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub view: Vec3,
    pub bands: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { view: Vec3::Z, bands: 12 }
    }
}

pub fn quality_report(mesh: &TriangleMesh, field: Option<&ScalarField>, opts: &ReportOptions) -> Result<QualityReport, QualityError> {
    let h = mean_curvature(mesh);
    let k = gaussian_curvature(mesh);
    let tq = triangle_quality(mesh);
    let mut channels = BTreeMap::new();
    if mesh.vertex_count() > 0 {
        let iso = isophotes(mesh, opts.view, opts.bands)?;
        channels.insert("isophote".to_string(), iso.raw);
        channels.insert("isophote_band".to_string(), iso.banded);
    }
    let report = QualityReport {
        vertices: mesh.vertex_count(),
        triangles: mesh.triangle_count(),
        manifold: manifold_audit(mesh),
        valence: valence_histogram(mesh),
        min_angle: tq.min_angle_percentiles(),
        aspect_ratio: tq.ratio_percentiles(),
        mean_curvature: ScalarStats::of(&h),
        curvature_signed: mesh.normals.is_some(),
        gaussian_curvature: ScalarStats::of(&k),
        total_curvature: total_curvature(mesh),
        residual: field.map(|f| field_residuals(mesh, f)),
        channels,
    };
    let mut report = report;
    report.channels.insert("mean_curvature".into(), h.values);
    report.channels.insert("gaussian_curvature".into(), k.values);
    Ok(report)
}

impl QualityReport {
    /// `key = value` lines grouped in `[sections]`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.manifold;
        writeln!(s, "vertices = {}", self.vertices).unwrap();
        writeln!(s, "triangles = {}", self.triangles).unwrap();
        writeln!(s, "\n[manifold]").unwrap();
        writeln!(s, "closed = {}", m.closed).unwrap();
        writeln!(s, "euler = {}", m.euler).unwrap();
        writeln!(s, "boundary_loops = {}", m.boundary_loops).unwrap();
        writeln!(s, "nonmanifold_edges = {}", m.nonmanifold_edges).unwrap();
        writeln!(s, "inconsistent_edges = {}", m.inconsistent_edges).unwrap();
        for (name, hist) in [("valence.interior", &self.valence.interior), ("valence.boundary", &self.valence.boundary)] {
            writeln!(s, "\n[{name}]").unwrap();
            for (k, v) in hist {
                writeln!(s, "{k} = {v}").unwrap();
            }
        }
        for (name, p) in [("min_angle_deg", &self.min_angle), ("aspect_ratio", &self.aspect_ratio)] {
            writeln!(s, "\n[{name}]").unwrap();
            for (k, v) in [
                ("min", p.min),
                ("p5", p.p5),
                ("p25", p.p25),
                ("p50", p.p50),
                ("p75", p.p75),
                ("p95", p.p95),
                ("max", p.max),
            ] {
                writeln!(s, "{k} = {v:.9}").unwrap();
            }
        }
        for (name, st) in [("mean_curvature", &self.mean_curvature), ("gaussian_curvature", &self.gaussian_curvature)] {
            writeln!(s, "\n[{name}]").unwrap();
            if name == "mean_curvature" {
                writeln!(s, "signed = {}", self.curvature_signed).unwrap();
            }
            writeln!(s, "count = {}", st.count).unwrap();
            writeln!(s, "mean = {:.9e}", st.mean).unwrap();
            writeln!(s, "rms = {:.9e}", st.rms).unwrap();
            writeln!(s, "min = {:.9e}", st.min).unwrap();
            writeln!(s, "max = {:.9e}", st.max).unwrap();
        }
        writeln!(s, "\n[gauss_bonnet]").unwrap();
        writeln!(s, "total_curvature = {:.12e}", self.total_curvature).unwrap();
        writeln!(s, "two_pi_euler = {:.12e}", TAU * m.euler as f64).unwrap();
        if let Some(r) = &self.residual {
            writeln!(s, "\n[residual]").unwrap();
            writeln!(s, "max_abs_f = {:.9e}", r.max).unwrap();
            writeln!(s, "rms_abs_f = {:.9e}", r.rms).unwrap();
            writeln!(s, "mean_abs_f = {:.9e}", r.mean).unwrap();
        }
        s
    }
}

/// Equilateral reference: min angle 60°, ratio `1/√3`.
pub const EQUILATERAL_RATIO: f64 = 0.577_350_269_189_625_8;

#[allow(dead_code)]
const _: () = assert!(PI > 3.0);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_zero_area_counts_as_degenerate() {
        let m = TriangleMesh::new(
            vec![
                Vec3::ZERO,
                Vec3::X,
                Vec3::Y,
                Vec3::new(0.5, 0.5 + 1e-13, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        );
        assert_eq!(degenerate_triangles(&m), vec![false, true]);
        let h = mean_curvature(&m);
        assert!(h.reliable.iter().all(|r| !r));
    }

    /// Jittered planar grid in z = 0.
    fn planar(n: usize) -> TriangleMesh {
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let inner = i > 0 && j > 0 && i + 1 < n && j + 1 < n;
                let jit = if inner { 0.2 * ((i * 7 + j * 3) as f64).sin() } else { 0.0 };
                pts.push(Vec3::new(i as f64 + jit, j as f64 + 0.5 * jit, 0.0));
            }
        }
        let mut tris = Vec::new();
        let n = n as u32;
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = j * n + i;
                tris.push([a, a + 1, a + n + 1]);
                tris.push([a, a + n + 1, a + n]);
            }
        }
        TriangleMesh::new(pts, tris)
    }

    /// Analytic cylinder of radius `r` around z, sampled on a regular grid.
    fn cylinder(r: f64, m: usize, rows: usize) -> TriangleMesh {
        let mut pts = Vec::new();
        let h = TAU * r / m as f64;
        for j in 0..rows {
            for i in 0..m {
                // staggered rows give near-equilateral triangles
                let a = TAU * (i as f64 + 0.5 * (j % 2) as f64) / m as f64;
                pts.push(Vec3::new(r * a.cos(), r * a.sin(), j as f64 * h * 0.866));
            }
        }
        let mut tris = Vec::new();
        let m32 = m as u32;
        for j in 0..rows as u32 - 1 {
            for i in 0..m32 {
                let a = j * m32 + i;
                let b = j * m32 + (i + 1) % m32;
                let c = (j + 1) * m32 + i;
                let d = (j + 1) * m32 + (i + 1) % m32;
                if j % 2 == 0 {
                    tris.push([a, b, c]);
                    tris.push([b, d, c]);
                } else {
                    tris.push([a, d, c]);
                    tris.push([a, b, d]);
                }
            }
        }
        TriangleMesh::new(pts, tris)
    }

    fn icosphere(level: usize) -> TriangleMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut pts: Vec<Vec3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|&a| Vec3::from_array(a).normalize())
        .collect();
        let mut tris: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut mid = std::collections::HashMap::new();
            let mut next = Vec::new();
            for t in &tris {
                let mut m = [0u32; 3];
                for e in 0..3 {
                    let (a, b) = (t[e].min(t[(e + 1) % 3]), t[e].max(t[(e + 1) % 3]));
                    m[e] = *mid.entry((a, b)).or_insert_with(|| {
                        pts.push((pts[a as usize] + pts[b as usize]).normalize());
                        (pts.len() - 1) as u32
                    });
                }
                next.push([t[0], m[0], m[2]]);
                next.push([t[1], m[1], m[0]]);
                next.push([t[2], m[2], m[1]]);
                next.push(m);
            }
            tris = next;
        }
        let mut mesh = TriangleMesh::new(pts.clone(), tris);
        mesh.normals = Some(pts);
        mesh
    }

    #[test]
    fn flat_mesh_has_zero_curvature() {
        let m = planar(8);
        let h = mean_curvature(&m);
        let k = gaussian_curvature(&m);
        assert!(h.reliable.iter().any(|&r| r));
        for v in h.reliable_values().chain(k.reliable_values()) {
            assert!(v.abs() < 1e-10, "{v}");
        }
        let iso = isophotes(&m, Vec3::Z, 8).unwrap();
        assert!(iso.banded.iter().all(|&b| b == iso.banded[0]));
    }

    #[test]
    fn sphere_curvatures() {
        let m = icosphere(4);
        let h = mean_curvature(&m);
        let k = gaussian_curvature(&m);
        for v in h.reliable_values() {
            assert!((v - 1.0).abs() < 0.05, "H = {v}");
        }
        for v in k.reliable_values() {
            assert!((v - 1.0).abs() < 0.1, "K = {v}");
        }
        let chi = manifold_audit(&m).euler as f64;
        assert!((total_curvature(&m) - TAU * chi).abs() < 1e-6 * TAU * chi);
    }

    #[test]
    fn cylinder_curvatures() {
        let m = cylinder(2.0, 64, 20);
        let h = mean_curvature(&m);
        let k = gaussian_curvature(&m);
        for v in h.reliable_values() {
            assert!((v - 0.25).abs() < 0.05 * 0.25, "H = {v}");
        }
        let scale = m.diagonal();
        for v in k.reliable_values() {
            assert!(v.abs() < 1e-3 * scale, "K = {v}");
        }
    }

    #[test]
    fn sphere_isophotes() {
        let m = icosphere(3);
        let iso = isophotes(&m, Vec3::Z, 2).unwrap();
        for (p, r) in m.positions.iter().zip(&iso.raw) {
            assert!((p.z - r).abs() < 1e-2);
        }
        let unnormalled = TriangleMesh::new(m.positions.clone(), m.triangles.clone());
        let iso2 = isophotes(&unnormalled, Vec3::Z, 2).unwrap();
        let edge = m.positions[m.triangles[0][0] as usize].distance(m.positions[m.triangles[0][1] as usize]);
        for (p, b) in m.positions.iter().zip(&iso2.banded) {
            if p.z > edge {
                assert_eq!(*b, 1.0);
            } else if p.z < -edge {
                assert_eq!(*b, 0.0);
            }
        }
    }

    #[test]
    fn triangle_shapes() {
        let eq = TriangleMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0)], vec![[0, 1, 2]]);
        let q = triangle_quality(&eq);
        assert!((q.min_angles[0] - 60.0).abs() < 1e-9);
        assert!((q.ratios[0] - EQUILATERAL_RATIO).abs() < 1e-12);
        let needle = TriangleMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::new(0.5, 1e-3, 0.0)], vec![[0, 1, 2]]);
        assert!(triangle_quality(&needle).min_angles[0] < 1.0);

        let hist = valence_histogram(&eq);
        assert_eq!(hist.boundary.get(&2), Some(&3));
        assert!(hist.interior.is_empty());
    }

    #[test]
    fn report_text_has_sections() {
        let m = icosphere(2);
        let f = ScalarField::from_expr("x^2+y^2+z^2-1").unwrap();
        let r = quality_report(&m, Some(&f), &ReportOptions::default()).unwrap();
        assert_eq!(r.valence.total(), m.vertex_count());
        for ch in r.channels.values() {
            assert_eq!(ch.len(), m.vertex_count());
        }
        let text = r.to_text();
        for key in ["[manifold]", "[valence.interior]", "[mean_curvature]", "[residual]", "euler = 2"] {
            assert!(text.contains(key), "{key}");
        }
    }
}
