//! Matched-detail comparison of Marching Cubes and projection.
//!
//! A detail level is a chordal-error target. For each level both methods
//! are tuned to the coarsest setting that meets it, then timed.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::ScalarField;
use crate::geom::Point3;
use crate::mc::{marching_cubes, GridSpec, McError};
use crate::mesh::TriangleMesh;
use crate::partition::OctreeParams;
use crate::pipeline::{tessellate, Partition, PipelineError, TessellateOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least one detail level is required")]
    NoLevels,
    #[error("detail levels must be positive, got {0}")]
    InvalidLevel(f64),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("could not build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Chordal-error targets, one per level.
    pub levels: Vec<f64>,
    /// Timed runs per method and level; the median is reported.
    pub repetitions: usize,
    /// Worker threads for the timed runs.
    pub threads: usize,
    /// Octree depths tried for projection.
    pub depths: Vec<u32>,
    /// Largest domain resolution tried for projection.
    pub max_resolution: usize,
    /// Smallest MC spacing tried, relative to the longest box side.
    pub min_spacing: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            levels: vec![1e-2, 3e-3, 1e-3],
            repetitions: 5,
            threads: 1,
            depths: vec![2, 3, 4],
            max_resolution: 32,
            min_spacing: 1.0 / 512.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Projection,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Projection => "projection",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub level: usize,
    pub target: f64,
    pub vertices: usize,
    pub triangles: usize,
    pub time_ms: f64,
    pub chordal_error: f64,
    pub mean_abs_f: f64,
    /// Chosen setting, e.g. `spacing=0.05` or `depth=3 r=5`.
    pub settings: String,
    /// False when no tried setting met the target or patches were rejected.
    pub ok: bool,
}

/// Distance from `p` to the surface, by Newton steps along the gradient.
pub fn surface_distance(field: &ScalarField, p: Point3) -> f64 {
    let mut q = p;
    for _ in 0..50 {
        let f = field.value(q);
        let g = match field.gradient(q) {
            Ok(g) => g,
            Err(_) => return f64::INFINITY,
        };
        let gg = g.norm_squared();
        if !(gg > 0.0) || !f.is_finite() {
            return f64::INFINITY;
        }
        let step = g * (f / gg);
        q -= step;
        if step.norm() < 1e-14 * (1.0 + q.norm()) {
            break;
        }
    }
    q.distance(p)
}

/// Largest surface distance over triangle-edge midpoints.
pub fn chordal_error(field: &ScalarField, mesh: &TriangleMesh) -> f64 {
    use rayon::prelude::*;
    mesh.edge_map()
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(a, b)| {
            let m = mesh.positions[a as usize].lerp(mesh.positions[b as usize], 0.5);
            surface_distance(field, m)
        })
        .reduce(|| 0.0, f64::max)
}

fn mean_abs_f(field: &ScalarField, mesh: &TriangleMesh) -> f64 {
    if mesh.positions.is_empty() {
        return 0.0;
    }
    mesh.positions.iter().map(|&p| field.value(p).abs()).sum::<f64>() / mesh.positions.len() as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_median<T>(reps: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let out = f();
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        last = Some(out);
    }
    (median(times), last.unwrap())
}

struct McSetting {
    spacing: f64,
    mesh: TriangleMesh,
    error: f64,
}

fn mc_at(field: &ScalarField, min: Point3, max: Point3, spacing: f64) -> Result<McSetting, McError> {
    let mesh = marching_cubes(field, &GridSpec { min, max, spacing })?;
    let error = chordal_error(field, &mesh);
    Ok(McSetting { spacing, mesh, error })
}

/// Coarsest spacing meeting `target`: halve until it holds, then bisect
/// between the last failing and first passing spacing.
fn tune_mc(field: &ScalarField, min: Point3, max: Point3, target: f64, cfg: &BenchConfig) -> Result<Option<McSetting>, McError> {
    let extent = (max - min).max_abs();
    let floor = cfg.min_spacing * extent;
    let mut fail = extent / 4.0;
    let mut pass = None;
    let mut h = fail;
    while h >= floor {
        let s = mc_at(field, min, max, h)?;
        if !s.mesh.is_empty() && s.error <= target {
            pass = Some(s);
            break;
        }
        fail = h;
        h *= 0.5;
    }
    let Some(mut best) = pass else {
        return Ok(None);
    };
    if fail > best.spacing {
        for _ in 0..8 {
            let mid = 0.5 * (fail + best.spacing);
            let s = mc_at(field, min, max, mid)?;
            if !s.mesh.is_empty() && s.error <= target {
                best = s;
            } else {
                fail = mid;
            }
        }
    }
    Ok(Some(best))
}

struct ProjSetting {
    depth: u32,
    opts: TessellateOptions,
    mesh: TriangleMesh,
    error: f64,
}

fn octree(min: Point3, max: Point3, depth: u32) -> Partition {
    Partition::Octree {
        min,
        max,
        params: OctreeParams {
            max_depth: depth,
            min_depth: depth,
            samples_per_axis: 8,
        },
    }
}

/// Fewest-vertex (depth, r) pair meeting `target` with every patch accepted.
fn tune_projection(
    field: &ScalarField,
    min: Point3,
    max: Point3,
    target: f64,
    base: &TessellateOptions,
    cfg: &BenchConfig,
) -> Result<Option<ProjSetting>, PipelineError> {
    let mut best: Option<ProjSetting> = None;
    for &depth in &cfg.depths {
        for r in 1..=cfg.max_resolution {
            let opts = TessellateOptions {
                resolution: r,
                ..base.clone()
            };
            let t = tessellate(field, &octree(min, max, depth), &opts)?;
            if !t.all_accepted() || t.mesh.is_empty() {
                break;
            }
            if best.as_ref().is_some_and(|b| t.mesh.vertex_count() >= b.mesh.vertex_count()) {
                break;
            }
            let error = chordal_error(field, &t.mesh);
            if error <= target {
                best = Some(ProjSetting {
                    depth,
                    opts,
                    mesh: t.mesh,
                    error,
                });
                break;
            }
        }
    }
    Ok(best)
}

fn failed_row(method: Method, level: usize, target: f64) -> BenchRow {
    BenchRow {
        method,
        level,
        target,
        vertices: 0,
        triangles: 0,
        time_ms: f64::NAN,
        chordal_error: f64::NAN,
        mean_abs_f: f64::NAN,
        settings: "none".into(),
        ok: false,
    }
}

/// Runs both methods at every level. Levels run sequentially inside a
/// dedicated pool of `cfg.threads` workers.
pub fn run_benchmark(
    field: &ScalarField,
    min: Point3,
    max: Point3,
    base: &TessellateOptions,
    cfg: &BenchConfig,
) -> Result<Vec<BenchRow>, BenchError> {
    if cfg.levels.is_empty() {
        return Err(BenchError::NoLevels);
    }
    if let Some(&l) = cfg.levels.iter().find(|l| !(**l > 0.0)) {
        return Err(BenchError::InvalidLevel(l));
    }
    if cfg.repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| BenchError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        let mut rows = Vec::new();
        for (level, &target) in cfg.levels.iter().enumerate() {
            rows.push(match tune_mc(field, min, max, target, cfg)? {
                Some(s) => {
                    let spec = GridSpec {
                        min,
                        max,
                        spacing: s.spacing,
                    };
                    let (time_ms, _) = time_median(cfg.repetitions, || marching_cubes(field, &spec));
                    BenchRow {
                        method: Method::Mc,
                        level,
                        target,
                        vertices: s.mesh.vertex_count(),
                        triangles: s.mesh.triangle_count(),
                        time_ms,
                        chordal_error: s.error,
                        mean_abs_f: mean_abs_f(field, &s.mesh),
                        settings: format!("spacing={:.6}", s.spacing),
                        ok: true,
                    }
                }
                None => failed_row(Method::Mc, level, target),
            });
            rows.push(match tune_projection(field, min, max, target, base, cfg)? {
                Some(s) => {
                    let part = octree(min, max, s.depth);
                    let (time_ms, _) = time_median(cfg.repetitions, || tessellate(field, &part, &s.opts));
                    BenchRow {
                        method: Method::Projection,
                        level,
                        target,
                        vertices: s.mesh.vertex_count(),
                        triangles: s.mesh.triangle_count(),
                        time_ms,
                        chordal_error: s.error,
                        mean_abs_f: mean_abs_f(field, &s.mesh),
                        settings: format!("depth={} r={}", s.depth, s.opts.resolution),
                        ok: true,
                    }
                }
                None => failed_row(Method::Projection, level, target),
            });
        }
        Ok(rows)
    })
}

pub const CSV_HEADER: &str = "method,level,vertices,triangles,time_ms,chordal_error,mean_abs_f,target_error,settings,status";

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{:.4},{:.6e},{:.6e},{:.6e},{},{}",
            r.method.name(),
            r.level,
            r.vertices,
            r.triangles,
            r.time_ms,
            r.chordal_error,
            r.mean_abs_f,
            r.target,
            r.settings,
            if r.ok { "ok" } else { "rejected" }
        )
        .unwrap();
    }
    s
}

/// One line per level with both methods side by side.
pub fn to_markdown(rows: &[BenchRow], threads: usize) -> String {
    let mut s = String::new();
    writeln!(s, "threads: {threads}\n").unwrap();
    writeln!(s, "| level | target error | MC vertices | MC time (ms) | projection vertices | projection time (ms) |").unwrap();
    writeln!(s, "|---|---|---|---|---|---|").unwrap();
    let levels = rows.iter().map(|r| r.level).max().map_or(0, |l| l + 1);
    for level in 0..levels {
        let find = |m| rows.iter().find(|r| r.level == level && r.method == m);
        let cell = |r: Option<&BenchRow>| match r {
            Some(r) if r.ok => (r.vertices.to_string(), format!("{:.2}", r.time_ms)),
            _ => ("rejected".to_string(), "-".to_string()),
        };
        let (mv, mt) = cell(find(Method::Mc));
        let (pv, pt) = cell(find(Method::Projection));
        let target = find(Method::Mc).or(find(Method::Projection)).map_or(f64::NAN, |r| r.target);
        writeln!(s, "| {level} | {target:.1e} | {mv} | {mt} | {pv} | {pt} |").unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    #[test]
    fn newton_distance_on_sphere() {
        let f = ScalarField::from_expr("x^2+y^2+z^2-1").unwrap();
        assert!((surface_distance(&f, Vec3::new(1.5, 0.0, 0.0)) - 0.5).abs() < 1e-12);
        let p = Vec3::new(0.3, 0.4, 0.5);
        assert!((surface_distance(&f, p) - (1.0 - p.norm())).abs() < 1e-12);
    }

    #[test]
    fn plane_rows_are_well_formed() {
        let f = ScalarField::from_expr("z-0.3").unwrap();
        let cfg = BenchConfig {
            levels: vec![1e-3],
            repetitions: 1,
            depths: vec![1],
            ..Default::default()
        };
        let rows = run_benchmark(&f, Vec3::splat(-1.0), Vec3::splat(1.0), &TessellateOptions::default(), &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.ok, "{r:?}");
            assert!(r.chordal_error < 1e-12);
        }
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(to_markdown(&rows, 1).contains("| 0 |"));
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
