//! Run configuration: a TOML file whose every key can be overridden by a
//! dotted `section.key=value` assignment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::base_surface::BaseKind;
use crate::bench::BenchConfig;
use crate::field::{builtin_field, parse_builtin, FieldError, GradientMode, ScalarField};
use crate::geom::Vec3;
use crate::mc::GridSpec;
use crate::mesh::{ColorMap, MeshFormat};
use crate::partition::{cell_from_planes, OctreeParams, PartitionError, Plane};
use crate::pipeline::{Partition, TessellateOptions};
use crate::projection::ProjectionConfig;
use crate::quality::ReportOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("override `{0}` must look like key.path=value")]
    Override(String),
    #[error("override `{key}`: {msg}")]
    OverridePath { key: String, msg: String },
    #[error("field: give exactly one of `field.expr` and `field.builtin`")]
    FieldSource,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientChoice {
    #[default]
    Analytic,
    Central,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    /// Expression in x, y, z, e.g. `x^2+y^2+z^2-1`.
    pub expr: Option<String>,
    /// Built-in, e.g. `torus(2,1)`.
    pub builtin: Option<String>,
    pub gradient: GradientChoice,
    /// Central-difference step; scaled to the point when unset.
    pub fd_step: Option<f64>,
}

impl FieldConfig {
    pub fn build(&self) -> Result<ScalarField, ConfigError> {
        let field = match (&self.expr, &self.builtin) {
            (Some(e), None) => ScalarField::from_expr(e)?,
            (None, Some(b)) => builtin_field(&parse_builtin(b)?)?,
            _ => return Err(ConfigError::FieldSource),
        };
        Ok(match self.gradient {
            GradientChoice::Analytic => field,
            GradientChoice::Central => field.with_gradient_mode(GradientMode::CentralDifference { step: self.fd_step }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    #[default]
    Octree,
    Cells,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    /// Half-spaces `n·p <= d` as `[nx, ny, nz, d]`.
    pub planes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub kind: PartitionKind,
    pub min: Vec3,
    pub max: Vec3,
    /// Uniform leaf depth.
    pub depth: u32,
    /// Deeper adaptive splitting where the sheet test fails; equals `depth`
    /// when unset.
    pub max_depth: Option<u32>,
    pub samples_per_axis: usize,
    pub cells: Vec<CellSpec>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            kind: PartitionKind::Octree,
            min: Vec3::splat(-1.5),
            max: Vec3::splat(1.5),
            depth: 2,
            max_depth: None,
            samples_per_axis: 8,
            cells: Vec::new(),
        }
    }
}

impl PartitionConfig {
    pub fn build(&self) -> Result<Partition, ConfigError> {
        Ok(match self.kind {
            PartitionKind::Octree => Partition::Octree {
                min: self.min,
                max: self.max,
                params: OctreeParams {
                    max_depth: self.max_depth.unwrap_or(self.depth).max(self.depth),
                    min_depth: self.depth,
                    samples_per_axis: self.samples_per_axis,
                },
            },
            PartitionKind::Cells => Partition::Cells(
                self.cells
                    .iter()
                    .map(|c| {
                        let planes = c.planes.iter().map(|&p| Plane::from_array(p)).collect::<Result<Vec<_>, _>>()?;
                        cell_from_planes(&planes)
                    })
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TessellateSection {
    pub resolution: usize,
    pub base: BaseKind,
    pub retry_depth: u32,
    pub weld_tolerance: Option<f64>,
}

impl Default for TessellateSection {
    fn default() -> Self {
        let d = TessellateOptions::default();
        Self {
            resolution: d.resolution,
            base: d.base,
            retry_depth: d.retry_depth,
            weld_tolerance: d.weld_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub spacing: f64,
    /// Grid box; the partition box when unset.
    pub min: Option<Vec3>,
    pub max: Option<Vec3>,
    pub fairing_iterations: usize,
    pub fairing_lambda: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            spacing: 0.1,
            min: None,
            max: None,
            fairing_iterations: 0,
            fairing_lambda: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Mesh file; the format follows the extension unless `format` is set.
    pub path: Option<PathBuf>,
    pub format: Option<MeshFormat>,
    /// Quality report; `<path>.report.txt` when unset.
    pub report: Option<PathBuf>,
    /// Channel mapped to PLY vertex colors.
    pub color_channel: Option<String>,
    pub colormap: Option<ColorMap>,
}

impl OutputConfig {
    pub fn mesh_format(&self, path: &Path) -> MeshFormat {
        self.format.or_else(|| MeshFormat::from_path(path)).unwrap_or(MeshFormat::Obj)
    }

    pub fn report_path(&self, mesh: &Path) -> PathBuf {
        self.report.clone().unwrap_or_else(|| {
            let mut s = mesh.as_os_str().to_owned();
            s.push(".report.txt");
            PathBuf::from(s)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Worker threads; 0 uses every core.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub view: Vec3,
    pub bands: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        let d = ReportOptions::default();
        Self { view: d.view, bands: d.bands }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub field: FieldConfig,
    pub partition: PartitionConfig,
    pub tessellate: TessellateSection,
    pub projection: ProjectionConfig,
    pub mc: McConfig,
    pub bench: BenchConfig,
    pub quality: QualityConfig,
    pub output: OutputConfig,
    pub run: RunConfig,
}

impl Config {
    pub fn tessellate_options(&self) -> TessellateOptions {
        TessellateOptions {
            resolution: self.tessellate.resolution,
            base: self.tessellate.base,
            projection: self.projection,
            retry_depth: self.tessellate.retry_depth,
            weld_tolerance: self.tessellate.weld_tolerance,
            samples_per_axis: self.partition.samples_per_axis,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            min: self.mc.min.unwrap_or(self.partition.min),
            max: self.mc.max.unwrap_or(self.partition.max),
            spacing: self.mc.spacing,
        }
    }

    pub fn report_options(&self) -> ReportOptions {
        ReportOptions {
            view: self.quality.view,
            bands: self.quality.bands,
        }
    }
}

/// Parses a value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value` to a TOML table, creating tables on the way.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        let entry = t.entry(part.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        t = entry.as_table_mut().ok_or_else(|| ConfigError::OverridePath {
            key: key.to_string(),
            msg: format!("`{part}` is not a section"),
        })?;
    }
    t.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Loads `path` (or defaults), applies the overrides in order, and checks
/// the result against the schema.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Config, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?;
            text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    // a single source wins: an override of one field source clears the other
    if let Some(field) = table.get_mut("field").and_then(|f| f.as_table_mut()) {
        for (key, other) in [("expr", "builtin"), ("builtin", "expr")] {
            let overridden = overrides.iter().rev().find_map(|o| {
                let k = o.split_once('=')?.0.trim();
                (k == "field.expr" || k == "field.builtin").then_some(k)
            });
            if overridden == Some(&format!("field.{key}")[..]) {
                field.remove(other);
            }
        }
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
}
