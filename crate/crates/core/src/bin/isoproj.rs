use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isoproj::bench::{run_benchmark, to_csv, to_markdown};
use isoproj::config::{self, Config};
use isoproj::field::ScalarField;
use isoproj::mc::{laplacian_fairing, marching_cubes};
use isoproj::mesh::{export, import, ColorMap, MeshFormat, PlyOptions, TriangleMesh};
use isoproj::pipeline::tessellate;
use isoproj::quality::quality_report;

type BoxError = Box<dyn Error + Send + Sync>;

#[derive(Parser, Debug)]
#[command(name = "isoproj", version, about = "Tessellate implicit surfaces by projecting n-sided base meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Partition, project and weld; exit 2 when any cell is rejected.
    Tessellate(Common),
    /// Marching Cubes baseline with optional Laplacian fairing.
    Mc(Common),
    /// Matched-detail benchmark of both methods.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Write the CSV table here; printed to stdout otherwise.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the Markdown table here; printed to stdout otherwise.
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Quality report for an OBJ or PLY file.
    Metrics {
        /// Mesh to analyse.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Field expression, e.g. "x^2+y^2+z^2-1" (field.expr).
    #[arg(long)]
    field: Option<String>,
    /// Built-in field, e.g. "torus(2,1)" (field.builtin).
    #[arg(long)]
    builtin: Option<String>,
    /// Uniform octree depth (partition.depth).
    #[arg(long)]
    octree_depth: Option<u32>,
    /// Domain resolution r (tessellate.resolution).
    #[arg(long)]
    resolution: Option<usize>,
    /// corners | transfinite (tessellate.base).
    #[arg(long)]
    base: Option<String>,
    /// Rejection threshold in degrees (projection.angle_threshold).
    #[arg(long)]
    angle_threshold: Option<f64>,
    /// Worker threads, 0 for all cores (run.threads).
    #[arg(long)]
    threads: Option<usize>,
    /// Output mesh path (output.path).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// obj | ply (output.format).
    #[arg(long)]
    format: Option<String>,
    /// Any config key as dotted.key=value; `--a.b=v` is shorthand.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl Common {
    /// Named flags as overrides, applied before `--set` ones.
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        if let Some(v) = &self.field {
            o.push(format!("field.expr={}", quote(v)));
        }
        if let Some(v) = &self.builtin {
            o.push(format!("field.builtin={}", quote(v)));
        }
        if let Some(v) = self.octree_depth {
            o.push(format!("partition.depth={v}"));
        }
        if let Some(v) = self.resolution {
            o.push(format!("tessellate.resolution={v}"));
        }
        if let Some(v) = &self.base {
            o.push(format!("tessellate.base={}", quote(v)));
        }
        if let Some(v) = self.angle_threshold {
            o.push(format!("projection.angle_threshold={v:?}"));
        }
        if let Some(v) = self.threads {
            o.push(format!("run.threads={v}"));
        }
        if let Some(v) = &self.out {
            o.push(format!("output.path={}", quote(&v.to_string_lossy())));
        }
        if let Some(v) = &self.format {
            o.push(format!("output.format={}", quote(v)));
        }
        o.extend(self.set.iter().cloned());
        o
    }

    fn load(&self) -> Result<Config, BoxError> {
        Ok(config::load(self.config.as_deref(), &self.overrides())?)
    }
}

const NAMED: &[&str] = &[
    "config",
    "field",
    "builtin",
    "octree-depth",
    "resolution",
    "base",
    "angle-threshold",
    "threads",
    "out",
    "format",
    "set",
    "csv",
    "markdown",
];

/// Rewrites `--a.b=v` and `--a.b v` into `--set a.b=v`.
fn expand_dotted(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            out.push(a);
            continue;
        };
        let name = flag.split_once('=').map_or(flag, |(k, _)| k);
        if !name.contains('.') || NAMED.contains(&name) {
            out.push(a);
            continue;
        }
        out.push("--set".into());
        if flag.contains('=') {
            out.push(flag.to_string());
        } else {
            let v = it.next().unwrap_or_default();
            out.push(format!("{flag}={v}"));
        }
    }
    out
}

fn init_threads(cfg: &Config) -> Result<(), BoxError> {
    rayon::ThreadPoolBuilder::new().num_threads(cfg.run.threads).build_global()?;
    Ok(())
}

fn ply_options(cfg: &Config) -> PlyOptions {
    PlyOptions {
        color_channel: cfg.output.color_channel.clone(),
        colormap: cfg.output.colormap.unwrap_or(ColorMap::Viridis),
    }
}

fn output_path(cfg: &Config, fallback: &str) -> PathBuf {
    cfg.output.path.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

/// Attaches report channels, writes the mesh and its report.
fn write_outputs(cfg: &Config, mut mesh: TriangleMesh, field: Option<&ScalarField>, path: &Path) -> Result<(), BoxError> {
    let report = quality_report(&mesh, field, &cfg.report_options())?;
    for (name, values) in &report.channels {
        mesh.channels.entry(name.clone()).or_insert_with(|| values.clone());
    }
    let format = cfg.output.mesh_format(path);
    export(&mesh, format, path, &ply_options(cfg))?;
    let report_path = cfg.output.report_path(path);
    fs::write(&report_path, report.to_text())?;
    eprintln!(
        "wrote {} ({} vertices, {} triangles) and {}",
        path.display(),
        mesh.vertex_count(),
        mesh.triangle_count(),
        report_path.display()
    );
    Ok(())
}

fn cmd_tessellate(common: &Common) -> Result<ExitCode, BoxError> {
    let cfg = common.load()?;
    init_threads(&cfg)?;
    let field = cfg.field.build()?;
    let partition = cfg.partition.build()?;
    let t = tessellate(&field, &partition, &cfg.tessellate_options())?;
    let path = output_path(&cfg, "tessellation.obj");
    write_outputs(&cfg, t.mesh, Some(&field), &path)?;
    eprintln!("{} cells, {} patches, {} rejected", t.cells, t.patches.len(), t.rejected.len());
    for r in &t.rejected {
        let (lo, hi) = r.bounds;
        eprintln!(
            "rejected cell {} [({}, {}, {}) .. ({}, {}, {})]: {}",
            r.cell, lo.x, lo.y, lo.z, hi.x, hi.y, hi.z, r.reason
        );
    }
    Ok(if t.rejected.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_mc(common: &Common) -> Result<ExitCode, BoxError> {
    let cfg = common.load()?;
    init_threads(&cfg)?;
    let field = cfg.field.build()?;
    let mut mesh = marching_cubes(&field, &cfg.grid())?;
    if cfg.mc.fairing_iterations > 0 {
        mesh = laplacian_fairing(&mesh, cfg.mc.fairing_iterations, cfg.mc.fairing_lambda)?;
    }
    let path = output_path(&cfg, "mc.obj");
    write_outputs(&cfg, mesh, Some(&field), &path)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(common: &Common, csv: Option<&Path>, markdown: Option<&Path>) -> Result<ExitCode, BoxError> {
    let mut cfg = common.load()?;
    if cfg.run.threads > 0 {
        cfg.bench.threads = cfg.run.threads;
    }
    let field = cfg.field.build()?;
    let rows = run_benchmark(
        &field,
        cfg.partition.min,
        cfg.partition.max,
        &cfg.tessellate_options(),
        &cfg.bench,
    )?;
    let csv_text = to_csv(&rows);
    let md_text = to_markdown(&rows, cfg.bench.threads);
    match csv {
        Some(p) => fs::write(p, &csv_text)?,
        None => print!("{csv_text}"),
    }
    match markdown {
        Some(p) => fs::write(p, &md_text)?,
        None => print!("{md_text}"),
    }
    Ok(if rows.iter().all(|r| r.ok) { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_metrics(input: &Path, common: &Common) -> Result<ExitCode, BoxError> {
    let cfg = common.load()?;
    let mesh = import(input)?;
    // a field only enters when the user names one
    let field = if cfg.field.expr.is_some() || cfg.field.builtin.is_some() {
        Some(cfg.field.build()?)
    } else {
        None
    };
    let report = quality_report(&mesh, field.as_ref(), &cfg.report_options())?;
    match &cfg.output.report {
        Some(p) => fs::write(p, report.to_text())?,
        None => print!("{}", report.to_text()),
    }
    if let Some(path) = &cfg.output.path {
        let mut mesh = mesh;
        mesh.channels.extend(report.channels);
        let format = cfg.output.format.or_else(|| MeshFormat::from_path(path)).unwrap_or(MeshFormat::Ply);
        export(&mesh, format, path, &ply_options(&cfg))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_dotted(std::env::args().collect()));
    let result = match &cli.command {
        Command::Tessellate(c) => cmd_tessellate(c),
        Command::Mc(c) => cmd_mc(c),
        Command::Compare { common, csv, markdown } => cmd_compare(common, csv.as_deref(), markdown.as_deref()),
        Command::Metrics { input, common } => cmd_metrics(input, common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
