//! OBJ and ASCII PLY.
//!
//! OBJ: `v x y z` lines with 17 significant digits, then `vn` lines when
//! normals are present, then `f a b c` (or `f a//a b//b c//c` with normals),
//! 1-based. Scalar channels go to a sidecar CSV next to the OBJ with header
//! `vertex,<channel>,...`.
//!
//! PLY: `format ascii 1.0`; vertex properties `x y z` as double, then
//! `nx ny nz` when normals are present, then one double property per channel
//! in name order, then `red green blue` (uchar) when a color channel is
//! selected. Faces use `property list uchar int vertex_indices`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{MeshError, TriangleMesh};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorMap {
    Viridis,
    /// Red at the minimum, white in the middle, blue at the maximum.
    RedBlue,
}

const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

impl ColorMap {
    /// Color for `t` in `[0, 1]`.
    pub fn color(self, t: f64) -> [u8; 3] {
        let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
        let rgb = match self {
            ColorMap::Viridis => {
                let x = t * (VIRIDIS.len() - 1) as f64;
                let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
                let f = x - i as f64;
                let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
                [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * f)
            }
            ColorMap::RedBlue => {
                if t < 0.5 {
                    let s = 2.0 * t;
                    [255.0, 255.0 * s, 255.0 * s]
                } else {
                    let s = 2.0 * (1.0 - t);
                    [255.0 * s, 255.0 * s, 255.0]
                }
            }
        };
        rgb.map(|c| c.round() as u8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlyOptions {
    pub color_channel: Option<String>,
    pub colormap: ColorMap,
}

impl Default for PlyOptions {
    fn default() -> Self {
        Self {
            color_channel: None,
            colormap: ColorMap::Viridis,
        }
    }
}

fn fmt_f(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for p in &mesh.positions {
        s.push_str("v ");
        fmt_f(&mut s, p.x);
        s.push(' ');
        fmt_f(&mut s, p.y);
        s.push(' ');
        fmt_f(&mut s, p.z);
        s.push('\n');
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            s.push_str("vn ");
            fmt_f(&mut s, n.x);
            s.push(' ');
            fmt_f(&mut s, n.y);
            s.push(' ');
            fmt_f(&mut s, n.z);
            s.push('\n');
        }
    }
    let with_n = mesh.normals.is_some();
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| i + 1);
        if with_n {
            writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}").unwrap();
        } else {
            writeln!(s, "f {a} {b} {c}").unwrap();
        }
    }
    s
}

/// Writes the OBJ and, when the mesh has channels, a sidecar CSV with the
/// same stem.
pub fn export_obj(mesh: &TriangleMesh, path: &Path) -> Result<(), MeshError> {
    mesh.validate()?;
    fs::write(path, obj_string(mesh))?;
    if !mesh.channels.is_empty() {
        let mut s = String::from("vertex");
        for name in mesh.channels.keys() {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for i in 0..mesh.vertex_count() {
            write!(s, "{i}").unwrap();
            for ch in mesh.channels.values() {
                s.push(',');
                fmt_f(&mut s, ch[i]);
            }
            s.push('\n');
        }
        fs::write(path.with_extension("csv"), s)?;
    }
    Ok(())
}

pub fn ply_string(mesh: &TriangleMesh, opts: &PlyOptions) -> Result<String, MeshError> {
    let color = match &opts.color_channel {
        Some(name) => {
            let ch = mesh
                .channels
                .get(name)
                .ok_or_else(|| MeshError::MissingChannel(name.clone()))?;
            let (lo, hi) = ch
                .iter()
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let span = hi - lo;
            Some(
                ch.iter()
                    .map(|&v| opts.colormap.color(if span > 0.0 { (v - lo) / span } else { 0.5 }))
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    writeln!(s, "element vertex {}", mesh.vertex_count()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.normals.is_some() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    for name in mesh.channels.keys() {
        writeln!(s, "property double {name}").unwrap();
    }
    if color.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    writeln!(s, "element face {}", mesh.triangle_count()).unwrap();
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, p) in mesh.positions.iter().enumerate() {
        let mut vals = vec![p.x, p.y, p.z];
        if let Some(n) = &mesh.normals {
            vals.extend_from_slice(&n[i].to_array());
        }
        vals.extend(mesh.channels.values().map(|c| c[i]));
        for (k, v) in vals.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            fmt_f(&mut s, *v);
        }
        if let Some(c) = &color {
            write!(s, " {} {} {}", c[i][0], c[i][1], c[i][2]).unwrap();
        }
        s.push('\n');
    }
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    Ok(s)
}

pub fn export_ply(mesh: &TriangleMesh, path: &Path, opts: &PlyOptions) -> Result<(), MeshError> {
    mesh.validate()?;
    fs::write(path, ply_string(mesh, opts)?)?;
    Ok(())
}

pub fn export(mesh: &TriangleMesh, format: MeshFormat, path: &Path, opts: &PlyOptions) -> Result<(), MeshError> {
    match format {
        MeshFormat::Obj => export_obj(mesh, path),
        MeshFormat::Ply => export_ply(mesh, path, opts),
    }
}

/// Reads an OBJ or ASCII PLY file, chosen by extension. Polygons are split
/// into fans.
pub fn import(path: &Path) -> Result<TriangleMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Obj) => parse_obj(&text, &name),
        Some(MeshFormat::Ply) => parse_ply(&text, &name),
        None => Err(MeshError::UnsupportedFormat(name)),
    }
}

fn malformed(path: &str, line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Malformed {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_floats<'a>(it: impl Iterator<Item = &'a str>, path: &str, line: usize) -> Result<Vec<f64>, MeshError> {
    it.map(|t| t.parse::<f64>().map_err(|_| malformed(path, line, format!("bad number '{t}'"))))
        .collect()
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len() - 1 {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

pub(crate) fn parse_obj(text: &str, path: &str) -> Result<TriangleMesh, MeshError> {
    let mut mesh = TriangleMesh::default();
    let mut normals = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let ln = ln + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let v = parse_floats(it, path, ln)?;
                if v.len() < 3 {
                    return Err(malformed(path, ln, "vertex needs 3 coordinates"));
                }
                mesh.positions.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("vn") => {
                let v = parse_floats(it, path, ln)?;
                if v.len() != 3 {
                    return Err(malformed(path, ln, "normal needs 3 components"));
                }
                normals.push(Vec3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| malformed(path, ln, format!("bad index '{tok}'")))?;
                    let idx = if i < 0 { mesh.positions.len() as i64 + i } else { i - 1 };
                    if idx < 0 || idx as usize >= mesh.positions.len() {
                        return Err(malformed(path, ln, format!("index {i} out of range")));
                    }
                    poly.push(idx as u32);
                }
                if poly.len() < 3 {
                    return Err(malformed(path, ln, "face needs 3 vertices"));
                }
                fan(&poly, &mut mesh.triangles);
            }
            _ => {}
        }
    }
    if !normals.is_empty() {
        if normals.len() != mesh.positions.len() {
            return Err(malformed(path, 0, "normal count differs from vertex count"));
        }
        mesh.normals = Some(normals);
    }
    Ok(mesh)
}

pub(crate) fn parse_ply(text: &str, path: &str) -> Result<TriangleMesh, MeshError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(malformed(path, 1, "missing 'ply' magic")),
    }
    let mut n_vertices = 0usize;
    let mut n_faces = 0usize;
    let mut props: Vec<String> = Vec::new();
    let mut current = "";
    let mut ascii = false;
    for (ln, line) in lines.by_ref() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "ascii", _] => ascii = true,
            ["format", ..] => return Err(malformed(path, ln, "only ascii PLY is supported")),
            ["element", "vertex", n] => {
                current = "vertex";
                n_vertices = n.parse().map_err(|_| malformed(path, ln, "bad vertex count"))?;
            }
            ["element", "face", n] => {
                current = "face";
                n_faces = n.parse().map_err(|_| malformed(path, ln, "bad face count"))?;
            }
            ["element", ..] => current = "other",
            ["property", "list", ..] => {}
            ["property", _, name] if current == "vertex" => props.push(name.to_string()),
            ["end_header"] => break,
            _ => {}
        }
    }
    if !ascii {
        return Err(malformed(path, 2, "missing format line"));
    }
    let col = |name: &str| props.iter().position(|p| p == name);
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(malformed(path, 0, "vertex element lacks x/y/z")),
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let reserved = ["x", "y", "z", "nx", "ny", "nz", "red", "green", "blue", "alpha"];
    let channel_cols: Vec<(usize, String)> = props
        .iter()
        .enumerate()
        .filter(|(_, p)| !reserved.contains(&p.as_str()))
        .map(|(i, p)| (i, p.clone()))
        .collect();

    let mut mesh = TriangleMesh::default();
    let mut normals = Vec::new();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); channel_cols.len()];
    for _ in 0..n_vertices {
        let (ln, line) = lines.next().ok_or_else(|| malformed(path, 0, "truncated vertex list"))?;
        let v = parse_floats(line.split_whitespace(), path, ln)?;
        if v.len() < props.len() {
            return Err(malformed(path, ln, "too few vertex properties"));
        }
        mesh.positions.push(Vec3::new(v[xi], v[yi], v[zi]));
        if let Some((a, b, c)) = normal_cols {
            normals.push(Vec3::new(v[a], v[b], v[c]));
        }
        for (k, (i, _)) in channel_cols.iter().enumerate() {
            channels[k].push(v[*i]);
        }
    }
    for _ in 0..n_faces {
        let (ln, line) = lines.next().ok_or_else(|| malformed(path, 0, "truncated face list"))?;
        let idx: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| malformed(path, ln, format!("bad index '{t}'"))))
            .collect::<Result<_, _>>()?;
        let count = *idx.first().ok_or_else(|| malformed(path, ln, "empty face"))? as usize;
        if count < 3 || idx.len() != count + 1 {
            return Err(malformed(path, ln, "face length mismatch"));
        }
        if idx[1..].iter().any(|&i| i as usize >= n_vertices) {
            return Err(malformed(path, ln, "face index out of range"));
        }
        fan(&idx[1..], &mut mesh.triangles);
    }
    if normal_cols.is_some() {
        mesh.normals = Some(normals);
    }
    for ((_, name), values) in channel_cols.into_iter().zip(channels) {
        mesh.channels.insert(name, values);
    }
    Ok(mesh)
}
