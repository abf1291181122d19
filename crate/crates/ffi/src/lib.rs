//! C ABI over `isoproj`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns an [`IsoStatus`];
//! on failure [`iso_last_error`] describes the most recent error on the
//! calling thread. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use isoproj::base_surface::BaseKind;
use isoproj::field::{builtin_field, parse_builtin, ScalarField};
use isoproj::mc::{marching_cubes, GridSpec};
use isoproj::mesh::{export, MeshFormat, PlyOptions, TriangleMesh};
use isoproj::partition::OctreeParams;
use isoproj::pipeline::{tessellate, Partition, TessellateOptions};
use isoproj::projection::ProjectionConfig;
use isoproj::Vec3;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    EvalError = 4,
    TessellationError = 5,
    IoError = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<IsoVec3> for Vec3 {
    fn from(v: IsoVec3) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

/// Octree tessellation settings; start from [`iso_tessellate_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoTessellateParams {
    pub min: IsoVec3,
    pub max: IsoVec3,
    /// Uniform octree depth.
    pub depth: u32,
    /// Domain resolution r.
    pub resolution: u32,
    /// Nonzero selects the transfinite base instead of corners only.
    pub transfinite: u32,
    /// Rejection threshold in degrees.
    pub angle_threshold: f64,
}

/// Opaque scalar field.
pub struct IsoField {
    inner: ScalarField,
}

/// Opaque triangle mesh.
pub struct IsoMesh {
    inner: TriangleMesh,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).unwrap()));
}

fn fail(status: IsoStatus, msg: impl Into<String>) -> IsoStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping a panic to [`IsoStatus::Panic`].
fn guard(f: impl FnOnce() -> IsoStatus) -> IsoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(IsoStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, IsoStatus> {
    if s.is_null() {
        return Err(fail(IsoStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(IsoStatus::InvalidArgument, "string is not UTF-8"))
}

fn boxed_field(field: ScalarField, out: *mut *mut IsoField) -> IsoStatus {
    unsafe { *out = Box::into_raw(Box::new(IsoField { inner: field })) };
    IsoStatus::Ok
}

fn boxed_mesh(mesh: TriangleMesh, out: *mut *mut IsoMesh) -> IsoStatus {
    unsafe { *out = Box::into_raw(Box::new(IsoMesh { inner: mesh })) };
    IsoStatus::Ok
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iso_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a field expression such as `x^2+y^2+z^2-1`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_field_parse(source: *const c_char, out: *mut *mut IsoField) -> IsoStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsoStatus::NullPointer, "null output pointer");
        }
        let src = match str_arg(source) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match ScalarField::from_expr(src) {
            Ok(f) => boxed_field(f, out),
            Err(e) => fail(IsoStatus::ParseError, e.to_string()),
        }
    })
}

/// Builds a built-in field such as `sphere(1)` or `torus(2,1)`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iso_field_builtin(spec: *const c_char, out: *mut *mut IsoField) -> IsoStatus {
    guard(|| {
        if out.is_null() {
            return fail(IsoStatus::NullPointer, "null output pointer");
        }
        let spec = match str_arg(spec) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match parse_builtin(spec).and_then(|b| builtin_field(&b)) {
            Ok(f) => boxed_field(f, out),
            Err(e) => fail(IsoStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `field` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_field_eval(field: *const IsoField, p: IsoVec3, out: *mut f64) -> IsoStatus {
    guard(|| {
        if field.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        match (*field).inner.try_value(p.into()) {
            Ok(v) => {
                *out = v;
                IsoStatus::Ok
            }
            Err(e) => fail(IsoStatus::EvalError, e.to_string()),
        }
    })
}

/// # Safety
/// `field` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_field_gradient(field: *const IsoField, p: IsoVec3, out: *mut IsoVec3) -> IsoStatus {
    guard(|| {
        if field.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        match (*field).inner.gradient(p.into()) {
            Ok(g) => {
                *out = IsoVec3 { x: g.x, y: g.y, z: g.z };
                IsoStatus::Ok
            }
            Err(e) => fail(IsoStatus::EvalError, e.to_string()),
        }
    })
}

/// # Safety
/// `field` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn iso_field_free(field: *mut IsoField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Unit-sphere-sized defaults: box [-1.5, 1.5]^3, depth 2, r = 4, corners
/// base, 80 degree threshold.
#[no_mangle]
pub extern "C" fn iso_tessellate_params_default() -> IsoTessellateParams {
    IsoTessellateParams {
        min: IsoVec3 { x: -1.5, y: -1.5, z: -1.5 },
        max: IsoVec3 { x: 1.5, y: 1.5, z: 1.5 },
        depth: 2,
        resolution: 4,
        transfinite: 0,
        angle_threshold: ProjectionConfig::default().angle_threshold,
    }
}

/// Tessellates over a uniform octree. Accepted patches form `*out`; the
/// number of rejected cells goes to `rejected` when it is not NULL.
///
/// # Safety
/// `field`, `params` and `out` must be valid; `rejected` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn iso_tessellate(
    field: *const IsoField,
    params: *const IsoTessellateParams,
    out: *mut *mut IsoMesh,
    rejected: *mut usize,
) -> IsoStatus {
    guard(|| {
        if field.is_null() || params.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        let p = *params;
        let partition = Partition::Octree {
            min: p.min.into(),
            max: p.max.into(),
            params: OctreeParams {
                max_depth: p.depth,
                min_depth: p.depth,
                ..OctreeParams::default()
            },
        };
        let opts = TessellateOptions {
            resolution: p.resolution as usize,
            base: if p.transfinite != 0 { BaseKind::Transfinite } else { BaseKind::Corners },
            projection: ProjectionConfig {
                angle_threshold: p.angle_threshold,
                ..ProjectionConfig::default()
            },
            ..TessellateOptions::default()
        };
        match tessellate(&(*field).inner, &partition, &opts) {
            Ok(t) => {
                if !rejected.is_null() {
                    *rejected = t.rejected.len();
                }
                boxed_mesh(t.mesh, out)
            }
            Err(e) => fail(IsoStatus::TessellationError, e.to_string()),
        }
    })
}

/// Marching Cubes on a regular grid.
///
/// # Safety
/// `field` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn iso_marching_cubes(
    field: *const IsoField,
    min: IsoVec3,
    max: IsoVec3,
    spacing: f64,
    out: *mut *mut IsoMesh,
) -> IsoStatus {
    guard(|| {
        if field.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        let spec = GridSpec {
            min: min.into(),
            max: max.into(),
            spacing,
        };
        match marching_cubes(&(*field).inner, &spec) {
            Ok(m) => boxed_mesh(m, out),
            Err(e) => fail(IsoStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `mesh` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_vertex_count(mesh: *const IsoMesh) -> usize {
    if mesh.is_null() {
        0
    } else {
        (*mesh).inner.vertex_count()
    }
}

/// # Safety
/// `mesh` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_triangle_count(mesh: *const IsoMesh) -> usize {
    if mesh.is_null() {
        0
    } else {
        (*mesh).inner.triangle_count()
    }
}

/// Copies `3 * vertex_count` coordinates, xyz per vertex, into `out`.
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_positions(mesh: *const IsoMesh, out: *mut f64, len: usize) -> IsoStatus {
    guard(|| {
        if mesh.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        let m = &(*mesh).inner;
        if len < 3 * m.vertex_count() {
            return fail(IsoStatus::InvalidArgument, format!("buffer holds {len}, need {}", 3 * m.vertex_count()));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (i, p) in m.positions.iter().enumerate() {
            dst[3 * i..3 * i + 3].copy_from_slice(&p.to_array());
        }
        IsoStatus::Ok
    })
}

/// Copies `3 * triangle_count` zero-based vertex indices into `out`.
///
/// # Safety
/// `out` must have room for `len` integers.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_triangles(mesh: *const IsoMesh, out: *mut u32, len: usize) -> IsoStatus {
    guard(|| {
        if mesh.is_null() || out.is_null() {
            return fail(IsoStatus::NullPointer, "null pointer");
        }
        let m = &(*mesh).inner;
        if len < 3 * m.triangle_count() {
            return fail(IsoStatus::InvalidArgument, format!("buffer holds {len}, need {}", 3 * m.triangle_count()));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (i, t) in m.triangles.iter().enumerate() {
            dst[3 * i..3 * i + 3].copy_from_slice(t);
        }
        IsoStatus::Ok
    })
}

/// Writes OBJ or ASCII PLY, chosen by the file extension.
///
/// # Safety
/// `mesh` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_write(mesh: *const IsoMesh, path: *const c_char) -> IsoStatus {
    guard(|| {
        if mesh.is_null() {
            return fail(IsoStatus::NullPointer, "null mesh");
        }
        let path = match str_arg(path) {
            Ok(s) => Path::new(s),
            Err(s) => return s,
        };
        let Some(format) = MeshFormat::from_path(path) else {
            return fail(IsoStatus::InvalidArgument, "path must end in .obj or .ply");
        };
        match export(&(*mesh).inner, format, path, &PlyOptions::default()) {
            Ok(()) => IsoStatus::Ok,
            Err(e) => fail(IsoStatus::IoError, e.to_string()),
        }
    })
}

/// # Safety
/// `mesh` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn iso_mesh_free(mesh: *mut IsoMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}
