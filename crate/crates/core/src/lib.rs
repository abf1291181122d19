//! Tessellation of implicit surfaces into near-isotropic triangle meshes.

pub mod base_surface;
pub mod bench;
pub mod config;
pub mod domain;
pub mod field;
pub mod mc;
pub mod geom;
pub mod mesh;
pub mod partition;
pub mod patch;
pub mod pipeline;
pub mod projection;
pub mod quality;

pub use geom::{Point3, Vec3};
