//! Implicit scalar fields `F: R³ → R`; the surface is the zero set.
//!
//! Convention used throughout the crate: `F < 0` is inside, `F > 0` outside,
//! and gradients point into the positive half-space.

mod builtin;
mod expr;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use builtin::{builtin_field, parse_builtin, Blend, Builtin, Gyroid, Plane as PlaneField, Sphere, Torus};
pub use expr::{parse_field, Axis, BinOp, EvalError, Expr, FieldExpr, Func, ParseError};

use crate::geom::{Point3, Vec3};

/// Anything that can be sampled as an implicit function.
pub trait Implicit: Send + Sync + fmt::Debug {
    fn value(&self, p: Point3) -> f64;

    /// Exact gradient, if the implementation can provide one.
    fn analytic_gradient(&self, _p: Point3) -> Option<Vec3> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    /// Use the analytic gradient; falls back to central differences for
    /// fields without one.
    Analytic,
    /// Central differences. `None` uses [`fd_step`].
    CentralDifference { step: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field evaluation failed at ({x}, {y}, {z})")]
    Evaluation { x: f64, y: f64, z: f64 },
    #[error("invalid field parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl FieldError {
    fn at(p: Point3) -> Self {
        FieldError::Evaluation { x: p.x, y: p.y, z: p.z }
    }
}

/// Default central-difference step at `p`.
#[inline]
pub fn fd_step(p: Point3) -> f64 {
    1e-5 * (1.0 + p.norm())
}

/// An immutable, shareable implicit field with a chosen gradient mode.
#[derive(Clone)]
pub struct ScalarField {
    inner: Arc<dyn Implicit>,
    mode: GradientMode,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("inner", &self.inner)
            .field("mode", &self.mode)
            .finish()
    }
}

impl ScalarField {
    pub fn new(inner: impl Implicit + 'static) -> Self {
        Self {
            inner: Arc::new(inner),
            mode: GradientMode::Analytic,
        }
    }

    /// Parses a DSL expression into a field with analytic gradients.
    pub fn from_expr(source: &str) -> Result<Self, FieldError> {
        Ok(Self::new(FieldExpr::parse(source)?))
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn gradient_mode(&self) -> GradientMode {
        self.mode
    }

    pub fn implicit(&self) -> &dyn Implicit {
        &*self.inner
    }

    /// Raw evaluation; non-finite when the field is undefined at `p`.
    #[inline]
    pub fn value(&self, p: Point3) -> f64 {
        self.inner.value(p)
    }

    pub fn try_value(&self, p: Point3) -> Result<f64, FieldError> {
        let v = self.inner.value(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FieldError::at(p))
        }
    }

    pub fn gradient(&self, p: Point3) -> Result<Vec3, FieldError> {
        match self.mode {
            GradientMode::Analytic => match self.inner.analytic_gradient(p) {
                Some(g) if g.is_finite() => Ok(g),
                Some(_) => Err(FieldError::at(p)),
                None => self.central_difference(p, fd_step(p)),
            },
            GradientMode::CentralDifference { step } => {
                self.central_difference(p, step.unwrap_or_else(|| fd_step(p)))
            }
        }
    }

    pub fn central_difference(&self, p: Point3, h: f64) -> Result<Vec3, FieldError> {
        let mut g = [0.0; 3];
        for (axis, gi) in g.iter_mut().enumerate() {
            let mut e = [0.0; 3];
            e[axis] = h;
            let e = Vec3::from_array(e);
            let fp = self.try_value(p + e)?;
            let fm = self.try_value(p - e)?;
            *gi = (fp - fm) / (2.0 * h);
        }
        Ok(Vec3::from_array(g))
    }
}

/// A field given by a plain closure, without an analytic gradient.
pub struct FnField<F>(pub F);

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnField")
    }
}

impl<F: Fn(Point3) -> f64 + Send + Sync> Implicit for FnField<F> {
    fn value(&self, p: Point3) -> f64 {
        (self.0)(p)
    }
}
