//! Analytic test surfaces.
//!
//! The smooth blend uses the polynomial smooth minimum
//! `smin(a, b) = min(a, b) - h² k / 4` with `h = max(k - |a - b|, 0) / k`,
//! folded left over the parts. It is C¹ and its gradient is
//! `(1 - h/2) ∇min + (h/2) ∇max`.

use super::{FieldError, Implicit, ScalarField};
use crate::geom::{Point3, Vec3};

/// Description of a built-in field, as given on the command line or in a
/// config file, e.g. `sphere(0,0,0,1)` or `blend(0.5, sphere(1), torus(2,1))`.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Sphere { center: Point3, radius: f64 },
    /// Torus around the z axis, centred at the origin.
    Torus { major: f64, minor: f64 },
    /// `n·p - d` with `n` normalized on construction.
    Plane { normal: Vec3, offset: f64 },
    Gyroid { scale: f64 },
    Blend { parts: Vec<Builtin>, smoothness: f64 },
}

#[derive(Debug, Clone)]
pub struct Sphere {
    pub center: Point3,
    pub radius: f64,
}

impl Implicit for Sphere {
    fn value(&self, p: Point3) -> f64 {
        (p - self.center).norm_squared() - self.radius * self.radius
    }

    fn analytic_gradient(&self, p: Point3) -> Option<Vec3> {
        Some((p - self.center) * 2.0)
    }
}

#[derive(Debug, Clone)]
pub struct Torus {
    pub major: f64,
    pub minor: f64,
}

impl Implicit for Torus {
    fn value(&self, p: Point3) -> f64 {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        let q = rho - self.major;
        q * q + p.z * p.z - self.minor * self.minor
    }

    fn analytic_gradient(&self, p: Point3) -> Option<Vec3> {
        let rho = (p.x * p.x + p.y * p.y).sqrt();
        if rho == 0.0 {
            return Some(Vec3::new(0.0, 0.0, 2.0 * p.z));
        }
        let s = 2.0 * (rho - self.major) / rho;
        Some(Vec3::new(s * p.x, s * p.y, 2.0 * p.z))
    }
}

#[derive(Debug, Clone)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

impl Implicit for Plane {
    fn value(&self, p: Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn analytic_gradient(&self, _p: Point3) -> Option<Vec3> {
        Some(self.normal)
    }
}

#[derive(Debug, Clone)]
pub struct Gyroid {
    pub scale: f64,
}

impl Implicit for Gyroid {
    fn value(&self, p: Point3) -> f64 {
        let (x, y, z) = (p.x * self.scale, p.y * self.scale, p.z * self.scale);
        x.sin() * y.cos() + y.sin() * z.cos() + z.sin() * x.cos()
    }

    fn analytic_gradient(&self, p: Point3) -> Option<Vec3> {
        let s = self.scale;
        let (x, y, z) = (p.x * s, p.y * s, p.z * s);
        Some(Vec3::new(
            s * (x.cos() * y.cos() - z.sin() * x.sin()),
            s * (-x.sin() * y.sin() + y.cos() * z.cos()),
            s * (-y.sin() * z.sin() + z.cos() * x.cos()),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct Blend {
    pub parts: Vec<ScalarField>,
    pub smoothness: f64,
}

impl Blend {
    fn smin(&self, a: f64, b: f64) -> (f64, f64) {
        let k = self.smoothness;
        let h = (k - (a - b).abs()).max(0.0) / k;
        (a.min(b) - h * h * k * 0.25, h)
    }
}

impl Implicit for Blend {
    fn value(&self, p: Point3) -> f64 {
        let mut acc = self.parts[0].value(p);
        for f in &self.parts[1..] {
            acc = self.smin(acc, f.value(p)).0;
        }
        acc
    }

    fn analytic_gradient(&self, p: Point3) -> Option<Vec3> {
        let mut acc = self.parts[0].value(p);
        let mut grad = self.parts[0].gradient(p).ok()?;
        for f in &self.parts[1..] {
            let b = f.value(p);
            let gb = f.gradient(p).ok()?;
            let (v, h) = self.smin(acc, b);
            let (g_lo, g_hi) = if acc <= b { (grad, gb) } else { (gb, grad) };
            grad = g_lo * (1.0 - 0.5 * h) + g_hi * (0.5 * h);
            acc = v;
        }
        Some(grad)
    }
}

fn invalid(msg: impl Into<String>) -> FieldError {
    FieldError::InvalidParameters(msg.into())
}

/// Instantiates a built-in field with analytic gradients.
pub fn builtin_field(spec: &Builtin) -> Result<ScalarField, FieldError> {
    Ok(match spec {
        Builtin::Sphere { center, radius } => {
            if !(*radius > 0.0) || !center.is_finite() {
                return Err(invalid(format!("sphere radius must be positive, got {radius}")));
            }
            ScalarField::new(Sphere { center: *center, radius: *radius })
        }
        Builtin::Torus { major, minor } => {
            if !(*minor > 0.0 && major > minor) {
                return Err(invalid(format!("torus needs 0 < r < R, got R={major}, r={minor}")));
            }
            ScalarField::new(Torus { major: *major, minor: *minor })
        }
        Builtin::Plane { normal, offset } => {
            let n = normal
                .try_normalize()
                .ok_or_else(|| invalid("plane normal must be nonzero"))?;
            ScalarField::new(Plane { normal: n, offset: *offset })
        }
        Builtin::Gyroid { scale } => {
            if !(*scale > 0.0) {
                return Err(invalid(format!("gyroid scale must be positive, got {scale}")));
            }
            ScalarField::new(Gyroid { scale: *scale })
        }
        Builtin::Blend { parts, smoothness } => {
            if parts.len() < 2 {
                return Err(invalid("blend needs at least two parts"));
            }
            if !(*smoothness > 0.0) {
                return Err(invalid(format!("blend smoothness must be positive, got {smoothness}")));
            }
            let parts = parts.iter().map(builtin_field).collect::<Result<Vec<_>, _>>()?;
            ScalarField::new(Blend { parts, smoothness: *smoothness })
        }
    })
}

#[derive(Debug)]
enum Arg {
    Num(f64),
    Call(Builtin),
}

struct SpecParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> SpecParser<'a> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.pos < self.s.len() && self.s[self.pos] == c {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn err(&self, msg: &str) -> FieldError {
        invalid(format!("{msg} at offset {} in builtin spec", self.pos))
    }

    fn call(&mut self) -> Result<Builtin, FieldError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_ascii_lowercase();
        if name.is_empty() {
            return Err(self.err("expected a builtin name"));
        }
        let mut args = Vec::new();
        if self.eat(b'(') && !self.eat(b')') {
            loop {
                args.push(self.arg()?);
                if self.eat(b')') {
                    break;
                }
                if !self.eat(b',') {
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
        build(&name, args)
    }

    fn arg(&mut self) -> Result<Arg, FieldError> {
        self.ws();
        let start = self.pos;
        if self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            return Ok(Arg::Call(self.call()?));
        }
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_digit() || b"+-.eE".contains(&self.s[self.pos]))
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Arg::Num)
            .map_err(|_| self.err(&format!("malformed number `{text}`")))
    }
}

fn build(name: &str, args: Vec<Arg>) -> Result<Builtin, FieldError> {
    let mut nums = Vec::new();
    let mut calls = Vec::new();
    for a in args {
        match a {
            Arg::Num(v) => nums.push(v),
            Arg::Call(b) => calls.push(b),
        }
    }
    if name != "blend" && !calls.is_empty() {
        return Err(invalid(format!("`{name}` takes only numbers")));
    }
    let arity = |ok: bool, want: &str| {
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("`{name}` expects {want}")))
        }
    };
    Ok(match name {
        "sphere" => match nums.as_slice() {
            [] => Builtin::Sphere { center: Vec3::ZERO, radius: 1.0 },
            [r] => Builtin::Sphere { center: Vec3::ZERO, radius: *r },
            [x, y, z, r] => Builtin::Sphere { center: Vec3::new(*x, *y, *z), radius: *r },
            _ => return Err(invalid("`sphere` expects (r) or (cx, cy, cz, r)")),
        },
        "torus" => {
            arity(nums.len() == 2 || nums.is_empty(), "(R, r)")?;
            let (major, minor) = if nums.is_empty() { (2.0, 1.0) } else { (nums[0], nums[1]) };
            Builtin::Torus { major, minor }
        }
        "plane" => {
            arity(nums.len() == 4, "(nx, ny, nz, d)")?;
            Builtin::Plane { normal: Vec3::new(nums[0], nums[1], nums[2]), offset: nums[3] }
        }
        "gyroid" => {
            arity(nums.len() <= 1, "(scale)")?;
            Builtin::Gyroid { scale: nums.first().copied().unwrap_or(1.0) }
        }
        "blend" => {
            arity(nums.len() == 1 && calls.len() >= 2, "(smoothness, field, field, ...)")?;
            Builtin::Blend { parts: calls, smoothness: nums[0] }
        }
        other => return Err(invalid(format!("unknown builtin `{other}`"))),
    })
}

/// Parses a builtin description such as `torus(2, 1)`.
pub fn parse_builtin(spec: &str) -> Result<Builtin, FieldError> {
    let mut p = SpecParser { s: spec.as_bytes(), pos: 0 };
    let b = p.call()?;
    p.ws();
    if p.pos != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(b)
}
