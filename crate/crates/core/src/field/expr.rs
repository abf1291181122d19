//! Text expressions over `x`, `y`, `z`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?            right associative
//! atom  := number | 'x' | 'y' | 'z'
//!        | ident '(' expr (',' expr)* ')'
//!        | '(' expr ')'
//! ```
//!
//! So `-x^2` reads as `-(x^2)` and `2^3^2` as `2^(3^2)`. Numbers are decimal
//! with an optional exponent. Functions: `sin cos exp sqrt abs` (one argument)
//! and `min max` (two or more).

use std::fmt;

use thiserror::Error;

use super::Implicit;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            Func::Min | Func::Max => n >= 2,
            _ => n == 1,
        }
    }

    fn arity_label(self) -> &'static str {
        match self {
            Func::Min | Func::Max => "at least 2",
            _ => "1",
        }
    }
}

/// Syntax tree of a field expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Axis),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}, column {col}: unknown identifier `{name}`")]
    UnknownIdentifier { name: String, line: usize, col: usize },
    #[error("line {line}, column {col}: `{name}` expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: &'static str,
        found: usize,
        line: usize,
        col: usize,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match *self {
            ParseError::Syntax { line, col, .. }
            | ParseError::UnknownIdentifier { line, col, .. }
            | ParseError::Arity { line, col, .. } => (line, col),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {0}")]
pub struct EvalError(pub String);

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let (tl, tc) = (line, col);
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: tl, col: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                msg: format!("malformed number `{text}`"),
            })?;
            if !v.is_finite() {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("number `{text}` out of range"),
                });
            }
            out.push(Spanned { tok: Tok::Num(v), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(ParseError::Syntax {
            line: tl,
            col: tc,
            msg: format!("unexpected character `{c}`"),
        });
    }
    out.push(Spanned { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let t = self.peek();
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: format!("expected {wanted}, found {}", t.tok),
        }
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                self.bump();
                match name.as_str() {
                    "x" => return Ok(Expr::Var(Axis::X)),
                    "y" => return Ok(Expr::Var(Axis::Y)),
                    "z" => return Ok(Expr::Var(Axis::Z)),
                    _ => {}
                }
                let func = Func::from_name(name).ok_or_else(|| ParseError::UnknownIdentifier {
                    name: name.clone(),
                    line: t.line,
                    col: t.col,
                })?;
                self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                let mut args = vec![self.expr()?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                if !func.arity_ok(args.len()) {
                    return Err(ParseError::Arity {
                        name: name.clone(),
                        expected: func.arity_label(),
                        found: args.len(),
                        line: t.line,
                        col: t.col,
                    });
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("a number, variable, function call or `(`")),
        }
    }
}

/// Parses DSL source into an expression tree.
pub fn parse_field(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(source)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

fn check(v: f64, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError(format!("{what} produced a non-finite value")))
    }
}

/// Value with its gradient, for forward-mode differentiation.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: Vec3,
}

impl Dual {
    fn constant(v: f64) -> Dual {
        Dual { v, d: Vec3::ZERO }
    }

    fn chain(self, v: f64, dv: f64) -> Dual {
        Dual { v, d: self.d * dv }
    }
}

fn const_exponent(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        Expr::Neg(inner) => const_exponent(inner).map(|v| -v),
        _ => None,
    }
}

fn int_pow(base: f64, exp: f64) -> Option<f64> {
    if exp.fract() == 0.0 && exp.abs() <= 64.0 {
        Some(base.powi(exp as i32))
    } else {
        None
    }
}

impl Expr {
    /// Evaluates the expression at `p`.
    pub fn eval(&self, p: Vec3) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Axis::X) => Ok(p.x),
            Expr::Var(Axis::Y) => Ok(p.y),
            Expr::Var(Axis::Z) => Ok(p.z),
            Expr::Neg(a) => Ok(-a.eval(p)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(p)?, b.eval(p)?);
                match op {
                    BinOp::Add => check(a + b, "addition"),
                    BinOp::Sub => check(a - b, "subtraction"),
                    BinOp::Mul => check(a * b, "multiplication"),
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError("division by zero".into()));
                        }
                        check(a / b, "division")
                    }
                    BinOp::Pow => check(int_pow(a, b).unwrap_or_else(|| a.powf(b)), "power"),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(p)?;
                match f {
                    Func::Sin => Ok(a.sin()),
                    Func::Cos => Ok(a.cos()),
                    Func::Exp => check(a.exp(), "exp"),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(EvalError(format!("sqrt of negative value {a}")));
                        }
                        Ok(a.sqrt())
                    }
                    Func::Abs => Ok(a.abs()),
                    Func::Min | Func::Max => {
                        let mut acc = a;
                        for e in &args[1..] {
                            let v = e.eval(p)?;
                            acc = if *f == Func::Min { acc.min(v) } else { acc.max(v) };
                        }
                        Ok(acc)
                    }
                }
            }
        }
    }

    fn eval_dual(&self, p: Vec3) -> Result<Dual, EvalError> {
        Ok(match self {
            Expr::Num(v) => Dual::constant(*v),
            Expr::Var(Axis::X) => Dual { v: p.x, d: Vec3::X },
            Expr::Var(Axis::Y) => Dual { v: p.y, d: Vec3::Y },
            Expr::Var(Axis::Z) => Dual { v: p.z, d: Vec3::Z },
            Expr::Neg(a) => {
                let a = a.eval_dual(p)?;
                Dual { v: -a.v, d: -a.d }
            }
            Expr::Bin(op, ea, eb) => {
                let a = ea.eval_dual(p)?;
                match op {
                    BinOp::Pow => {
                        if let Some(k) = const_exponent(eb) {
                            let v = check(int_pow(a.v, k).unwrap_or_else(|| a.v.powf(k)), "power")?;
                            let dv = if k == 0.0 {
                                0.0
                            } else {
                                k * int_pow(a.v, k - 1.0).unwrap_or_else(|| a.v.powf(k - 1.0))
                            };
                            a.chain(v, dv)
                        } else {
                            let b = eb.eval_dual(p)?;
                            let v = check(a.v.powf(b.v), "power")?;
                            if a.v <= 0.0 {
                                return Err(EvalError(
                                    "variable exponent requires a positive base".into(),
                                ));
                            }
                            Dual {
                                v,
                                d: (b.d * a.v.ln() + a.d * (b.v / a.v)) * v,
                            }
                        }
                    }
                    _ => {
                        let b = eb.eval_dual(p)?;
                        match op {
                            BinOp::Add => Dual { v: check(a.v + b.v, "addition")?, d: a.d + b.d },
                            BinOp::Sub => Dual { v: check(a.v - b.v, "subtraction")?, d: a.d - b.d },
                            BinOp::Mul => Dual {
                                v: check(a.v * b.v, "multiplication")?,
                                d: a.d * b.v + b.d * a.v,
                            },
                            BinOp::Div => {
                                if b.v == 0.0 {
                                    return Err(EvalError("division by zero".into()));
                                }
                                Dual {
                                    v: check(a.v / b.v, "division")?,
                                    d: (a.d * b.v - b.d * a.v) / (b.v * b.v),
                                }
                            }
                            BinOp::Pow => unreachable!(),
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_dual(p)?;
                match f {
                    Func::Sin => a.chain(a.v.sin(), a.v.cos()),
                    Func::Cos => a.chain(a.v.cos(), -a.v.sin()),
                    Func::Exp => {
                        let v = check(a.v.exp(), "exp")?;
                        a.chain(v, v)
                    }
                    Func::Sqrt => {
                        if a.v < 0.0 {
                            return Err(EvalError(format!("sqrt of negative value {}", a.v)));
                        }
                        let v = a.v.sqrt();
                        a.chain(v, 0.5 / v)
                    }
                    Func::Abs => a.chain(a.v.abs(), if a.v > 0.0 { 1.0 } else if a.v < 0.0 { -1.0 } else { 0.0 }),
                    Func::Min | Func::Max => {
                        let mut acc = a;
                        for e in &args[1..] {
                            let b = e.eval_dual(p)?;
                            let take = if *f == Func::Min { b.v < acc.v } else { b.v > acc.v };
                            if take {
                                acc = b;
                            }
                        }
                        acc
                    }
                }
            }
        })
    }

    /// Exact gradient by forward-mode differentiation.
    pub fn gradient(&self, p: Vec3) -> Result<Vec3, EvalError> {
        let d = self.eval_dual(p)?.d;
        if d.is_finite() {
            Ok(d)
        } else {
            Err(EvalError("gradient is not finite".into()))
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(_) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        Expr::Num(v) if v.is_sign_negative() => 3,
        _ => 5,
    }
}

/// Pretty-prints with the minimum parentheses needed to parse back to the
/// same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(Axis::X) => f.write_str("x"),
            Expr::Var(Axis::Y) => f.write_str("y"),
            Expr::Var(Axis::Z) => f.write_str("z"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, prec(a) < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = prec(self);
                let (sym, lparen, rparen) = match op {
                    BinOp::Add => (" + ", prec(a) < p, prec(b) <= p),
                    BinOp::Sub => (" - ", prec(a) < p, prec(b) <= p),
                    BinOp::Mul => (" * ", prec(a) < p, prec(b) <= p),
                    BinOp::Div => (" / ", prec(a) < p, prec(b) <= p),
                    // base must be an atom; exponent may be anything unary-or-tighter
                    BinOp::Pow => ("^", prec(a) < 5, prec(b) < 3),
                };
                wrap(f, a, lparen)?;
                f.write_str(sym)?;
                wrap(f, b, rparen)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed expression used as an implicit field, keeping its source text.
#[derive(Debug, Clone)]
pub struct FieldExpr {
    pub source: String,
    pub expr: Expr,
}

impl FieldExpr {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(Self {
            source: source.to_string(),
            expr: parse_field(source)?,
        })
    }
}

impl Implicit for FieldExpr {
    fn value(&self, p: Vec3) -> f64 {
        self.expr.eval(p).unwrap_or(f64::NAN)
    }

    fn analytic_gradient(&self, p: Vec3) -> Option<Vec3> {
        Some(self.expr.gradient(p).unwrap_or(Vec3::splat(f64::NAN)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, p: [f64; 3]) -> f64 {
        parse_field(src).unwrap().eval(p.into()).unwrap()
    }

    #[test]
    fn sphere_and_torus_values() {
        assert_eq!(ev("x^2+y^2+z^2-1", [1.0, 0.0, 0.0]), 0.0);
        assert_eq!(ev("x^2+y^2+z^2-1", [0.0, 0.0, 0.0]), -1.0);
        assert_eq!(ev("(sqrt(x^2+y^2)-2)^2+z^2-1", [3.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("-x^2", [3.0, 0.0, 0.0]), -9.0);
        assert_eq!(ev("2^3^2", [0.0; 3]), 512.0);
        assert_eq!(ev("8/4/2", [0.0; 3]), 1.0);
        assert_eq!(ev("1-2-3", [0.0; 3]), -4.0);
        assert_eq!(ev("2*3+4*5", [0.0; 3]), 26.0);
        assert_eq!(ev("2^-1", [0.0; 3]), 0.5);
        assert_eq!(ev("--x", [2.0, 0.0, 0.0]), 2.0);
        assert_eq!(ev("1.5e1 + 2E-1", [0.0; 3]), 15.2);
        assert_eq!(ev("min(x, y, z) + max(1, 2)", [3.0, -1.0, 2.0]), 1.0);
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_field("x+^y").unwrap_err();
        assert_eq!(err.position(), (1, 3));
        let err = parse_field("x +\n  (y").unwrap_err();
        assert_eq!(err.position(), (2, 5));
        assert!(matches!(parse_field("x y"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_field(""), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_field("foo(x)"),
            Err(ParseError::UnknownIdentifier { ref name, .. }) if name == "foo"
        ));
        assert!(matches!(parse_field("w + 1"), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse_field("sin(x, y)"), Err(ParseError::Arity { found: 2, .. })));
        assert!(matches!(parse_field("min(x)"), Err(ParseError::Arity { found: 1, .. })));
    }

    #[test]
    fn domain_errors() {
        let e = parse_field("sqrt(x)").unwrap();
        assert!(e.eval(Vec3::new(-1.0, 0.0, 0.0)).is_err());
        let e = parse_field("1/x").unwrap();
        assert!(e.eval(Vec3::ZERO).is_err());
    }

    #[test]
    fn dual_gradient_matches_hand_derivative() {
        let e = parse_field("x^2+y^2+z^2-1").unwrap();
        assert_eq!(e.gradient(Vec3::X).unwrap(), Vec3::new(2.0, 0.0, 0.0));
        let e = parse_field("sin(x)*exp(y) + x^y").unwrap();
        let p = Vec3::new(1.3, 0.7, 0.0);
        let g = e.gradient(p).unwrap();
        let gx = p.x.cos() * p.y.exp() + p.y * p.x.powf(p.y - 1.0);
        let gy = p.x.sin() * p.y.exp() + p.x.powf(p.y) * p.x.ln();
        assert!((g.x - gx).abs() < 1e-12 && (g.y - gy).abs() < 1e-12 && g.z == 0.0);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0f64..3.0).prop_map(Expr::Num),
            Just(Expr::Var(Axis::X)),
            Just(Expr::Var(Axis::Y)),
            Just(Expr::Var(Axis::Z)),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), inner.clone(), 0..4usize).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                    Expr::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), 0..4u8).prop_map(|(a, k)| Expr::Bin(
                    BinOp::Pow,
                    Box::new(a),
                    Box::new(Expr::Num(k as f64))
                )),
                inner.clone().prop_map(|a| Expr::Call(Func::Sin, vec![a])),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call(Func::Max, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_preserves_evaluation(e in arb_expr()) {
            let printed = e.to_string();
            let back = parse_field(&printed).unwrap();
            for i in 0..100 {
                let t = i as f64 * 0.137;
                let p = Vec3::new((t * 1.3).sin() * 2.0, (t * 0.7).cos() * 2.0, t.sin() - 0.3);
                match (e.eval(p), back.eval(p)) {
                    (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12 || a.to_bits() == b.to_bits(),
                        "{printed}: {a} vs {b}"),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "{printed}: {a:?} vs {b:?}"),
                }
            }
        }
    }
}
