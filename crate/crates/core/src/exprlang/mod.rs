//! Arithmetic expressions over chart coordinates.
//!
//! Metric components, force fields and potentials are written as strings in
//! a small grammar, parsed into an [`Expr`] tree, differentiated symbolically
//! and evaluated at chart points for any [`Real`] scalar.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' integer)?
//! base   := number | name | name '(' expr ')' | '(' expr ')'
//! ```

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::scalar::{lit, Real};

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("unknown function `{name}` at position {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("logarithm of a non-positive number")]
    LogNonPositive,
    #[error("expression evaluated to a non-finite value")]
    NonFinite,
    #[error("expression depends on the parameter t but none was supplied")]
    MissingTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("a coordinate frame needs at least one coordinate")]
    Empty,
    #[error("duplicate coordinate name `{0}`")]
    Duplicate(String),
    #[error("invalid coordinate name `{0}`")]
    InvalidName(String),
    #[error("coordinate `{0}` shadows a reserved name")]
    Reserved(String),
}

/// Ordered coordinate names, optionally extended by the evolution parameter `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateFrame {
    names: Vec<String>,
    time_dependent: bool,
}

pub const TIME_NAME: &str = "t";
const RESERVED: [&str; 5] = ["pi", "sin", "cos", "exp", "log"];

impl CoordinateFrame {
    pub fn new<S: Into<String>>(
        names: impl IntoIterator<Item = S>,
        time_dependent: bool,
    ) -> Result<Self, FrameError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(FrameError::Empty);
        }
        for (i, name) in names.iter().enumerate() {
            let mut chars = name.chars();
            let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(FrameError::InvalidName(name.clone()));
            }
            if RESERVED.contains(&name.as_str()) || (time_dependent && name == TIME_NAME) {
                return Err(FrameError::Reserved(name.clone()));
            }
            if names[..i].contains(name) {
                return Err(FrameError::Duplicate(name.clone()));
            }
        }
        Ok(Self { names, time_dependent })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Resolves an identifier to a variable of this frame.
    pub fn lookup(&self, name: &str) -> Option<Variable> {
        if let Some(i) = self.index_of(name) {
            Some(Variable::Coord(i))
        } else if self.time_dependent && name == TIME_NAME {
            Some(Variable::Time)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Coord(usize),
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }
}

/// Expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Time,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(0.0)
    }

    pub fn var(v: Variable) -> Self {
        match v {
            Variable::Coord(i) => Expr::Var(i),
            Variable::Time => Expr::Time,
        }
    }

    /// Evaluates at chart `point`, with `t` the evolution parameter if any.
    pub fn eval<T: Real>(&self, point: &[T], t: Option<T>) -> Result<T, EvalError> {
        let v = self.eval_raw(point, t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_raw<T: Real>(&self, point: &[T], t: Option<T>) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Const(c) => lit(*c),
            Expr::Var(i) => point[*i],
            Expr::Time => t.ok_or(EvalError::MissingTime)?,
            Expr::Add(a, b) => a.eval_raw(point, t)? + b.eval_raw(point, t)?,
            Expr::Sub(a, b) => a.eval_raw(point, t)? - b.eval_raw(point, t)?,
            Expr::Mul(a, b) => a.eval_raw(point, t)? * b.eval_raw(point, t)?,
            Expr::Div(a, b) => {
                let num = a.eval_raw(point, t)?;
                let den = b.eval_raw(point, t)?;
                if den == T::zero() {
                    return Err(EvalError::DivisionByZero);
                }
                num / den
            }
            Expr::Neg(a) => -a.eval_raw(point, t)?,
            Expr::Pow(a, n) => {
                let base = a.eval_raw(point, t)?;
                if *n < 0 && base == T::zero() {
                    return Err(EvalError::DivisionByZero);
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let x = a.eval_raw(point, t)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= T::zero() {
                            return Err(EvalError::LogNonPositive);
                        }
                        x.ln()
                    }
                }
            }
        })
    }

    /// Symbolic partial derivative with respect to `var`.
    pub fn derive(&self, var: Variable) -> Expr {
        diff::derive(self, var)
    }

    pub fn depends_on(&self, var: Variable) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => var == Variable::Coord(*i),
            Expr::Time => var == Variable::Time,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(var),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) | Expr::Time => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.is_constant(),
        }
    }

    /// Value of a variable-free expression, if it evaluates without error.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            self.eval::<f64>(&[], None).ok()
        } else {
            None
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Time => None,
            Expr::Var(i) => Some(*i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
        }
    }

    /// Renders the tree in the input grammar using `frame` for variable names.
    pub fn display<'a>(&'a self, frame: &'a CoordinateFrame) -> impl fmt::Display + 'a {
        Printer { expr: self, frame }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 0,
            _ => 5,
        }
    }
}

struct Printer<'a> {
    expr: &'a Expr,
    frame: &'a CoordinateFrame,
}

impl Printer<'_> {
    fn write(&self, e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if e.precedence() < min_prec {
            f.write_str("(")?;
            self.write_bare(e, f)?;
            return f.write_str(")");
        }
        self.write_bare(e, f)
    }

    fn write_bare(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => f.write_str(&self.frame.names()[*i]),
            Expr::Time => f.write_str(TIME_NAME),
            Expr::Add(a, b) => {
                self.write(a, 1, f)?;
                f.write_str(" + ")?;
                self.write(b, 2, f)
            }
            Expr::Sub(a, b) => {
                self.write(a, 1, f)?;
                f.write_str(" - ")?;
                self.write(b, 2, f)
            }
            Expr::Mul(a, b) => {
                self.write(a, 2, f)?;
                f.write_str("*")?;
                self.write(b, 3, f)
            }
            Expr::Div(a, b) => {
                self.write(a, 2, f)?;
                f.write_str("/")?;
                self.write(b, 3, f)
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                self.write(a, 3, f)
            }
            Expr::Pow(a, n) => {
                self.write(a, 5, f)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, 0, f)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Printer<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, 0, f)
    }
}

/// A parsed expression that keeps the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    tree: Expr,
}

impl Expression {
    pub fn parse(text: &str, frame: &CoordinateFrame) -> Result<Self, ParseError> {
        Ok(Self { source: text.to_owned(), tree: parse(text, frame)? })
    }

    /// Wraps a tree built in code; the source is the printed form.
    pub fn from_tree(tree: Expr, frame: &CoordinateFrame) -> Self {
        let source = tree.display(frame).to_string();
        Self { source, tree }
    }

    pub fn constant(c: f64) -> Self {
        Self { source: format!("{c}"), tree: Expr::Const(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn tree(&self) -> &Expr {
        &self.tree
    }

    pub fn eval<T: Real>(&self, point: &[T], t: Option<T>) -> Result<T, EvalError> {
        self.tree.eval(point, t)
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}
