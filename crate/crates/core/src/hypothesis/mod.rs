//! Shape hypotheses: a small predicate language evaluated against one fitted
//! model at a time, and the fraction-of-replicates confidence level.
//!
//! See `docs/predicates.md` for the grammar.

mod lexer;
mod parser;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ols::{predict_with, FitResult, ModelSpec};

pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Lexical,
    Syntax,
    Type,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Lexical => "lexical",
            ErrorKind::Syntax => "syntax",
            ErrorKind::Type => "type",
        })
    }
}

/// A diagnostic from [`parse`]. `position` is a 0-based character offset.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} error at column {}: {message}", position + 1)]
pub struct ParseError {
    pub kind: ErrorKind,
    pub position: usize,
    pub message: String,
}

impl ParseError {
    /// The source line with a caret under the error position.
    pub fn render(&self, source: &str) -> String {
        format!("{self}\n  {source}\n  {}^", " ".repeat(self.position))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypothesisError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("`{0}` needs a model of degree at least 2")]
    NeedsCurvature(&'static str),
    #[error("`vertex()` needs a quadratic model (degree is {0})")]
    NeedsQuadratic(usize),
    #[error("unknown coefficient `{name}` (available: {available})")]
    UnknownCoefficient { name: String, available: String },
    #[error("coefficient index {index} out of range (p = {p})")]
    CoefficientIndex { index: usize, p: usize },
    #[error("adjustment has {found} values but the model has {expected} controls")]
    AdjustmentLength { expected: usize, found: usize },
    #[error("vertex undefined: curvature is exactly zero")]
    VertexUndefined,
    #[error("unknown built-in hypothesis `{0}`")]
    UnknownBuiltin(String),
    #[error("cannot compute a confidence level from zero outcomes")]
    NoOutcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoefRef {
    Index(usize),
    Name(String),
}

/// Predicate syntax tree. Numeric and boolean nodes share one type; the
/// parser guarantees a well-typed tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Sample size `n`.
    SampleSize,
    Coef(CoefRef),
    Curv,
    Vertex,
    Pred(Box<Expr>),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    /// Closed interval membership `value in [lo, hi]`.
    Within {
        value: Box<Expr>,
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::SampleSize | Expr::Coef(_) | Expr::Curv | Expr::Vertex => vec![],
            Expr::Pred(a) | Expr::Neg(a) | Expr::Not(a) => vec![a],
            Expr::Arith(_, a, b) | Expr::Compare(_, a, b) | Expr::And(a, b) | Expr::Or(a, b) => {
                vec![a, b]
            }
            Expr::Within { value, lo, hi } => vec![value, lo, hi],
        }
    }

    /// Checks that every model feature the expression uses exists in `spec`.
    pub fn check(&self, spec: &ModelSpec) -> Result<(), HypothesisError> {
        match self {
            Expr::Curv if spec.degree < 2 => return Err(HypothesisError::NeedsCurvature("curv()")),
            Expr::Vertex if spec.degree != 2 => {
                return Err(HypothesisError::NeedsQuadratic(spec.degree))
            }
            Expr::Coef(r) => {
                resolve_coef(r, spec)?;
            }
            _ => {}
        }
        self.children().into_iter().try_for_each(|c| c.check(spec))
    }
}

fn resolve_coef(r: &CoefRef, spec: &ModelSpec) -> Result<usize, HypothesisError> {
    match r {
        CoefRef::Index(i) if *i < spec.p() => Ok(*i),
        CoefRef::Index(i) => Err(HypothesisError::CoefficientIndex {
            index: *i,
            p: spec.p(),
        }),
        CoefRef::Name(name) => {
            spec.coefficient_index(name)
                .ok_or_else(|| HypothesisError::UnknownCoefficient {
                    name: name.clone(),
                    available: spec.coefficient_names().join(", "),
                })
        }
    }
}

/// One fitted model as seen by predicates: coefficients in design order,
/// plus the control values held fixed by `pred()`.
#[derive(Debug, Clone, Copy)]
pub struct ModelContext<'a> {
    coefficients: &'a [f64],
    spec: &'a ModelSpec,
    n: usize,
    adjustment: &'a [f64],
}

impl<'a> ModelContext<'a> {
    pub fn new(
        coefficients: &'a [f64],
        spec: &'a ModelSpec,
        n: usize,
        adjustment: &'a [f64],
    ) -> Result<Self, HypothesisError> {
        if adjustment.len() != spec.controls.len() {
            return Err(HypothesisError::AdjustmentLength {
                expected: spec.controls.len(),
                found: adjustment.len(),
            });
        }
        assert_eq!(coefficients.len(), spec.p(), "coefficient count mismatch");
        Ok(Self {
            coefficients,
            spec,
            n,
            adjustment,
        })
    }

    pub fn from_fit(fit: &'a FitResult, adjustment: &'a [f64]) -> Result<Self, HypothesisError> {
        Self::new(&fit.coefficients, &fit.spec, fit.n, adjustment)
    }

    /// Coefficient of the squared focal term.
    pub fn curv(&self) -> Result<f64, HypothesisError> {
        if self.spec.degree < 2 {
            return Err(HypothesisError::NeedsCurvature("curv()"));
        }
        Ok(self.coefficients[2])
    }

    /// Stationary point `-b1 / (2 b2)` of the fitted parabola.
    pub fn vertex(&self) -> Result<f64, HypothesisError> {
        if self.spec.degree != 2 {
            return Err(HypothesisError::NeedsQuadratic(self.spec.degree));
        }
        let (b1, b2) = (self.coefficients[1], self.coefficients[2]);
        if b2 == 0.0 {
            return Err(HypothesisError::VertexUndefined);
        }
        Ok(-b1 / (2.0 * b2))
    }

    /// Adjusted prediction at focal value `x`.
    pub fn pred(&self, x: f64) -> f64 {
        predict_with(self.coefficients, self.spec.degree, x, self.adjustment)
    }
}

/// Result of evaluating a predicate on one model. When `undefined` is set
/// (a `vertex()` with zero curvature somewhere in the tree) `value` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub value: bool,
    pub undefined: bool,
}

/// Evaluates every node (no short-circuit), so an undefined vertex anywhere
/// in the tree makes the whole predicate false.
pub fn evaluate(expr: &Expr, ctx: &ModelContext<'_>) -> Result<Outcome, HypothesisError> {
    let mut undefined = false;
    let value = eval_bool(expr, ctx, &mut undefined)?;
    Ok(Outcome {
        value: value && !undefined,
        undefined,
    })
}

fn eval_bool(e: &Expr, ctx: &ModelContext<'_>, undef: &mut bool) -> Result<bool, HypothesisError> {
    Ok(match e {
        Expr::Not(a) => !eval_bool(a, ctx, undef)?,
        Expr::And(a, b) => {
            let a = eval_bool(a, ctx, undef)?;
            let b = eval_bool(b, ctx, undef)?;
            a && b
        }
        Expr::Or(a, b) => {
            let a = eval_bool(a, ctx, undef)?;
            let b = eval_bool(b, ctx, undef)?;
            a || b
        }
        Expr::Compare(op, a, b) => {
            let (a, b) = (eval_num(a, ctx, undef)?, eval_num(b, ctx, undef)?);
            match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq => a == b,
            }
        }
        Expr::Within { value, lo, hi } => {
            let v = eval_num(value, ctx, undef)?;
            let lo = eval_num(lo, ctx, undef)?;
            let hi = eval_num(hi, ctx, undef)?;
            lo <= v && v <= hi
        }
        other => unreachable!("numeric node in boolean position: {other:?}"),
    })
}

fn eval_num(e: &Expr, ctx: &ModelContext<'_>, undef: &mut bool) -> Result<f64, HypothesisError> {
    Ok(match e {
        Expr::Num(v) => *v,
        Expr::SampleSize => ctx.n as f64,
        Expr::Coef(r) => ctx.coefficients[resolve_coef(r, ctx.spec)?],
        Expr::Curv => ctx.curv()?,
        Expr::Vertex => match ctx.vertex() {
            Ok(v) => v,
            Err(HypothesisError::VertexUndefined) => {
                *undef = true;
                f64::NAN
            }
            Err(other) => return Err(other),
        },
        Expr::Pred(x) => ctx.pred(eval_num(x, ctx, undef)?),
        Expr::Neg(a) => -eval_num(a, ctx, undef)?,
        Expr::Arith(op, a, b) => {
            let (a, b) = (eval_num(a, ctx, undef)?, eval_num(b, ctx, undef)?);
            match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
                ArithOp::Div => a / b,
            }
        }
        other => unreachable!("boolean node in numeric position: {other:?}"),
    })
}

/// Fraction of true outcomes.
pub fn confidence_level(outcomes: &[bool]) -> Result<f64, HypothesisError> {
    if outcomes.is_empty() {
        return Err(HypothesisError::NoOutcomes);
    }
    Ok(outcomes.iter().filter(|&&o| o).count() as f64 / outcomes.len() as f64)
}

/// The built-in hypotheses. Each expands to fixed predicate text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum Builtin {
    InvertedU,
    /// Not an inverted U, and `pred(at) < pred(0)`.
    Negative { at: f64 },
    /// Inverted U with its vertex in `[lo, hi]`.
    OptimumIn { lo: f64, hi: f64 },
}

fn fmt_bound(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

impl Builtin {
    pub fn text(&self) -> String {
        match self {
            Builtin::InvertedU => "curv() < 0 && vertex() > 0".into(),
            Builtin::Negative { at } => format!(
                "!(curv() < 0 && vertex() > 0) && pred({}) < pred(0)",
                fmt_bound(*at)
            ),
            Builtin::OptimumIn { lo, hi } => format!(
                "curv() < 0 && vertex() > 0 && vertex() in [{},{}]",
                fmt_bound(*lo),
                fmt_bound(*hi)
            ),
        }
    }

    pub fn default_name(&self) -> String {
        match self {
            Builtin::InvertedU => "inverted_u".into(),
            Builtin::Negative { .. } => "negative".into(),
            Builtin::OptimumIn { lo, hi } => {
                format!("optimum_in({},{})", fmt_bound(*lo), fmt_bound(*hi))
            }
        }
    }

    /// Parses `inverted_u`, `negative`, `negative(X)` or `optimum_in(a,b)`.
    /// Returns `None` for anything else.
    pub fn from_reference(s: &str) -> Option<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let num = |t: &str| -> Option<f64> {
            match t {
                "inf" | "+inf" | "∞" => Some(f64::INFINITY),
                "-inf" => Some(f64::NEG_INFINITY),
                _ => t.parse().ok().filter(|v: &f64| v.is_finite()),
            }
        };
        if s == "inverted_u" {
            return Some(Builtin::InvertedU);
        }
        if s == "negative" {
            return Some(Builtin::Negative { at: 25.0 });
        }
        let args = |prefix: &str| -> Option<Vec<f64>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            inner.split(',').map(num).collect()
        };
        if let Some(a) = args("negative") {
            return match a.as_slice() {
                [at] if at.is_finite() => Some(Builtin::Negative { at: *at }),
                _ => None,
            };
        }
        if let Some(a) = args("optimum_in") {
            return match a.as_slice() {
                [lo, hi] if lo < hi => Some(Builtin::OptimumIn { lo: *lo, hi: *hi }),
                _ => None,
            };
        }
        None
    }

    /// The default set: inverted U, negative at 25, and the
    /// three optimum bands.
    pub fn defaults() -> Vec<Builtin> {
        vec![
            Builtin::InvertedU,
            Builtin::Negative { at: 25.0 },
            Builtin::OptimumIn { lo: 0.0, hi: 10.0 },
            Builtin::OptimumIn { lo: 10.0, hi: 20.0 },
            Builtin::OptimumIn {
                lo: 20.0,
                hi: f64::INFINITY,
            },
        ]
    }
}

/// A named, parsed hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub name: String,
    pub text: String,
    pub expr: Expr,
    pub builtin: Option<Builtin>,
}

impl Hypothesis {
    pub fn custom(name: &str, text: &str) -> Result<Self, HypothesisError> {
        Ok(Self {
            name: name.to_string(),
            text: text.to_string(),
            expr: parse(text)?,
            builtin: None,
        })
    }

    pub fn from_builtin(name: Option<&str>, builtin: Builtin) -> Self {
        let text = builtin.text();
        let expr = parse(&text).expect("built-in predicate text parses");
        Self {
            name: name.map_or_else(|| builtin.default_name(), str::to_string),
            text,
            expr,
            builtin: Some(builtin),
        }
    }

    /// `name=expr` or a bare built-in reference. `expr` may itself be a
    /// built-in reference or predicate text.
    pub fn from_arg(arg: &str) -> Result<Self, HypothesisError> {
        if let Some(b) = Builtin::from_reference(arg) {
            return Ok(Self::from_builtin(None, b));
        }
        match arg.split_once('=') {
            Some((name, body))
                if !name.trim().is_empty()
                    && name.trim().chars().all(|c| c.is_alphanumeric() || "_-().,".contains(c)) =>
            {
                let name = name.trim();
                match Builtin::from_reference(body) {
                    Some(b) => Ok(Self::from_builtin(Some(name), b)),
                    None => Self::custom(name, body.trim()),
                }
            }
            _ => Err(HypothesisError::UnknownBuiltin(arg.to_string())),
        }
    }
}
