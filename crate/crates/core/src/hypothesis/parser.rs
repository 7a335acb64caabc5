//! Recursive-descent parser and canonical printer for predicates.
//!
//! Binding strength, loosest first:
//!
//! | level | operators                         |
//! |-------|-----------------------------------|
//! | 1     | `\|\|` `or`                        |
//! | 2     | `&&` `and`                        |
//! | 3     | `<` `<=` `>` `>=` `==` `in [a,b]` |
//! | 4     | `+` `-`                           |
//! | 5     | `*` `/`                           |
//! | 6     | unary `-`, `!` `not`              |
//!
//! Comparisons do not chain. Types are checked while parsing so every type
//! error carries the position of the offending operand.

use std::fmt;

use super::lexer::{tokenize, Spanned, Tok};
use super::{ArithOp, CmpOp, CoefRef, ErrorKind, Expr, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Num,
    Bool,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Num => "number",
            Ty::Bool => "boolean",
        }
    }
}

/// Parses a predicate. The result is always boolean-typed.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, at: 0 };
    let (expr, ty, pos) = p.or()?;
    if p.peek() != &Tok::End {
        return Err(p.syntax(format!("unexpected {}", p.peek().describe())));
    }
    if ty != Ty::Bool {
        return Err(type_err(pos, "predicate must be a comparison or boolean, found a number"));
    }
    Ok(expr)
}

struct Parser {
    tokens: Vec<Spanned>,
    at: usize,
}

type Parsed = (Expr, Ty, usize);

fn type_err(position: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        kind: ErrorKind::Type,
        position,
        message: message.into(),
    }
}

fn expect_ty(got: &Parsed, want: Ty, context: &str) -> Result<(), ParseError> {
    if got.1 == want {
        Ok(())
    } else {
        Err(type_err(
            got.2,
            format!("{context} expects a {}, found a {}", want.name(), got.1.name()),
        ))
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Spanned {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::End {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, message: String) -> ParseError {
        ParseError {
            kind: ErrorKind::Syntax,
            position: self.pos(),
            message,
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn or(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and()?;
            expect_ty(&lhs, Ty::Bool, "`||`")?;
            expect_ty(&rhs, Ty::Bool, "`||`")?;
            lhs = (Expr::Or(Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool, lhs.2);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.comparison()?;
            expect_ty(&lhs, Ty::Bool, "`&&`")?;
            expect_ty(&rhs, Ty::Bool, "`&&`")?;
            lhs = (Expr::And(Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool, lhs.2);
        }
        Ok(lhs)
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::Eq => CmpOp::Eq,
            _ => return None,
        })
    }

    fn is_in(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "in")
    }

    fn comparison(&mut self) -> Result<Parsed, ParseError> {
        let lhs = self.additive()?;
        let result = if let Some(op) = self.cmp_op() {
            self.bump();
            let rhs = self.additive()?;
            let ctx = format!("`{}`", op.symbol());
            expect_ty(&lhs, Ty::Num, &ctx)?;
            expect_ty(&rhs, Ty::Num, &ctx)?;
            (Expr::Compare(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Bool, lhs.2)
        } else if self.is_in() {
            self.bump();
            self.expect(Tok::LBracket, "`[` after `in`")?;
            let lo = self.or()?;
            self.expect(Tok::Comma, "`,` between interval bounds")?;
            let hi = self.or()?;
            self.expect(Tok::RBracket, "`]` closing the interval")?;
            expect_ty(&lhs, Ty::Num, "`in`")?;
            expect_ty(&lo, Ty::Num, "interval bound")?;
            expect_ty(&hi, Ty::Num, "interval bound")?;
            (
                Expr::Within {
                    value: Box::new(lhs.0),
                    lo: Box::new(lo.0),
                    hi: Box::new(hi.0),
                },
                Ty::Bool,
                lhs.2,
            )
        } else {
            return Ok(lhs);
        };
        if self.cmp_op().is_some() || self.is_in() {
            return Err(self.syntax("comparisons cannot be chained; use `&&`".into()));
        }
        Ok(result)
    }

    fn additive(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            let ctx = format!("`{}`", op.symbol());
            expect_ty(&lhs, Ty::Num, &ctx)?;
            expect_ty(&rhs, Ty::Num, &ctx)?;
            lhs = (Expr::Arith(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Num, lhs.2);
        }
    }

    fn multiplicative(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            let ctx = format!("`{}`", op.symbol());
            expect_ty(&lhs, Ty::Num, &ctx)?;
            expect_ty(&rhs, Ty::Num, &ctx)?;
            lhs = (Expr::Arith(op, Box::new(lhs.0), Box::new(rhs.0)), Ty::Num, lhs.2);
        }
    }

    fn unary(&mut self) -> Result<Parsed, ParseError> {
        let pos = self.pos();
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let operand = self.unary()?;
                expect_ty(&operand, Ty::Num, "unary `-`")?;
                Ok((Expr::Neg(Box::new(operand.0)), Ty::Num, pos))
            }
            Tok::Bang => {
                self.bump();
                let operand = self.unary()?;
                expect_ty(&operand, Ty::Bool, "`!`")?;
                Ok((Expr::Not(Box::new(operand.0)), Ty::Bool, pos))
            }
            _ => self.primary(),
        }
    }

    fn empty_call(&mut self, name: &str) -> Result<(), ParseError> {
        self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
        self.expect(Tok::RParen, &format!("`)`: `{name}()` takes no arguments"))
    }

    fn primary(&mut self) -> Result<Parsed, ParseError> {
        let start = self.bump();
        let pos = start.pos;
        let num = |e| Ok((e, Ty::Num, pos));
        match start.tok {
            Tok::Num(v) => num(Expr::Num(v)),
            Tok::LParen => {
                let (inner, ty, _) = self.or()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok((inner, ty, pos))
            }
            Tok::Ident(name) => match name.as_str() {
                "inf" => num(Expr::Num(f64::INFINITY)),
                "n" => num(Expr::SampleSize),
                "curv" => {
                    self.empty_call("curv")?;
                    num(Expr::Curv)
                }
                "vertex" => {
                    self.empty_call("vertex")?;
                    num(Expr::Vertex)
                }
                "pred" => {
                    self.expect(Tok::LParen, "`(` after `pred`")?;
                    let arg = self.or()?;
                    self.expect(Tok::RParen, "`)` closing `pred(`")?;
                    expect_ty(&arg, Ty::Num, "`pred`")?;
                    num(Expr::Pred(Box::new(arg.0)))
                }
                "coef" => {
                    self.expect(Tok::LParen, "`(` after `coef`")?;
                    let arg = self.bump();
                    let r = match arg.tok {
                        Tok::Num(v) if v.fract() == 0.0 && v >= 0.0 => CoefRef::Index(v as usize),
                        Tok::Ident(s) | Tok::Str(s) => CoefRef::Name(s),
                        other => {
                            return Err(ParseError {
                                kind: ErrorKind::Syntax,
                                position: arg.pos,
                                message: format!(
                                    "`coef` takes a coefficient name or index, found {}",
                                    other.describe()
                                ),
                            })
                        }
                    };
                    self.expect(Tok::RParen, "`)` closing `coef(`")?;
                    num(Expr::Coef(r))
                }
                other => Err(ParseError {
                    kind: ErrorKind::Syntax,
                    position: pos,
                    message: format!("unknown name `{other}`"),
                }),
            },
            other => Err(ParseError {
                kind: ErrorKind::Syntax,
                position: pos,
                message: format!("expected an expression, found {}", other.describe()),
            }),
        }
    }
}

impl ArithOp {
    pub(crate) fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

impl CmpOp {
    pub(crate) fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }
}

impl Expr {
    fn level(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Compare(..) | Expr::Within { .. } => 3,
            Expr::Arith(ArithOp::Add | ArithOp::Sub, ..) => 4,
            Expr::Arith(..) => 5,
            Expr::Neg(_) | Expr::Not(_) => 6,
            _ => 7,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) if v.is_infinite() => write!(f, "inf"),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::SampleSize => write!(f, "n"),
            Expr::Curv => write!(f, "curv()"),
            Expr::Vertex => write!(f, "vertex()"),
            Expr::Coef(CoefRef::Index(i)) => write!(f, "coef({i})"),
            Expr::Coef(CoefRef::Name(s)) => {
                let bare = s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                    && s.chars().all(|c| c.is_alphanumeric() || c == '_')
                    && !matches!(s.as_str(), "and" | "or" | "not");
                if bare {
                    write!(f, "coef({s})")
                } else {
                    write!(f, "coef(\"{s}\")")
                }
            }
            Expr::Pred(x) => {
                write!(f, "pred(")?;
                x.write_at(f, 0)?;
                write!(f, ")")
            }
            Expr::Neg(x) => {
                write!(f, "-")?;
                x.write_at(f, 6)
            }
            Expr::Not(x) => {
                write!(f, "!")?;
                x.write_at(f, 6)
            }
            Expr::Arith(op, a, b) => {
                let l = self.level();
                a.write_at(f, l)?;
                write!(f, " {} ", op.symbol())?;
                b.write_at(f, l + 1)
            }
            Expr::Compare(op, a, b) => {
                a.write_at(f, 4)?;
                write!(f, " {} ", op.symbol())?;
                b.write_at(f, 4)
            }
            Expr::Within { value, lo, hi } => {
                value.write_at(f, 4)?;
                write!(f, " in [")?;
                lo.write_at(f, 0)?;
                write!(f, ", ")?;
                hi.write_at(f, 0)?;
                write!(f, "]")
            }
            Expr::And(a, b) => {
                a.write_at(f, 2)?;
                write!(f, " && ")?;
                b.write_at(f, 3)
            }
            Expr::Or(a, b) => {
                a.write_at(f, 1)?;
                write!(f, " || ")?;
                b.write_at(f, 2)
            }
        }
    }
}

/// Canonical text; `parse(&e.to_string()) == Ok(e)` for any well-typed
/// boolean expression with non-negative literals.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}
