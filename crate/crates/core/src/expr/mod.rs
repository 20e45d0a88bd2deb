//! Scalar arithmetic expressions used to write vector fields, comparison maps
//! and Jacobians as text.
//!
//! The grammar is small on purpose:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?        exponent must fold to a constant
//! primary := number | variable | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | tanh | sqrt | abs | sign
//! ```
//!
//! `-x^2` therefore reads as `-(x^2)`, and `+`, `-`, `*`, `/` associate to the
//! left. Exponents are restricted to constant subexpressions so that every
//! expression has a closed-form derivative.

mod derivative;
mod parser;

use std::collections::HashMap;
use std::fmt;

pub use derivative::{differentiate, jacobian};
pub use parser::parse;

/// Errors raised while parsing or evaluating an expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at byte {offset} is not a constant")]
    NonConstantExponent { offset: usize },
    #[error("invalid variable name `{0}`")]
    InvalidVariable(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain error: {operation} of {argument}")]
    Domain {
        operation: &'static str,
        argument: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => " + ",
            BinaryOp::Sub => " - ",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }
}

/// Built-in single-argument functions.
///
/// `Sign` is the derivative of `Abs` (with `sign(0) = 0`); it is accepted by
/// the parser so that rendered derivatives stay parseable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Function {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
    Abs,
    Sign,
}

impl Function {
    pub const ALL: [Function; 7] = [
        Function::Sin,
        Function::Cos,
        Function::Exp,
        Function::Tanh,
        Function::Sqrt,
        Function::Abs,
        Function::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::Sin => "sin",
            Function::Cos => "cos",
            Function::Exp => "exp",
            Function::Tanh => "tanh",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
            Function::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Function> {
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        let value = match self {
            Function::Sin => x.sin(),
            Function::Cos => x.cos(),
            Function::Exp => x.exp(),
            Function::Tanh => x.tanh(),
            Function::Sqrt => {
                if x < 0.0 {
                    return Err(ExprError::Domain {
                        operation: "sqrt",
                        argument: x,
                    });
                }
                x.sqrt()
            }
            Function::Abs => x.abs(),
            Function::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        };
        if value.is_nan() {
            return Err(ExprError::Domain {
                operation: self.name(),
                argument: x,
            });
        }
        Ok(value)
    }
}

/// Expression tree. Immutable once built.
///
/// Variables carry both their name and their slot in the variable list the
/// expression was parsed against, so hot loops can evaluate from a slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var {
        name: String,
        slot: usize,
    },
    Neg(Box<Expr>),
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Pow {
        base: Box<Expr>,
        exponent: f64,
    },
    Call {
        func: Function,
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Expr::Const(_))
    }

    /// Names of the variables referenced by this expression, deduplicated,
    /// in order of first appearance.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_vars(&mut |name| {
            if !out.contains(&name) {
                out.push(name);
            }
        });
        out
    }

    pub fn references(&self, var: &str) -> bool {
        let mut found = false;
        self.visit_vars(&mut |name| found |= name == var);
        found
    }

    fn visit_vars<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var { name, .. } => f(name),
            Expr::Neg(a) | Expr::Pow { base: a, .. } | Expr::Call { arg: a, .. } => a.visit_vars(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_vars(f);
                rhs.visit_vars(f);
            }
        }
    }

    /// Evaluates with variables looked up by slot.
    pub fn eval_at(&self, values: &[f64]) -> Result<f64, ExprError> {
        self.eval_with(&|name, slot| {
            values
                .get(slot)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string()))
        })
    }

    /// Evaluates with variables looked up by name.
    pub fn eval(&self, bindings: &HashMap<String, f64>) -> Result<f64, ExprError> {
        self.eval_with(&|name, _| {
            bindings
                .get(name)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string()))
        })
    }

    fn eval_with(
        &self,
        lookup: &dyn Fn(&str, usize) -> Result<f64, ExprError>,
    ) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var { name, slot } => lookup(name, *slot),
            Expr::Neg(a) => Ok(-a.eval_with(lookup)?),
            Expr::Binary { op, lhs, rhs } => {
                let l = lhs.eval_with(lookup)?;
                let r = rhs.eval_with(lookup)?;
                apply_binary(*op, l, r)
            }
            Expr::Pow { base, exponent } => apply_pow(base.eval_with(lookup)?, *exponent),
            Expr::Call { func, arg } => func.apply(arg.eval_with(lookup)?),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Const(_) | Expr::Var { .. } | Expr::Call { .. } => 5,
            Expr::Pow { .. } => 4,
            Expr::Neg(_) => 3,
            Expr::Binary { op, .. } => op.precedence(),
        }
    }
}

pub(crate) fn apply_binary(op: BinaryOp, l: f64, r: f64) -> Result<f64, ExprError> {
    let value = match op {
        BinaryOp::Add => l + r,
        BinaryOp::Sub => l - r,
        BinaryOp::Mul => l * r,
        BinaryOp::Div => {
            if r == 0.0 {
                return Err(ExprError::Domain {
                    operation: "division",
                    argument: r,
                });
            }
            l / r
        }
    };
    if value.is_nan() && !l.is_nan() && !r.is_nan() {
        return Err(ExprError::Domain {
            operation: match op {
                BinaryOp::Add => "addition",
                BinaryOp::Sub => "subtraction",
                BinaryOp::Mul => "multiplication",
                BinaryOp::Div => "division",
            },
            argument: r,
        });
    }
    Ok(value)
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(ExprError::Domain {
            operation: "negative power",
            argument: base,
        });
    }
    let value = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    if value.is_nan() && !base.is_nan() {
        return Err(ExprError::Domain {
            operation: "power",
            argument: base,
        });
    }
    Ok(value)
}

fn fmt_number(f: &mut fmt::Formatter<'_>, value: f64) -> fmt::Result {
    if value.is_sign_negative() {
        write!(f, "-{}", -value)
    } else {
        write!(f, "{value}")
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, child: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

/// Infix rendering with the minimum parentheses needed to parse back to the
/// same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_number(f, *c),
            Expr::Var { name, .. } => f.write_str(name),
            Expr::Neg(a) => {
                f.write_str("-")?;
                fmt_child(f, a, a.precedence() < 3)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                fmt_child(f, lhs, lhs.precedence() < p)?;
                f.write_str(op.symbol())?;
                fmt_child(f, rhs, rhs.precedence() <= p)
            }
            Expr::Pow { base, exponent } => {
                fmt_child(f, base, base.precedence() < 5)?;
                f.write_str("^")?;
                if exponent.is_sign_negative() {
                    f.write_str("(")?;
                    fmt_number(f, *exponent)?;
                    f.write_str(")")
                } else {
                    fmt_number(f, *exponent)
                }
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn eval_example_fields() {
        let f1 = parse("-x1^2+x2", &["x1", "x2"]).unwrap();
        let f2 = parse("x1 - 2*x2^2", &["x1", "x2"]).unwrap();
        let b = vars(&[("x1", 1.0), ("x2", 1.0)]);
        assert_eq!(f1.eval(&b).unwrap(), 0.0);
        assert_eq!(f2.eval(&b).unwrap(), -1.0);
        assert_eq!(f2.eval_at(&[1.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn eval_domain_errors() {
        let e = parse("sqrt(x1)", &["x1"]).unwrap();
        assert!(matches!(
            e.eval(&vars(&[("x1", -1.0)])),
            Err(ExprError::Domain {
                operation: "sqrt",
                ..
            })
        ));
        let d = parse("1/x1", &["x1"]).unwrap();
        assert!(matches!(d.eval_at(&[0.0]), Err(ExprError::Domain { .. })));
        let p = parse("x1^0.5", &["x1"]).unwrap();
        assert!(matches!(p.eval_at(&[-4.0]), Err(ExprError::Domain { .. })));
        let z = parse("x1^(-1)", &["x1"]).unwrap();
        assert!(matches!(z.eval_at(&[0.0]), Err(ExprError::Domain { .. })));
    }

    #[test]
    fn eval_unbound() {
        let e = parse("x1 + x2", &["x1", "x2"]).unwrap();
        assert_eq!(
            e.eval(&vars(&[("x1", 1.0)])),
            Err(ExprError::UnboundVariable("x2".into()))
        );
        assert!(matches!(
            e.eval_at(&[1.0]),
            Err(ExprError::UnboundVariable(_))
        ));
    }

    #[test]
    fn overflow_follows_ieee() {
        let e = parse("exp(x)", &["x"]).unwrap();
        assert_eq!(e.eval_at(&[1000.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sign_at_zero() {
        let e = parse("sign(x)", &["x"]).unwrap();
        assert_eq!(e.eval_at(&[0.0]).unwrap(), 0.0);
        assert_eq!(e.eval_at(&[-3.0]).unwrap(), -1.0);
    }

    #[test]
    fn render_minimal_parens() {
        let v = ["a", "b", "c"];
        for (src, expected) in [
            ("a - (b - c)", "a - (b - c)"),
            ("(a - b) - c", "a - b - c"),
            ("-(a*b)", "-(a*b)"),
            ("(-a)^2", "(-a)^2"),
            ("-a^2", "-a^2"),
            ("a/(b*c)", "a/(b*c)"),
            ("a*(b + c)", "a*(b + c)"),
            ("sin(a + b)*c", "sin(a + b)*c"),
            ("a^(-2)", "a^(-2)"),
            ("a^-2", "a^(-2)"),
            ("2^3^2", "2^9"),
        ] {
            let e = parse(src, &v).unwrap();
            assert_eq!(e.to_string(), expected, "rendering {src}");
            assert_eq!(parse(&e.to_string(), &v).unwrap(), e);
        }
    }

    #[test]
    fn eval_is_bit_deterministic() {
        let e = parse("sin(x)*exp(y) - tanh(x*y)/3", &["x", "y"]).unwrap();
        let a = e.eval_at(&[0.3, -1.7]).unwrap();
        let b = e.eval_at(&[0.3, -1.7]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
