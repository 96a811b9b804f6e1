//! Side-effect-free expressions shared by the CFG, the CFA and the verifier.
//!
//! Values are 32-bit two's-complement integers with wrap-around; booleans are
//! represented as `0`/`1` when evaluated.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Type {
    Int,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Bool => f.write_str("bool"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// C binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem
        )
    }

    pub fn is_relational(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

pub const UNARY_PRECEDENCE: u8 = 7;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i32),
    Bool(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalError {
    DivisionByZero,
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn unary(op: UnOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::unary(UnOp::Not, e)
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Bool(_))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Expr::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Expr::Int(_) | Expr::Bool(_) => false,
            Expr::Var(v) => v == var,
            Expr::Unary(_, e) => e.mentions(var),
            Expr::Binary(_, l, r) => l.mentions(var) || r.mentions(var),
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: &str, with: &Expr) -> Expr {
        self.map_vars(&mut |v| (v == var).then(|| with.clone()))
    }

    /// Rebuilds the expression, replacing variables for which `f` returns `Some`.
    pub fn map_vars(&self, f: &mut impl FnMut(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Int(_) | Expr::Bool(_) => self.clone(),
            Expr::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, e) => Expr::unary(*op, e.map_vars(f)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.map_vars(f), r.map_vars(f)),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) => 1 + e.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    /// Evaluates under 32-bit wrap-around semantics. `&&` and `||` short-circuit.
    pub fn eval(&self, lookup: &impl Fn(&str) -> i32) -> Result<i32, EvalError> {
        Ok(match self {
            Expr::Int(n) => *n,
            Expr::Bool(b) => *b as i32,
            Expr::Var(v) => lookup(v),
            Expr::Unary(UnOp::Neg, e) => e.eval(lookup)?.wrapping_neg(),
            Expr::Unary(UnOp::Not, e) => (e.eval(lookup)? == 0) as i32,
            Expr::Binary(BinOp::And, l, r) => {
                (l.eval(lookup)? != 0 && r.eval(lookup)? != 0) as i32
            }
            Expr::Binary(BinOp::Or, l, r) => {
                (l.eval(lookup)? != 0 || r.eval(lookup)? != 0) as i32
            }
            Expr::Binary(op, l, r) => apply_binary(*op, l.eval(lookup)?, r.eval(lookup)?)?,
        })
    }
}

pub fn apply_binary(op: BinOp, a: i32, b: i32) -> Result<i32, EvalError> {
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div => {
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            a.wrapping_div(b)
        }
        BinOp::Rem => {
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            a.wrapping_rem(b)
        }
        BinOp::Lt => (a < b) as i32,
        BinOp::Le => (a <= b) as i32,
        BinOp::Gt => (a > b) as i32,
        BinOp::Ge => (a >= b) as i32,
        BinOp::Eq => (a == b) as i32,
        BinOp::Ne => (a != b) as i32,
        BinOp::And => (a != 0 && b != 0) as i32,
        BinOp::Or => (a != 0 || b != 0) as i32,
    })
}

/// Writes `n` so that it re-lexes as the same value (no `i32::MIN` literal exists).
pub fn write_int(f: &mut fmt::Formatter<'_>, n: i32) -> fmt::Result {
    if n == i32::MIN {
        write!(f, "(-2147483647 - 1)")
    } else {
        write!(f, "{n}")
    }
}

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Int(n) if *n < 0 => UNARY_PRECEDENCE,
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => 8,
            Expr::Unary(..) => UNARY_PRECEDENCE,
            Expr::Binary(op, ..) => op.precedence(),
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Int(n) => write_int(f, *n)?,
            Expr::Bool(b) => write!(f, "{b}")?,
            Expr::Var(v) => f.write_str(v)?,
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                // `- -x` and `--x` must not fuse into a decrement token
                e.fmt_prec(f, UNARY_PRECEDENCE + 1)?;
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_respects_precedence() {
        let e = Expr::binary(
            BinOp::Mul,
            Expr::binary(BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::var("b"),
        );
        assert_eq!(e.to_string(), "(a + 1) * b");
        let e = Expr::binary(
            BinOp::Sub,
            Expr::var("a"),
            Expr::binary(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::unary(UnOp::Neg, Expr::Int(-3));
        assert_eq!(e.to_string(), "-(-3)");
    }

    #[test]
    fn eval_wraps_and_traps() {
        let e = Expr::binary(BinOp::Add, Expr::Int(i32::MAX), Expr::Int(1));
        assert_eq!(e.eval(&|_| 0), Ok(i32::MIN));
        let e = Expr::binary(BinOp::Div, Expr::Int(1), Expr::var("z"));
        assert_eq!(e.eval(&|_| 0), Err(EvalError::DivisionByZero));
        let e = Expr::binary(
            BinOp::And,
            Expr::Bool(false),
            Expr::binary(BinOp::Div, Expr::Int(1), Expr::Int(0)),
        );
        assert_eq!(e.eval(&|_| 0), Ok(0));
        let e = Expr::binary(BinOp::Rem, Expr::Int(-7), Expr::Int(2));
        assert_eq!(e.eval(&|_| 0), Ok(-1));
    }
}
