//! Translation of IR expressions into formulas over mathematical integers.
//!
//! Division and remainder by a constant are encoded exactly with fresh
//! quotient and remainder variables. Products of two variables, division by a
//! variable and coefficient overflow become fresh unconstrained variables; the
//! encoding then over-approximates and `approximate` is set.

use std::collections::BTreeMap;

use super::{Formula, LinExpr, Rel};
use crate::ir::{BinOp, Expr, Type, UnOp};

pub struct Encoder<'a> {
    types: &'a BTreeMap<String, Type>,
    prefix: String,
    fresh: usize,
    /// Definitions of the fresh variables introduced so far.
    pub side: Vec<Formula>,
    pub approximate: bool,
}

impl<'a> Encoder<'a> {
    /// `prefix` keeps fresh names of different encoders apart.
    pub fn new(types: &'a BTreeMap<String, Type>, prefix: &str) -> Encoder<'a> {
        Encoder {
            types,
            prefix: prefix.to_string(),
            fresh: 0,
            side: Vec::new(),
            approximate: false,
        }
    }

    pub fn fresh_name(&mut self) -> String {
        self.fresh += 1;
        format!("{}#{}", self.prefix, self.fresh)
    }

    fn unconstrained(&mut self) -> LinExpr {
        self.approximate = true;
        LinExpr::var(self.fresh_name())
    }

    pub fn type_of(&self, var: &str) -> Type {
        self.types.get(var).copied().unwrap_or(Type::Int)
    }

    pub fn is_bool(&self, e: &Expr) -> bool {
        match e {
            Expr::Bool(_) => true,
            Expr::Int(_) => false,
            Expr::Var(v) => self.type_of(v) == Type::Bool,
            Expr::Unary(UnOp::Not, _) => true,
            Expr::Unary(UnOp::Neg, _) => false,
            Expr::Binary(op, ..) => !op.is_arithmetic(),
        }
    }

    fn compare(&mut self, l: &LinExpr, rel: Rel, r: &LinExpr) -> Formula {
        match Formula::compare(l, rel, r) {
            Some(f) => f,
            None => {
                self.approximate = true;
                Formula::Bool(self.fresh_name())
            }
        }
    }

    /// Truth value of `e`, reading variable `v` as `name(v)`.
    pub fn boolean(&mut self, e: &Expr, name: &impl Fn(&str) -> String) -> Formula {
        match e {
            Expr::Bool(b) => Formula::Const(*b),
            Expr::Int(n) => Formula::Const(*n != 0),
            Expr::Var(v) if self.type_of(v) == Type::Bool => Formula::Bool(name(v)),
            Expr::Unary(UnOp::Not, inner) => self.boolean(inner, name).negate(),
            Expr::Binary(BinOp::And, l, r) => {
                Formula::and([self.boolean(l, name), self.boolean(r, name)])
            }
            Expr::Binary(BinOp::Or, l, r) => {
                Formula::or([self.boolean(l, name), self.boolean(r, name)])
            }
            Expr::Binary(op @ (BinOp::Eq | BinOp::Ne), l, r)
                if self.is_bool(l) || self.is_bool(r) =>
            {
                let f = Formula::iff(self.boolean(l, name), self.boolean(r, name));
                if *op == BinOp::Eq {
                    f
                } else {
                    f.negate()
                }
            }
            Expr::Binary(op, l, r) if !op.is_arithmetic() => {
                let rel = match op {
                    BinOp::Lt => Rel::Lt,
                    BinOp::Le => Rel::Le,
                    BinOp::Gt => Rel::Gt,
                    BinOp::Ge => Rel::Ge,
                    BinOp::Eq => Rel::Eq,
                    _ => Rel::Ne,
                };
                let (l, r) = (self.term(l, name), self.term(r, name));
                self.compare(&l, rel, &r)
            }
            _ => {
                let t = self.term(e, name);
                self.compare(&t, Rel::Ne, &LinExpr::constant(0))
            }
        }
    }

    /// Integer value of `e`.
    pub fn term(&mut self, e: &Expr, name: &impl Fn(&str) -> String) -> LinExpr {
        match e {
            Expr::Int(n) => LinExpr::constant(*n as i64),
            Expr::Bool(b) => LinExpr::constant(*b as i64),
            Expr::Var(v) if self.type_of(v) == Type::Int => LinExpr::var(name(v)),
            Expr::Unary(UnOp::Neg, inner) => {
                let t = self.term(inner, name);
                t.checked_scale(-1).unwrap_or_else(|| self.unconstrained())
            }
            Expr::Binary(op, l, r) if op.is_arithmetic() => {
                let (a, b) = (self.term(l, name), self.term(r, name));
                let out = match op {
                    BinOp::Add => a.checked_add(&b),
                    BinOp::Sub => a.checked_sub(&b),
                    BinOp::Mul if a.is_constant() => b.checked_scale(a.constant),
                    BinOp::Mul if b.is_constant() => a.checked_scale(b.constant),
                    BinOp::Div | BinOp::Rem if b.is_constant() && b.constant != 0 => {
                        self.divide(&a, b.constant, *op == BinOp::Div)
                    }
                    _ => None,
                };
                out.unwrap_or_else(|| self.unconstrained())
            }
            _ => {
                // boolean used as an integer
                let b = self.boolean(e, name);
                let v = LinExpr::var(self.fresh_name());
                let one = self.compare(&v, Rel::Eq, &LinExpr::constant(1));
                let zero = self.compare(&v, Rel::Eq, &LinExpr::constant(0));
                self.side.push(Formula::or([
                    Formula::and([b.clone(), one]),
                    Formula::and([b.negate(), zero]),
                ]));
                v
            }
        }
    }

    /// Truncating division: `x = c*q + r` with `r` taking the sign of `x`.
    fn divide(&mut self, x: &LinExpr, c: i64, quotient: bool) -> Option<LinExpr> {
        let q = LinExpr::var(self.fresh_name());
        let r = LinExpr::var(self.fresh_name());
        let m = c.checked_abs()? - 1;
        let rhs = q.checked_scale(c)?.checked_add(&r)?;
        let zero = LinExpr::constant(0);
        let def = self.compare(x, Rel::Eq, &rhs);
        let nonneg = Formula::and([
            self.compare(x, Rel::Ge, &zero),
            self.compare(&r, Rel::Ge, &zero),
            self.compare(&r, Rel::Le, &LinExpr::constant(m)),
        ]);
        let neg = Formula::and([
            self.compare(x, Rel::Lt, &zero),
            self.compare(&r, Rel::Le, &zero),
            self.compare(&r, Rel::Ge, &LinExpr::constant(-m)),
        ]);
        self.side.push(def);
        self.side.push(Formula::or([nonneg, neg]));
        Some(if quotient { q } else { r })
    }
}
