//! Satisfiability of quantifier-free boolean combinations of linear integer
//! constraints.
//!
//! The internal procedure runs DPLL over the boolean skeleton and checks each
//! candidate set of atoms with Fourier–Motzkin elimination plus a bounded
//! integer search. Reasoning is over mathematical integers; the 32-bit
//! wrap-around of the interpreter is not modelled.

mod dpll;
mod encode;
mod lia;
mod smtlib;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use crate::ir::Type;

pub use encode::Encoder;
pub use smtlib::{solve_external, to_smtlib, ExternalSolverError};

/// Σ cᵢ·xᵢ + constant.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    pub terms: BTreeMap<String, i64>,
    pub constant: i64,
}

impl LinExpr {
    pub fn constant(k: i64) -> LinExpr {
        LinExpr {
            terms: BTreeMap::new(),
            constant: k,
        }
    }

    pub fn var(name: impl Into<String>) -> LinExpr {
        LinExpr {
            terms: BTreeMap::from([(name.into(), 1)]),
            constant: 0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn checked_add(&self, other: &LinExpr) -> Option<LinExpr> {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            let slot = out.terms.entry(v.clone()).or_insert(0);
            *slot = slot.checked_add(*c)?;
        }
        out.terms.retain(|_, c| *c != 0);
        out.constant = out.constant.checked_add(other.constant)?;
        Some(out)
    }

    pub fn checked_scale(&self, k: i64) -> Option<LinExpr> {
        if k == 0 {
            return Some(LinExpr::default());
        }
        let mut terms = BTreeMap::new();
        for (v, c) in &self.terms {
            terms.insert(v.clone(), c.checked_mul(k)?);
        }
        Some(LinExpr {
            terms,
            constant: self.constant.checked_mul(k)?,
        })
    }

    pub fn checked_sub(&self, other: &LinExpr) -> Option<LinExpr> {
        self.checked_add(&other.checked_scale(-1)?)
    }

    pub fn eval(&self, model: &Model) -> i128 {
        self.terms
            .iter()
            .map(|(v, c)| *c as i128 * model.int(v) as i128)
            .sum::<i128>()
            + self.constant as i128
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let (sign, mag) = if *c < 0 { ("-", c.unsigned_abs()) } else { ("+", *c as u64) };
            match (first, sign) {
                (true, "-") => f.write_str("-")?,
                (true, _) => {}
                (false, s) => write!(f, " {s} ")?,
            }
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            f.write_str(v)?;
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant != 0 {
            let sign = if self.constant < 0 { "-" } else { "+" };
            write!(f, " {sign} {}", self.constant.unsigned_abs())
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Eq => "==",
            Rel::Ne => "!=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    fn holds(self, a: i128, b: i128) -> bool {
        match self {
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Eq => a == b,
            Rel::Ne => a != b,
            Rel::Gt => a > b,
            Rel::Ge => a >= b,
        }
    }
}

/// `lhs ⋈ bound` with the variables on the left and a constant on the right.
/// Atoms built through [`Formula::compare`] are canonical: the relation is
/// `<=`, `==` or `!=`, coefficients are divided by their gcd, and equalities
/// start with a positive coefficient.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub lhs: BTreeMap<String, i64>,
    pub rel: Rel,
    pub bound: i64,
}

impl Atom {
    pub fn eval(&self, model: &Model) -> bool {
        let v: i128 = self
            .lhs
            .iter()
            .map(|(x, c)| *c as i128 * model.int(x) as i128)
            .sum();
        self.rel.holds(v, self.bound as i128)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lhs = LinExpr {
            terms: self.lhs.clone(),
            constant: 0,
        };
        write!(f, "{lhs} {} {}", self.rel.symbol(), self.bound)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Const(bool),
    Bool(String),
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

impl Formula {
    pub fn tt() -> Formula {
        Formula::Const(true)
    }

    pub fn ff() -> Formula {
        Formula::Const(false)
    }

    pub fn var(name: impl Into<String>) -> Formula {
        Formula::Bool(name.into())
    }

    /// Canonical atom for `l ⋈ r`; constant comparisons fold to literals.
    /// Returns `None` if a coefficient overflows.
    pub fn compare(l: &LinExpr, rel: Rel, r: &LinExpr) -> Option<Formula> {
        let d = l.checked_sub(r)?;
        let mut terms = d.terms;
        let mut bound = d.constant.checked_neg()?;
        let mut rel = rel;
        if terms.is_empty() {
            return Some(Formula::Const(rel.holds(0, bound as i128)));
        }
        let negate = |terms: &mut BTreeMap<String, i64>, bound: &mut i64| -> Option<()> {
            for c in terms.values_mut() {
                *c = c.checked_neg()?;
            }
            *bound = bound.checked_neg()?;
            Some(())
        };
        match rel {
            Rel::Lt => {
                bound = bound.checked_sub(1)?;
                rel = Rel::Le;
            }
            Rel::Gt => {
                negate(&mut terms, &mut bound)?;
                bound = bound.checked_sub(1)?;
                rel = Rel::Le;
            }
            Rel::Ge => {
                negate(&mut terms, &mut bound)?;
                rel = Rel::Le;
            }
            Rel::Eq | Rel::Ne => {
                if *terms.values().next().unwrap() < 0 {
                    negate(&mut terms, &mut bound)?;
                }
            }
            Rel::Le => {}
        }
        let g = terms.values().fold(0, |g, c| gcd(g, *c));
        if g > 1 {
            for c in terms.values_mut() {
                *c /= g;
            }
            match rel {
                Rel::Le => bound = bound.div_euclid(g),
                _ if bound % g != 0 => return Some(Formula::Const(rel == Rel::Ne)),
                _ => bound /= g,
            }
        }
        Some(Formula::Atom(Atom {
            lhs: terms,
            rel,
            bound,
        }))
    }

    pub fn negate(self) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(!b),
            Formula::Not(f) => *f,
            f => Formula::Not(Box::new(f)),
        }
    }

    /// Conjunction with literal simplification.
    pub fn and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::Const(true) => {}
                Formula::Const(false) => return Formula::ff(),
                Formula::And(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Formula::tt(),
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    /// Disjunction with literal simplification.
    pub fn or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::Const(false) => {}
                Formula::Const(true) => return Formula::tt(),
                Formula::Or(inner) => out.extend(inner),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Formula::ff(),
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or([a.negate(), b])
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::or([
            Formula::and([a.clone(), b.clone()]),
            Formula::and([a.negate(), b.negate()]),
        ])
    }

    pub fn eval(&self, model: &Model) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Bool(v) => model.boolean(v),
            Formula::Atom(a) => a.eval(model),
            Formula::Not(f) => !f.eval(model),
            Formula::And(fs) => fs.iter().all(|f| f.eval(model)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(model)),
        }
    }

    /// Free variables with their sorts.
    pub fn vars(&self) -> BTreeMap<String, Type> {
        let mut out = BTreeMap::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeMap<String, Type>) {
        match self {
            Formula::Const(_) => {}
            Formula::Bool(v) => {
                out.insert(v.clone(), Type::Bool);
            }
            Formula::Atom(a) => {
                for v in a.lhs.keys() {
                    out.insert(v.clone(), Type::Int);
                }
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
        }
    }

    /// Atoms and boolean variables occurring in the formula.
    pub fn atoms(&self) -> Vec<Formula> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Formula>) {
        match self {
            Formula::Const(_) => {}
            Formula::Bool(_) | Formula::Atom(_) => {
                if !out.contains(self) {
                    out.push(self.clone());
                }
            }
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
        }
    }

    /// Renames every variable; used to prime predicates.
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Formula {
        match self {
            Formula::Const(b) => Formula::Const(*b),
            Formula::Bool(v) => Formula::Bool(f(v)),
            Formula::Atom(a) => Formula::Atom(Atom {
                lhs: a.lhs.iter().map(|(v, c)| (f(v), *c)).collect(),
                rel: a.rel,
                bound: a.bound,
            }),
            Formula::Not(g) => Formula::Not(Box::new(g.rename(f))),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.rename(f)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.rename(f)).collect()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            _ => 1,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "{b}"),
            Formula::Bool(v) => f.write_str(v),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => write!(f, "!({g})"),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " && " } else { " || " };
                f.write_str("(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{g}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

/// Variable assignment; missing variables read as `0` / `false`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model(pub BTreeMap<String, Value>);

impl Model {
    pub fn int(&self, v: &str) -> i64 {
        match self.0.get(v) {
            Some(Value::Int(n)) => *n,
            Some(Value::Bool(b)) => *b as i64,
            None => 0,
        }
    }

    pub fn boolean(&self, v: &str) -> bool {
        match self.0.get(v) {
            Some(Value::Bool(b)) => *b,
            Some(Value::Int(n)) => *n != 0,
            None => false,
        }
    }

    pub fn get(&self, v: &str) -> Option<Value> {
        self.0.get(v).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverVerdict {
    pub status: Status,
    pub model: Option<Model>,
    /// Indices into the conjunct list passed to [`solve_conjuncts`].
    pub core: Option<Vec<usize>>,
}

impl SolverVerdict {
    pub fn unknown() -> SolverVerdict {
        SolverVerdict {
            status: Status::Unknown,
            model: None,
            core: None,
        }
    }

    pub fn unsat() -> SolverVerdict {
        SolverVerdict {
            status: Status::Unsat,
            model: None,
            core: None,
        }
    }

    pub fn sat(model: Model) -> SolverVerdict {
        SolverVerdict {
            status: Status::Sat,
            model: Some(model),
            core: None,
        }
    }
}

/// Search window for integer values once elimination is inexact.
pub const SEARCH_WINDOW: i128 = 1 << 20;

pub fn solve(f: &Formula) -> SolverVerdict {
    let verdict = dpll::solve(f);
    if let Some(m) = &verdict.model {
        if !f.eval(m) {
            return SolverVerdict::unknown();
        }
    }
    verdict
}

/// Solves the conjunction of `parts`; on unsat with `want_core`, shrinks the
/// conjunct set by deletion until every remaining part is needed.
pub fn solve_conjuncts(solver: &Solver, parts: &[Formula], want_core: bool) -> SolverVerdict {
    let mut verdict = solver.solve(&Formula::and(parts.iter().cloned()));
    if verdict.status == Status::Unsat && want_core {
        let mut core: Vec<usize> = (0..parts.len()).collect();
        let mut i = 0;
        while i < core.len() {
            let trial: Vec<usize> = core.iter().copied().filter(|&j| j != core[i]).collect();
            let f = Formula::and(trial.iter().map(|&j| parts[j].clone()));
            if solver.solve(&f).status == Status::Unsat {
                core = trial;
            } else {
                i += 1;
            }
        }
        verdict.core = Some(core);
    }
    verdict
}

/// Which decision procedure answers queries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum Solver {
    #[default]
    Internal,
    /// External SMT-LIB process; falls back to the internal procedure when
    /// the process fails.
    External { command: Vec<String>, timeout: Duration },
}

impl Solver {
    pub fn external(command: &str, timeout: Duration) -> Solver {
        Solver::External {
            command: command.split_whitespace().map(str::to_string).collect(),
            timeout,
        }
    }

    pub fn solve(&self, f: &Formula) -> SolverVerdict {
        match self {
            Solver::Internal => solve(f),
            Solver::External { command, timeout } => {
                solve_external(f, command, *timeout).unwrap_or_else(|_| solve(f))
            }
        }
    }
}
