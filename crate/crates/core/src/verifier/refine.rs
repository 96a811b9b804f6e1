//! Counterexample feasibility over single-assignment path constraints and
//! predicate discovery by weakest preconditions.

use std::collections::BTreeMap;

use super::{Counterexample, Precision, VerifierError, Witness};
use crate::cfa::{Cfa, Op};
use crate::ir::{Expr, Type};
use crate::solver::{Encoder, Formula, LinExpr, Model, Rel, Solver, Status};

const MAX_WP_SIZE: usize = 400;

fn versioned(v: &str, k: u32) -> String {
    format!("{v}'{k}")
}

enum Choice {
    /// A havoc of the variable, and the version it created.
    Havoc(String, String),
    Phi(bool),
}

/// One conjunct per path edge, plus the nondeterministic choices in order.
struct PathFormula {
    steps: Vec<Formula>,
    choices: Vec<Choice>,
}

fn path_formula(cfa: &Cfa, path: &[usize]) -> PathFormula {
    let mut version: BTreeMap<String, u32> = BTreeMap::new();
    let mut steps = Vec::new();
    let mut choices = Vec::new();
    for (i, &e) in path.iter().enumerate() {
        if let Some(&(_, taken)) = cfa.phi_edges.get(&e) {
            choices.push(Choice::Phi(taken));
        }
        let mut enc = Encoder::new(&cfa.vars, &format!("%{i}"));
        let cur = version.clone();
        let name = move |v: &str| versioned(v, cur.get(v).copied().unwrap_or(0));
        let f = match &cfa.edges[e].op {
            Op::Assume(c) => enc.boolean(c, &name),
            Op::Havoc { var } => {
                let k = version.entry(var.clone()).or_insert(0);
                *k += 1;
                choices.push(Choice::Havoc(var.clone(), versioned(var, *k)));
                Formula::tt()
            }
            Op::Assign { var, expr } => {
                let next = version.get(var).copied().unwrap_or(0) + 1;
                let target = versioned(var, next);
                let f = if enc.type_of(var) == Type::Bool {
                    Formula::iff(Formula::var(target), enc.boolean(expr, &name))
                } else {
                    let rhs = enc.term(expr, &name);
                    Formula::compare(&LinExpr::var(target), Rel::Eq, &rhs).unwrap_or(Formula::tt())
                };
                version.insert(var.clone(), next);
                f
            }
        };
        let mut parts = enc.side;
        parts.push(f);
        steps.push(Formula::and(parts));
    }
    PathFormula { steps, choices }
}

fn as_i32(v: i64) -> Option<i32> {
    i32::try_from(v).ok()
}

fn witness_of(cfa: &Cfa, pf: &PathFormula, model: &Model) -> Option<Witness> {
    let mut initial = BTreeMap::new();
    for (v, t) in &cfa.vars {
        let name = versioned(v, 0);
        let value = match t {
            Type::Bool => model.boolean(&name) as i64,
            Type::Int => model.int(&name),
        };
        initial.insert(v.clone(), as_i32(value)?);
    }
    let havocs = pf
        .choices
        .iter()
        .map(|c| match c {
            Choice::Phi(taken) => Some(*taken as i32),
            Choice::Havoc(v, name) => match cfa.vars.get(v) {
                Some(Type::Bool) => Some(model.boolean(name) as i32),
                _ => as_i32(model.int(name)),
            },
        })
        .collect::<Option<Vec<i32>>>()?;
    Some(Witness { initial, havocs })
}

/// Decides whether the path is executable. An infeasible path gets the
/// length of its shortest unsatisfiable prefix.
pub fn check_feasibility(
    cfa: &Cfa,
    path: &[usize],
    solver: &Solver,
) -> Result<Counterexample, VerifierError> {
    let pf = path_formula(cfa, path);
    let whole = solver.solve(&Formula::and(pf.steps.iter().cloned()));
    match whole.status {
        Status::Unknown => Err(VerifierError::SolverUnknown),
        Status::Sat => {
            let model = whole.model.unwrap_or_default();
            Ok(Counterexample {
                path: path.to_vec(),
                feasible: true,
                failure_index: None,
                witness: witness_of(cfa, &pf, &model),
            })
        }
        Status::Unsat => {
            // smallest m with steps[..m] unsat
            let (mut lo, mut hi) = (0usize, pf.steps.len());
            while lo < hi {
                let mid = (lo + hi) / 2;
                let prefix = Formula::and(pf.steps[..mid].iter().cloned());
                match solver.solve(&prefix).status {
                    Status::Unsat => hi = mid,
                    Status::Sat => lo = mid + 1,
                    Status::Unknown => return Err(VerifierError::SolverUnknown),
                }
            }
            Ok(Counterexample {
                path: path.to_vec(),
                feasible: false,
                failure_index: Some(lo),
                witness: None,
            })
        }
    }
}

/// Picks one of `p` and its negation so that `x > 0` and `x <= 0` map to the
/// same predicate.
pub fn normalize_predicate(p: Formula) -> Option<Formula> {
    match p {
        Formula::Const(_) => None,
        Formula::Bool(_) => Some(p),
        Formula::Atom(ref a) => {
            if a.lhs.keys().any(|v| v.contains('#')) {
                return None;
            }
            let negated = p.clone().negate();
            let flip = match a.rel {
                Rel::Ne => true,
                Rel::Le => *a.lhs.values().next().unwrap() < 0,
                _ => false,
            };
            if !flip {
                return Some(p);
            }
            // rebuild the negation in canonical form
            let lhs = LinExpr {
                terms: a.lhs.clone(),
                constant: 0,
            };
            let rel = if a.rel == Rel::Ne { Rel::Eq } else { Rel::Gt };
            Formula::compare(&lhs, rel, &LinExpr::constant(a.bound)).or(Some(negated))
        }
        _ => None,
    }
}

/// Weakest preconditions of the guard that makes the prefix infeasible,
/// taken backwards along the prefix. Returns only predicates not yet in
/// `precision`.
pub fn derive_predicates(
    cfa: &Cfa,
    cex: &Counterexample,
    precision: &Precision,
) -> Result<Vec<Formula>, VerifierError> {
    let end = cex.failure_index.ok_or(VerifierError::RefinementStuck)?;
    let prefix = &cex.path[..end.min(cex.path.len())];
    let mut found: Vec<Formula> = Vec::new();
    let add = |e: &Expr, found: &mut Vec<Formula>| {
        let mut enc = Encoder::new(&cfa.vars, "#");
        let f = enc.boolean(e, &|v: &str| v.to_string());
        for atom in f.atoms() {
            if let Some(p) = normalize_predicate(atom) {
                if !precision.contains(&p) && !found.contains(&p) {
                    found.push(p);
                }
            }
        }
    };
    let Some((&last, rest)) = prefix.split_last() else {
        return Err(VerifierError::RefinementStuck);
    };
    let mut wp = match &cfa.edges[last].op {
        Op::Assume(c) => c.clone(),
        _ => return Err(VerifierError::RefinementStuck),
    };
    add(&wp, &mut found);
    for &e in rest.iter().rev() {
        match &cfa.edges[e].op {
            Op::Assume(c) => add(c, &mut found),
            Op::Assign { var, expr } => {
                wp = wp.substitute(var, expr);
                if wp.size() > MAX_WP_SIZE {
                    break;
                }
                add(&wp, &mut found);
            }
            Op::Havoc { var } => {
                if wp.mentions(var) {
                    break;
                }
            }
        }
    }
    if found.is_empty() {
        Err(VerifierError::RefinementStuck)
    } else {
        Ok(found)
    }
}
