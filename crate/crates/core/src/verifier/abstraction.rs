//! Cartesian predicate abstraction and abstract reachability.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use super::{Precision, Search, Truth, VerifierError};
use crate::cfa::{Cfa, Loc, Op};
use crate::ir::Type;
use crate::solver::{Encoder, Formula, LinExpr, Rel, Solver, Status};

pub type AbstractState = Vec<Truth>;

fn primed(v: &str) -> String {
    format!("{v}'")
}

/// Indices of known predicates connected to `seed` through shared
/// variables, and the variables they reach. Known predicates outside this
/// component cannot be affected by an operation on `seed`.
fn component(state: &[Truth], precision: &Precision, seed: BTreeSet<String>) -> (Vec<usize>, BTreeSet<String>) {
    let mut vars = seed;
    let mut taken = vec![false; state.len()];
    loop {
        let mut grew = false;
        for (i, t) in state.iter().enumerate() {
            if taken[i] || *t == Truth::Unknown {
                continue;
            }
            let pv = precision.vars_of(i);
            if pv.iter().any(|v| vars.contains(v)) {
                taken[i] = true;
                vars.extend(pv.iter().cloned());
                grew = true;
            }
        }
        if !grew {
            let known = (0..state.len()).filter(|&i| taken[i]).collect();
            return (known, vars);
        }
    }
}

fn known_formula(state: &[Truth], precision: &Precision, known: &[usize]) -> Formula {
    let ps = precision.predicates();
    Formula::and(known.iter().map(|&i| match state[i] {
        Truth::True => ps[i].clone(),
        _ => ps[i].clone().negate(),
    }))
}

/// Remembers which queries were unsatisfiable. The same queries come back
/// at many ARG nodes and across refinement iterations.
#[derive(Debug, Default)]
pub struct QueryCache {
    unsat: HashMap<Formula, bool>,
}

impl QueryCache {
    fn unsat(&mut self, solver: &Solver, f: Formula) -> bool {
        if f == Formula::ff() {
            return true;
        }
        if let Some(&u) = self.unsat.get(&f) {
            return u;
        }
        let u = solver.solve(&f).status == Status::Unsat;
        self.unsat.insert(f, u);
        u
    }
}

/// Solver answers are over-approximated: an inconclusive query leaves the
/// predicate unknown and an inconclusive emptiness check keeps the state.
fn truth_of(solver: &Solver, cache: &mut QueryCache, context: &Formula, p: &Formula) -> Truth {
    if cache.unsat(solver, Formula::and([context.clone(), p.clone().negate()])) {
        return Truth::True;
    }
    if cache.unsat(solver, Formula::and([context.clone(), p.clone()])) {
        return Truth::False;
    }
    Truth::Unknown
}

fn union(a: &BTreeSet<String>, b: &BTreeSet<String>) -> BTreeSet<String> {
    a.union(b).cloned().collect()
}

/// Successor of `state` under `op`; `None` when it is empty. Each query only
/// carries the known predicates connected to the predicate and the operation
/// through shared variables; the others cannot change its answer.
pub fn abstract_post(
    state: &[Truth],
    op: &Op,
    precision: &Precision,
    types: &BTreeMap<String, Type>,
    solver: &Solver,
) -> Option<AbstractState> {
    abstract_post_cached(state, op, precision, types, solver, &mut QueryCache::default())
}

pub fn abstract_post_cached(
    state: &[Truth],
    op: &Op,
    precision: &Precision,
    types: &BTreeMap<String, Type>,
    solver: &Solver,
    cache: &mut QueryCache,
) -> Option<AbstractState> {
    let id = |v: &str| v.to_string();
    let context = |seed: BTreeSet<String>, step: &[Formula]| {
        let (known, _) = component(state, precision, seed);
        let mut parts = step.to_vec();
        parts.push(known_formula(state, precision, &known));
        Formula::and(parts)
    };
    match op {
        Op::Assume(c) => {
            let mut enc = Encoder::new(types, "%");
            let mut step = vec![enc.boolean(c, &id)];
            step.extend(enc.side);
            let cvars = c.vars();
            let whole = context(cvars.clone(), &step);
            if cache.unsat(solver, whole) {
                return None;
            }
            Some(
                state
                    .iter()
                    .enumerate()
                    .map(|(i, t)| match t {
                        Truth::Unknown => {
                            let ctx = context(union(&cvars, precision.vars_of(i)), &step);
                            truth_of(solver, cache, &ctx, &precision.predicates()[i])
                        }
                        known => *known,
                    })
                    .collect(),
            )
        }
        Op::Havoc { var } => Some(
            state
                .iter()
                .enumerate()
                .map(|(i, t)| if precision.vars_of(i).contains(var) { Truth::Unknown } else { *t })
                .collect(),
        ),
        Op::Assign { var, expr } => {
            let mut enc = Encoder::new(types, "%");
            let def = if enc.type_of(var) == Type::Bool {
                Formula::iff(Formula::var(primed(var)), enc.boolean(expr, &id))
            } else {
                let rhs = enc.term(expr, &id);
                Formula::compare(&LinExpr::var(primed(var)), Rel::Eq, &rhs).unwrap_or(Formula::tt())
            };
            let mut step = vec![def];
            step.extend(enc.side);
            let mut seed = expr.vars();
            seed.insert(var.clone());
            let rename = |v: &str| if v == var { primed(v) } else { v.to_string() };
            Some(
                state
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        if precision.vars_of(i).contains(var) {
                            let ctx = context(union(&seed, precision.vars_of(i)), &step);
                            truth_of(solver, cache, &ctx, &precision.predicates()[i].rename(&rename))
                        } else {
                            *t
                        }
                    })
                    .collect(),
            )
        }
    }
}

/// `a` covers `b` when every predicate `a` knows has the same value in `b`.
pub fn subsumes(a: &[Truth], b: &[Truth]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x == Truth::Unknown || x == y)
}

#[derive(Clone, Debug)]
pub struct ArgNode {
    pub location: Loc,
    pub state: AbstractState,
    /// Parent node and the index of the CFA edge taken from it.
    pub parent: Option<(usize, usize)>,
    pub covered_by: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum Explored {
    Fixpoint { arg: Vec<ArgNode> },
    /// Edge indices from the initial location to the error location.
    Counterexample { path: Vec<usize>, arg: Vec<ArgNode> },
}

impl Explored {
    pub fn arg(&self) -> &[ArgNode] {
        match self {
            Explored::Fixpoint { arg } | Explored::Counterexample { arg, .. } => arg,
        }
    }
}

pub fn explore(
    cfa: &Cfa,
    precision: &Precision,
    search: Search,
    solver: &Solver,
    max_nodes: usize,
    deadline: Option<Instant>,
) -> Result<Explored, VerifierError> {
    explore_cached(cfa, precision, search, solver, max_nodes, deadline, &mut QueryCache::default())
}

pub fn explore_cached(
    cfa: &Cfa,
    precision: &Precision,
    search: Search,
    solver: &Solver,
    max_nodes: usize,
    deadline: Option<Instant>,
    cache: &mut QueryCache,
) -> Result<Explored, VerifierError> {
    let mut arg = vec![ArgNode {
        location: cfa.initial,
        state: vec![Truth::Unknown; precision.len()],
        parent: None,
        covered_by: None,
    }];
    let mut reached: BTreeMap<Loc, Vec<usize>> = BTreeMap::from([(cfa.initial, vec![0])]);
    let mut work = VecDeque::from([0usize]);
    while let Some(n) = match search {
        Search::Bfs => work.pop_front(),
        Search::Dfs => work.pop_back(),
    } {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(VerifierError::Timeout);
        }
        let loc = arg[n].location;
        // reversed so that depth-first search follows the first edge first
        let out: Vec<usize> = match search {
            Search::Bfs => cfa.outgoing(loc).to_vec(),
            Search::Dfs => cfa.outgoing(loc).iter().rev().copied().collect(),
        };
        for e in out {
            let edge = &cfa.edges[e];
            let Some(state) = abstract_post_cached(&arg[n].state, &edge.op, precision, &cfa.vars, solver, cache)
            else {
                continue;
            };
            if arg.len() >= max_nodes {
                return Err(VerifierError::ResourceLimit(max_nodes));
            }
            let id = arg.len();
            let covered_by = reached
                .get(&edge.dst)
                .and_then(|ns| ns.iter().copied().find(|&m| subsumes(&arg[m].state, &state)));
            arg.push(ArgNode {
                location: edge.dst,
                state,
                parent: Some((n, e)),
                covered_by,
            });
            if edge.dst == cfa.error {
                let mut path = Vec::new();
                let mut cur = id;
                while let Some((p, e)) = arg[cur].parent {
                    path.push(e);
                    cur = p;
                }
                path.reverse();
                return Ok(Explored::Counterexample { path, arg });
            }
            if covered_by.is_none() {
                reached.entry(edge.dst).or_default().push(id);
                work.push_back(id);
            }
        }
    }
    Ok(Explored::Fixpoint { arg })
}
