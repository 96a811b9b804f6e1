//! CEGAR over a CFA with Cartesian predicate abstraction.

mod abstraction;
mod refine;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::cfa::{Cfa, Loc, Op};
use crate::ir::EvalError;
use crate::solver::{Formula, Solver};

pub use abstraction::{
    abstract_post, abstract_post_cached, explore, explore_cached, subsumes, AbstractState, ArgNode, Explored, QueryCache,
};
pub use refine::{check_feasibility, derive_predicates, normalize_predicate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Search {
    Bfs,
    Dfs,
}

impl fmt::Display for Search {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Search::Bfs => "bfs",
            Search::Dfs => "dfs",
        })
    }
}

impl FromStr for Search {
    type Err = String;

    fn from_str(s: &str) -> Result<Search, String> {
        match s.to_ascii_lowercase().as_str() {
            "bfs" => Ok(Search::Bfs),
            "dfs" => Ok(Search::Dfs),
            _ => Err(format!("unknown search strategy `{s}` (expected bfs or dfs)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Unknown,
}

/// Tracked predicates in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Precision {
    predicates: Vec<Formula>,
    vars: Vec<BTreeSet<String>>,
}

impl Precision {
    pub fn new(predicates: impl IntoIterator<Item = Formula>) -> Precision {
        let mut p = Precision::default();
        for f in predicates {
            p.add(f);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn predicates(&self) -> &[Formula] {
        &self.predicates
    }

    /// Variables of the i-th predicate.
    pub fn vars_of(&self, i: usize) -> &BTreeSet<String> {
        &self.vars[i]
    }

    /// The predicates whose variables all occur in `cfa`.
    pub fn restricted_to(&self, cfa: &Cfa) -> Precision {
        let known = |v: &String| cfa.vars.contains_key(v);
        Precision::new(
            self.predicates
                .iter()
                .zip(&self.vars)
                .filter(|(_, vs)| vs.iter().all(known))
                .map(|(p, _)| p.clone()),
        )
    }

    pub fn contains(&self, p: &Formula) -> bool {
        self.predicates.contains(p)
    }

    /// False if `p` was already tracked.
    pub fn add(&mut self, p: Formula) -> bool {
        if self.contains(&p) {
            return false;
        }
        self.vars.push(p.vars().into_keys().collect());
        self.predicates.push(p);
        true
    }
}

/// Initial values and the havoc results in path order, with 1 or 0 for each
/// abstract predicate passed; enough to replay the path concretely.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub initial: BTreeMap<String, i32>,
    pub havocs: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// CFA edge indices from the initial to the error location.
    pub path: Vec<usize>,
    pub feasible: bool,
    pub failure_index: Option<usize>,
    pub witness: Option<Witness>,
}

impl Counterexample {
    pub fn steps<'a>(&self, cfa: &'a Cfa) -> Vec<(Loc, &'a Op)> {
        self.path
            .iter()
            .map(|&e| (cfa.edges[e].src, &cfa.edges[e].op))
            .collect()
    }

    pub fn uses_abstract_predicate(&self, cfa: &Cfa) -> bool {
        self.path.iter().any(|&e| cfa.is_phi_edge(e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerifierError {
    #[error("abstract reachability graph exceeded {0} nodes")]
    ResourceLimit(usize),
    #[error("time limit reached")]
    Timeout,
    #[error("solver returned unknown")]
    SolverUnknown,
    #[error("refinement found no new predicate")]
    RefinementStuck,
    #[error("no verdict after {0} refinement iterations")]
    IterationLimit(usize),
    #[error("counterexample does not replay concretely")]
    WitnessMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Safety {
    Safe,
    Unsafe,
    Unknown,
}

impl fmt::Display for Safety {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Safety::Safe => "true",
            Safety::Unsafe => "false",
            Safety::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct VerifierStats {
    /// Nodes of the last abstract reachability graph.
    pub arg_size: usize,
    /// Nodes over all refinement iterations.
    pub arg_total: usize,
    pub iterations: usize,
    pub predicates: usize,
    pub time_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub safe: Safety,
    pub stats: VerifierStats,
    pub witness: Option<Counterexample>,
    /// Why the verdict is unknown.
    pub reason: Option<VerifierError>,
    /// Predicates tracked when the loop stopped.
    pub precision: Precision,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_arg_nodes: usize,
    pub max_iterations: usize,
    pub timeout: Option<Duration>,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_arg_nodes: 1_000_000,
            max_iterations: 200,
            timeout: Some(Duration::from_secs(180)),
        }
    }
}

/// Runs the path on concrete 32-bit values; true if every guard holds.
pub fn replay_path(cfa: &Cfa, path: &[usize], witness: &Witness) -> bool {
    let mut store: BTreeMap<String, i32> = witness.initial.clone();
    let mut havocs = witness.havocs.iter();
    for &e in path {
        if let Some(&(_, taken)) = cfa.phi_edges.get(&e) {
            match havocs.next() {
                Some(v) if (*v != 0) == taken => continue,
                _ => return false,
            }
        }
        let lookup = |v: &str| store.get(v).copied().unwrap_or(0);
        match &cfa.edges[e].op {
            Op::Assume(c) => match c.eval(&lookup) {
                Ok(v) if v != 0 => {}
                _ => return false,
            },
            Op::Assign { var, expr } => {
                let v: Result<i32, EvalError> = expr.eval(&lookup);
                match v {
                    Ok(v) => {
                        store.insert(var.clone(), v);
                    }
                    Err(_) => return false,
                }
            }
            Op::Havoc { var } => {
                let Some(v) = havocs.next() else {
                    return false;
                };
                store.insert(var.clone(), *v);
            }
        }
    }
    path.last().is_some_and(|&e| cfa.edges[e].dst == cfa.error)
}

pub fn check_cfa(cfa: &Cfa, search: Search, limits: &Limits, solver: &Solver) -> Verdict {
    check_cfa_with(cfa, search, limits, solver, Precision::default())
}

/// CEGAR starting from `precision`.
pub fn check_cfa_with(
    cfa: &Cfa,
    search: Search,
    limits: &Limits,
    solver: &Solver,
    mut precision: Precision,
) -> Verdict {
    let start = Instant::now();
    let deadline = limits.timeout.map(|t| start + t);
    let mut stats = VerifierStats::default();
    let mut cache = QueryCache::default();
    let finish = |mut stats: VerifierStats, safe, witness, reason, precision: &Precision| {
        stats.time_ms = start.elapsed().as_millis();
        stats.predicates = precision.len();
        Verdict {
            safe,
            stats,
            witness,
            reason,
            precision: precision.clone(),
        }
    };
    loop {
        if stats.iterations >= limits.max_iterations {
            let reason = VerifierError::IterationLimit(limits.max_iterations);
            return finish(stats, Safety::Unknown, None, Some(reason), &precision);
        }
        stats.iterations += 1;
        let explored = match explore_cached(cfa, &precision, search, solver, limits.max_arg_nodes, deadline, &mut cache) {
            Ok(x) => x,
            Err(e) => return finish(stats, Safety::Unknown, None, Some(e), &precision),
        };
        stats.arg_size = explored.arg().len();
        stats.arg_total += stats.arg_size;
        let path = match explored {
            Explored::Fixpoint { .. } => {
                return finish(stats, Safety::Safe, None, None, &precision);
            }
            Explored::Counterexample { path, .. } => path,
        };
        let cex = match check_feasibility(cfa, &path, solver) {
            Ok(c) => c,
            Err(e) => return finish(stats, Safety::Unknown, None, Some(e), &precision),
        };
        if cex.feasible {
            let replays = cex
                .witness
                .as_ref()
                .is_some_and(|w| replay_path(cfa, &cex.path, w));
            return if replays {
                finish(stats, Safety::Unsafe, Some(cex), None, &precision)
            } else {
                let reason = Some(VerifierError::WitnessMismatch);
                finish(stats, Safety::Unknown, Some(cex), reason, &precision)
            };
        }
        match derive_predicates(cfa, &cex, &precision) {
            Ok(preds) => {
                for p in preds {
                    precision.add(p);
                }
            }
            Err(e) => return finish(stats, Safety::Unknown, None, Some(e), &precision),
        }
    }
}
