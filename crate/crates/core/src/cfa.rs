//! Control flow automata: locations are program counters, edges carry
//! operations. Failing assertions lead to a single error location.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cfg::{Cfg, InstrKind, NodeId, Succ};
use crate::ir::{Expr, Type};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Loc(pub u32);

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Assign { var: String, expr: Expr },
    Assume(Expr),
    Havoc { var: String },
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Assign { var, expr } => write!(f, "{var} := {expr}"),
            Op::Assume(c) => write!(f, "assume({c})"),
            Op::Havoc { var } => write!(f, "havoc({var})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfaEdge {
    pub src: Loc,
    pub op: Op,
    pub dst: Loc,
    /// CFG node the edge was lowered from.
    pub origin: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfa {
    pub locations: Vec<Loc>,
    pub edges: Vec<CfaEdge>,
    pub initial: Loc,
    pub error: Loc,
    pub exit: Loc,
    pub vars: BTreeMap<String, Type>,
    /// Edges of abstract predicates: the predicate and the branch taken.
    pub phi_edges: BTreeMap<usize, (NodeId, bool)>,
    out: BTreeMap<Loc, Vec<usize>>,
}

impl Cfa {
    /// Builds an automaton from explicit edges; locations are those named by
    /// the edges plus the three distinguished ones.
    pub fn from_edges(
        edges: Vec<CfaEdge>,
        initial: Loc,
        error: Loc,
        exit: Loc,
        vars: BTreeMap<String, Type>,
    ) -> Cfa {
        let mut locs: BTreeSet<Loc> = BTreeSet::from([initial, error, exit]);
        let mut out: BTreeMap<Loc, Vec<usize>> = BTreeMap::new();
        for (i, e) in edges.iter().enumerate() {
            locs.insert(e.src);
            locs.insert(e.dst);
            out.entry(e.src).or_default().push(i);
        }
        Cfa {
            locations: locs.into_iter().collect(),
            edges,
            initial,
            error,
            exit,
            vars,
            phi_edges: BTreeMap::new(),
            out,
        }
    }

    pub fn location_count(&self) -> usize {
        self.locations.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Indices of the edges leaving `loc`.
    pub fn outgoing(&self, loc: Loc) -> &[usize] {
        self.out.get(&loc).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn is_phi_edge(&self, edge: usize) -> bool {
        self.phi_edges.contains_key(&edge)
    }

    fn edge_label(&self, i: usize) -> String {
        match self.phi_edges.get(&i) {
            Some((id, taken)) => format!("phi@{}: {taken}", id.0),
            None => self.edges[i].op.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let locs: BTreeSet<Loc> = self.locations.iter().copied().collect();
        for e in &self.edges {
            if !locs.contains(&e.src) || !locs.contains(&e.dst) {
                return Err(format!("edge {} -> {} has unknown endpoint", e.src, e.dst));
            }
            if e.src == self.error {
                return Err("error location has outgoing edges".into());
            }
            if e.dst == self.initial {
                return Err("initial location has incoming edges".into());
            }
        }
        if self.edges.iter().any(|e| e.src == self.exit) {
            return Err("exit location has outgoing edges".into());
        }
        Ok(())
    }

    /// One edge per line, ordered by source location.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "initial {}\nerror {}\nexit {}\n",
            self.initial, self.error, self.exit
        );
        let mut edges: Vec<(usize, &CfaEdge)> = self.edges.iter().enumerate().collect();
        edges.sort_by_key(|(i, e)| (e.src, e.dst, self.edge_label(*i)));
        for (i, e) in edges {
            out.push_str(&format!("{} --[{}]--> {}\n", e.src, self.edge_label(i), e.dst));
        }
        out
    }
}

/// Lowers a normalized CFG. Skip nodes and chains of them are compressed
/// away; each remaining node becomes the location before its instruction.
pub fn cfg_to_cfa(cfg: &Cfg) -> Cfa {
    // skip chains resolve to the first real node; skips on a skip-only cycle
    // stay as real nodes
    let resolve = |start: NodeId| {
        let mut n = start;
        let mut seen = BTreeSet::new();
        while cfg.instr(n).kind == InstrKind::Skip && seen.insert(n) {
            match cfg.succ(n) {
                Succ::Jump(m) => n = m,
                _ => break,
            }
        }
        n
    };
    let mut real: BTreeSet<NodeId> = BTreeSet::new();
    for id in cfg.node_ids() {
        if cfg.instr(id).kind != InstrKind::Skip || resolve(id) == id {
            real.insert(id);
        }
    }
    real.remove(&cfg.entry());

    let first = resolve(cfg.successors(cfg.entry())[0]);
    let incoming: usize = real
        .iter()
        .flat_map(|&n| cfg.successors(n))
        .filter(|&m| resolve(m) == first)
        .count();
    let merge_initial = incoming == 0 && first != cfg.exit();

    let mut loc_of: BTreeMap<NodeId, Loc> = BTreeMap::new();
    let mut locations = Vec::new();
    let mut next = 0u32;
    let mut fresh = |locations: &mut Vec<Loc>| {
        let l = Loc(next);
        next += 1;
        locations.push(l);
        l
    };
    let initial = fresh(&mut locations);
    if merge_initial {
        loc_of.insert(first, initial);
    }
    for &n in &real {
        loc_of.entry(n).or_insert_with(|| fresh(&mut locations));
    }
    let mut edges = Vec::new();
    let vars = cfg.vars().clone();
    let mut phi_edges = BTreeMap::new();
    if !merge_initial {
        edges.push(CfaEdge {
            src: initial,
            op: Op::Assume(Expr::Bool(true)),
            dst: loc_of[&first],
            origin: Some(cfg.entry()),
        });
    }
    let mut mid_locs = Vec::new();
    for &n in &real {
        let src = loc_of[&n];
        let to = |m: NodeId| loc_of[&resolve(m)];
        let edge = |op, dst| CfaEdge {
            src,
            op,
            dst,
            origin: Some(n),
        };
        match (&cfg.instr(n).kind, cfg.succ(n)) {
            (InstrKind::Exit, _) => {}
            (InstrKind::Assign { var, expr }, Succ::Jump(m)) => edges.push(edge(
                Op::Assign {
                    var: var.clone(),
                    expr: expr.clone(),
                },
                to(m),
            )),
            (InstrKind::Havoc { var, .. }, Succ::Jump(m)) => {
                edges.push(edge(Op::Havoc { var: var.clone() }, to(m)))
            }
            (InstrKind::Skip, Succ::Jump(m)) => {
                edges.push(edge(Op::Assume(Expr::Bool(true)), to(m)))
            }
            (InstrKind::Branch(c), Succ::Branch { on_true, on_false }) => {
                edges.push(edge(Op::Assume(c.clone()), to(on_true)));
                edges.push(edge(Op::Assume(Expr::not(c.clone())), to(on_false)));
            }
            (InstrKind::Assert(c), Succ::Jump(m)) => {
                edges.push(edge(Op::Assume(c.clone()), to(m)));
                mid_locs.push((src, c.clone(), n));
            }
            (InstrKind::AbstractPredicate(id), Succ::Branch { on_true, on_false }) => {
                // a free choice between the two branches
                for (taken, dst) in [(true, on_true), (false, on_false)] {
                    phi_edges.insert(edges.len(), (*id, taken));
                    edges.push(edge(Op::Assume(Expr::Bool(true)), to(dst)));
                }
            }
            (kind, succ) => unreachable!("malformed node {kind} with {succ:?}"),
        }
    }
    let error = fresh(&mut locations);
    for (src, c, n) in mid_locs {
        edges.push(CfaEdge {
            src,
            op: Op::Assume(Expr::not(c)),
            dst: error,
            origin: Some(n),
        });
    }
    let mut out: BTreeMap<Loc, Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        out.entry(e.src).or_default().push(i);
    }
    Cfa {
        locations,
        edges,
        initial,
        error,
        exit: loc_of[&cfg.exit()],
        vars,
        phi_edges,
        out,
    }
}
