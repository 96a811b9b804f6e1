//! Instruction-level control flow graphs.
//!
//! Every node holds one atomic instruction. Branch nodes have a `true` and a
//! `false` successor, every other node has at most one successor. After
//! [`Cfg::normalize`] the graph has a single entry (in-degree 0) and a single
//! exit (out-degree 0), and every node lies on an entry-to-exit path.

mod build;
mod callgraph;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{Expr, Type};

pub use build::{build_cfg, inline_functions};
pub use callgraph::{build_call_graph, CallEdge, CallGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InstrKind {
    Entry,
    Exit,
    Assign {
        var: String,
        expr: Expr,
    },
    /// Assigns an unconstrained value. `reads` are the arguments of the
    /// external call this stands for: they count as uses for dependence
    /// analysis but do not influence the value.
    Havoc {
        var: String,
        reads: Vec<Expr>,
    },
    Branch(Expr),
    Assert(Expr),
    Skip,
    /// Nondeterministic stand-in for the condition of the branch with the
    /// given id; reads nothing.
    AbstractPredicate(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub id: NodeId,
    pub kind: InstrKind,
    /// Source line, 0 for synthesized nodes.
    pub line: u32,
}

impl Instruction {
    pub fn defines(&self) -> Option<&str> {
        match &self.kind {
            InstrKind::Assign { var, .. } | InstrKind::Havoc { var, .. } => Some(var),
            _ => None,
        }
    }

    pub fn reads(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match &self.kind {
            InstrKind::Assign { expr, .. } | InstrKind::Branch(expr) | InstrKind::Assert(expr) => {
                expr.collect_vars(&mut out)
            }
            InstrKind::Havoc { reads, .. } => reads.iter().for_each(|e| e.collect_vars(&mut out)),
            InstrKind::Entry
            | InstrKind::Exit
            | InstrKind::Skip
            | InstrKind::AbstractPredicate(_) => {}
        }
        out
    }

    pub fn is_branch(&self) -> bool {
        matches!(
            self.kind,
            InstrKind::Branch(_) | InstrKind::AbstractPredicate(_)
        )
    }
}

impl InstrKind {
    /// Rebuilds the instruction with `f` applied to every expression it holds.
    pub fn map_exprs(&self, mut f: impl FnMut(&Expr) -> Expr) -> InstrKind {
        match self {
            InstrKind::Assign { var, expr } => InstrKind::Assign {
                var: var.clone(),
                expr: f(expr),
            },
            InstrKind::Havoc { var, reads } => InstrKind::Havoc {
                var: var.clone(),
                reads: reads.iter().map(f).collect(),
            },
            InstrKind::Branch(c) => InstrKind::Branch(f(c)),
            InstrKind::Assert(c) => InstrKind::Assert(f(c)),
            other => other.clone(),
        }
    }
}

impl fmt::Display for InstrKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstrKind::Entry => f.write_str("entry"),
            InstrKind::Exit => f.write_str("exit"),
            InstrKind::Assign { var, expr } => write!(f, "{var} = {expr}"),
            InstrKind::Havoc { var, reads } => {
                write!(f, "{var} = havoc(")?;
                for (i, r) in reads.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{r}")?;
                }
                f.write_str(")")
            }
            InstrKind::Branch(c) => write!(f, "branch({c})"),
            InstrKind::Assert(c) => write!(f, "assert({c})"),
            InstrKind::Skip => f.write_str("skip"),
            InstrKind::AbstractPredicate(b) => write!(f, "phi[{b}]"),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Succ {
    None,
    Jump(NodeId),
    Branch { on_true: NodeId, on_false: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeLabel {
    Always,
    True,
    False,
}

impl Succ {
    pub fn targets(&self) -> Vec<(NodeId, EdgeLabel)> {
        match *self {
            Succ::None => Vec::new(),
            Succ::Jump(t) => vec![(t, EdgeLabel::Always)],
            Succ::Branch { on_true, on_false } => {
                vec![(on_true, EdgeLabel::True), (on_false, EdgeLabel::False)]
            }
        }
    }

    fn map(&self, f: impl Fn(NodeId) -> NodeId) -> Succ {
        match *self {
            Succ::None => Succ::None,
            Succ::Jump(t) => Succ::Jump(f(t)),
            Succ::Branch { on_true, on_false } => Succ::Branch {
                on_true: f(on_true),
                on_false: f(on_false),
            },
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    #[error("recursive call chain: {}", .0.join(" -> "))]
    Recursion(Vec<String>),
    #[error("program has no `main` function")]
    MissingMain,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("internal error: goto to unresolved label `{0}`")]
    UnresolvedGoto(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    instrs: BTreeMap<NodeId, Instruction>,
    succs: BTreeMap<NodeId, Succ>,
    entry: NodeId,
    exit: NodeId,
    vars: BTreeMap<String, Type>,
    next_id: u32,
}

impl Cfg {
    /// A graph holding only `entry` and `exit`, not yet connected.
    pub fn new() -> Cfg {
        let mut cfg = Cfg {
            instrs: BTreeMap::new(),
            succs: BTreeMap::new(),
            entry: NodeId(0),
            exit: NodeId(1),
            vars: BTreeMap::new(),
            next_id: 0,
        };
        cfg.entry = cfg.add_node(InstrKind::Entry, 0);
        cfg.exit = cfg.add_node(InstrKind::Exit, 0);
        cfg
    }

    pub fn entry(&self) -> NodeId {
        self.entry
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    pub fn vars(&self) -> &BTreeMap<String, Type> {
        &self.vars
    }

    pub fn declare_var(&mut self, name: impl Into<String>, ty: Type) {
        self.vars.insert(name.into(), ty);
    }

    pub fn var_type(&self, name: &str) -> Option<Type> {
        self.vars.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.instrs.contains_key(&id)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.instrs.keys().copied()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.instrs.values()
    }

    pub fn instr(&self, id: NodeId) -> &Instruction {
        &self.instrs[&id]
    }

    pub fn succ(&self, id: NodeId) -> Succ {
        self.succs.get(&id).copied().unwrap_or(Succ::None)
    }

    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        self.succ(id).targets().into_iter().map(|(t, _)| t).collect()
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId, EdgeLabel)> {
        self.succs
            .iter()
            .flat_map(|(&s, succ)| succ.targets().into_iter().map(move |(t, l)| (s, t, l)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.succs.values().map(|s| s.targets().len()).sum()
    }

    pub fn predecessors(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut preds: BTreeMap<NodeId, Vec<NodeId>> =
            self.instrs.keys().map(|&id| (id, Vec::new())).collect();
        for (s, t, _) in self.edges() {
            let list = preds.entry(t).or_default();
            if !list.contains(&s) {
                list.push(s);
            }
        }
        preds
    }

    pub fn add_node(&mut self, kind: InstrKind, line: u32) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.instrs.insert(id, Instruction { id, kind, line });
        self.succs.insert(id, Succ::None);
        id
    }

    pub fn set_succ(&mut self, id: NodeId, succ: Succ) {
        self.succs.insert(id, succ);
    }

    pub fn set_kind(&mut self, id: NodeId, kind: InstrKind) {
        self.instrs.get_mut(&id).expect("node exists").kind = kind;
    }

    pub fn remove_node(&mut self, id: NodeId) {
        self.instrs.remove(&id);
        self.succs.remove(&id);
    }

    /// Nodes in reverse post-order of a depth-first search from the entry.
    pub fn reverse_postorder(&self) -> Vec<NodeId> {
        let mut visited = BTreeSet::new();
        let mut order = Vec::new();
        let mut stack = vec![(self.entry, 0usize)];
        visited.insert(self.entry);
        while let Some((node, idx)) = stack.pop() {
            let succs = self.successors(node);
            if idx < succs.len() {
                stack.push((node, idx + 1));
                let next = succs[idx];
                if visited.insert(next) {
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }
        order.reverse();
        order
    }

    pub fn reachable_from_entry(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([self.entry]);
        let mut queue = VecDeque::from([self.entry]);
        while let Some(n) = queue.pop_front() {
            for s in self.successors(n) {
                if seen.insert(s) {
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    pub fn reaching_exit(&self) -> BTreeSet<NodeId> {
        let preds = self.predecessors();
        let mut seen = BTreeSet::from([self.exit]);
        let mut queue = VecDeque::from([self.exit]);
        while let Some(n) = queue.pop_front() {
            for &p in &preds[&n] {
                if seen.insert(p) {
                    queue.push_back(p);
                }
            }
        }
        seen
    }

    /// Removes nodes unreachable from the entry, then gives every region that
    /// cannot reach the exit a never-taken exit edge: a `skip` (or a freshly
    /// inserted node) becomes `branch(true)` whose false edge leads to exit.
    pub fn normalize(&mut self) {
        let live = self.reachable_from_entry();
        let dead: Vec<NodeId> = self
            .instrs
            .keys()
            .copied()
            .filter(|id| !live.contains(id) && *id != self.exit)
            .collect();
        for id in dead {
            self.remove_node(id);
        }
        loop {
            let reaching = self.reaching_exit();
            let stuck: Vec<NodeId> = self
                .instrs
                .keys()
                .copied()
                .filter(|id| !reaching.contains(id))
                .collect();
            if stuck.is_empty() {
                break;
            }
            // prefer the last node of a cycle in layout order: a loop head or label
            let pick = stuck
                .iter()
                .copied()
                .find(|&id| matches!(self.instr(id).kind, InstrKind::Skip))
                .or_else(|| {
                    stuck
                        .iter()
                        .copied()
                        .find(|&id| matches!(self.succ(id), Succ::Jump(_)))
                });
            let Some(pick) = pick else {
                // only branches without exits left: cannot happen for lowered code
                break;
            };
            let Succ::Jump(next) = self.succ(pick) else {
                unreachable!("picked node has a single successor")
            };
            let exit = self.exit;
            if matches!(self.instr(pick).kind, InstrKind::Skip) {
                self.set_kind(pick, InstrKind::Branch(Expr::Bool(true)));
                self.set_succ(
                    pick,
                    Succ::Branch {
                        on_true: next,
                        on_false: exit,
                    },
                );
            } else {
                let line = self.instr(pick).line;
                let guard = self.add_node(InstrKind::Branch(Expr::Bool(true)), line);
                self.set_succ(
                    guard,
                    Succ::Branch {
                        on_true: next,
                        on_false: exit,
                    },
                );
                self.set_succ(pick, Succ::Jump(guard));
            }
        }
    }

    /// Checks the structural invariants; returns a description of the first
    /// violation.
    pub fn validate(&self) -> Result<(), String> {
        let preds = self.predecessors();
        if !preds[&self.entry].is_empty() {
            return Err("entry has predecessors".into());
        }
        if self.succ(self.exit) != Succ::None {
            return Err("exit has successors".into());
        }
        for instr in self.instrs.values() {
            let succ = self.succ(instr.id);
            for t in succ.targets() {
                if !self.instrs.contains_key(&t.0) {
                    return Err(format!("{} points to missing {}", instr.id, t.0));
                }
            }
            match (&instr.kind, succ) {
                (InstrKind::Branch(_) | InstrKind::AbstractPredicate(_), Succ::Branch { .. }) => {}
                (InstrKind::Branch(_) | InstrKind::AbstractPredicate(_), _) => {
                    return Err(format!("branch {} lacks two successors", instr.id));
                }
                (_, Succ::Branch { .. }) => {
                    return Err(format!("non-branch {} has two successors", instr.id));
                }
                (InstrKind::Exit, _) => {}
                (_, Succ::None) => return Err(format!("{} has no successor", instr.id)),
                _ => {}
            }
            if instr.id != self.entry && preds[&instr.id].is_empty() {
                return Err(format!("{} is unreachable", instr.id));
            }
        }
        let reaching = self.reaching_exit();
        if let Some(id) = self.instrs.keys().find(|id| !reaching.contains(id)) {
            return Err(format!("{id} cannot reach exit"));
        }
        Ok(())
    }

    /// Replaces successor references according to `f` (used when splicing).
    pub(crate) fn remap_succs(&mut self, f: impl Fn(NodeId) -> NodeId) {
        for succ in self.succs.values_mut() {
            *succ = succ.map(&f);
        }
    }

    /// GraphViz rendering; branch edges are labelled `T`/`F`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfg {\n  node [shape=box];\n");
        for instr in self.instrs.values() {
            out.push_str(&format!(
                "  {} [label=\"{}\"];\n",
                instr.id,
                escape_dot(&instr.to_string())
            ));
        }
        for (s, t, l) in self.edges() {
            match l {
                EdgeLabel::Always => out.push_str(&format!("  {s} -> {t};\n")),
                EdgeLabel::True => out.push_str(&format!("  {s} -> {t} [label=\"T\"];\n")),
                EdgeLabel::False => out.push_str(&format!("  {s} -> {t} [label=\"F\"];\n")),
            }
        }
        out.push_str("}\n");
        out
    }
}

impl Default for Cfg {
    fn default() -> Self {
        Cfg::new()
    }
}

pub(crate) fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests;
