//! Per-assertion program slicing: backward, thin and value slices, and
//! refinement of abstracted branch conditions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::rngs::StdRng;
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use serde::Serialize;
use thiserror::Error;

use crate::cfg::{Cfg, InstrKind, NodeId, Succ};
use crate::dataflow::{post_dominator_tree, Pdg};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SliceCriterion {
    pub instruction: NodeId,
    pub variables: BTreeSet<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SlicerKind {
    Backward,
    Thin,
    Value,
}

impl fmt::Display for SlicerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlicerKind::Backward => "backward",
            SlicerKind::Thin => "thin",
            SlicerKind::Value => "value",
        })
    }
}

impl FromStr for SlicerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "backward" => Ok(SlicerKind::Backward),
            "thin" => Ok(SlicerKind::Thin),
            "value" => Ok(SlicerKind::Value),
            other => Err(format!("unknown slicer `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SliceError {
    #[error("program contains no assertion")]
    NoAssert,
    #[error("{0} is not an abstracted branch of this slice")]
    UnknownPredicate(NodeId),
    #[error("criterion {0} is not a node of the graph")]
    UnknownCriterion(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slice {
    pub criterion: SliceCriterion,
    /// Branches added to the criterion by refinement.
    pub refined: BTreeSet<NodeId>,
    pub kind: SlicerKind,
    /// Kept instructions, including entry and exit.
    pub retained: BTreeSet<NodeId>,
    /// Branches replaced by abstract predicates in `cfg`.
    pub abstracted: BTreeSet<NodeId>,
    pub cfg: Cfg,
    pub refinement_count: usize,
}

impl Slice {
    /// Retained instructions other than entry and exit.
    pub fn statements(&self) -> BTreeSet<NodeId> {
        self.retained
            .iter()
            .copied()
            .filter(|&n| n != self.cfg.entry() && n != self.cfg.exit())
            .collect()
    }

    fn terminals(&self) -> Vec<NodeId> {
        std::iter::once(self.criterion.instruction)
            .chain(self.refined.iter().copied())
            .collect()
    }
}

/// One criterion per assertion, in node order.
pub fn extract_criteria(cfg: &Cfg) -> Result<Vec<SliceCriterion>, SliceError> {
    let criteria: Vec<SliceCriterion> = cfg
        .instructions()
        .filter(|i| matches!(i.kind, InstrKind::Assert(_)))
        .map(|i| SliceCriterion {
            instruction: i.id,
            variables: i.reads(),
        })
        .collect();
    if criteria.is_empty() {
        Err(SliceError::NoAssert)
    } else {
        Ok(criteria)
    }
}

pub fn slice(
    kind: SlicerKind,
    pdg: &Pdg,
    cfg: &Cfg,
    criterion: &SliceCriterion,
) -> Result<Slice, SliceError> {
    if !cfg.contains(criterion.instruction) {
        return Err(SliceError::UnknownCriterion(criterion.instruction));
    }
    let terminals = [criterion.instruction];
    let retained = match kind {
        SlicerKind::Backward => pdg.backward_closure(terminals, true),
        SlicerKind::Thin => pdg.backward_closure(terminals, false),
        SlicerKind::Value => value_impacting(pdg, cfg, &terminals, &BTreeSet::new()),
    };
    Ok(assemble(
        kind,
        pdg,
        cfg,
        criterion.clone(),
        BTreeSet::new(),
        retained,
        0,
    ))
}

pub fn backward_slice(pdg: &Pdg, cfg: &Cfg, criterion: &SliceCriterion) -> Result<Slice, SliceError> {
    slice(SlicerKind::Backward, pdg, cfg, criterion)
}

pub fn thin_slice(pdg: &Pdg, cfg: &Cfg, criterion: &SliceCriterion) -> Result<Slice, SliceError> {
    slice(SlicerKind::Thin, pdg, cfg, criterion)
}

pub fn value_slice(pdg: &Pdg, cfg: &Cfg, criterion: &SliceCriterion) -> Result<Slice, SliceError> {
    slice(SlicerKind::Value, pdg, cfg, criterion)
}

/// Adds the abstracted branch `predicate` to the criterion and slices again
/// with `strategy` (thin or value; backward refines everything at once). The
/// previous retained set is kept, so slices only grow.
pub fn refine_slice(
    slice: &Slice,
    pdg: &Pdg,
    cfg: &Cfg,
    predicate: NodeId,
    strategy: SlicerKind,
) -> Result<Slice, SliceError> {
    if !slice.abstracted.contains(&predicate) {
        return Err(SliceError::UnknownPredicate(predicate));
    }
    let mut refined = slice.refined.clone();
    refined.insert(predicate);
    let mut terminals = slice.terminals();
    terminals.push(predicate);
    let seeds: BTreeSet<NodeId> = slice.retained.iter().copied().chain([predicate]).collect();
    let retained = match strategy {
        SlicerKind::Backward => pdg.backward_closure(seeds, true),
        SlicerKind::Thin => pdg.backward_closure(seeds, false),
        SlicerKind::Value => value_impacting(pdg, cfg, &terminals, &seeds),
    };
    Ok(assemble(
        slice.kind,
        pdg,
        cfg,
        slice.criterion.clone(),
        refined,
        retained,
        slice.refinement_count + 1,
    ))
}

/// How refinement picks the abstract predicate to concretize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredicateSelection {
    /// Nearest to the criterion in the PDG, ties by lowest id.
    Nearest,
    /// Uniformly at random from a seeded generator.
    Random(u64),
}

pub fn select_predicate(slice: &Slice, pdg: &Pdg, selection: PredicateSelection) -> Option<NodeId> {
    match selection {
        PredicateSelection::Random(seed) => {
            let mut rng = StdRng::seed_from_u64(seed ^ slice.refinement_count as u64);
            slice.abstracted.iter().copied().choose(&mut rng)
        }
        PredicateSelection::Nearest => {
            let dist = pdg_distances(pdg, slice.criterion.instruction);
            slice
                .abstracted
                .iter()
                .copied()
                .min_by_key(|n| (dist.get(n).copied().unwrap_or(usize::MAX), *n))
        }
    }
}

/// Backward breadth-first distances over both edge kinds.
fn pdg_distances(pdg: &Pdg, from: NodeId) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::from([(from, 0)]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        for &p in pdg.controllers(n).iter().chain(pdg.data_sources(n)) {
            if let std::collections::btree_map::Entry::Vacant(slot) = dist.entry(p) {
                slot.insert(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Branches reachable backwards from `nodes` over control edges only.
fn control_closure(pdg: &Pdg, nodes: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<NodeId> = nodes
        .iter()
        .flat_map(|&n| pdg.controllers(n).iter().copied())
        .collect();
    while let Some(b) = stack.pop() {
        if b == pdg.entry || !seen.insert(b) {
            continue;
        }
        stack.extend(pdg.controllers(b).iter().copied());
    }
    seen
}

/// The least value-impacting set for the terminal criteria, extended by
/// `seeds`: closed under data dependence and containing every branch (from
/// the control closure of the set) satisfying the path condition of
/// [`branch_value_impacts`]. Includes the terminals themselves.
pub fn value_impacting(
    pdg: &Pdg,
    cfg: &Cfg,
    terminals: &[NodeId],
    seeds: &BTreeSet<NodeId>,
) -> BTreeSet<NodeId> {
    let terminal_set: BTreeSet<NodeId> = terminals.iter().copied().collect();
    let mut vi = pdg.backward_closure(terminals.iter().chain(seeds).copied(), false);
    let reaches_terminal = reaching_any(cfg, &terminal_set);
    loop {
        let candidates: Vec<NodeId> = control_closure(pdg, &vi)
            .into_iter()
            .filter(|b| !vi.contains(b))
            .collect();
        let added: Vec<NodeId> = candidates
            .into_iter()
            .filter(|&b| branch_value_impacts_with(cfg, b, &vi, &terminal_set, &reaches_terminal))
            .collect();
        if added.is_empty() {
            return vi;
        }
        vi = pdg.backward_closure(vi.iter().copied().chain(added), false);
    }
}

/// Whether the branch `s` decides which value-impacting node comes first on
/// the way to the criterion: there are paths from its two successors, each
/// ending at the first visit of a terminal, whose first node from `vi`
/// (or the terminal, if none) differ. Nodes are compared by [`instr_key`].
pub fn branch_value_impacts(
    cfg: &Cfg,
    s: NodeId,
    vi: &BTreeSet<NodeId>,
    terminals: &BTreeSet<NodeId>,
) -> bool {
    branch_value_impacts_with(cfg, s, vi, terminals, &reaching_any(cfg, terminals))
}

fn branch_value_impacts_with(
    cfg: &Cfg,
    s: NodeId,
    vi: &BTreeSet<NodeId>,
    terminals: &BTreeSet<NodeId>,
    reaches_terminal: &BTreeSet<NodeId>,
) -> bool {
    let Succ::Branch { on_true, on_false } = cfg.succ(s) else {
        return false;
    };
    let first_true = first_hits(cfg, on_true, vi, terminals, reaches_terminal);
    if first_true.is_empty() {
        return false;
    }
    let first_false = first_hits(cfg, on_false, vi, terminals, reaches_terminal);
    let first_true: BTreeSet<String> = first_true.into_iter().map(|n| instr_key(cfg, n)).collect();
    let first_false: BTreeSet<String> = first_false.into_iter().map(|n| instr_key(cfg, n)).collect();
    match (first_true.len(), first_false.len()) {
        (_, 0) => false,
        (1, 1) => first_true != first_false,
        _ => true,
    }
}

/// Identity of a first hit. Two deterministic nodes with the same
/// instruction have the same effect and count as the same node; havocs are
/// always distinct.
pub fn instr_key(cfg: &Cfg, n: NodeId) -> String {
    match cfg.instr(n).kind {
        InstrKind::Havoc { .. } | InstrKind::AbstractPredicate(_) => format!("#{}", n.0),
        _ => cfg.instr(n).to_string(),
    }
}

/// Nodes of `vi ∪ terminals` that are the first such node on some path from
/// `start` that goes on to reach a terminal.
fn first_hits(
    cfg: &Cfg,
    start: NodeId,
    vi: &BTreeSet<NodeId>,
    terminals: &BTreeSet<NodeId>,
    reaches_terminal: &BTreeSet<NodeId>,
) -> BTreeSet<NodeId> {
    let mut hits = BTreeSet::new();
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        if vi.contains(&n) || terminals.contains(&n) {
            if reaches_terminal.contains(&n) {
                hits.insert(n);
            }
            continue;
        }
        for m in cfg.successors(n) {
            if seen.insert(m) {
                stack.push(m);
            }
        }
    }
    hits
}

/// Nodes from which some terminal is reachable (terminals included).
fn reaching_any(cfg: &Cfg, terminals: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let preds = cfg.predecessors();
    let mut seen: BTreeSet<NodeId> = terminals.clone();
    let mut stack: Vec<NodeId> = terminals.iter().copied().collect();
    while let Some(n) = stack.pop() {
        for &p in &preds[&n] {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

fn assemble(
    kind: SlicerKind,
    pdg: &Pdg,
    cfg: &Cfg,
    criterion: SliceCriterion,
    refined: BTreeSet<NodeId>,
    mut retained: BTreeSet<NodeId>,
    refinement_count: usize,
) -> Slice {
    retained.insert(cfg.entry());
    retained.insert(cfg.exit());
    let abstracted: BTreeSet<NodeId> = control_closure(pdg, &retained)
        .into_iter()
        .filter(|b| !retained.contains(b))
        .collect();
    let slice_cfg = extract_cfg(cfg, &retained, &abstracted);
    Slice {
        criterion,
        refined,
        kind,
        retained,
        abstracted,
        cfg: slice_cfg,
        refinement_count,
    }
}

/// Restricts `cfg` to `retained ∪ abstracted`. Edges into removed nodes are
/// redirected to the nearest kept post-dominator; abstracted branches become
/// abstract predicates.
pub fn extract_cfg(cfg: &Cfg, retained: &BTreeSet<NodeId>, abstracted: &BTreeSet<NodeId>) -> Cfg {
    let pdt = post_dominator_tree(cfg).expect("normalized graph");
    let keep = |n: NodeId| retained.contains(&n) || abstracted.contains(&n);
    let target = |mut n: NodeId| {
        while !keep(n) {
            n = pdt.ipdom(n);
        }
        n
    };
    let mut out = cfg.clone();
    for id in cfg.node_ids() {
        if !keep(id) {
            out.remove_node(id);
            continue;
        }
        let succ = match cfg.succ(id) {
            Succ::None => Succ::None,
            Succ::Jump(t) => Succ::Jump(target(t)),
            Succ::Branch { on_true, on_false } => Succ::Branch {
                on_true: target(on_true),
                on_false: target(on_false),
            },
        };
        out.set_succ(id, succ);
        if abstracted.contains(&id) {
            out.set_kind(id, InstrKind::AbstractPredicate(id));
        }
    }
    out.normalize();
    out
}
