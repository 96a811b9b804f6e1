//! Reaching definitions, use-define chains, post-dominance, control
//! dependence and the program dependence graph.
//!
//! Every variable has an implicit definition at the entry node, so each read
//! has at least one reaching definition.

use std::collections::{BTreeMap, BTreeSet};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::cfg::{escape_dot, Cfg, InstrKind, NodeId};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Definition {
    pub site: NodeId,
    pub var: String,
}

impl Definition {
    pub fn new(site: NodeId, var: impl Into<String>) -> Definition {
        Definition {
            site,
            var: var.into(),
        }
    }
}

/// Definitions reaching the start of each node.
pub type ReachingDefs = BTreeMap<NodeId, BTreeSet<Definition>>;

/// Variables defined by a node; the entry defines every variable.
pub fn defined_vars(cfg: &Cfg, node: NodeId) -> Vec<String> {
    let instr = cfg.instr(node);
    match &instr.kind {
        InstrKind::Entry => all_vars(cfg).into_iter().collect(),
        _ => instr.defines().map(|v| vec![v.to_string()]).unwrap_or_default(),
    }
}

/// Declared variables plus any variable mentioned by an instruction.
pub fn all_vars(cfg: &Cfg) -> BTreeSet<String> {
    let mut vars: BTreeSet<String> = cfg.vars().keys().cloned().collect();
    for i in cfg.instructions() {
        vars.extend(i.reads());
        vars.extend(i.defines().map(str::to_string));
    }
    vars
}

pub fn reaching_definitions(cfg: &Cfg) -> ReachingDefs {
    let mut defs: Vec<Definition> = Vec::new();
    let mut gen: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut by_var: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for id in cfg.node_ids() {
        for v in defined_vars(cfg, id) {
            let idx = defs.len();
            defs.push(Definition::new(id, v.clone()));
            gen.entry(id).or_default().push(idx);
            by_var.entry(v).or_default().push(idx);
        }
    }
    let n = defs.len();
    let kill: BTreeMap<NodeId, FixedBitSet> = gen
        .iter()
        .map(|(&id, idxs)| {
            let mut k = FixedBitSet::with_capacity(n);
            for &i in idxs {
                by_var[&defs[i].var].iter().for_each(|&j| k.insert(j));
            }
            (id, k)
        })
        .collect();
    let preds = cfg.predecessors();
    let order = cfg.reverse_postorder();
    let mut out: BTreeMap<NodeId, FixedBitSet> = cfg
        .node_ids()
        .map(|id| (id, FixedBitSet::with_capacity(n)))
        .collect();
    let mut ins = out.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for &id in &order {
            let mut input = FixedBitSet::with_capacity(n);
            for p in &preds[&id] {
                input.union_with(&out[p]);
            }
            let mut output = input.clone();
            if let Some(k) = kill.get(&id) {
                output.difference_with(k);
            }
            for &g in gen.get(&id).into_iter().flatten() {
                output.insert(g);
            }
            if output != out[&id] {
                out.insert(id, output);
                changed = true;
            }
            ins.insert(id, input);
        }
    }
    ins.into_iter()
        .map(|(id, set)| (id, set.ones().map(|i| defs[i].clone()).collect()))
        .collect()
}

/// Reaching definitions restricted to the variables each node reads.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UdChain {
    chains: BTreeMap<NodeId, BTreeSet<Definition>>,
}

impl UdChain {
    pub fn get(&self, node: NodeId) -> &BTreeSet<Definition> {
        static EMPTY: BTreeSet<Definition> = BTreeSet::new();
        self.chains.get(&node).unwrap_or(&EMPTY)
    }

    /// Definitions of `var` reaching `node` (only if `node` reads `var`).
    pub fn defs_of<'a>(&'a self, node: NodeId, var: &'a str) -> impl Iterator<Item = &'a Definition> {
        self.get(node).iter().filter(move |d| d.var == var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<Definition>)> {
        self.chains.iter().map(|(&k, v)| (k, v))
    }
}

pub fn build_ud_chains(cfg: &Cfg, rd: &ReachingDefs) -> UdChain {
    let chains = cfg
        .instructions()
        .map(|i| {
            let reads = i.reads();
            let set = rd
                .get(&i.id)
                .into_iter()
                .flatten()
                .filter(|d| reads.contains(&d.var))
                .cloned()
                .collect();
            (i.id, set)
        })
        .collect();
    UdChain { chains }
}

pub fn ud_chains(cfg: &Cfg) -> UdChain {
    build_ud_chains(cfg, &reaching_definitions(cfg))
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum DataflowError {
    #[error("node {0} cannot reach the exit")]
    NoExitPath(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostDomTree {
    ipdom: BTreeMap<NodeId, NodeId>,
    exit: NodeId,
}

impl PostDomTree {
    /// Immediate post-dominator; the exit maps to itself.
    pub fn ipdom(&self, n: NodeId) -> NodeId {
        self.ipdom[&n]
    }

    pub fn exit(&self) -> NodeId {
        self.exit
    }

    /// Whether `s` post-dominates `t` (reflexive).
    pub fn post_dominates(&self, s: NodeId, t: NodeId) -> bool {
        let mut cur = t;
        loop {
            if cur == s {
                return true;
            }
            if cur == self.exit {
                return false;
            }
            cur = self.ipdom[&cur];
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ipdom.iter().map(|(&k, &v)| (k, v))
    }

    pub fn to_dot(&self, cfg: &Cfg) -> String {
        let mut out = String::from("digraph pdt {\n  node [shape=box];\n");
        for (n, p) in self.iter() {
            out.push_str(&format!(
                "  {n} [label=\"{}\"];\n",
                escape_dot(&cfg.instr(n).to_string())
            ));
            if n != p {
                out.push_str(&format!("  {p} -> {n};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Dominators of the reverse graph by the iterative algorithm of Cooper,
/// Harvey and Kennedy.
pub fn post_dominator_tree(cfg: &Cfg) -> Result<PostDomTree, DataflowError> {
    let exit = cfg.exit();
    let preds = cfg.predecessors();
    // post-order of a DFS from exit over reversed edges
    let mut post = Vec::new();
    let mut seen = BTreeSet::from([exit]);
    let mut stack = vec![(exit, 0usize)];
    while let Some((n, i)) = stack.pop() {
        let ps = &preds[&n];
        if i < ps.len() {
            stack.push((n, i + 1));
            if seen.insert(ps[i]) {
                stack.push((ps[i], 0));
            }
        } else {
            post.push(n);
        }
    }
    if let Some(n) = cfg.node_ids().find(|n| !seen.contains(n)) {
        return Err(DataflowError::NoExitPath(n));
    }
    let number: BTreeMap<NodeId, usize> = post.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut idom: BTreeMap<NodeId, NodeId> = BTreeMap::from([(exit, exit)]);
    let intersect = |idom: &BTreeMap<NodeId, NodeId>, mut a: NodeId, mut b: NodeId| {
        while a != b {
            while number[&a] < number[&b] {
                a = idom[&a];
            }
            while number[&b] < number[&a] {
                b = idom[&b];
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &n in post.iter().rev() {
            if n == exit {
                continue;
            }
            let mut new = None;
            for s in cfg.successors(n) {
                if idom.contains_key(&s) {
                    new = Some(match new {
                        None => s,
                        Some(cur) => intersect(&idom, s, cur),
                    });
                }
            }
            let new = new.expect("a successor has been processed");
            if idom.get(&n) != Some(&new) {
                idom.insert(n, new);
                changed = true;
            }
        }
    }
    Ok(PostDomTree { ipdom: idom, exit })
}

/// Pairs `(s, t)` where `t` is control dependent on the branch `s`.
pub fn control_dependencies(cfg: &Cfg, pdt: &PostDomTree) -> BTreeSet<(NodeId, NodeId)> {
    let mut deps = BTreeSet::new();
    for instr in cfg.instructions().filter(|i| i.is_branch()) {
        let s = instr.id;
        let stop = pdt.ipdom(s);
        for t in cfg.successors(s) {
            let mut runner = t;
            while runner != stop {
                deps.insert((s, runner));
                runner = pdt.ipdom(runner);
            }
        }
    }
    deps
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pdg {
    pub nodes: BTreeSet<NodeId>,
    pub control: BTreeSet<(NodeId, NodeId)>,
    pub data: BTreeSet<(NodeId, NodeId)>,
    pub entry: NodeId,
    control_in: BTreeMap<NodeId, Vec<NodeId>>,
    data_in: BTreeMap<NodeId, Vec<NodeId>>,
}

impl Pdg {
    fn new(
        nodes: BTreeSet<NodeId>,
        control: BTreeSet<(NodeId, NodeId)>,
        data: BTreeSet<(NodeId, NodeId)>,
        entry: NodeId,
    ) -> Pdg {
        let mut control_in: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut data_in: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for &(s, t) in &control {
            control_in.entry(t).or_default().push(s);
        }
        for &(s, t) in &data {
            data_in.entry(t).or_default().push(s);
        }
        Pdg {
            nodes,
            control,
            data,
            entry,
            control_in,
            data_in,
        }
    }

    /// Nodes `t` controls; `s` such that `(s, t)` is a control edge.
    pub fn controllers(&self, t: NodeId) -> &[NodeId] {
        self.control_in.get(&t).map(Vec::as_slice).unwrap_or_default()
    }

    /// Nodes `t` flow depends on.
    pub fn data_sources(&self, t: NodeId) -> &[NodeId] {
        self.data_in.get(&t).map(Vec::as_slice).unwrap_or_default()
    }

    /// Backward closure from `seeds` over data edges, and over control edges
    /// too when `with_control` is set.
    pub fn backward_closure(
        &self,
        seeds: impl IntoIterator<Item = NodeId>,
        with_control: bool,
    ) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = BTreeSet::new();
        let mut stack: Vec<NodeId> = seeds.into_iter().collect();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            stack.extend(self.data_sources(n).iter().copied());
            if with_control {
                stack.extend(self.controllers(n).iter().copied());
            }
        }
        seen
    }

    /// Solid control edges, dashed data edges.
    pub fn to_dot(&self, cfg: &Cfg) -> String {
        let mut out = String::from("digraph pdg {\n  node [shape=box];\n");
        for &n in &self.nodes {
            out.push_str(&format!(
                "  {n} [label=\"{}\"];\n",
                escape_dot(&cfg.instr(n).to_string())
            ));
        }
        for (s, t) in &self.control {
            out.push_str(&format!("  {s} -> {t};\n"));
        }
        for (s, t) in &self.data {
            out.push_str(&format!("  {s} -> {t} [style=dashed];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Control dependence plus data dependence. The entry node controls every
/// node that executes unconditionally.
pub fn build_pdg(cfg: &Cfg) -> Result<Pdg, DataflowError> {
    let pdt = post_dominator_tree(cfg)?;
    let mut control = control_dependencies(cfg, &pdt);
    let entry = cfg.entry();
    let mut runner = pdt.ipdom(entry);
    while runner != cfg.exit() {
        control.insert((entry, runner));
        runner = pdt.ipdom(runner);
    }
    let ud = ud_chains(cfg);
    let data = ud
        .iter()
        .flat_map(|(t, defs)| defs.iter().map(move |d| (d.site, t)))
        .collect();
    Ok(Pdg::new(cfg.node_ids().collect(), control, data, entry))
}

#[cfg(test)]
mod tests;
