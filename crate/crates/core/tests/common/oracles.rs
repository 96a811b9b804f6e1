//! Path-enumeration oracles for the dataflow facts. Exponential; meant for
//! graphs of a dozen nodes.

use std::collections::{BTreeMap, BTreeSet};

use cfaforge::cfg::{Cfg, InstrKind, NodeId, Succ};
use cfaforge::dataflow::Definition;
use cfaforge::slicer::instr_key;

/// Calls `visit` with every simple path starting at `from`. A path may end
/// by returning to its first node. `visit` returns false to stop extending
/// the current path.
pub fn for_each_path(cfg: &Cfg, from: NodeId, visit: &mut dyn FnMut(&[NodeId]) -> bool) {
    fn go(cfg: &Cfg, path: &mut Vec<NodeId>, visit: &mut dyn FnMut(&[NodeId]) -> bool) {
        if !visit(path) {
            return;
        }
        let last = *path.last().unwrap();
        if path.len() > 1 && last == path[0] {
            return;
        }
        for m in cfg.successors(last) {
            if m != path[0] && path.contains(&m) {
                continue;
            }
            path.push(m);
            go(cfg, path, visit);
            path.pop();
        }
    }
    go(cfg, &mut vec![from], visit);
}

fn defines(cfg: &Cfg, n: NodeId, var: &str) -> bool {
    match &cfg.instr(n).kind {
        InstrKind::Entry => true,
        _ => cfg.instr(n).defines() == Some(var),
    }
}

fn variables(cfg: &Cfg) -> BTreeSet<String> {
    let mut vars: BTreeSet<String> = cfg.vars().keys().cloned().collect();
    for i in cfg.instructions() {
        vars.extend(i.reads());
        vars.extend(i.defines().map(str::to_string));
    }
    vars
}

/// `(site, v)` reaches `n` when some path from `site` to `n` defines `v`
/// nowhere strictly between them. Entry defines every variable.
pub fn reaching_definitions(cfg: &Cfg) -> BTreeMap<NodeId, BTreeSet<Definition>> {
    let mut out: BTreeMap<NodeId, BTreeSet<Definition>> =
        cfg.node_ids().map(|n| (n, BTreeSet::new())).collect();
    let vars = variables(cfg);
    for site in cfg.node_ids() {
        for v in &vars {
            if !defines(cfg, site, v) {
                continue;
            }
            for_each_path(cfg, site, &mut |path| {
                if path.len() == 1 {
                    return true;
                }
                let last = *path.last().unwrap();
                out.get_mut(&last).unwrap().insert(Definition::new(site, v.clone()));
                !defines(cfg, last, v)
            });
        }
    }
    out
}

/// Every path from `t` to exit passes through `s`.
pub fn post_dominates(cfg: &Cfg, s: NodeId, t: NodeId) -> bool {
    if s == t {
        return true;
    }
    let mut avoided = false;
    for_each_path(cfg, t, &mut |path| {
        let last = *path.last().unwrap();
        if last == s || avoided {
            return false;
        }
        if last == cfg.exit() {
            avoided = true;
        }
        true
    });
    !avoided
}

/// `(s, t)` when some path from the branch `s` to `t` has every node after
/// `s` post-dominated by `t`, and `t` does not strictly post-dominate `s`.
pub fn control_dependencies(cfg: &Cfg) -> BTreeSet<(NodeId, NodeId)> {
    let nodes: Vec<NodeId> = cfg.node_ids().collect();
    let mut pdom: BTreeMap<(NodeId, NodeId), bool> = BTreeMap::new();
    for &a in &nodes {
        for &b in &nodes {
            pdom.insert((a, b), post_dominates(cfg, a, b));
        }
    }
    let mut deps = BTreeSet::new();
    for s in nodes.iter().copied().filter(|&s| cfg.instr(s).is_branch()) {
        for &t in &nodes {
            if t != s && pdom[&(t, s)] {
                continue;
            }
            let mut found = false;
            for_each_path(cfg, s, &mut |path| {
                if found {
                    return false;
                }
                if path.len() == 1 {
                    return true;
                }
                let last = *path.last().unwrap();
                if !pdom[&(t, last)] {
                    return false;
                }
                if last == t {
                    found = true;
                    return false;
                }
                true
            });
            if found {
                deps.insert((s, t));
            }
        }
    }
    deps
}

fn reaches(cfg: &Cfg, from: NodeId, targets: &BTreeSet<NodeId>) -> bool {
    let mut found = false;
    for_each_path(cfg, from, &mut |path| {
        if found || targets.contains(path.last().unwrap()) {
            found = true;
            return false;
        }
        true
    });
    found
}

/// First nodes of `vi ∪ terminals` on paths from `start` that can go on
/// to a terminal.
fn first_hits(cfg: &Cfg, start: NodeId, vi: &BTreeSet<NodeId>, terminals: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
    let mut hits = BTreeSet::new();
    for_each_path(cfg, start, &mut |path| {
        let last = *path.last().unwrap();
        if path.len() > 1 && last == start {
            return false;
        }
        if vi.contains(&last) || terminals.contains(&last) {
            if reaches(cfg, last, terminals) {
                hits.insert(last);
            }
            return false;
        }
        true
    });
    hits
}

/// Two paths from the two successors of `s` meet different first
/// value-impacting nodes (compared by instruction identity).
pub fn branch_value_impacts(
    cfg: &Cfg,
    s: NodeId,
    vi: &BTreeSet<NodeId>,
    terminals: &BTreeSet<NodeId>,
) -> bool {
    let Succ::Branch { on_true, on_false } = cfg.succ(s) else {
        return false;
    };
    let a = first_hits(cfg, on_true, vi, terminals);
    let b = first_hits(cfg, on_false, vi, terminals);
    a.iter()
        .any(|x| b.iter().any(|y| instr_key(cfg, *x) != instr_key(cfg, *y)))
}
