use std::collections::BTreeSet;

use super::*;
use crate::cfg::{build_call_graph, inline_functions};
use crate::frontend::parse_source;

const SUM_LOOP: &str = include_str!("../../tests/fixtures/sum_loop.c");

fn cfg_of(src: &str) -> Cfg {
    let p = parse_source(src).unwrap();
    inline_functions(&p, &build_call_graph(&p).unwrap()).unwrap()
}

fn find(cfg: &Cfg, text: &str) -> NodeId {
    cfg.instructions()
        .find(|i| i.to_string() == text)
        .unwrap_or_else(|| panic!("no `{text}`"))
        .id
}

fn sites(defs: impl IntoIterator<Item = Definition>, var: &str) -> BTreeSet<NodeId> {
    defs.into_iter().filter(|d| d.var == var).map(|d| d.site).collect()
}

#[test]
fn loop_merges_definitions_at_assert() {
    let cfg = cfg_of(SUM_LOOP);
    let rd = reaching_definitions(&cfg);
    let assert_i = find(&cfg, "assert(i != 0)");
    assert_eq!(
        sites(rd[&assert_i].clone(), "i"),
        BTreeSet::from([find(&cfg, "i = 0"), find(&cfg, "i = i + 1")])
    );
}

#[test]
fn straight_line_kill() {
    let cfg = cfg_of("int main() { int x = 1; x = 2; int y = x; return 0; }");
    let rd = reaching_definitions(&cfg);
    let y = find(&cfg, "y = x");
    assert_eq!(sites(rd[&y].clone(), "x"), BTreeSet::from([find(&cfg, "x = 2")]));
}

#[test]
fn diamond_merge() {
    let cfg = cfg_of("extern int c(); int main() { int x; int k = c(); if (k) x = 1; else x = 2; int y = x; return 0; }");
    let rd = reaching_definitions(&cfg);
    let y = find(&cfg, "y = x");
    assert_eq!(
        sites(rd[&y].clone(), "x"),
        BTreeSet::from([find(&cfg, "x = 1"), find(&cfg, "x = 2")])
    );
}

#[test]
fn ud_chains_of_running_example() {
    let cfg = cfg_of(SUM_LOOP);
    let ud = ud_chains(&cfg);
    let body = find(&cfg, "sum = sum + i");
    let want: BTreeSet<Definition> = [
        ("sum = 0", "sum"),
        ("sum = sum + i", "sum"),
        ("i = 0", "i"),
        ("i = i + 1", "i"),
    ]
    .into_iter()
    .map(|(t, v)| Definition::new(find(&cfg, t), v))
    .collect();
    assert_eq!(ud.get(body), &want);
    assert!(ud.get(find(&cfg, "i = 0")).is_empty());
    let a = find(&cfg, "assert(sum != 0)");
    assert!(ud.get(a).iter().all(|d| d.var == "sum"));
    assert_eq!(ud.get(a).len(), 2);
}

#[test]
fn uninitialized_reads_reach_entry() {
    let cfg = cfg_of("int main() { int x; int y; y = y + 1; return 0; }");
    let ud = ud_chains(&cfg);
    let n = find(&cfg, "y = y + 1");
    assert_eq!(
        sites(ud.get(n).iter().cloned(), "y"),
        BTreeSet::from([find(&cfg, "y = havoc()")])
    );
    let p = parse_source("int f(int a) { int b = a; return b; } int main() { return 0; }").unwrap();
    let cfg = crate::cfg::build_cfg(&p, "f").unwrap();
    let ud = ud_chains(&cfg);
    let n = find(&cfg, "b = a");
    assert_eq!(sites(ud.get(n).iter().cloned(), "a"), BTreeSet::from([cfg.entry()]));
}

#[test]
fn post_dominators() {
    let cfg = cfg_of("int main() { int a = 1; int b = 2; return 0; }");
    let pdt = post_dominator_tree(&cfg).unwrap();
    let (a, b) = (find(&cfg, "a = 1"), find(&cfg, "b = 2"));
    assert_eq!(pdt.ipdom(a), b);
    assert_eq!(pdt.ipdom(b), cfg.exit());
    assert_eq!(pdt.ipdom(cfg.exit()), cfg.exit());

    let cfg = cfg_of("extern int c(); int main() { int x; if (c()) x = 1; else x = 2; return x; }");
    let pdt = post_dominator_tree(&cfg).unwrap();
    let br = cfg.instructions().find(|i| i.is_branch()).unwrap().id;
    assert_eq!(cfg.instr(pdt.ipdom(br)).kind, InstrKind::Skip);

    let cfg = cfg_of(SUM_LOOP);
    let pdt = post_dominator_tree(&cfg).unwrap();
    assert_eq!(pdt.ipdom(find(&cfg, "branch(i < 11)")), find(&cfg, "assert(i != 0)"));
    assert!(pdt.post_dominates(cfg.exit(), cfg.entry()));
}

#[test]
fn control_dependence_examples() {
    let cfg = cfg_of("extern int c(); int main() { int x; if (c()) x = 1; else x = 2; return x; }");
    let pdt = post_dominator_tree(&cfg).unwrap();
    let cd = control_dependencies(&cfg, &pdt);
    let br = cfg.instructions().find(|i| i.is_branch()).unwrap().id;
    assert!(cd.contains(&(br, find(&cfg, "x = 1"))));
    assert!(cd.contains(&(br, find(&cfg, "x = 2"))));
    assert!(!cd.contains(&(br, pdt.ipdom(br))));
    assert_eq!(cd.len(), 2);

    let cfg = cfg_of(SUM_LOOP);
    let pdt = post_dominator_tree(&cfg).unwrap();
    let cd = control_dependencies(&cfg, &pdt);
    let head = find(&cfg, "branch(i < 11)");
    let controlled: BTreeSet<NodeId> = cd.iter().filter(|e| e.0 == head).map(|e| e.1).collect();
    assert_eq!(
        controlled,
        BTreeSet::from([find(&cfg, "sum = sum + i"), find(&cfg, "i = i + 1"), head])
    );

    let cfg = cfg_of("int main() { int a = 1; a = a + 1; return 0; }");
    let pdt = post_dominator_tree(&cfg).unwrap();
    assert!(control_dependencies(&cfg, &pdt).is_empty());
}

#[test]
fn pdg_of_running_example() {
    let cfg = cfg_of(SUM_LOOP);
    let pdg = build_pdg(&cfg).unwrap();
    let from_entry: BTreeSet<NodeId> = pdg
        .control
        .iter()
        .filter(|e| e.0 == cfg.entry())
        .map(|e| e.1)
        .collect();
    let want: BTreeSet<NodeId> = ["i = 0", "sum = 0", "branch(i < 11)", "assert(i != 0)", "assert(sum != 0)"]
        .into_iter()
        .map(|t| find(&cfg, t))
        .collect();
    assert_eq!(from_entry, want);
    let head = find(&cfg, "branch(i < 11)");
    assert!(pdg.data.contains(&(find(&cfg, "i = 0"), head)));
    assert!(pdg.data.contains(&(find(&cfg, "i = i + 1"), head)));
    let a = find(&cfg, "assert(i != 0)");
    let into_assert: BTreeSet<NodeId> = pdg.data.iter().filter(|e| e.1 == a).map(|e| e.0).collect();
    assert_eq!(
        into_assert,
        BTreeSet::from([find(&cfg, "i = 0"), find(&cfg, "i = i + 1")])
    );
    let dot = pdg.to_dot(&cfg);
    assert!(dot.contains("style=dashed"));
}

#[test]
fn pdg_single_assignment() {
    let cfg = cfg_of("int main() { int a = 1; return 0; }");
    let pdg = build_pdg(&cfg).unwrap();
    assert_eq!(pdg.control.len(), 1);
    assert!(pdg.data.is_empty());
}

#[test]
fn pdg_edges_are_consistent() {
    let cfg = cfg_of(include_str!("../../tests/fixtures/externs.c"));
    let pdg = build_pdg(&cfg).unwrap();
    for &(s, t) in &pdg.data {
        let defined = defined_vars(&cfg, s);
        let reads = cfg.instr(t).reads();
        assert!(defined.iter().any(|v| reads.contains(v)));
    }
    for &(s, _) in &pdg.control {
        assert!(s == cfg.entry() || cfg.instr(s).is_branch());
    }
}
