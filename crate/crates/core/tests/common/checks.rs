//! Property checks over one generated program; each returns the violations
//! it found.

use std::collections::BTreeSet;

use cfaforge::cfg::{Cfg, NodeId};
use cfaforge::dataflow::{build_pdg, control_dependencies, post_dominator_tree, reaching_definitions, Pdg};
use cfaforge::optimizer::optimize_fixpoint;
use cfaforge::pipeline::{run, HavocStream, Store, TraceEnd};
use cfaforge::slicer::{
    branch_value_impacts, extract_criteria, refine_slice, select_predicate, slice, PredicateSelection, Slice,
    SliceCriterion, SlicerKind,
};
use rand::rngs::StdRng;
use rand::Rng;

use super::oracles;

pub const MAX_STEPS: usize = 5_000;

fn criteria(cfg: &Cfg) -> (Pdg, Vec<SliceCriterion>) {
    let pdg = build_pdg(cfg).expect("normalized graph");
    let criteria = extract_criteria(cfg).unwrap_or_default();
    (pdg, criteria)
}

fn fully_refined(mut s: Slice, pdg: &Pdg, cfg: &Cfg, seed: u64) -> Slice {
    while let Some(p) = select_predicate(&s, pdg, PredicateSelection::Random(seed)) {
        s = refine_slice(&s, pdg, cfg, p, s.kind).unwrap();
    }
    s
}

/// thin ⊆ value ⊆ backward for every criterion, and refining thin and value
/// slices until no abstract predicate is left gives the backward slice.
pub fn slice_inclusion(cfg: &Cfg, seed: u64) -> Vec<String> {
    let (pdg, crits) = criteria(cfg);
    let mut bad = Vec::new();
    for c in &crits {
        let b = slice(SlicerKind::Backward, &pdg, cfg, c).unwrap();
        let t = slice(SlicerKind::Thin, &pdg, cfg, c).unwrap();
        let v = slice(SlicerKind::Value, &pdg, cfg, c).unwrap();
        if !t.retained.is_subset(&v.retained) {
            bad.push(format!("{}: thin not within value", c.instruction));
        }
        if !v.retained.is_subset(&b.retained) {
            bad.push(format!("{}: value not within backward", c.instruction));
        }
        if !b.abstracted.is_empty() {
            bad.push(format!("{}: backward slice has abstract predicates", c.instruction));
        }
        for s in [t, v] {
            let kind = s.kind;
            let r = fully_refined(s, &pdg, cfg, seed);
            if r.retained != b.retained {
                bad.push(format!("{}: refined {kind} differs from backward", c.instruction));
            }
        }
    }
    bad
}

/// Values of the criterion variables at each visit of the criterion, and how
/// the run ended.
pub fn criterion_visits(cfg: &Cfg, c: &SliceCriterion, stream: &HavocStream) -> (Vec<Vec<i32>>, TraceEnd) {
    let mut seen = Vec::new();
    let trace = run(cfg, &Store::new(), stream, MAX_STEPS, |n, store| {
        if n == c.instruction {
            seen.push(c.variables.iter().map(|v| store.get(v).copied().unwrap_or(0)).collect());
        }
    });
    (seen, trace.end)
}

/// Backward slices see the same criterion values as the program, over
/// `streams` keyed havoc streams.
pub fn slice_semantics(cfg: &Cfg, streams: usize, rng: &mut StdRng) -> Vec<String> {
    let (pdg, crits) = criteria(cfg);
    let mut bad = Vec::new();
    let slices: Vec<Slice> = crits
        .iter()
        .map(|c| slice(SlicerKind::Backward, &pdg, cfg, c).unwrap())
        .collect();
    for _ in 0..streams {
        let stream = HavocStream::Keyed(rng.gen());
        for (c, s) in crits.iter().zip(&slices) {
            let (a, end_a) = criterion_visits(cfg, c, &stream);
            let (b, end_b) = criterion_visits(&s.cfg, c, &stream);
            let complete = |e: TraceEnd| e == TraceEnd::Exit || e == TraceEnd::AssertFailed(c.instruction);
            let ok = if complete(end_a) && complete(end_b) {
                a == b && end_a == end_b
            } else {
                let n = a.len().min(b.len());
                a[..n] == b[..n]
            };
            if !ok {
                bad.push(format!("{stream:?} at {}: {a:?}/{end_a:?} vs slice {b:?}/{end_b:?}", c.instruction));
            }
        }
    }
    bad
}

fn random_subset(rng: &mut StdRng, nodes: &[NodeId], p: f64) -> BTreeSet<NodeId> {
    nodes.iter().copied().filter(|_| rng.gen_bool(p)).collect()
}

/// Reaching definitions, post-dominance, control dependence and the
/// value-impact path condition against their enumeration oracles.
pub fn dataflow(cfg: &Cfg, rng: &mut StdRng) -> Vec<String> {
    let mut bad = Vec::new();
    if reaching_definitions(cfg) != oracles::reaching_definitions(cfg) {
        bad.push("reaching definitions".to_string());
    }
    let pdt = post_dominator_tree(cfg).expect("normalized graph");
    let nodes: Vec<NodeId> = cfg.node_ids().collect();
    for &s in &nodes {
        for &t in &nodes {
            if pdt.post_dominates(s, t) != oracles::post_dominates(cfg, s, t) {
                bad.push(format!("post-dominance of {t} by {s}"));
            }
        }
    }
    if control_dependencies(cfg, &pdt) != oracles::control_dependencies(cfg) {
        bad.push("control dependence".to_string());
    }
    let branches: Vec<NodeId> = nodes.iter().copied().filter(|&n| cfg.instr(n).is_branch()).collect();
    for _ in 0..8 {
        let vi = random_subset(rng, &nodes, 0.3);
        let mut terminals = random_subset(rng, &nodes, 0.15);
        if terminals.is_empty() {
            terminals.insert(nodes[rng.gen_range(0..nodes.len())]);
        }
        for &s in &branches {
            let got = branch_value_impacts(cfg, s, &vi, &terminals);
            if got != oracles::branch_value_impacts(cfg, s, &vi, &terminals) {
                bad.push(format!("value impact of {s} (vi {vi:?}, terminals {terminals:?})"));
            }
        }
    }
    bad
}

/// Optimization is idempotent and keeps assertion outcomes and the final
/// store, over `streams` random havoc sequences.
pub fn optimization(cfg: &Cfg, streams: usize, rng: &mut StdRng) -> Vec<String> {
    let mut bad = Vec::new();
    let (once, _) = optimize_fixpoint(cfg, true);
    let (twice, _) = optimize_fixpoint(&once, true);
    if once != twice {
        bad.push("second optimization changed the graph".to_string());
    }
    for _ in 0..streams {
        let len = rng.gen_range(0..24);
        let values: Vec<i32> = (0..len)
            .map(|_| if rng.gen_bool(0.9) { rng.gen_range(-8..=8) } else { rng.gen() })
            .collect();
        let stream = HavocStream::Sequence(values);
        let a = run(cfg, &Store::new(), &stream, MAX_STEPS, |_, _| {});
        let b = run(&once, &Store::new(), &stream, MAX_STEPS, |_, _| {});
        if a.end == TraceEnd::MaxStepsExceeded {
            continue;
        }
        if a.end != b.end || a.assert_outcomes != b.assert_outcomes || a.final_store != b.final_store {
            bad.push(format!("{stream:?}: {:?} vs optimized {:?}", a.end, b.end));
        }
    }
    bad
}
