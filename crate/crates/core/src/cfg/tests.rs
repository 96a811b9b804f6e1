use std::collections::BTreeSet;

use super::*;
use crate::frontend::{parse_source, Program};

pub(crate) const SUM_LOOP: &str = include_str!("../../tests/fixtures/sum_loop.c");
pub(crate) const EXTERNS: &str = include_str!("../../tests/fixtures/externs.c");

fn cfg_of(src: &str) -> Cfg {
    let p = parse_source(src).unwrap();
    let cg = build_call_graph(&p).unwrap();
    let cfg = inline_functions(&p, &cg).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn texts(cfg: &Cfg) -> BTreeSet<String> {
    cfg.instructions().map(|i| i.to_string()).collect()
}

fn find(cfg: &Cfg, text: &str) -> NodeId {
    cfg.instructions()
        .find(|i| i.to_string() == text)
        .unwrap_or_else(|| panic!("no node `{text}` in\n{}", cfg.to_dot()))
        .id
}

#[test]
fn running_example_nodes() {
    let cfg = cfg_of(SUM_LOOP);
    let want: BTreeSet<String> = [
        "entry",
        "i = 0",
        "sum = 0",
        "branch(i < 11)",
        "sum = sum + i",
        "i = i + 1",
        "assert(i != 0)",
        "assert(sum != 0)",
        "exit",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(texts(&cfg), want);
    assert_eq!(cfg.len(), 9);
    let inc = find(&cfg, "i = i + 1");
    let head = find(&cfg, "branch(i < 11)");
    assert_eq!(cfg.succ(inc), Succ::Jump(head));
    assert_eq!(
        cfg.succ(head),
        Succ::Branch {
            on_true: find(&cfg, "sum = sum + i"),
            on_false: find(&cfg, "assert(i != 0)")
        }
    );
}

#[test]
fn empty_body_is_entry_to_exit() {
    let cfg = cfg_of("int main() {}");
    assert_eq!(cfg.len(), 2);
    assert_eq!(cfg.succ(cfg.entry()), Succ::Jump(cfg.exit()));
}

#[test]
fn diamond_merges_at_skip() {
    let cfg = cfg_of("extern int c(); int main() { int x; if (c()) x = 1; else x = 2; return x; }");
    let b = cfg
        .instructions()
        .find(|i| matches!(i.kind, InstrKind::Branch(_)))
        .unwrap()
        .id;
    let Succ::Branch { on_true, on_false } = cfg.succ(b) else { panic!() };
    assert_eq!(cfg.instr(on_true).to_string(), "x = 1");
    assert_eq!(cfg.instr(on_false).to_string(), "x = 2");
    let (Succ::Jump(j1), Succ::Jump(j2)) = (cfg.succ(on_true), cfg.succ(on_false)) else {
        panic!()
    };
    assert_eq!(j1, j2);
    assert_eq!(cfg.instr(j1).kind, InstrKind::Skip);
}

#[test]
fn call_graph_of_extern_example() {
    let p = parse_source(EXTERNS).unwrap();
    let cg = build_call_graph(&p).unwrap();
    let callees: BTreeSet<&str> = cg.callees("main").map(|e| e.callee.as_str()).collect();
    assert_eq!(callees, BTreeSet::from(["fn1", "fn2", "fn3"]));
    assert_eq!(cg.edges.len(), 5);

    let p = parse_source("int main() { return 0; }").unwrap();
    let cg = build_call_graph(&p).unwrap();
    assert_eq!(cg.nodes, vec!["main".to_string()]);
    assert!(cg.edges.is_empty());
}

#[test]
fn mutual_recursion_is_reported() {
    // the parser rejects recursion, so build the cycle by hand
    let mut p = parse_source("int g() { return 0; } int f() { return g(); } int main() { return f(); }")
        .unwrap();
    let f_body = p.function("f").unwrap().body.clone().unwrap();
    let mut call_f = f_body[0].clone();
    if let crate::frontend::ast::StmtKind::Return(Some(e)) = &mut call_f.kind {
        if let crate::frontend::ast::ExprKind::Call { callee, .. } = &mut e.kind {
            *callee = "f".into();
        }
    }
    for item in &mut p.items {
        if let crate::frontend::ast::Item::Function(g) = item {
            if g.name == "g" {
                g.body = Some(vec![call_f.clone()]);
            }
        }
    }
    match build_call_graph(&p) {
        Err(CfgError::Recursion(cycle)) => {
            let set: BTreeSet<&str> = cycle.iter().map(String::as_str).collect();
            assert_eq!(set, BTreeSet::from(["f", "g"]));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn double_inline_uses_disjoint_names() {
    let cfg = cfg_of("int g() { int k = 1; return k; } int main() { int a = g(); int b = g(); assert(a == b); return 0; }");
    let defs: Vec<String> = cfg
        .instructions()
        .filter_map(|i| i.defines().map(str::to_string))
        .filter(|v| v.starts_with("k@"))
        .collect();
    assert_eq!(defs.len(), 2);
    assert_ne!(defs[0], defs[1]);
    let rets: BTreeSet<&str> = cfg
        .vars()
        .keys()
        .map(String::as_str)
        .filter(|v| v.starts_with("ret@"))
        .collect();
    assert_eq!(rets.len(), 2);
}

#[test]
fn extern_call_becomes_havoc() {
    let cfg = cfg_of(EXTERNS);
    assert!(texts(&cfg).contains("x = havoc(i, j)"), "{}", cfg.to_dot());
    assert!(texts(&cfg).contains("t = havoc()"));
    assert!(texts(&cfg).contains("s_1 = havoc()") || texts(&cfg).contains("s = havoc()"));
}

#[test]
fn no_calls_inline_is_identity() {
    let p = parse_source(SUM_LOOP).unwrap();
    let cg = build_call_graph(&p).unwrap();
    assert_eq!(inline_functions(&p, &cg).unwrap(), build_cfg(&p, "main").unwrap());
}

#[test]
fn missing_main() {
    let p: Program = parse_source("int f() { return 1; }").unwrap();
    let cg = build_call_graph(&p).unwrap();
    assert_eq!(inline_functions(&p, &cg), Err(CfgError::MissingMain));
}

#[test]
fn infinite_loops_get_exit_edge() {
    for src in [
        "int main() { int x = 0; L: x = x + 1; goto L; }",
        "int main() { int x = 0; while (1) { x = x + 1; } }",
        "int main() { int x = 0; do { x = x + 1; } while (true); }",
        "int main() { int x = 0; for_ever: goto for_ever; }",
    ] {
        let cfg = cfg_of(src);
        cfg.validate().unwrap();
    }
}

#[test]
fn unreachable_code_is_pruned() {
    let cfg = cfg_of("int main() { int x = 0; return x; x = 5; assert(x == 5); }");
    assert!(!texts(&cfg).contains("x = 5"));
}

#[test]
fn switch_cascade_and_fallthrough() {
    let cfg = cfg_of(
        "extern int n(); int main() { int x = n(); int y = 0;
         switch (x) { case 1: y = 1; case 2: y = y + 2; break; default: y = 9; }
         assert(y != 0); return 0; }",
    );
    let t = texts(&cfg);
    assert!(t.contains("branch(x == 1)") && t.contains("branch(x == 2)"), "{t:?}");
    let y1 = find(&cfg, "y = 1");
    let Succ::Jump(next) = cfg.succ(y1) else { panic!() };
    // fallthrough reaches case 2's body (through its label join)
    let reach = |mut n: NodeId| {
        while cfg.instr(n).kind == InstrKind::Skip {
            let Succ::Jump(m) = cfg.succ(n) else { break };
            n = m;
        }
        n
    };
    assert_eq!(reach(next), find(&cfg, "y = y + 2"));
}

#[test]
fn globals_initialized_in_main() {
    let cfg = cfg_of("int g; int h = 3; int main() { g = g + h; return 0; }");
    let t = texts(&cfg);
    assert!(t.contains("g = 0") && t.contains("h = 3"), "{t:?}");
}

#[test]
fn int_conditions_use_truthiness() {
    let cfg = cfg_of("extern int n(); int main() { int x = n(); bool b = !x && true; assert(x); return 0; }");
    let t = texts(&cfg);
    assert!(t.contains("b = !(x != 0) && true"), "{t:?}");
    assert!(t.contains("assert(x != 0)"), "{t:?}");
}

#[test]
fn calls_in_short_circuit_rhs_are_rejected() {
    let p = parse_source("int f() { return 1; } int main() { int x = 0; bool b = x > 0 && f() > 0; return 0; }")
        .unwrap();
    let cg = build_call_graph(&p).unwrap();
    assert!(matches!(inline_functions(&p, &cg), Err(CfgError::Unsupported(_))));
}

#[test]
fn dot_output_labels_branches() {
    let dot = cfg_of(SUM_LOOP).to_dot();
    assert!(dot.starts_with("digraph cfg {"));
    assert!(dot.contains("[label=\"T\"]") && dot.contains("[label=\"F\"]"));
    assert!(dot.contains("label=\"branch(i < 11)\""));
}
