use super::*;

const SUM_LOOP: &str = include_str!("../../tests/fixtures/sum_loop.c");

fn cfg_of(src: &str) -> Cfg {
    prepare(src, false).unwrap().0
}

fn config(abbr: &str) -> RunConfig {
    RunConfig::default().with_abbreviation(abbr).unwrap()
}

#[test]
fn interprets_sum_loop() {
    let trace = interpret(&cfg_of(SUM_LOOP), &[], 10_000);
    assert_eq!(trace.end, TraceEnd::Exit);
    assert_eq!(trace.final_store["i"], 11);
    assert_eq!(trace.final_store["sum"], 55);
    assert_eq!(trace.assert_outcomes.len(), 2);
    assert!(trace.assert_outcomes.iter().all(|(_, ok)| *ok));
    assert!(!trace.steps.is_empty());
}

#[test]
fn division_by_zero_is_trapped() {
    let cfg = cfg_of("int main() { int x = 1 / 0; }");
    let trace = interpret(&cfg, &[], 100);
    let TraceEnd::DivisionByZero(n) = trace.end else {
        panic!("{:?}", trace.end);
    };
    assert!(cfg.instr(n).to_string().starts_with("x = "));
}

#[test]
fn step_limit() {
    let cfg = cfg_of("int main() { int x = 0; while (1) { x = x + 1; } }");
    assert_eq!(interpret(&cfg, &[], 100).end, TraceEnd::MaxStepsExceeded);
}

#[test]
fn havoc_stream_and_failed_assert() {
    let src = "extern int nd(); int main() { int x = nd(); int y = nd(); assert(x + y != 5); }";
    let cfg = cfg_of(src);
    let ok = interpret(&cfg, &[1, 2], 100);
    assert_eq!(ok.end, TraceEnd::Exit);
    let bad = interpret(&cfg, &[2, 3], 100);
    assert!(bad.failed_assert().is_some());
    assert_eq!(bad.assert_outcomes, vec![(bad.failed_assert().unwrap(), false)]);
    // exhausted stream yields zeros
    assert_eq!(interpret(&cfg, &[5], 100).end, TraceEnd::AssertFailed(bad.failed_assert().unwrap()));
}

#[test]
fn keyed_stream_is_deterministic() {
    let cfg = cfg_of("extern int nd(); int main() { int x = nd(); while (x < 3) { x = nd(); } }");
    let a = run(&cfg, &Store::new(), &HavocStream::Keyed(7), 1000, |_, _| {});
    let b = run(&cfg, &Store::new(), &HavocStream::Keyed(7), 1000, |_, _| {});
    assert_eq!(a, b);
}

#[test]
fn abbreviation_round_trip() {
    let (slicer, opt, search) = RunConfig::parse_abbreviation("VFD").unwrap();
    assert_eq!((slicer, opt, search), (Slicer::Value, false, Search::Dfs));
    assert_eq!(config("VFD").abbreviation(), "VFD");
    assert!(RunConfig::parse_abbreviation("XFD").is_err());
    assert!(RunConfig::parse_abbreviation("VF").is_err());
    let matrix = RunConfig::default().matrix();
    let names: std::collections::BTreeSet<String> = matrix.iter().map(|c| c.abbreviation()).collect();
    assert_eq!(names.len(), 16);
    for n in names {
        assert_eq!(config(&n).abbreviation(), n);
    }
}

#[test]
fn sum_loop_backward_dfs() {
    let units = analyze(SUM_LOOP, "sum_loop.c", &config("BFD")).unwrap();
    assert_eq!(units.len(), 2);
    for (i, u) in units.iter().enumerate() {
        assert_eq!(u.report.slice_no, Some(i));
        assert_eq!(u.report.safe, Safety::Safe, "{:?}", u.report);
        assert_eq!(u.report.end_locs, u.report.init_locs);
        assert_eq!(u.report.end_edges, u.report.init_edges);
    }
    assert_eq!(units[1].report.slice_id(), "sum_loop.c#1");
}

#[test]
fn unsliced_run_is_one_unit() {
    let src = "extern int nd(); int main() { int l = 0; if (nd()) { l = 1; } assert(l <= 1); \
               if (l == 1) { l = 0; } assert(l == 0); assert(l >= 0); }";
    let units = analyze(src, "locks.c", &config("NTB")).unwrap();
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].report.slice_no, None);
    assert_eq!(units[0].report.safe, Safety::Safe);
    assert_eq!(analyze(src, "locks.c", &config("BTB")).unwrap().len(), 3);
}

#[test]
fn thin_slice_refines_until_real() {
    // the thin slice of the assert drops the guard on x, so its first
    // counterexample goes through an abstract predicate
    let src = "extern int nd(); int main() { int x = nd(); int y = 0; \
               if (x > 0) { y = 1; } else { y = 2; } assert(y != 2 || x <= 0); }";
    for abbr in ["TFB", "VFD", "BFB", "NFB"] {
        let units = analyze(src, "t.c", &config(abbr)).unwrap();
        assert_eq!(aggregate(units.iter().map(|u| u.report.safe)), Safety::Safe, "{abbr}");
    }
    let src_bad = "extern int nd(); int main() { int x = nd(); int y = 0; \
                   if (x > 0) { y = 1; } else { y = 2; } assert(y != 2 || x < 0); }";
    for abbr in ["TFB", "TFD", "VTB", "BFB", "NFB"] {
        let units = analyze(src_bad, "t.c", &config(abbr)).unwrap();
        assert_eq!(units.len(), 1);
        let u = &units[0];
        assert_eq!(u.report.safe, Safety::Unsafe, "{abbr}");
        let trace = replay_witness(&u.cfg, u.witness().unwrap(), 10_000);
        assert!(trace.failed_assert().is_some(), "{abbr}");
        if abbr.starts_with('T') {
            assert!(u.report.slice_refinements > 0, "{abbr}");
            assert!(!u.counterexample.as_ref().unwrap().uses_abstract_predicate(&u.cfa));
        }
    }
}

#[test]
fn no_asserts() {
    let src = "int main() { int x = 1; }";
    assert!(analyze(src, "f.c", &config("TFB")).unwrap().is_empty());
    assert_eq!(analyze(src, "f.c", &config("NFB")).unwrap()[0].report.safe, Safety::Safe);
}

#[test]
fn frontend_errors_abort() {
    assert!(matches!(
        analyze("int main( {", "f.c", &config("NFB")),
        Err(PipelineError::Frontend(_))
    ));
}

#[test]
fn aggregation() {
    use Safety::*;
    assert_eq!(aggregate([Safe, Safe]), Safe);
    assert_eq!(aggregate([Safe, Unknown]), Unknown);
    assert_eq!(aggregate([Unknown, Unsafe, Safe]), Unsafe);
    assert_eq!(aggregate([]), Unknown);
}

#[test]
fn metrics_output() {
    let units = analyze(SUM_LOOP, "locks/locks11_true.c", &config("BFD")).unwrap();
    let reports: Vec<SliceReport> = units.into_iter().map(|u| u.report).collect();
    let csv = String::from_utf8(emit_metrics(&reports, MetricsFormat::Csv)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], CSV_HEADER.join(","));
    assert!(lines[2].starts_with("locks/locks11_true.c#1,1,BACKWARD,false,DFS,true,"));
    let empty = String::from_utf8(emit_metrics(&[], MetricsFormat::Csv)).unwrap();
    assert_eq!(empty.lines().count(), 1);
    let jsonl = String::from_utf8(emit_metrics(&reports, MetricsFormat::Jsonl)).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
    let v: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert!(v["arg_total"].as_u64().unwrap() >= v["arg_size"].as_u64().unwrap());
}

#[test]
fn timeout_gives_unknown() {
    let mut c = config("NFB");
    c.timeout = Some(Duration::ZERO);
    let units = analyze(SUM_LOOP, "f.c", &c).unwrap();
    assert_eq!(units[0].report.safe, Safety::Unknown);
    let mut c = config("BFB");
    c.timeout = Some(Duration::ZERO);
    assert!(analyze(SUM_LOOP, "f.c", &c).unwrap().iter().all(|u| u.report.safe == Safety::Unknown));
}

#[test]
fn dumps() {
    let c = config("BFB");
    assert!(dump(SUM_LOOP, DumpKind::Ast, &c).unwrap().contains("while"));
    assert!(dump(SUM_LOOP, DumpKind::Cfg, &c).unwrap().starts_with("digraph"));
    assert!(dump(SUM_LOOP, DumpKind::Pdg, &c).unwrap().starts_with("digraph"));
    let cfa = dump(SUM_LOOP, DumpKind::Cfa, &c).unwrap();
    assert_eq!(cfa.matches("# slice").count(), 2);
}
