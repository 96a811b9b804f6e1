//! Reference interpreter over CFGs with 32-bit wrap-around arithmetic.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::cfg::{Cfg, InstrKind, NodeId, Succ};
use crate::ir::{EvalError, Type};

pub type Store = BTreeMap<String, i32>;

/// Where havoc values come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HavocStream {
    /// Consumed in execution order; 0 once exhausted.
    Sequence(Vec<i32>),
    /// The k-th execution of node n gets a value derived from (seed, n, k),
    /// so a slice sees the same values as the program it came from.
    Keyed(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEnd {
    Exit,
    AssertFailed(NodeId),
    DivisionByZero(NodeId),
    MaxStepsExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    /// Executed instructions with the store before each of them. Empty
    /// unless recording was requested.
    pub steps: Vec<(NodeId, Store)>,
    pub assert_outcomes: Vec<(NodeId, bool)>,
    pub end: TraceEnd,
    pub final_store: Store,
    /// Havoc values consumed, in order.
    pub havocs: Vec<i32>,
}

impl ExecutionTrace {
    pub fn failed_assert(&self) -> Option<NodeId> {
        match self.end {
            TraceEnd::AssertFailed(n) => Some(n),
            _ => None,
        }
    }
}

fn keyed_value(seed: u64, node: NodeId, k: u32) -> i32 {
    let key = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .rotate_left(17)
        ^ ((node.0 as u64) << 32 | k as u64);
    let mut rng = StdRng::seed_from_u64(key);
    if rng.gen_bool(0.9) {
        rng.gen_range(-16..=16)
    } else {
        rng.gen()
    }
}

struct Havocs<'a> {
    stream: &'a HavocStream,
    pos: usize,
    seen: BTreeMap<NodeId, u32>,
}

impl Havocs<'_> {
    fn next(&mut self, node: NodeId) -> i32 {
        match self.stream {
            HavocStream::Sequence(values) => {
                let v = values.get(self.pos).copied().unwrap_or(0);
                self.pos += 1;
                v
            }
            HavocStream::Keyed(seed) => {
                let k = self.seen.entry(node).or_insert(0);
                *k += 1;
                keyed_value(*seed, node, *k - 1)
            }
        }
    }
}

/// Runs `cfg` from `initial` (missing variables start at 0). `visit` sees
/// every instruction with the store before it executes.
pub fn run(
    cfg: &Cfg,
    initial: &Store,
    stream: &HavocStream,
    max_steps: usize,
    mut visit: impl FnMut(NodeId, &Store),
) -> ExecutionTrace {
    let mut store: Store = cfg.vars().keys().map(|v| (v.clone(), 0)).collect();
    store.extend(initial.iter().map(|(k, v)| (k.clone(), *v)));
    let mut havocs = Havocs {
        stream,
        pos: 0,
        seen: BTreeMap::new(),
    };
    let mut trace = ExecutionTrace {
        steps: Vec::new(),
        assert_outcomes: Vec::new(),
        end: TraceEnd::MaxStepsExceeded,
        final_store: Store::new(),
        havocs: Vec::new(),
    };
    let mut pc = cfg.entry();
    let mut steps = 0usize;
    let end = loop {
        if steps >= max_steps {
            break TraceEnd::MaxStepsExceeded;
        }
        steps += 1;
        visit(pc, &store);
        let lookup = |v: &str| store.get(v).copied().unwrap_or(0);
        let mut taken = None;
        match &cfg.instr(pc).kind {
            InstrKind::Exit => break TraceEnd::Exit,
            InstrKind::Entry | InstrKind::Skip => {}
            InstrKind::Assign { var, expr } => match expr.eval(&lookup) {
                Ok(v) => {
                    store.insert(var.clone(), v);
                }
                Err(EvalError::DivisionByZero) => break TraceEnd::DivisionByZero(pc),
            },
            InstrKind::Havoc { var, .. } => {
                let mut v = havocs.next(pc);
                trace.havocs.push(v);
                if cfg.var_type(var) == Some(Type::Bool) {
                    v = (v != 0) as i32;
                }
                store.insert(var.clone(), v);
            }
            InstrKind::Branch(c) => match c.eval(&lookup) {
                Ok(v) => taken = Some(v != 0),
                Err(EvalError::DivisionByZero) => break TraceEnd::DivisionByZero(pc),
            },
            InstrKind::AbstractPredicate(_) => {
                let v = havocs.next(pc);
                trace.havocs.push(v);
                taken = Some(v != 0);
            }
            InstrKind::Assert(c) => match c.eval(&lookup) {
                Ok(v) => {
                    trace.assert_outcomes.push((pc, v != 0));
                    if v == 0 {
                        break TraceEnd::AssertFailed(pc);
                    }
                }
                Err(EvalError::DivisionByZero) => break TraceEnd::DivisionByZero(pc),
            },
        }
        pc = match (cfg.succ(pc), taken) {
            (Succ::Jump(t), _) => t,
            (Succ::Branch { on_true, .. }, Some(true)) => on_true,
            (Succ::Branch { on_false, .. }, _) => on_false,
            (Succ::None, _) => break TraceEnd::Exit,
        };
    };
    trace.end = end;
    trace.final_store = store;
    trace
}

/// Runs `cfg` from the all-zero store and records every step.
pub fn interpret(cfg: &Cfg, havoc_stream: &[i32], max_steps: usize) -> ExecutionTrace {
    let mut steps = Vec::new();
    let stream = HavocStream::Sequence(havoc_stream.to_vec());
    let mut trace = run(cfg, &Store::new(), &stream, max_steps, |n, s| {
        steps.push((n, s.clone()))
    });
    trace.steps = steps;
    trace
}
