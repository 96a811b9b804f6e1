//! Constant folding, constant propagation and dead branch elimination.

use std::time::Instant;

use serde::Serialize;

use crate::cfg::{Cfg, InstrKind, NodeId, Succ};
use crate::dataflow::{ud_chains, UdChain};
use crate::ir::{apply_binary, Expr, UnOp};

/// Abstract value of a variable read: no definition seen, one literal, or
/// several (or non-literal) values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstValue {
    Bottom,
    Const(Expr),
    Top,
}

impl ConstValue {
    pub fn join(self, other: ConstValue) -> ConstValue {
        match (self, other) {
            (ConstValue::Bottom, x) | (x, ConstValue::Bottom) => x,
            (ConstValue::Const(a), ConstValue::Const(b)) if a == b => ConstValue::Const(a),
            _ => ConstValue::Top,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OptimizationReport {
    pub rounds: usize,
    pub folded: usize,
    pub propagated: usize,
    pub eliminated: usize,
    /// Literal divisions by zero left in place.
    pub division_by_zero: usize,
    pub cap_exceeded: bool,
    pub time_ms: u128,
}

pub const MAX_ROUNDS: usize = 50;

/// Folds one expression bottom-up. Returns the new expression and the number
/// of divisions by a literal zero that could not be folded.
pub fn fold_expr(e: &Expr) -> (Expr, usize) {
    match e {
        Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => (e.clone(), 0),
        Expr::Unary(op, x) => {
            let (x, z) = fold_expr(x);
            let folded = match (op, &x) {
                (UnOp::Neg, Expr::Int(n)) => Expr::Int(n.wrapping_neg()),
                (UnOp::Not, Expr::Bool(b)) => Expr::Bool(!b),
                (UnOp::Not, Expr::Int(n)) => Expr::Bool(*n == 0),
                _ => Expr::unary(*op, x),
            };
            (folded, z)
        }
        Expr::Binary(op, l, r) => {
            let (l, zl) = fold_expr(l);
            let (r, zr) = fold_expr(r);
            let mut zeros = zl + zr;
            let lit = |e: &Expr| match e {
                Expr::Int(n) => Some(*n),
                Expr::Bool(b) => Some(*b as i32),
                _ => None,
            };
            let folded = match (lit(&l), lit(&r)) {
                (Some(a), Some(b)) => match apply_binary(*op, a, b) {
                    Ok(v) if op.is_arithmetic() => Expr::Int(v),
                    Ok(v) => Expr::Bool(v != 0),
                    Err(_) => {
                        zeros += 1;
                        Expr::binary(*op, l, r)
                    }
                },
                _ => Expr::binary(*op, l, r),
            };
            (folded, zeros)
        }
    }
}

fn count_changes(cfg: &Cfg, out: &Cfg) -> usize {
    cfg.node_ids()
        .filter(|&id| !out.contains(id) || cfg.instr(id) != out.instr(id))
        .count()
}

/// Evaluates constant subexpressions; returns the new graph, the number of
/// changed nodes and the number of unfoldable divisions by zero.
pub fn fold_constants(cfg: &Cfg) -> (Cfg, usize, usize) {
    let mut out = cfg.clone();
    let mut zeros = 0;
    let ids: Vec<NodeId> = cfg.node_ids().collect();
    for id in ids {
        let kind = cfg.instr(id).kind.map_exprs(|e| {
            let (f, z) = fold_expr(e);
            zeros += z;
            f
        });
        out.set_kind(id, kind);
    }
    let changed = count_changes(cfg, &out);
    (out, changed, zeros)
}

/// Replaces each variable read whose reaching definitions all assign the
/// same literal. Returns the new graph and the number of changed nodes.
pub fn propagate_constants(cfg: &Cfg, ud: &UdChain) -> (Cfg, usize) {
    let mut out = cfg.clone();
    for instr in cfg.instructions() {
        let reads = instr.reads();
        if reads.is_empty() {
            continue;
        }
        let mut known = std::collections::BTreeMap::new();
        for var in &reads {
            let mut value = ConstValue::Bottom;
            for d in ud.defs_of(instr.id, var) {
                let v = match &cfg.instr(d.site).kind {
                    InstrKind::Assign { expr, .. } if expr.is_literal() => {
                        ConstValue::Const(expr.clone())
                    }
                    _ => ConstValue::Top,
                };
                value = value.join(v);
            }
            if let ConstValue::Const(c) = value {
                known.insert(var.clone(), c);
            }
        }
        if known.is_empty() {
            continue;
        }
        let kind = instr
            .kind
            .map_exprs(|e| e.map_vars(&mut |v| known.get(v).cloned()));
        out.set_kind(instr.id, kind);
    }
    let changed = count_changes(cfg, &out);
    (out, changed)
}

/// Turns branches on literal conditions into jumps to the live successor,
/// then prunes what became unreachable. A branch is kept when removing it
/// would leave a region without a path to the exit.
pub fn eliminate_dead_branches(cfg: &Cfg) -> (Cfg, usize) {
    let mut out = cfg.clone();
    let mut removed = 0;
    let candidates: Vec<NodeId> = cfg
        .instructions()
        .filter(|i| matches!(&i.kind, InstrKind::Branch(c) if c.as_bool().is_some()))
        .map(|i| i.id)
        .collect();
    for id in candidates {
        if !out.contains(id) {
            continue;
        }
        let InstrKind::Branch(c) = &out.instr(id).kind else {
            continue;
        };
        let Succ::Branch { on_true, on_false } = out.succ(id) else {
            continue;
        };
        let live = if c.as_bool() == Some(true) { on_true } else { on_false };
        if live == id {
            continue;
        }
        let mut trial = out.clone();
        trial.remap_succs(|n| if n == id { live } else { n });
        trial.remove_node(id);
        prune_unreachable(&mut trial);
        let reaching = trial.reaching_exit();
        if trial.node_ids().all(|n| reaching.contains(&n)) {
            removed += out.len() - trial.len();
            out = trial;
        }
    }
    (out, removed)
}

fn prune_unreachable(cfg: &mut Cfg) {
    let live = cfg.reachable_from_entry();
    let dead: Vec<NodeId> = cfg
        .node_ids()
        .filter(|n| !live.contains(n) && *n != cfg.exit())
        .collect();
    for n in dead {
        cfg.remove_node(n);
    }
}

/// Repeats fold, propagate and eliminate until nothing changes, at most
/// [`MAX_ROUNDS`] times. With `enabled == false` the graph is returned as is.
pub fn optimize_fixpoint(cfg: &Cfg, enabled: bool) -> (Cfg, OptimizationReport) {
    let start = Instant::now();
    let mut report = OptimizationReport::default();
    if !enabled {
        return (cfg.clone(), report);
    }
    let mut cur = cfg.clone();
    loop {
        if report.rounds == MAX_ROUNDS {
            report.cap_exceeded = true;
            break;
        }
        report.rounds += 1;
        let (folded, n_fold, zeros) = fold_constants(&cur);
        let ud = ud_chains(&folded);
        let (propagated, n_prop) = propagate_constants(&folded, &ud);
        let (eliminated, n_elim) = eliminate_dead_branches(&propagated);
        report.folded += n_fold;
        report.propagated += n_prop;
        report.eliminated += n_elim;
        report.division_by_zero = zeros;
        cur = eliminated;
        if n_fold + n_prop + n_elim == 0 {
            break;
        }
    }
    report.time_ms = start.elapsed().as_millis();
    (cur, report)
}
