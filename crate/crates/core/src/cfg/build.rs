//! Lowering of the typed AST to an instruction graph, inlining every call to
//! a function with a body.

use std::collections::{BTreeSet, HashMap};

use crate::frontend::ast::{self, CallSiteId, ExprKind, Program, Stmt, StmtKind};
use crate::ir::{BinOp, Expr, Type, UnOp};

use super::{build_call_graph, CallGraph, Cfg, CfgError, InstrKind, NodeId, Succ};

/// CFG of `function` with all callees inlined. Parameters and globals start
/// unconstrained unless `function` is `main`, where globals are initialized.
pub fn build_cfg(program: &Program, function: &str) -> Result<Cfg, CfgError> {
    if let Some(cycle) = crate::frontend::find_call_cycle(program) {
        return Err(CfgError::Recursion(cycle));
    }
    let f = program
        .function(function)
        .filter(|f| f.body.is_some())
        .ok_or_else(|| CfgError::UnknownFunction(function.to_string()))?;
    let mut b = Builder::new(program);
    let entry = b.cfg.entry();
    b.pending.push((entry, Slot::Next));
    for (name, ty) in b.globals.clone() {
        b.cfg.declare_var(name, ty);
    }
    if function == "main" {
        for decl in program.globals() {
            for d in &decl.declarators {
                let value = match &d.init {
                    Some(e) => b.value(e, decl.ty, &mut Frame::root(entry))?,
                    None => default_value(decl.ty),
                };
                b.emit(
                    InstrKind::Assign {
                        var: d.name.clone(),
                        expr: value,
                    },
                    d.span.line,
                );
            }
        }
    }
    for p in &f.params {
        b.cfg.declare_var(p.name.clone(), p.ty);
    }
    let exit = b.cfg.exit();
    let mut frame = Frame::root(exit);
    b.block(f.body.as_deref().unwrap_or_default(), &mut frame)?;
    b.attach(exit);
    let mut cfg = b.cfg;
    cfg.normalize();
    remove_trivial_skips(&mut cfg);
    Ok(cfg)
}

/// Whole-program CFG rooted at `main`.
pub fn inline_functions(program: &Program, call_graph: &CallGraph) -> Result<Cfg, CfgError> {
    if !call_graph.nodes.iter().any(|n| n == "main")
        || program.function("main").is_none_or(|f| f.body.is_none())
    {
        return Err(CfgError::MissingMain);
    }
    // the graph may have been built from another program value; recheck
    build_call_graph(program)?;
    build_cfg(program, "main")
}

fn default_value(ty: Type) -> Expr {
    match ty {
        Type::Int => Expr::Int(0),
        Type::Bool => Expr::Bool(false),
    }
}

/// Splices out skip nodes that are not join points (fewer than two
/// predecessors), keeping ids of all other nodes.
fn remove_trivial_skips(cfg: &mut Cfg) {
    loop {
        let preds = cfg.predecessors();
        let victim = cfg.node_ids().find(|&id| {
            matches!(cfg.instr(id).kind, InstrKind::Skip)
                && preds[&id].len() < 2
                && matches!(cfg.succ(id), Succ::Jump(t) if t != id)
        });
        let Some(victim) = victim else { break };
        let Succ::Jump(target) = cfg.succ(victim) else {
            unreachable!()
        };
        cfg.remap_succs(|n| if n == victim { target } else { n });
        cfg.remove_node(victim);
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Next,
    True,
    False,
}

struct Frame {
    /// Rename suffix of an inlined instance; `None` for the root function.
    suffix: Option<String>,
    ret_var: Option<String>,
    local_exit: NodeId,
    labels: HashMap<String, NodeId>,
    breaks: Vec<NodeId>,
    continues: Vec<NodeId>,
}

impl Frame {
    fn root(exit: NodeId) -> Frame {
        Frame {
            suffix: None,
            ret_var: None,
            local_exit: exit,
            labels: HashMap::new(),
            breaks: Vec::new(),
            continues: Vec::new(),
        }
    }
}

struct Builder<'p> {
    program: &'p Program,
    globals: Vec<(String, Type)>,
    global_names: BTreeSet<String>,
    cfg: Cfg,
    /// Open out-slots that the next emitted node will be connected to.
    pending: Vec<(NodeId, Slot)>,
    instances: HashMap<String, u32>,
    temps: u32,
}

impl<'p> Builder<'p> {
    fn new(program: &'p Program) -> Builder<'p> {
        let globals: Vec<(String, Type)> = program
            .globals()
            .flat_map(|d| d.declarators.iter().map(move |x| (x.name.clone(), d.ty)))
            .collect();
        Builder {
            program,
            global_names: globals.iter().map(|(n, _)| n.clone()).collect(),
            globals,
            cfg: Cfg::new(),
            pending: Vec::new(),
            instances: HashMap::new(),
            temps: 0,
        }
    }

    fn connect(&mut self, from: NodeId, slot: Slot, to: NodeId) {
        let succ = match (slot, self.cfg.succ(from)) {
            (Slot::Next, _) => Succ::Jump(to),
            (Slot::True, Succ::Branch { on_false, .. }) => Succ::Branch {
                on_true: to,
                on_false,
            },
            (Slot::False, Succ::Branch { on_true, .. }) => Succ::Branch {
                on_true,
                on_false: to,
            },
            (_, other) => unreachable!("branch slot on {other:?}"),
        };
        self.cfg.set_succ(from, succ);
    }

    /// Connects all open slots to `to`.
    fn attach(&mut self, to: NodeId) {
        for (from, slot) in std::mem::take(&mut self.pending) {
            self.connect(from, slot, to);
        }
    }

    /// Connects open slots to `id` and continues from it.
    fn place(&mut self, id: NodeId) {
        self.attach(id);
        self.pending.push((id, Slot::Next));
    }

    fn emit(&mut self, kind: InstrKind, line: u32) -> NodeId {
        let id = self.cfg.add_node(kind, line);
        self.place(id);
        id
    }

    /// Emits a branch; afterwards no slot is open, the caller picks one.
    fn emit_branch(&mut self, cond: Expr, line: u32) -> NodeId {
        let id = self.cfg.add_node(InstrKind::Branch(cond), line);
        let exit = self.cfg.exit();
        self.cfg.set_succ(
            id,
            Succ::Branch {
                on_true: exit,
                on_false: exit,
            },
        );
        self.attach(id);
        id
    }

    fn skip(&mut self, line: u32) -> NodeId {
        self.cfg.add_node(InstrKind::Skip, line)
    }

    fn rename(&self, name: &str, frame: &Frame) -> String {
        match &frame.suffix {
            Some(s) if !self.global_names.contains(name) => format!("{name}@{s}"),
            _ => name.to_string(),
        }
    }

    fn declare(&mut self, name: &str, ty: Type, frame: &Frame) -> String {
        let renamed = self.rename(name, frame);
        self.cfg.declare_var(renamed.clone(), ty);
        renamed
    }

    fn block(&mut self, body: &[Stmt], frame: &mut Frame) -> Result<(), CfgError> {
        body.iter().try_for_each(|s| self.stmt(s, frame))
    }

    fn label_node(&mut self, label: &str, frame: &mut Frame) -> NodeId {
        if let Some(&id) = frame.labels.get(label) {
            return id;
        }
        let id = self.skip(0);
        frame.labels.insert(label.to_string(), id);
        id
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut Frame) -> Result<(), CfgError> {
        let line = s.span.line;
        match &s.kind {
            StmtKind::Block(body) => self.block(body, frame)?,
            StmtKind::Decl(decl) => {
                for d in &decl.declarators {
                    let var = self.declare(&d.name, decl.ty, frame);
                    match &d.init {
                        Some(init) => self.assign(var, init, decl.ty, line, frame)?,
                        None => {
                            self.emit(InstrKind::Havoc { var, reads: Vec::new() }, line);
                        }
                    }
                }
            }
            StmtKind::Assign { target, value } => {
                let var = self.rename(target, frame);
                let ty = self.cfg.var_type(&var).unwrap_or(Type::Int);
                self.assign(var, value, ty, line, frame)?;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let c = self.condition(cond, frame)?;
                let b = self.emit_branch(c, line);
                self.pending.push((b, Slot::True));
                self.stmt(then_branch, frame)?;
                let after_then = std::mem::take(&mut self.pending);
                self.pending.push((b, Slot::False));
                if let Some(e) = else_branch {
                    self.stmt(e, frame)?;
                }
                self.pending.extend(after_then);
                let join = self.skip(line);
                self.place(join);
            }
            StmtKind::While { cond, body } => {
                let head = if has_call(cond) {
                    let h = self.skip(line);
                    self.place(h);
                    Some(h)
                } else {
                    None
                };
                let c = self.condition(cond, frame)?;
                let b = self.emit_branch(c, line);
                let head = head.unwrap_or(b);
                let after = self.skip(line);
                self.pending.push((b, Slot::True));
                frame.breaks.push(after);
                frame.continues.push(head);
                let r = self.stmt(body, frame);
                frame.breaks.pop();
                frame.continues.pop();
                r?;
                self.attach(head);
                self.pending.push((b, Slot::False));
                self.place(after);
            }
            StmtKind::DoWhile { body, cond } => {
                let top = self.skip(line);
                self.place(top);
                let test = self.skip(line);
                let after = self.skip(line);
                frame.breaks.push(after);
                frame.continues.push(test);
                let r = self.stmt(body, frame);
                frame.breaks.pop();
                frame.continues.pop();
                r?;
                self.place(test);
                let c = self.condition(cond, frame)?;
                let b = self.emit_branch(c, cond.span.line.max(line));
                self.connect(b, Slot::True, top);
                self.pending.push((b, Slot::False));
                self.place(after);
            }
            StmtKind::Switch { scrutinee, cases } => {
                let scrut = self.value(scrutinee, Type::Int, frame)?;
                let targets: Vec<NodeId> = cases.iter().map(|c| self.skip(c.span.line)).collect();
                let after = self.skip(line);
                for (case, &target) in cases.iter().zip(&targets) {
                    let Some(v) = case.label else { continue };
                    let test = Expr::binary(BinOp::Eq, scrut.clone(), Expr::Int(v));
                    let b = self.emit_branch(test, case.span.line);
                    self.connect(b, Slot::True, target);
                    self.pending.push((b, Slot::False));
                }
                match cases.iter().position(|c| c.label.is_none()) {
                    Some(d) => self.attach(targets[d]),
                    None => self.attach(after),
                }
                frame.breaks.push(after);
                let mut result = Ok(());
                for (case, &target) in cases.iter().zip(&targets) {
                    self.place(target);
                    result = self.block(&case.body, frame);
                    if result.is_err() {
                        break;
                    }
                }
                frame.breaks.pop();
                result?;
                self.place(after);
            }
            StmtKind::Break => {
                let target = *frame.breaks.last().expect("checked by the type checker");
                self.attach(target);
            }
            StmtKind::Continue => {
                let target = *frame.continues.last().expect("checked by the type checker");
                self.attach(target);
            }
            StmtKind::Goto(label) => {
                let target = self.label_node(label, frame);
                self.attach(target);
            }
            StmtKind::Labeled { label, stmt } => {
                let node = self.label_node(label, frame);
                self.place(node);
                self.stmt(stmt, frame)?;
            }
            StmtKind::Expr(e) => {
                let (callee, args, _) = e.as_call().expect("checked by the type checker");
                let mut temps = HashMap::new();
                for a in args {
                    self.hoist_calls(a, &mut temps, frame)?;
                }
                let args: Vec<Expr> = args.iter().map(|a| self.to_ir(a, &temps, frame)).collect();
                self.call(callee, args, None, line)?;
            }
            StmtKind::Return(value) => {
                if let Some(e) = value {
                    let ty = e.ty.unwrap_or(Type::Int);
                    match frame.ret_var.clone() {
                        Some(ret) => self.assign(ret, e, ty, line, frame)?,
                        None => {
                            // value unused, but nested calls still execute
                            let mut temps = HashMap::new();
                            self.hoist_calls(e, &mut temps, frame)?;
                        }
                    }
                }
                let exit = frame.local_exit;
                self.attach(exit);
            }
            StmtKind::Assert(cond) => {
                let c = self.condition(cond, frame)?;
                self.emit(InstrKind::Assert(c), line);
            }
            StmtKind::Empty => {}
        }
        Ok(())
    }

    /// `var = value`, routing a top-level call result directly into `var`.
    fn assign(
        &mut self,
        var: String,
        value: &ast::Expr,
        ty: Type,
        line: u32,
        frame: &mut Frame,
    ) -> Result<(), CfgError> {
        if let Some((callee, args, _)) = value.as_call() {
            let mut temps = HashMap::new();
            for a in args {
                self.hoist_calls(a, &mut temps, frame)?;
            }
            let args: Vec<Expr> = args.iter().map(|a| self.to_ir(a, &temps, frame)).collect();
            return self.call(callee, args, Some(var), line);
        }
        let expr = self.value(value, ty, frame)?;
        self.emit(InstrKind::Assign { var, expr }, line);
        Ok(())
    }

    /// Lowers `e`, first emitting the calls it contains.
    fn value(&mut self, e: &ast::Expr, ty: Type, frame: &mut Frame) -> Result<Expr, CfgError> {
        let mut temps = HashMap::new();
        self.hoist_calls(e, &mut temps, frame)?;
        Ok(match ty {
            Type::Bool => self.to_bool(e, &temps, frame),
            Type::Int => self.to_ir(e, &temps, frame),
        })
    }

    fn condition(&mut self, e: &ast::Expr, frame: &mut Frame) -> Result<Expr, CfgError> {
        self.value(e, Type::Bool, frame)
    }

    fn hoist_calls(
        &mut self,
        e: &ast::Expr,
        temps: &mut HashMap<CallSiteId, String>,
        frame: &mut Frame,
    ) -> Result<(), CfgError> {
        check_short_circuit_calls(e, self.program)?;
        let mut calls = Vec::new();
        e.for_each_call(&mut |c| calls.push(c));
        for c in calls {
            let (callee, args, site) = c.as_call().expect("call");
            let args: Vec<Expr> = args.iter().map(|a| self.to_ir(a, temps, frame)).collect();
            self.temps += 1;
            let temp = format!("t@{}", self.temps);
            let ty = c.ty.unwrap_or(Type::Int);
            self.cfg.declare_var(temp.clone(), ty);
            self.call(callee, args, Some(temp.clone()), e.span.line)?;
            temps.insert(site, temp);
        }
        Ok(())
    }

    /// Emits a call whose arguments are already lowered. Calls to functions
    /// without a body become a havoc of the target.
    fn call(
        &mut self,
        callee: &str,
        args: Vec<Expr>,
        target: Option<String>,
        line: u32,
    ) -> Result<(), CfgError> {
        let program = self.program;
        let f = program
            .function(callee)
            .ok_or_else(|| CfgError::UnknownFunction(callee.to_string()))?;
        let Some(body) = &f.body else {
            if let Some(var) = target {
                self.emit(InstrKind::Havoc { var, reads: args }, line);
            }
            return Ok(());
        };
        let n = self.instances.entry(callee.to_string()).or_insert(0);
        *n += 1;
        let suffix = format!("{callee}.{n}");
        let local_exit = self.skip(line);
        let ret_var = match (f.ret, &target) {
            (Some(ty), Some(_)) => {
                let name = format!("ret@{suffix}");
                self.cfg.declare_var(name.clone(), ty);
                Some(name)
            }
            _ => None,
        };
        let mut inner = Frame {
            suffix: Some(suffix),
            ret_var: ret_var.clone(),
            local_exit,
            labels: HashMap::new(),
            breaks: Vec::new(),
            continues: Vec::new(),
        };
        for (p, arg) in f.params.iter().zip(args) {
            let var = self.declare(&p.name, p.ty, &inner);
            self.emit(InstrKind::Assign { var, expr: arg }, line);
        }
        self.block(body, &mut inner)?;
        if !self.pending.is_empty() {
            if let (Some(ret), Some(ty)) = (&ret_var, f.ret) {
                self.emit(
                    InstrKind::Assign {
                        var: ret.clone(),
                        expr: default_value(ty),
                    },
                    line,
                );
            }
        }
        self.place(local_exit);
        if let (Some(var), Some(ret)) = (target, ret_var) {
            self.emit(InstrKind::Assign { var, expr: Expr::Var(ret) }, line);
        }
        Ok(())
    }

    fn to_ir(&self, e: &ast::Expr, temps: &HashMap<CallSiteId, String>, frame: &Frame) -> Expr {
        match &e.kind {
            ExprKind::Int(n) => Expr::Int(*n),
            ExprKind::Bool(b) => Expr::Bool(*b),
            ExprKind::Var(v) => Expr::Var(self.rename(v, frame)),
            ExprKind::Unary(UnOp::Neg, x) => Expr::unary(UnOp::Neg, self.to_ir(x, temps, frame)),
            ExprKind::Unary(UnOp::Not, x) => Expr::not(self.to_bool(x, temps, frame)),
            ExprKind::Binary(op, l, r) if op.is_logical() => Expr::binary(
                *op,
                self.to_bool(l, temps, frame),
                self.to_bool(r, temps, frame),
            ),
            ExprKind::Binary(op, l, r) => {
                Expr::binary(*op, self.to_ir(l, temps, frame), self.to_ir(r, temps, frame))
            }
            ExprKind::Call { site, .. } => Expr::Var(temps[site].clone()),
        }
    }

    /// Like `to_ir`, with C truthiness: an int `e` becomes `e != 0`.
    fn to_bool(&self, e: &ast::Expr, temps: &HashMap<CallSiteId, String>, frame: &Frame) -> Expr {
        let x = self.to_ir(e, temps, frame);
        if e.ty == Some(Type::Int) {
            Expr::binary(BinOp::Ne, x, Expr::Int(0))
        } else {
            x
        }
    }
}

fn has_call(e: &ast::Expr) -> bool {
    let mut found = false;
    e.for_each_call(&mut |_| found = true);
    found
}

/// Calls are hoisted before the expression is evaluated. That is only sound
/// for calls that are always evaluated, or for external calls, which have no
/// effect besides their result.
fn check_short_circuit_calls(e: &ast::Expr, program: &Program) -> Result<(), CfgError> {
    match &e.kind {
        ExprKind::Binary(op, l, r) => {
            check_short_circuit_calls(l, program)?;
            check_short_circuit_calls(r, program)?;
            if matches!(op, BinOp::And | BinOp::Or) {
                let mut bad = None;
                r.for_each_call(&mut |c| {
                    if let Some((callee, _, _)) = c.as_call() {
                        if program.function(callee).is_some_and(|f| f.body.is_some()) {
                            bad.get_or_insert_with(|| callee.to_string());
                        }
                    }
                });
                if let Some(callee) = bad {
                    return Err(CfgError::Unsupported(format!(
                        "call to `{callee}` in the right operand of `{}`",
                        op.symbol()
                    )));
                }
            }
            Ok(())
        }
        ExprKind::Unary(_, x) => check_short_circuit_calls(x, program),
        ExprKind::Call { args, .. } => args
            .iter()
            .try_for_each(|a| check_short_circuit_calls(a, program)),
        _ => Ok(()),
    }
}
