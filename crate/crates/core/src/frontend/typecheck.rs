//! Name resolution and typing.
//!
//! Besides annotating every expression with its type, the checker renames
//! local variables so that each declaration inside a function has a name that
//! is unique within that function and distinct from every global. Later
//! stages can therefore treat variable names as flat identifiers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::ast::*;
use super::FrontendError;
use crate::ir::{Type, UnOp};

#[derive(Clone, Debug)]
struct Signature {
    params: Vec<Type>,
    ret: Option<Type>,
    has_body: bool,
}

pub fn typecheck(mut program: Program) -> Result<Program, FrontendError> {
    let mut signatures: HashMap<String, Signature> = HashMap::new();
    let mut globals: BTreeMap<String, Type> = BTreeMap::new();

    for item in &program.items {
        if let Item::Function(f) = item {
            let sig = Signature {
                params: f.params.iter().map(|p| p.ty).collect(),
                ret: f.ret,
                has_body: f.body.is_some(),
            };
            match signatures.get_mut(&f.name) {
                Some(prev) => {
                    if prev.params != sig.params || prev.ret != sig.ret {
                        return Err(semantic(
                            f.span,
                            format!("conflicting declarations of `{}`", f.name),
                        ));
                    }
                    if prev.has_body && sig.has_body {
                        return Err(semantic(f.span, format!("redefinition of `{}`", f.name)));
                    }
                    prev.has_body |= sig.has_body;
                }
                None => {
                    signatures.insert(f.name.clone(), sig);
                }
            }
        }
    }

    // globals are visible from their declaration onwards
    let mut checker = Checker {
        signatures: &signatures,
        scopes: Vec::new(),
        used_names: BTreeSet::new(),
        labels: BTreeSet::new(),
        loop_depth: 0,
        switch_depth: 0,
        ret: None,
    };
    for item in &mut program.items {
        match item {
            Item::Global(decl) => {
                for d in &mut decl.declarators {
                    if globals.contains_key(&d.name) {
                        return Err(semantic(d.span, format!("redefinition of `{}`", d.name)));
                    }
                    if signatures.contains_key(&d.name) {
                        return Err(semantic(
                            d.span,
                            format!("`{}` is already a function", d.name),
                        ));
                    }
                    if let Some(init) = &mut d.init {
                        checker.scopes = vec![globals.iter().map(|(k, v)| (k.clone(), (k.clone(), *v))).collect()];
                        let ty = checker.expr(init)?;
                        if init_has_call(init) {
                            return Err(semantic(
                                init.span,
                                "global initializers cannot call functions",
                            ));
                        }
                        expect_type(init, decl.ty, ty)?;
                    }
                    globals.insert(d.name.clone(), decl.ty);
                }
            }
            Item::Function(f) => {
                if f.body.is_some() {
                    check_function(f, &signatures, &globals)?;
                }
            }
        }
    }
    check_void_values(&program)?;
    Ok(program)
}

fn init_has_call(e: &Expr) -> bool {
    let mut found = false;
    e.for_each_call(&mut |_| found = true);
    found
}

fn check_function(
    f: &mut Function,
    signatures: &HashMap<String, Signature>,
    globals: &BTreeMap<String, Type>,
) -> Result<(), FrontendError> {
    let body = f.body.as_mut().expect("function with body");
    let mut used_names: BTreeSet<String> = globals.keys().cloned().collect();
    used_names.extend(signatures.keys().cloned());
    // reserve every identifier spelled in the body so renamed locals cannot
    // collide with a later declaration
    let mut spelled = BTreeSet::new();
    for s in body.iter() {
        s.walk(&mut |s| {
            if let StmtKind::Decl(d) = &s.kind {
                spelled.extend(d.declarators.iter().map(|d| d.name.clone()));
            }
        });
    }
    spelled.extend(f.params.iter().map(|p| p.name.clone()));

    let mut labels = BTreeSet::new();
    for s in body.iter() {
        let mut dup = None;
        s.walk(&mut |s| {
            if let StmtKind::Labeled { label, .. } = &s.kind {
                if !labels.insert(label.clone()) {
                    dup = Some((label.clone(), s.span));
                }
            }
        });
        if let Some((label, span)) = dup {
            return Err(semantic(span, format!("duplicate label `{label}`")));
        }
    }

    let mut checker = Checker {
        signatures,
        scopes: vec![globals.iter().map(|(k, v)| (k.clone(), (k.clone(), *v))).collect()],
        used_names,
        labels,
        loop_depth: 0,
        switch_depth: 0,
        ret: f.ret,
    };
    let reserved: BTreeSet<String> = spelled;
    checker.scopes.push(HashMap::new());
    for p in &mut f.params {
        let unique = checker.fresh_name(&p.name, &reserved);
        if checker.scopes.last().unwrap().contains_key(&p.name) {
            return Err(semantic(p.span, format!("duplicate parameter `{}`", p.name)));
        }
        checker
            .scopes
            .last_mut()
            .unwrap()
            .insert(p.name.clone(), (unique.clone(), p.ty));
        p.name = unique;
    }
    checker.block(body, &reserved)?;
    Ok(())
}

struct Checker<'a> {
    signatures: &'a HashMap<String, Signature>,
    /// name as written -> (unique name, type)
    scopes: Vec<HashMap<String, (String, Type)>>,
    used_names: BTreeSet<String>,
    labels: BTreeSet<String>,
    loop_depth: usize,
    switch_depth: usize,
    ret: Option<Type>,
}

fn semantic(span: Span, message: impl Into<String>) -> FrontendError {
    FrontendError::Semantic {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

fn type_error(span: Span, message: impl Into<String>) -> FrontendError {
    FrontendError::Type {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

fn type_name(ty: Option<Type>) -> String {
    ty.map(|t| t.to_string()).unwrap_or_else(|| "void".into())
}

fn expect_type(e: &Expr, want: Type, got: Option<Type>) -> Result<(), FrontendError> {
    if got == Some(want) {
        Ok(())
    } else {
        Err(type_error(
            e.span,
            format!(
                "expected {} expression, found {}",
                want,
                type_name(got)
            ),
        ))
    }
}

/// Condition positions accept `bool` and, with C truthiness, `int`.
fn expect_condition(e: &Expr, got: Option<Type>) -> Result<(), FrontendError> {
    match got {
        Some(_) => Ok(()),
        None => Err(type_error(
            e.span,
            "expected bool or int condition, found void",
        )),
    }
}

impl<'a> Checker<'a> {
    fn fresh_name(&mut self, name: &str, reserved: &BTreeSet<String>) -> String {
        if !self.used_names.contains(name) {
            self.used_names.insert(name.to_string());
            return name.to_string();
        }
        let mut k = 1;
        loop {
            let candidate = format!("{name}_{k}");
            if !self.used_names.contains(&candidate) && !reserved.contains(&candidate) {
                self.used_names.insert(candidate.clone());
                return candidate;
            }
            k += 1;
        }
    }

    fn lookup(&self, name: &str) -> Option<&(String, Type)> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn block(&mut self, body: &mut [Stmt], reserved: &BTreeSet<String>) -> Result<(), FrontendError> {
        self.scopes.push(HashMap::new());
        let result = body.iter_mut().try_for_each(|s| self.stmt(s, reserved));
        self.scopes.pop();
        result
    }

    fn scoped_stmt(&mut self, s: &mut Stmt, reserved: &BTreeSet<String>) -> Result<(), FrontendError> {
        self.scopes.push(HashMap::new());
        let result = self.stmt(s, reserved);
        self.scopes.pop();
        result
    }

    fn stmt(&mut self, s: &mut Stmt, reserved: &BTreeSet<String>) -> Result<(), FrontendError> {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Block(body) => self.block(body, reserved)?,
            StmtKind::Decl(decl) => {
                for d in &mut decl.declarators {
                    if let Some(init) = &mut d.init {
                        let ty = self.expr(init)?;
                        expect_type(init, decl.ty, ty)?;
                    }
                    if self.scopes.last().unwrap().contains_key(&d.name) {
                        return Err(semantic(d.span, format!("redeclaration of `{}`", d.name)));
                    }
                    let unique = self.fresh_name(&d.name, reserved);
                    self.scopes
                        .last_mut()
                        .unwrap()
                        .insert(d.name.clone(), (unique.clone(), decl.ty));
                    d.name = unique;
                }
            }
            StmtKind::Assign { target, value } => {
                let ty = self.expr(value)?;
                let Some((unique, target_ty)) = self.lookup(target).cloned() else {
                    return Err(semantic(span, format!("undeclared variable `{target}`")));
                };
                expect_type(value, target_ty, ty)?;
                *target = unique;
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let ty = self.expr(cond)?;
                expect_condition(cond, ty)?;
                self.scoped_stmt(then_branch, reserved)?;
                if let Some(e) = else_branch {
                    self.scoped_stmt(e, reserved)?;
                }
            }
            StmtKind::While { cond, body } => {
                let ty = self.expr(cond)?;
                expect_condition(cond, ty)?;
                self.loop_depth += 1;
                let r = self.scoped_stmt(body, reserved);
                self.loop_depth -= 1;
                r?;
            }
            StmtKind::DoWhile { body, cond } => {
                self.loop_depth += 1;
                let r = self.scoped_stmt(body, reserved);
                self.loop_depth -= 1;
                r?;
                let ty = self.expr(cond)?;
                expect_condition(cond, ty)?;
            }
            StmtKind::Switch { scrutinee, cases } => {
                let ty = self.expr(scrutinee)?;
                expect_type(scrutinee, Type::Int, ty)?;
                let mut seen = BTreeSet::new();
                let mut default_seen = false;
                for case in cases.iter() {
                    let fresh = match case.label {
                        Some(v) => seen.insert(v),
                        None => !std::mem::replace(&mut default_seen, true),
                    };
                    if !fresh {
                        return Err(semantic(case.span, "duplicate case label"));
                    }
                }
                self.switch_depth += 1;
                self.scopes.push(HashMap::new());
                let r = cases
                    .iter_mut()
                    .flat_map(|c| c.body.iter_mut())
                    .try_for_each(|s| self.stmt(s, reserved));
                self.scopes.pop();
                self.switch_depth -= 1;
                r?;
            }
            StmtKind::Break => {
                if self.loop_depth == 0 && self.switch_depth == 0 {
                    return Err(semantic(span, "`break` outside of a loop or switch"));
                }
            }
            StmtKind::Continue => {
                if self.loop_depth == 0 {
                    return Err(semantic(span, "`continue` outside of a loop"));
                }
            }
            StmtKind::Goto(label) => {
                if !self.labels.contains(label) {
                    return Err(semantic(span, format!("goto targets unknown label `{label}`")));
                }
            }
            StmtKind::Labeled { stmt, .. } => self.stmt(stmt, reserved)?,
            StmtKind::Expr(e) => {
                if e.as_call().is_none() {
                    return Err(semantic(span, "expression statement must be a call"));
                }
                self.expr(e)?;
            }
            StmtKind::Return(value) => match (value, self.ret) {
                (None, None) => {}
                (Some(e), Some(want)) => {
                    let ty = self.expr(e)?;
                    expect_type(e, want, ty)?;
                }
                (None, Some(want)) => {
                    return Err(type_error(span, format!("missing {want} return value")));
                }
                (Some(e), None) => {
                    return Err(type_error(e.span, "void function returns a value"));
                }
            },
            StmtKind::Assert(cond) => {
                let ty = self.expr(cond)?;
                expect_condition(cond, ty)?;
            }
            StmtKind::Empty => {}
        }
        Ok(())
    }

    /// Types `e`, annotating every node. Returns `None` for `void` calls.
    fn expr(&mut self, e: &mut Expr) -> Result<Option<Type>, FrontendError> {
        let span = e.span;
        let ty = match &mut e.kind {
            ExprKind::Int(_) => Some(Type::Int),
            ExprKind::Bool(_) => Some(Type::Bool),
            ExprKind::Var(name) => {
                let Some((unique, ty)) = self.lookup(name).cloned() else {
                    return Err(semantic(span, format!("undeclared variable `{name}`")));
                };
                *name = unique;
                Some(ty)
            }
            ExprKind::Unary(op, operand) => {
                let ty = self.expr(operand)?;
                match op {
                    UnOp::Neg => {
                        expect_type(operand, Type::Int, ty)?;
                        Some(Type::Int)
                    }
                    UnOp::Not => {
                        expect_condition(operand, ty)?;
                        Some(Type::Bool)
                    }
                }
            }
            ExprKind::Binary(op, l, r) => {
                let lt = self.expr(l)?;
                let rt = self.expr(r)?;
                let op = *op;
                if op.is_arithmetic() || op.is_relational() {
                    for (side, t) in [(&**l, lt), (&**r, rt)] {
                        if t != Some(Type::Int) {
                            return Err(type_error(
                                side.span,
                                format!(
                                    "operator `{}` expects int operands, found {} and {}",
                                    op.symbol(),
                                    type_name(lt),
                                    type_name(rt)
                                ),
                            ));
                        }
                    }
                    Some(if op.is_arithmetic() { Type::Int } else { Type::Bool })
                } else if op.is_logical() {
                    expect_condition(l, lt)?;
                    expect_condition(r, rt)?;
                    Some(Type::Bool)
                } else {
                    if lt.is_none() || lt != rt {
                        return Err(type_error(
                            span,
                            format!(
                                "operator `{}` compares {} with {}",
                                op.symbol(),
                                type_name(lt),
                                type_name(rt)
                            ),
                        ));
                    }
                    Some(Type::Bool)
                }
            }
            ExprKind::Call { callee, args, .. } => {
                if self.lookup(callee).is_some() {
                    return Err(semantic(span, format!("`{callee}` is not a function")));
                }
                let Some(sig) = self.signatures.get(callee.as_str()).cloned() else {
                    return Err(semantic(span, format!("call to undeclared function `{callee}`")));
                };
                if sig.params.len() != args.len() {
                    return Err(type_error(
                        span,
                        format!(
                            "`{callee}` expects {} arguments, found {}",
                            sig.params.len(),
                            args.len()
                        ),
                    ));
                }
                for (arg, want) in args.iter_mut().zip(&sig.params) {
                    let ty = self.expr(arg)?;
                    expect_type(arg, *want, ty)?;
                }
                sig.ret
            }
        };
        e.ty = ty;
        Ok(ty)
    }
}

/// Rejects calls to `void` functions used as values. Run after typing.
fn check_void_values(program: &Program) -> Result<(), FrontendError> {
    fn visit(e: &Expr, top: bool) -> Result<(), FrontendError> {
        match &e.kind {
            ExprKind::Call { args, callee, .. } => {
                if !top && e.ty.is_none() {
                    return Err(type_error(
                        e.span,
                        format!("void function `{callee}` used as a value"),
                    ));
                }
                args.iter().try_for_each(|a| visit(a, false))
            }
            ExprKind::Unary(_, x) => visit(x, false),
            ExprKind::Binary(_, l, r) => {
                visit(l, false)?;
                visit(r, false)
            }
            _ => Ok(()),
        }
    }
    for f in program.functions() {
        for s in f.body.iter().flatten() {
            let mut result = Ok(());
            s.walk(&mut |s| {
                if result.is_err() {
                    return;
                }
                for e in s.exprs() {
                    let top = matches!(s.kind, StmtKind::Expr(_));
                    if let Err(err) = visit(e, top) {
                        result = Err(err);
                    }
                }
            });
            result?;
        }
    }
    Ok(())
}
