//! Pretty-printer producing source text that parses back to the same AST.

use std::fmt::{self, Write};

use super::ast::*;
use crate::ir::{write_int, Type, UnOp, UNARY_PRECEDENCE};

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    let mut printer = Printer { out: &mut out, indent: 0 };
    for (i, item) in program.items.iter().enumerate() {
        if i > 0 {
            printer.out.push('\n');
        }
        match item {
            Item::Global(d) => {
                printer.decl(d);
            }
            Item::Function(f) => printer.function(f),
        }
    }
    out
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0).expect("writing to a String");
    s
}

fn type_str(ty: Option<Type>) -> &'static str {
    match ty {
        Some(Type::Int) => "int",
        Some(Type::Bool) => "bool",
        None => "void",
    }
}

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Int(n) if *n < 0 => UNARY_PRECEDENCE,
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) | ExprKind::Call { .. } => 8,
        ExprKind::Unary(..) => UNARY_PRECEDENCE,
        ExprKind::Binary(op, ..) => op.precedence(),
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) -> fmt::Result {
    let paren = precedence(e) < min;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Int(n) => write!(out, "{}", IntLit(*n))?,
        ExprKind::Bool(b) => write!(out, "{b}")?,
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Unary(op, x) => {
            out.push_str(match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            });
            // `-(5)` must not re-parse as the literal `-5`
            let min = if matches!((op, &x.kind), (UnOp::Neg, ExprKind::Int(_))) {
                u8::MAX
            } else {
                UNARY_PRECEDENCE + 1
            };
            write_expr(out, x, min)?;
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            write_expr(out, l, p)?;
            write!(out, " {} ", op.symbol())?;
            write_expr(out, r, p + 1)?;
        }
        ExprKind::Call { callee, args, .. } => {
            out.push_str(callee);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a, 0)?;
            }
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
    Ok(())
}

struct IntLit(i32);

impl fmt::Display for IntLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_int(f, self.0)
    }
}

struct Printer<'a> {
    out: &'a mut String,
    indent: usize,
}

impl Printer<'_> {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn decl_text(d: &Decl) -> String {
        let mut s = format!("{} ", type_str(Some(d.ty)));
        for (i, dd) in d.declarators.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(&dd.name);
            if let Some(init) = &dd.init {
                s.push_str(" = ");
                s.push_str(&print_expr(init));
            }
        }
        s.push(';');
        s
    }

    fn decl(&mut self, d: &Decl) {
        let text = Self::decl_text(d);
        self.line(&text);
    }

    fn function(&mut self, f: &Function) {
        let params = if f.params.is_empty() {
            String::new()
        } else {
            f.params
                .iter()
                .map(|p| format!("{} {}", type_str(Some(p.ty)), p.name))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let head = format!(
            "{}{} {}({})",
            if f.is_extern { "extern " } else { "" },
            type_str(f.ret),
            f.name,
            params
        );
        match &f.body {
            None => self.line(&format!("{head};")),
            Some(body) => {
                self.line(&format!("{head} {{"));
                self.indent += 1;
                for s in body {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
        }
    }

    /// Prints a statement used as the body of `if`/`while`/`do`, always braced
    /// so that dangling-else structure survives the round trip.
    fn body(&mut self, s: &Stmt) {
        self.indent += 1;
        match &s.kind {
            StmtKind::Block(body) => {
                // keep the explicit block so the AST shape is preserved
                self.line("{");
                self.indent += 1;
                for s in body {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
            _ => self.stmt(s),
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(body) => {
                self.line("{");
                self.indent += 1;
                for s in body {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
            StmtKind::Decl(d) => self.decl(d),
            StmtKind::Assign { target, value } => {
                self.line(&format!("{target} = {};", print_expr(value)))
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                self.line(&format!("if ({})", print_expr(cond)));
                // an unbraced nested if without else would capture our else
                let needs_block = else_branch.is_some() && dangles(then_branch);
                if needs_block {
                    self.indent += 1;
                    self.line("{");
                    self.body(then_branch);
                    self.line("}");
                    self.indent -= 1;
                } else {
                    self.body(then_branch);
                }
                if let Some(e) = else_branch {
                    self.line("else");
                    self.body(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.line(&format!("while ({})", print_expr(cond)));
                self.body(body);
            }
            StmtKind::DoWhile { body, cond } => {
                self.line("do");
                self.body(body);
                self.line(&format!("while ({});", print_expr(cond)));
            }
            StmtKind::Switch { scrutinee, cases } => {
                self.line(&format!("switch ({}) {{", print_expr(scrutinee)));
                for case in cases {
                    match case.label {
                        Some(v) => self.line(&format!("case {}:", IntLit(v))),
                        None => self.line("default:"),
                    }
                    self.indent += 1;
                    for s in &case.body {
                        self.stmt(s);
                    }
                    self.indent -= 1;
                }
                self.line("}");
            }
            StmtKind::Break => self.line("break;"),
            StmtKind::Continue => self.line("continue;"),
            StmtKind::Goto(l) => self.line(&format!("goto {l};")),
            StmtKind::Labeled { label, stmt } => {
                self.line(&format!("{label}:"));
                self.stmt(stmt);
            }
            StmtKind::Expr(e) => self.line(&format!("{};", print_expr(e))),
            StmtKind::Return(None) => self.line("return;"),
            StmtKind::Return(Some(e)) => self.line(&format!("return {};", print_expr(e))),
            StmtKind::Assert(e) => self.line(&format!("assert({});", print_expr(e))),
            StmtKind::Empty => self.line(";"),
        }
    }
}

/// Whether `s` ends in an `if` without `else` (which would bind a following `else`).
fn dangles(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::If {
            else_branch: None, ..
        } => true,
        StmtKind::If {
            else_branch: Some(e),
            ..
        } => dangles(e),
        StmtKind::While { body, .. } => dangles(body),
        StmtKind::Labeled { stmt, .. } => dangles(stmt),
        _ => false,
    }
}
