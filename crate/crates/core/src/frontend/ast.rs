use std::fmt;

use crate::ir::{BinOp, Type, UnOp};

/// Source position of a node. Positions never take part in AST equality, so
/// that a re-parsed pretty-printed program compares equal to the original.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub items: Vec<Item>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Global(Decl),
    Function(Function),
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &Function> {
        self.items.iter().filter_map(|item| match item {
            Item::Function(f) => Some(f),
            Item::Global(_) => None,
        })
    }

    pub fn globals(&self) -> impl Iterator<Item = &Decl> {
        self.items.iter().filter_map(|item| match item {
            Item::Global(d) => Some(d),
            Item::Function(_) => None,
        })
    }

    /// The definition of `name` if it has a body, otherwise its first declaration.
    pub fn function(&self, name: &str) -> Option<&Function> {
        let mut decl = None;
        for f in self.functions().filter(|f| f.name == name) {
            if f.body.is_some() {
                return Some(f);
            }
            decl.get_or_insert(f);
        }
        decl
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` for `void`.
    pub ret: Option<Type>,
    /// `None` for prototypes and `extern` declarations; calls to such
    /// functions return an unconstrained value.
    pub body: Option<Vec<Stmt>>,
    pub is_extern: bool,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decl {
    pub ty: Type,
    pub declarators: Vec<Declarator>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Declarator {
    pub name: String,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Block(Vec<Stmt>),
    Decl(Decl),
    Assign {
        target: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    Switch {
        scrutinee: Expr,
        cases: Vec<SwitchCase>,
    },
    Break,
    Continue,
    Goto(String),
    Labeled {
        label: String,
        stmt: Box<Stmt>,
    },
    /// An expression evaluated for its effect; always a call.
    Expr(Expr),
    Return(Option<Expr>),
    Assert(Expr),
    Empty,
}

/// One `case`/`default` label group. Consecutive labels produce groups with
/// empty bodies, which fall through to the next group as in C.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchCase {
    /// `None` for `default`.
    pub label: Option<i32>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallSiteId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
    /// Filled in by the type checker.
    pub ty: Option<Type>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int(i32),
    Bool(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
        site: CallSiteId,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr {
            kind,
            span,
            ty: None,
        }
    }

    pub fn as_call(&self) -> Option<(&str, &[Expr], CallSiteId)> {
        match &self.kind {
            ExprKind::Call { callee, args, site } => Some((callee, args, *site)),
            _ => None,
        }
    }

    /// Visits every call expression in evaluation order (arguments first).
    pub fn for_each_call<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match &self.kind {
            ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Var(_) => {}
            ExprKind::Unary(_, e) => e.for_each_call(f),
            ExprKind::Binary(_, l, r) => {
                l.for_each_call(f);
                r.for_each_call(f);
            }
            ExprKind::Call { args, .. } => {
                for a in args {
                    a.for_each_call(f);
                }
                f(self);
            }
        }
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Stmt {
        Stmt { kind, span }
    }

    /// Visits this statement and all nested statements, pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::Block(body) => body.iter().for_each(|s| s.walk(f)),
            StmtKind::If {
                then_branch,
                else_branch,
                ..
            } => {
                then_branch.walk(f);
                if let Some(e) = else_branch {
                    e.walk(f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => body.walk(f),
            StmtKind::Switch { cases, .. } => cases
                .iter()
                .flat_map(|c| c.body.iter())
                .for_each(|s| s.walk(f)),
            StmtKind::Labeled { stmt, .. } => stmt.walk(f),
            _ => {}
        }
    }

    /// Expressions appearing directly in this statement (not in nested statements).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl(d) => d.declarators.iter().filter_map(|d| d.init.as_ref()).collect(),
            StmtKind::Assign { value, .. } => vec![value],
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. } => vec![cond],
            StmtKind::Switch { scrutinee, .. } => vec![scrutinee],
            StmtKind::Expr(e) | StmtKind::Assert(e) => vec![e],
            StmtKind::Return(Some(e)) => vec![e],
            _ => Vec::new(),
        }
    }
}
