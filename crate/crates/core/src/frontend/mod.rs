//! Lexer, parser and type checker for the supported C subset: `int` and
//! `bool` variables, non-recursive functions, `extern` functions modelled as
//! nondeterministic values, and structured control flow plus `goto`.

pub mod ast;
mod lexer;
mod parser;
mod printer;
mod typecheck;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use ast::Program;
pub use lexer::{tokenize, Token, TokenKind, KEYWORDS};
pub use parser::parse;
pub use printer::{print_expr, print_program};
pub use typecheck::typecheck;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{line}:{column}: lex error: {message}")]
    Lex {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("{line}:{column}: integer literal `{literal}` does not fit in 32 bits")]
    Overflow {
        literal: String,
        line: u32,
        column: u32,
    },
    #[error("{line}:{column}: expected {} but found `{found}`", expected_list(.expected))]
    Parse {
        line: u32,
        column: u32,
        found: String,
        expected: Vec<String>,
    },
    #[error("{line}:{column}: unsupported feature: {feature}")]
    Unsupported {
        feature: String,
        line: u32,
        column: u32,
    },
    #[error("{line}:{column}: type error: {message}")]
    Type {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("{line}:{column}: {message}")]
    Semantic {
        line: u32,
        column: u32,
        message: String,
    },
}

fn expected_list(expected: &[String]) -> String {
    match expected {
        [one] => format!("`{one}`"),
        many => format!(
            "one of {}",
            many.iter()
                .map(|e| format!("`{e}`"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

/// Tokenizes, parses and type-checks `source`.
pub fn parse_source(source: &str) -> Result<Program, FrontendError> {
    let tokens = tokenize(source)?;
    let program = parse(&tokens)?;
    typecheck(program)
}

/// Direct callees (with bodies) of every defined function, in first-call order.
pub(crate) fn call_edges(program: &Program) -> BTreeMap<String, Vec<String>> {
    let defined: BTreeSet<&str> = program
        .functions()
        .filter(|f| f.body.is_some())
        .map(|f| f.name.as_str())
        .collect();
    let mut edges = BTreeMap::new();
    for f in program.functions() {
        let Some(body) = &f.body else { continue };
        let mut callees: Vec<String> = Vec::new();
        for s in body {
            s.walk(&mut |s| {
                for e in s.exprs() {
                    e.for_each_call(&mut |call| {
                        if let Some((callee, _, _)) = call.as_call() {
                            if defined.contains(callee) && !callees.iter().any(|c| c == callee) {
                                callees.push(callee.to_string());
                            }
                        }
                    });
                }
            });
        }
        edges.insert(f.name.clone(), callees);
    }
    edges
}

/// Returns one call cycle among functions with bodies, if any, as the list of
/// functions on the cycle starting from the first one found.
pub fn find_call_cycle(program: &Program) -> Option<Vec<String>> {
    let edges = call_edges(program);
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn dfs(
        node: &str,
        edges: &BTreeMap<String, Vec<String>>,
        marks: &mut BTreeMap<String, Mark>,
        stack: &mut Vec<String>,
    ) -> Option<Vec<String>> {
        marks.insert(node.to_string(), Mark::Active);
        stack.push(node.to_string());
        for callee in edges.get(node).into_iter().flatten() {
            match marks.get(callee.as_str()) {
                Some(Mark::Active) => {
                    let start = stack.iter().position(|n| n == callee).unwrap();
                    return Some(stack[start..].to_vec());
                }
                Some(Mark::Done) => {}
                None => {
                    if let Some(cycle) = dfs(callee, edges, marks, stack) {
                        return Some(cycle);
                    }
                }
            }
        }
        stack.pop();
        marks.insert(node.to_string(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for f in edges.keys() {
        if !marks.contains_key(f.as_str()) {
            if let Some(cycle) = dfs(f, &edges, &mut marks, &mut Vec::new()) {
                return Some(cycle);
            }
        }
    }
    None
}
