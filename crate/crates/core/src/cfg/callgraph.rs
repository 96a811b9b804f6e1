use std::collections::BTreeSet;

use crate::frontend::ast::{CallSiteId, Program};
use crate::frontend::find_call_cycle;

use super::CfgError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallEdge {
    pub caller: String,
    pub callee: String,
    pub site: CallSiteId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallGraph {
    /// Every declared or defined function, in declaration order.
    pub nodes: Vec<String>,
    /// One edge per call site.
    pub edges: Vec<CallEdge>,
}

impl CallGraph {
    pub fn callees(&self, caller: &str) -> impl Iterator<Item = &CallEdge> {
        let caller = caller.to_string();
        self.edges.iter().filter(move |e| e.caller == caller)
    }
}

/// Collects call sites of every function body and rejects call cycles.
pub fn build_call_graph(program: &Program) -> Result<CallGraph, CfgError> {
    let mut nodes = Vec::new();
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for f in program.functions() {
        if seen.insert(f.name.clone()) {
            nodes.push(f.name.clone());
        }
        let Some(body) = &f.body else { continue };
        for s in body {
            s.walk(&mut |s| {
                for e in s.exprs() {
                    e.for_each_call(&mut |call| {
                        if let Some((callee, _, site)) = call.as_call() {
                            edges.push(CallEdge {
                                caller: f.name.clone(),
                                callee: callee.to_string(),
                                site,
                            });
                        }
                    });
                }
            });
        }
    }
    if let Some(cycle) = find_call_cycle(program) {
        return Err(CfgError::Recursion(cycle));
    }
    Ok(CallGraph { nodes, edges })
}
