//! Reduce restricted C programs with compiler optimizations and program
//! slicing, lower each per-assertion slice to a control flow automaton, and
//! verify it with predicate-abstraction CEGAR.

pub mod cfa;
pub mod cfg;
pub mod dataflow;
pub mod frontend;
pub mod ir;
pub mod optimizer;
pub mod pipeline;
pub mod slicer;
pub mod solver;
pub mod verifier;
