#![allow(dead_code)]

pub mod checks;
pub mod formulas;
pub mod oracles;
pub mod programs;
