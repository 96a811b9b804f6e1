//! Random small formulas and an enumeration oracle.

use std::collections::BTreeMap;

use cfaforge::solver::{Formula, LinExpr, Model, Rel, Value};
use rand::rngs::StdRng;
use rand::Rng;

pub const INT_VARS: [&str; 3] = ["x", "y", "z"];
pub const BOUND: i64 = 8;

fn lin(rng: &mut StdRng, nvars: usize) -> LinExpr {
    let mut e = LinExpr::constant(rng.gen_range(-10..=10));
    for v in &INT_VARS[..nvars] {
        if rng.gen_bool(0.6) {
            let c = rng.gen_range(-3..=3);
            e = e.checked_add(&LinExpr::var(*v).checked_scale(c).unwrap()).unwrap();
        }
    }
    e
}

fn atom(rng: &mut StdRng, nvars: usize, with_bool: bool) -> Formula {
    if with_bool && rng.gen_bool(0.2) {
        return Formula::var("b");
    }
    let rel = [Rel::Lt, Rel::Le, Rel::Eq, Rel::Ne, Rel::Gt, Rel::Ge][rng.gen_range(0..6)];
    Formula::compare(&lin(rng, nvars), rel, &lin(rng, nvars)).unwrap()
}

fn formula(rng: &mut StdRng, nvars: usize, with_bool: bool, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        return atom(rng, nvars, with_bool);
    }
    match rng.gen_range(0..3) {
        0 => formula(rng, nvars, with_bool, depth - 1).negate(),
        1 => Formula::And(
            (0..rng.gen_range(2..=3))
                .map(|_| formula(rng, nvars, with_bool, depth - 1))
                .collect(),
        ),
        _ => Formula::Or(
            (0..rng.gen_range(2..=3))
                .map(|_| formula(rng, nvars, with_bool, depth - 1))
                .collect(),
        ),
    }
}

/// A random formula over at most three integer variables (and optionally
/// one boolean), conjoined with the bounds `-8 <= v <= 8`.
pub fn bounded_formula(rng: &mut StdRng) -> (Formula, usize, bool) {
    let nvars = rng.gen_range(1..=3);
    let with_bool = rng.gen_bool(0.3);
    let mut parts = vec![formula(rng, nvars, with_bool, 3)];
    for v in &INT_VARS[..nvars] {
        parts.push(Formula::compare(&LinExpr::var(*v), Rel::Ge, &LinExpr::constant(-BOUND)).unwrap());
        parts.push(Formula::compare(&LinExpr::var(*v), Rel::Le, &LinExpr::constant(BOUND)).unwrap());
    }
    (Formula::And(parts), nvars, with_bool)
}

/// Whether some assignment in the box satisfies `f`.
pub fn enumerate_sat(f: &Formula, nvars: usize, with_bool: bool) -> bool {
    let range: Vec<i64> = (-BOUND..=BOUND).collect();
    let bools: &[bool] = if with_bool { &[false, true] } else { &[false] };
    let mut idx = vec![0usize; nvars];
    loop {
        for &b in bools {
            let mut m = BTreeMap::new();
            for (i, v) in INT_VARS[..nvars].iter().enumerate() {
                m.insert(v.to_string(), Value::Int(range[idx[i]]));
            }
            m.insert("b".to_string(), Value::Bool(b));
            if f.eval(&Model(m)) {
                return true;
            }
        }
        let mut i = 0;
        loop {
            if i == nvars {
                return false;
            }
            idx[i] += 1;
            if idx[i] < range.len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Command from `CFAFORGE_SOLVER`, else `z3 -in -smt2` when z3 is on PATH.
pub fn external_command() -> Option<Vec<String>> {
    if let Ok(cmd) = std::env::var("CFAFORGE_SOLVER") {
        return Some(cmd.split_whitespace().map(str::to_string).collect());
    }
    let found = std::env::var_os("PATH")
        .map(|p| std::env::split_paths(&p).any(|d| d.join("z3").is_file()))
        .unwrap_or(false);
    found.then(|| vec!["z3".into(), "-in".into(), "-smt2".into()])
}
