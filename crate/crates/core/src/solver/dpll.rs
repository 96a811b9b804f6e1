//! DPLL over a polarity-aware clausal form of the formula. Atoms only ever
//! occur positively after negation normal form, so an atom left false imposes
//! nothing and only atoms set true go to the theory.

use std::collections::BTreeMap;

use super::lia::{self, Cons, Row, TheoryResult};
use super::{Atom, Formula, Model, Rel, SolverVerdict, Value};

const NODE_BUDGET: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Lit {
    var: usize,
    pos: bool,
}

impl Lit {
    fn neg(self) -> Lit {
        Lit {
            var: self.var,
            pos: !self.pos,
        }
    }
}

enum Nnf {
    Const(bool),
    Lit(Lit),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

#[derive(Default)]
struct Builder {
    nvars: usize,
    bools: BTreeMap<String, usize>,
    ints: BTreeMap<String, usize>,
    atoms: BTreeMap<(Row, bool, i128), usize>,
    theory: BTreeMap<usize, Cons>,
    clauses: Vec<Vec<Lit>>,
}

impl Builder {
    fn fresh(&mut self) -> usize {
        self.nvars += 1;
        self.nvars - 1
    }

    fn int_var(&mut self, name: &str) -> usize {
        let n = self.ints.len();
        *self.ints.entry(name.to_string()).or_insert(n)
    }

    fn theory_lit(&mut self, coeffs: Row, eq: bool, k: i128) -> Nnf {
        let key = (coeffs, eq, k);
        if let Some(&v) = self.atoms.get(&key) {
            return Nnf::Lit(Lit { var: v, pos: true });
        }
        let v = self.fresh();
        self.theory.insert(
            v,
            Cons {
                coeffs: key.0.clone(),
                eq,
                k,
            },
        );
        self.atoms.insert(key, v);
        Nnf::Lit(Lit { var: v, pos: true })
    }

    fn atom(&mut self, a: &Atom, positive: bool) -> Nnf {
        let row: Row = a
            .lhs
            .iter()
            .map(|(x, c)| (self.int_var(x), *c as i128))
            .collect();
        let neg: Row = row.iter().map(|(x, c)| (*x, -c)).collect();
        let k = a.bound as i128;
        let rel = if positive {
            a.rel
        } else {
            match a.rel {
                Rel::Lt => Rel::Ge,
                Rel::Le => Rel::Gt,
                Rel::Eq => Rel::Ne,
                Rel::Ne => Rel::Eq,
                Rel::Gt => Rel::Le,
                Rel::Ge => Rel::Lt,
            }
        };
        match rel {
            Rel::Le => self.theory_lit(row, false, k),
            Rel::Lt => self.theory_lit(row, false, k - 1),
            Rel::Ge => self.theory_lit(neg, false, -k),
            Rel::Gt => self.theory_lit(neg, false, -k - 1),
            Rel::Eq => self.theory_lit(row, true, k),
            Rel::Ne => Nnf::Or(vec![
                self.theory_lit(row, false, k - 1),
                self.theory_lit(neg, false, -k - 1),
            ]),
        }
    }

    fn nnf(&mut self, f: &Formula, positive: bool) -> Nnf {
        match f {
            Formula::Const(b) => Nnf::Const(*b == positive),
            Formula::Bool(v) => {
                let var = match self.bools.get(v) {
                    Some(&var) => var,
                    None => {
                        let var = self.fresh();
                        self.bools.insert(v.clone(), var);
                        var
                    }
                };
                Nnf::Lit(Lit { var, pos: positive })
            }
            Formula::Atom(a) => self.atom(a, positive),
            Formula::Not(g) => self.nnf(g, !positive),
            Formula::And(fs) | Formula::Or(fs) => {
                let parts = fs.iter().map(|g| self.nnf(g, positive)).collect();
                if matches!(f, Formula::And(_)) == positive {
                    Nnf::And(parts)
                } else {
                    Nnf::Or(parts)
                }
            }
        }
    }

    /// A literal that implies `n`; `None` when `n` is constant false.
    fn define(&mut self, n: Nnf) -> Option<Lit> {
        match n {
            Nnf::Const(true) => {
                let v = self.fresh();
                Some(Lit { var: v, pos: true })
            }
            Nnf::Const(false) => None,
            Nnf::Lit(l) => Some(l),
            Nnf::And(parts) => {
                let g = Lit {
                    var: self.fresh(),
                    pos: true,
                };
                for p in parts {
                    match self.define(p) {
                        Some(l) => self.clauses.push(vec![g.neg(), l]),
                        None => self.clauses.push(vec![g.neg()]),
                    }
                }
                Some(g)
            }
            Nnf::Or(parts) => {
                let g = Lit {
                    var: self.fresh(),
                    pos: true,
                };
                let mut clause = vec![g.neg()];
                clause.extend(parts.into_iter().filter_map(|p| self.define(p)));
                self.clauses.push(clause);
                Some(g)
            }
        }
    }

    fn assert_root(&mut self, n: Nnf) {
        match n {
            Nnf::Const(true) => {}
            Nnf::Const(false) => self.clauses.push(Vec::new()),
            Nnf::And(parts) => parts.into_iter().for_each(|p| self.assert_root(p)),
            Nnf::Or(parts) => {
                let clause = parts.into_iter().filter_map(|p| self.define(p)).collect();
                self.clauses.push(clause);
            }
            Nnf::Lit(l) => self.clauses.push(vec![l]),
        }
    }
}

struct Search<'a> {
    b: &'a Builder,
    assign: Vec<Option<bool>>,
    trail: Vec<usize>,
    budget: usize,
}

enum Outcome {
    Sat(BTreeMap<usize, i128>),
    Unsat,
    Unknown,
}

impl Search<'_> {
    fn value(&self, l: Lit) -> Option<bool> {
        self.assign[l.var].map(|v| v == l.pos)
    }

    fn set(&mut self, l: Lit) {
        self.assign[l.var] = Some(l.pos);
        self.trail.push(l.var);
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            self.assign[v] = None;
        }
    }

    /// Unit propagation; false on conflict.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for c in &self.b.clauses {
                let mut unassigned = None;
                let mut count = 0;
                let mut sat = false;
                for &l in c {
                    match self.value(l) {
                        Some(true) => {
                            sat = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            count += 1;
                            unassigned = Some(l);
                        }
                    }
                }
                if sat {
                    continue;
                }
                match count {
                    0 => return false,
                    1 => {
                        let l = unassigned.unwrap();
                        self.assign[l.var] = Some(l.pos);
                        self.trail.push(l.var);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn asserted(&self) -> Vec<Cons> {
        self.b
            .theory
            .iter()
            .filter(|(v, _)| self.assign[**v] == Some(true))
            .map(|(_, c)| c.clone())
            .collect()
    }

    fn theory(&self) -> TheoryResult {
        lia::check(&self.asserted())
    }

    /// Sets false every open atom that contradicts the atoms already true.
    /// Returns whether anything was set.
    fn refute_atoms(&mut self) -> bool {
        let mut cons = self.asserted();
        let open: Vec<usize> = self
            .b
            .theory
            .keys()
            .copied()
            .filter(|v| self.assign[*v].is_none())
            .collect();
        let mut changed = false;
        for v in open {
            cons.push(self.b.theory[&v].clone());
            if lia::check(&cons) == TheoryResult::Unsat {
                self.set(Lit { var: v, pos: false });
                changed = true;
            }
            cons.pop();
        }
        changed
    }

    fn pick(&self) -> Option<Lit> {
        self.b.clauses.iter().find_map(|c| {
            if c.iter().any(|&l| self.value(l) == Some(true)) {
                None
            } else {
                c.iter().copied().find(|&l| self.value(l).is_none())
            }
        })
    }

    fn run(&mut self) -> Outcome {
        if self.budget == 0 {
            return Outcome::Unknown;
        }
        self.budget -= 1;
        let mark = self.trail.len();
        loop {
            if !self.propagate() {
                self.undo(mark);
                return Outcome::Unsat;
            }
            if !self.refute_atoms() {
                break;
            }
        }
        let Some(lit) = self.pick() else {
            let r = match self.theory() {
                TheoryResult::Sat(m) => Outcome::Sat(m),
                TheoryResult::Unsat => Outcome::Unsat,
                TheoryResult::Unknown => Outcome::Unknown,
            };
            if !matches!(r, Outcome::Sat(_)) {
                self.undo(mark);
            }
            return r;
        };
        if self.theory() == TheoryResult::Unsat {
            self.undo(mark);
            return Outcome::Unsat;
        }
        let mut unknown = false;
        for l in [lit, lit.neg()] {
            let inner = self.trail.len();
            self.set(l);
            match self.run() {
                Outcome::Sat(m) => return Outcome::Sat(m),
                Outcome::Unknown => unknown = true,
                Outcome::Unsat => {}
            }
            self.undo(inner);
        }
        self.undo(mark);
        if unknown {
            Outcome::Unknown
        } else {
            Outcome::Unsat
        }
    }
}

pub(crate) fn solve(f: &Formula) -> SolverVerdict {
    let mut b = Builder::default();
    let n = b.nnf(f, true);
    b.assert_root(n);
    let mut s = Search {
        b: &b,
        assign: vec![None; b.nvars],
        trail: Vec::new(),
        budget: NODE_BUDGET,
    };
    match s.run() {
        Outcome::Unsat => SolverVerdict::unsat(),
        Outcome::Unknown => SolverVerdict::unknown(),
        Outcome::Sat(ints) => {
            let mut model = BTreeMap::new();
            for (name, idx) in &b.ints {
                let v = ints.get(idx).copied().unwrap_or(0);
                match i64::try_from(v) {
                    Ok(v) => model.insert(name.clone(), Value::Int(v)),
                    Err(_) => return SolverVerdict::unknown(),
                };
            }
            for (name, var) in &b.bools {
                model.insert(name.clone(), Value::Bool(s.assign[*var] == Some(true)));
            }
            SolverVerdict::sat(Model(model))
        }
    }
}
