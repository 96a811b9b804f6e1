//! Conjunctions of linear integer constraints: equality substitution, then
//! Fourier–Motzkin with gcd tightening, then a bounded integer search over
//! the elimination stages.

use std::collections::{BTreeMap, BTreeSet};

use super::SEARCH_WINDOW;

pub(crate) type Row = BTreeMap<usize, i128>;

/// `Σ coeffs ≤ k`, or `= k` when `eq`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Cons {
    pub coeffs: Row,
    pub eq: bool,
    pub k: i128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum TheoryResult {
    Sat(BTreeMap<usize, i128>),
    Unsat,
    Unknown,
}

const MAX_CONSTRAINTS: usize = 4000;
const SEARCH_BUDGET: usize = 200_000;

/// Overflow, blow-up or an exhausted search.
struct GiveUp;

type R<T> = Result<T, GiveUp>;

fn mul(a: i128, b: i128) -> R<i128> {
    a.checked_mul(b).ok_or(GiveUp)
}

fn add(a: i128, b: i128) -> R<i128> {
    a.checked_add(b).ok_or(GiveUp)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn floor_div(a: i128, b: i128) -> i128 {
    if b < 0 {
        (-a).div_euclid(-b)
    } else {
        a.div_euclid(b)
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

enum Norm {
    Trivial(bool),
    Keep(Cons),
}

fn normalize(mut c: Cons) -> Norm {
    c.coeffs.retain(|_, v| *v != 0);
    if c.coeffs.is_empty() {
        return Norm::Trivial(if c.eq { c.k == 0 } else { c.k >= 0 });
    }
    let g = c.coeffs.values().fold(0, |g, v| gcd(g, *v));
    if g > 1 {
        if c.eq && c.k % g != 0 {
            return Norm::Trivial(false);
        }
        c.coeffs.values_mut().for_each(|v| *v /= g);
        c.k = floor_div(c.k, g);
    }
    Norm::Keep(c)
}

/// Replaces `x` in `c` by `sub.0 + sub.1`.
fn substitute(c: &mut Cons, x: usize, row: &Row, constant: i128) -> R<()> {
    if let Some(a) = c.coeffs.remove(&x) {
        for (y, s) in row {
            let slot = c.coeffs.entry(*y).or_insert(0);
            *slot = add(*slot, mul(a, *s)?)?;
        }
        c.k = add(c.k, -mul(a, constant)?)?;
    }
    Ok(())
}

pub(crate) fn check(input: &[Cons]) -> TheoryResult {
    match run(input) {
        Ok(r) => r,
        Err(GiveUp) => TheoryResult::Unknown,
    }
}

fn run(input: &[Cons]) -> R<TheoryResult> {
    let all_vars: BTreeSet<usize> = input.iter().flat_map(|c| c.coeffs.keys().copied()).collect();
    let mut cons: Vec<Cons> = Vec::new();
    for c in input {
        match normalize(c.clone()) {
            Norm::Trivial(false) => return Ok(TheoryResult::Unsat),
            Norm::Trivial(true) => {}
            Norm::Keep(c) => cons.push(c),
        }
    }

    // solve equalities that have a unit coefficient
    let mut subs: Vec<(usize, Row, i128)> = Vec::new();
    while let Some((i, x)) = cons.iter().enumerate().find_map(|(i, c)| {
        c.eq.then(|| c.coeffs.iter().find(|(_, v)| v.abs() == 1).map(|(x, _)| (i, *x)))
            .flatten()
    }) {
        let c = cons.swap_remove(i);
        let a = c.coeffs[&x];
        // a*x + rest = k  =>  x = a*k - a*rest
        let row: Row = c
            .coeffs
            .iter()
            .filter(|(y, _)| **y != x)
            .map(|(y, v)| (*y, -a * v))
            .collect();
        let constant = a * c.k;
        let mut next = Vec::with_capacity(cons.len());
        for mut d in cons {
            substitute(&mut d, x, &row, constant)?;
            match normalize(d) {
                Norm::Trivial(false) => return Ok(TheoryResult::Unsat),
                Norm::Trivial(true) => {}
                Norm::Keep(d) => next.push(d),
            }
        }
        cons = next;
        subs.push((x, row, constant));
    }

    let mut rows: BTreeMap<Row, i128> = BTreeMap::new();
    let push = |rows: &mut BTreeMap<Row, i128>, coeffs: Row, k: i128| {
        let slot = rows.entry(coeffs).or_insert(k);
        *slot = (*slot).min(k);
    };
    for c in cons {
        if c.eq {
            let neg: Row = c.coeffs.iter().map(|(x, v)| (*x, -v)).collect();
            push(&mut rows, neg, -c.k);
        }
        push(&mut rows, c.coeffs, c.k);
    }

    let mut stages: Vec<(usize, Vec<(Row, i128)>)> = Vec::new();
    loop {
        let mut counts: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in rows.keys() {
            for (x, v) in r {
                let e = counts.entry(*x).or_default();
                if *v > 0 {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let Some((&x, _)) = counts
            .iter()
            .min_by_key(|(_, (p, n))| (p * n) as i64 - (p + n) as i64)
        else {
            break;
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), BTreeMap::new());
        for (r, k) in std::mem::take(&mut rows) {
            match r.get(&x) {
                Some(v) if *v > 0 => pos.push((r, k)),
                Some(_) => neg.push((r, k)),
                None => {
                    rest.insert(r, k);
                }
            }
        }
        rows = rest;
        for (p, pk) in &pos {
            for (n, nk) in &neg {
                let (a, b) = (p[&x], -n[&x]);
                let mut coeffs: Row = p.keys().chain(n.keys()).filter(|y| **y != x).map(|y| (*y, 0)).collect();
                for (y, slot) in coeffs.iter_mut() {
                    let pv = p.get(y).copied().unwrap_or(0);
                    let nv = n.get(y).copied().unwrap_or(0);
                    *slot = add(mul(b, pv)?, mul(a, nv)?)?;
                }
                let k = add(mul(b, *pk)?, mul(a, *nk)?)?;
                match normalize(Cons {
                    coeffs,
                    eq: false,
                    k,
                }) {
                    Norm::Trivial(false) => return Ok(TheoryResult::Unsat),
                    Norm::Trivial(true) => {}
                    Norm::Keep(c) => push(&mut rows, c.coeffs, c.k),
                }
            }
        }
        if rows.len() > MAX_CONSTRAINTS {
            return Err(GiveUp);
        }
        pos.extend(neg);
        let vanished: BTreeSet<usize> = pos
            .iter()
            .flat_map(|(r, _)| r.keys().copied())
            .filter(|y| *y != x && !rows.keys().any(|r| r.contains_key(y)))
            .collect();
        stages.push((x, pos));
        // variables cancelled out of every combination are unconstrained
        // from here on but still needed by this stage
        stages.extend(vanished.into_iter().map(|y| (y, Vec::new())));
    }

    let mut vals: BTreeMap<usize, i128> = BTreeMap::new();
    let mut search = Search {
        budget: SEARCH_BUDGET,
        clipped: false,
    };
    if !search.assign(&stages, stages.len(), &mut vals)? {
        return Ok(if search.clipped {
            TheoryResult::Unknown
        } else {
            TheoryResult::Unsat
        });
    }
    for (x, row, constant) in subs.iter().rev() {
        let mut v = *constant;
        for (y, c) in row {
            v = add(v, mul(*c, vals.get(y).copied().unwrap_or(0))?)?;
        }
        vals.insert(*x, v);
    }
    for x in all_vars {
        vals.entry(x).or_insert(0);
    }
    for c in input {
        let mut s = 0i128;
        for (x, v) in &c.coeffs {
            s = add(s, mul(*v, vals[x])?)?;
        }
        if (c.eq && s != c.k) || (!c.eq && s > c.k) {
            return Err(GiveUp);
        }
    }
    Ok(TheoryResult::Sat(vals))
}

struct Search {
    budget: usize,
    clipped: bool,
}

impl Search {
    /// Assigns the variables of `stages[..n]`, last stage first.
    fn assign(
        &mut self,
        stages: &[(usize, Vec<(Row, i128)>)],
        n: usize,
        vals: &mut BTreeMap<usize, i128>,
    ) -> R<bool> {
        if n == 0 {
            return Ok(true);
        }
        let (x, rows) = &stages[n - 1];
        let (mut lo, mut hi) = (i128::MIN, i128::MAX);
        for (r, k) in rows {
            let mut rhs = *k;
            for (y, v) in r {
                if y != x {
                    rhs = add(rhs, -mul(*v, vals[y])?)?;
                }
            }
            let a = r[x];
            if a > 0 {
                hi = hi.min(floor_div(rhs, a));
            } else {
                lo = lo.max(ceil_div(rhs, a));
            }
        }
        if lo < -SEARCH_WINDOW || hi > SEARCH_WINDOW {
            self.clipped = true;
        }
        let (lo, hi) = (lo.max(-SEARCH_WINDOW), hi.min(SEARCH_WINDOW));
        if lo > hi {
            return Ok(false);
        }
        let start = 0i128.clamp(lo, hi);
        for d in 0.. {
            let cands = if d == 0 { vec![start] } else { vec![start + d, start - d] };
            let cands: Vec<i128> = cands.into_iter().filter(|v| (lo..=hi).contains(v)).collect();
            if cands.is_empty() {
                break;
            }
            for v in cands {
                if self.budget == 0 {
                    return Err(GiveUp);
                }
                self.budget -= 1;
                vals.insert(*x, v);
                if self.assign(stages, n - 1, vals)? {
                    return Ok(true);
                }
            }
        }
        vals.remove(x);
        Ok(false)
    }
}
