//! Random restricted-C programs.

use cfaforge::cfg::Cfg;
use cfaforge::pipeline::prepare;
use rand::rngs::StdRng;
use rand::Rng;

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    /// Upper bound on statements, declarations and nested ones included.
    pub max_stmts: usize,
    pub vars: usize,
    /// Guard every loop with its own counter so that runs terminate.
    pub bounded_loops: bool,
    pub max_depth: u32,
    /// Percentage of statements that open an `if` or a loop.
    pub branching: u32,
}

/// Programs for the semantic properties: up to 40 statements.
pub const LARGE: Shape = Shape {
    max_stmts: 40,
    vars: 4,
    bounded_loops: true,
    max_depth: 3,
    branching: 25,
};

/// Programs whose graphs stay small enough for path enumeration.
pub const SMALL: Shape = Shape {
    max_stmts: 8,
    vars: 2,
    bounded_loops: false,
    max_depth: 2,
    branching: 55,
};

const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

struct Gen<'r> {
    rng: &'r mut StdRng,
    shape: Shape,
    budget: usize,
    counters: usize,
    asserts: usize,
}

impl Gen<'_> {
    fn var(&mut self) -> &'static str {
        NAMES[self.rng.gen_range(0..self.shape.vars)]
    }

    fn expr(&mut self, depth: u32) -> String {
        if depth == 0 || self.rng.gen_bool(0.4) {
            return if self.rng.gen_bool(0.65) {
                self.var().to_string()
            } else {
                self.rng.gen_range(-4..=6).to_string()
            };
        }
        let l = self.expr(depth - 1);
        match self.rng.gen_range(0..6) {
            0 | 1 => format!("{l} + {}", self.expr(depth - 1)),
            2 => format!("{l} - {}", self.expr(depth - 1)),
            3 => format!("({l}) * {}", self.rng.gen_range(-3..=3)),
            4 => format!("({l}) / {}", [1, 2, 3, -2][self.rng.gen_range(0..4)]),
            _ => format!("({l}) % {}", [2, 3, 5][self.rng.gen_range(0..3)]),
        }
    }

    fn cond(&mut self, depth: u32) -> String {
        if depth > 0 && self.rng.gen_bool(0.25) {
            let l = self.cond(depth - 1);
            return match self.rng.gen_range(0..3) {
                0 => format!("!({l})"),
                1 => format!("({l}) && ({})", self.cond(depth - 1)),
                _ => format!("({l}) || ({})", self.cond(depth - 1)),
            };
        }
        let rel = ["<", "<=", "==", "!=", ">", ">="][self.rng.gen_range(0..6)];
        format!("{} {rel} {}", self.expr(1), self.expr(1))
    }

    /// Mostly conditions that rarely fail, so runs go on past them.
    fn assertion(&mut self) -> String {
        if self.rng.gen_bool(0.3) {
            return self.cond(1);
        }
        let v = self.var();
        let k = self.rng.gen_range(50..500);
        match self.rng.gen_range(0..3) {
            0 => format!("{v} != {k}"),
            1 => format!("{v} > -{k}"),
            _ => format!("{v} - {} < {k}", self.var()),
        }
    }

    fn block(&mut self, depth: u32, indent: usize, out: &mut String) {
        let n = self.rng.gen_range(1..=4);
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt(depth, indent, out);
        }
    }

    fn stmt(&mut self, depth: u32, indent: usize, out: &mut String) {
        self.budget -= 1;
        let pad = "    ".repeat(indent);
        let nested = depth < self.shape.max_depth && self.budget > 0;
        let roll = self.rng.gen_range(0..100);
        let loops = self.shape.branching;
        let ifs = loops * 3 / 5;
        if nested && roll < ifs {
            out.push_str(&format!("{pad}if ({}) {{\n", self.cond(1)));
            self.block(depth + 1, indent + 1, out);
            if self.rng.gen_bool(0.5) && self.budget > 0 {
                out.push_str(&format!("{pad}}} else {{\n"));
                self.block(depth + 1, indent + 1, out);
            }
            out.push_str(&format!("{pad}}}\n"));
        } else if nested && roll < loops {
            let cond = self.cond(1);
            if self.shape.bounded_loops {
                // the counter's declaration and increment count too
                self.budget = self.budget.saturating_sub(2);
                let k = self.counters;
                self.counters += 1;
                let bound = self.rng.gen_range(1..=4);
                out.push_str(&format!("{pad}while (k{k} < {bound} && ({cond})) {{\n"));
                out.push_str(&format!("{pad}    k{k} = k{k} + 1;\n"));
            } else {
                out.push_str(&format!("{pad}while ({cond}) {{\n"));
            }
            self.block(depth + 1, indent + 1, out);
            out.push_str(&format!("{pad}}}\n"));
        } else if roll < loops + 15 {
            out.push_str(&format!("{pad}{} = nd();\n", self.var()));
        } else if roll < loops + 27 {
            self.asserts += 1;
            let cond = self.assertion();
            out.push_str(&format!("{pad}assert({cond});\n"));
        } else {
            let v = self.var();
            out.push_str(&format!("{pad}{v} = {};\n", self.expr(2)));
        }
    }
}

/// Source text of a random `main` with at least one assertion.
pub fn program(rng: &mut StdRng, shape: Shape) -> String {
    let room = shape.max_stmts - shape.vars - 1;
    let budget = rng.gen_range(room / 4 + 1..=room);
    let mut g = Gen {
        rng,
        shape,
        budget,
        counters: 0,
        asserts: 0,
    };
    let mut body = String::new();
    while g.budget > 0 {
        g.stmt(0, 1, &mut body);
    }
    if g.asserts == 0 {
        let c = g.assertion();
        body.push_str(&format!("    assert({c});\n"));
    }
    let mut src = String::from("extern int nd();\nint main() {\n");
    for v in &NAMES[..shape.vars] {
        let init = match g.rng.gen_range(0..3) {
            0 => String::new(),
            1 => " = nd()".to_string(),
            _ => format!(" = {}", g.rng.gen_range(-3..=3)),
        };
        src.push_str(&format!("    int {v}{init};\n"));
    }
    for k in 0..g.counters {
        src.push_str(&format!("    int k{k} = 0;\n"));
    }
    src.push_str(&body);
    src.push_str("}\n");
    src
}

/// The inlined graph of a random program.
pub fn graph(rng: &mut StdRng, shape: Shape) -> (String, Cfg) {
    let src = program(rng, shape);
    let cfg = prepare(&src, false)
        .unwrap_or_else(|e| panic!("generated program rejected: {e}\n{src}"))
        .0;
    (src, cfg)
}
