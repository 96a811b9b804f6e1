//! SMT-LIB (QF_LIA) serialization and an external solver process.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::{Formula, Model, Rel, SolverVerdict, Value};
use crate::ir::Type;

#[derive(Debug, Error)]
pub enum ExternalSolverError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("cannot run solver `{0}`: {1}")]
    Spawn(String, std::io::Error),
    #[error("solver protocol violation: {0}")]
    Protocol(String),
    #[error("solver timed out after {0:?}")]
    Timeout(Duration),
}

fn symbol(name: &str) -> String {
    format!("|{name}|")
}

fn numeral(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

fn write_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::Const(b) => out.push_str(if *b { "true" } else { "false" }),
        Formula::Bool(v) => out.push_str(&symbol(v)),
        Formula::Atom(a) => {
            let terms: Vec<String> = a
                .lhs
                .iter()
                .map(|(v, c)| match c {
                    1 => symbol(v),
                    c => format!("(* {} {})", numeral(*c), symbol(v)),
                })
                .collect();
            let lhs = if terms.len() == 1 {
                terms[0].clone()
            } else {
                format!("(+ {})", terms.join(" "))
            };
            let k = numeral(a.bound);
            let s = match a.rel {
                Rel::Lt => format!("(< {lhs} {k})"),
                Rel::Le => format!("(<= {lhs} {k})"),
                Rel::Eq => format!("(= {lhs} {k})"),
                Rel::Ne => format!("(not (= {lhs} {k}))"),
                Rel::Gt => format!("(> {lhs} {k})"),
                Rel::Ge => format!("(>= {lhs} {k})"),
            };
            out.push_str(&s);
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_formula(g, out);
            out.push(')');
        }
        Formula::And(fs) | Formula::Or(fs) => {
            let (op, empty) = if matches!(f, Formula::And(_)) {
                ("and", "true")
            } else {
                ("or", "false")
            };
            if fs.is_empty() {
                out.push_str(empty);
                return;
            }
            out.push('(');
            out.push_str(op);
            for g in fs {
                out.push(' ');
                write_formula(g, out);
            }
            out.push(')');
        }
    }
}

/// A complete script: declarations, one assertion, `check-sat` and a
/// `get-value` over every variable.
pub fn to_smtlib(f: &Formula) -> String {
    let vars = f.vars();
    let mut out = String::from("(set-option :produce-models true)\n(set-logic QF_LIA)\n");
    for (v, t) in &vars {
        let sort = if *t == Type::Bool { "Bool" } else { "Int" };
        out.push_str(&format!("(declare-fun {} () {sort})\n", symbol(v)));
    }
    out.push_str("(assert ");
    write_formula(f, &mut out);
    out.push_str(")\n(check-sat)\n");
    if !vars.is_empty() {
        let names: Vec<String> = vars.keys().map(|v| symbol(v)).collect();
        out.push_str(&format!("(get-value ({}))\n", names.join(" ")));
    }
    out.push_str("(exit)\n");
    out
}

#[derive(Debug, PartialEq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn parse_sexprs(text: &str) -> Result<Vec<Sx>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut stack: Vec<Vec<Sx>> = vec![Vec::new()];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let list = stack.pop().filter(|_| !stack.is_empty()).ok_or("unbalanced `)`")?;
                stack.last_mut().unwrap().push(Sx::List(list));
            }
            '|' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&d| d == '|')
                    .ok_or("unterminated symbol")?;
                let s: String = chars[i + 1..i + 1 + end].iter().collect();
                stack.last_mut().unwrap().push(Sx::Atom(s));
                i += end + 1;
            }
            '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&d| d == '"')
                    .ok_or("unterminated string")?;
                i += end + 1;
            }
            c if c.is_whitespace() => {}
            _ => {
                let start = i;
                while i < chars.len() && !"()| \t\r\n".contains(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                stack.last_mut().unwrap().push(Sx::Atom(s));
                continue;
            }
        }
        i += 1;
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

fn parse_value(sx: &Sx) -> Option<Value> {
    match sx {
        Sx::Atom(s) if s == "true" => Some(Value::Bool(true)),
        Sx::Atom(s) if s == "false" => Some(Value::Bool(false)),
        Sx::Atom(s) => s.parse().ok().map(Value::Int),
        Sx::List(items) => match items.as_slice() {
            [Sx::Atom(m), Sx::Atom(n)] if m == "-" => n.parse::<i64>().ok().map(|n| Value::Int(-n)),
            _ => None,
        },
    }
}

fn parse_output(text: &str, vars: &BTreeMap<String, Type>) -> Result<SolverVerdict, String> {
    let sx = parse_sexprs(text)?;
    match sx.first() {
        Some(Sx::Atom(s)) if s == "sat" => {}
        Some(Sx::Atom(s)) if s == "unsat" => return Ok(SolverVerdict::unsat()),
        Some(Sx::Atom(s)) if s == "unknown" => return Ok(SolverVerdict::unknown()),
        other => return Err(format!("unexpected answer {other:?}")),
    }
    let mut model = BTreeMap::new();
    if !vars.is_empty() {
        let Some(Sx::List(pairs)) = sx.get(1) else {
            return Err("missing get-value response".into());
        };
        for p in pairs {
            match p {
                Sx::List(kv) if kv.len() == 2 => {
                    let Sx::Atom(name) = &kv[0] else {
                        return Err("bad get-value entry".into());
                    };
                    let v = parse_value(&kv[1]).ok_or_else(|| format!("bad value for {name}"))?;
                    model.insert(name.clone(), v);
                }
                _ => return Err("bad get-value entry".into()),
            }
        }
    }
    Ok(SolverVerdict::sat(Model(model)))
}

/// Runs `command` (program and arguments) on the SMT-LIB rendering of `f`.
pub fn solve_external(
    f: &Formula,
    command: &[String],
    timeout: Duration,
) -> Result<SolverVerdict, ExternalSolverError> {
    let (program, args) = command.split_first().ok_or(ExternalSolverError::EmptyCommand)?;
    let spawn_err = |e| ExternalSolverError::Spawn(command.join(" "), e);
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(spawn_err)?;
    let script = to_smtlib(f);
    let mut stdin = child.stdin.take().unwrap();
    let mut stdout = child.stdout.take().unwrap();
    let writer = std::thread::spawn(move || stdin.write_all(script.as_bytes()));
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(ExternalSolverError::Timeout(timeout));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(1)),
            Err(e) => return Err(spawn_err(e)),
        }
    }
    let _ = writer.join();
    let text = reader
        .join()
        .map_err(|_| ExternalSolverError::Protocol("reader panicked".into()))?
        .map_err(spawn_err)?;
    parse_output(&text, &f.vars()).map_err(ExternalSolverError::Protocol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LinExpr, Status};

    #[test]
    fn parses_models() {
        let vars = BTreeMap::from([("x".to_string(), Type::Int), ("b".to_string(), Type::Bool)]);
        let v = parse_output("sat\n((|x| (- 3)) (b true))\n", &vars).unwrap();
        let m = v.model.unwrap();
        assert_eq!(m.get("x"), Some(Value::Int(-3)));
        assert_eq!(m.get("b"), Some(Value::Bool(true)));
        let v = parse_output("unsat\n(error \"model is not available\")\n", &vars).unwrap();
        assert_eq!(v.status, Status::Unsat);
        assert!(parse_output("garbage (", &vars).is_err());
    }

    #[test]
    fn renders_script() {
        let f = Formula::and([
            Formula::var("b"),
            Formula::compare(&LinExpr::var("x"), Rel::Gt, &LinExpr::constant(-2)).unwrap(),
        ]);
        let s = to_smtlib(&f);
        assert!(s.contains("(declare-fun |b| () Bool)"));
        assert!(s.contains("(<= (* (- 1) |x|) 1)"), "{s}");
        assert!(s.contains("(get-value (|b| |x|))"));
    }
}
