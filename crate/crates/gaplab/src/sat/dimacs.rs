//! DIMACS CNF reader/writer with a penalty-term extension line.
//!
//! Each disallowed pattern maps to the unique CNF clause it falsifies, so the
//! file is valid input for any SAT solver. The penalty term travels in a
//! comment line ("c penalty i1 i2 i3 p1 p2 p3 0.5", 1-based indices) that
//! ordinary solvers skip.

use super::{Clause, Instance, PenaltyTerm};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("header declares {declared} clauses but body has {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("missing 'p cnf' header")]
    MissingHeader,
}

fn parse_err(line: usize, msg: impl Into<String>) -> DimacsError {
    DimacsError::Parse { line, msg: msg.into() }
}

pub fn to_dimacs(instance: &Instance) -> String {
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", instance.n, instance.m()).unwrap();
    if let Some(p) = &instance.penalty {
        writeln!(
            out,
            "c penalty {} {} {} {} {} {} 0.5",
            p.bits[0] + 1,
            p.bits[1] + 1,
            p.bits[2] + 1,
            p.target[0] as u8,
            p.target[1] as u8,
            p.target[2] as u8,
        )
        .unwrap();
    }
    for c in &instance.clauses {
        for (&b, &w) in c.bits.iter().zip(c.pattern.iter()) {
            let v = (b + 1) as i64;
            write!(out, "{} ", if w { -v } else { v }).unwrap();
        }
        writeln!(out, "0").unwrap();
    }
    out
}

pub fn from_dimacs(text: &str) -> Result<Instance, DimacsError> {
    let mut header: Option<(usize, usize)> = None;
    let mut penalty: Option<PenaltyTerm> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut pending: Vec<i64> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.first() == Some(&"penalty") {
                penalty = Some(parse_penalty(&tokens[1..], lineno)?);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "duplicate header"));
            }
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            if tokens.len() != 3 || tokens[0] != "cnf" {
                return Err(parse_err(lineno, format!("bad header '{line}'")));
            }
            let n = tokens[1]
                .parse::<usize>()
                .map_err(|_| parse_err(lineno, "bad variable count"))?;
            let m = tokens[2]
                .parse::<usize>()
                .map_err(|_| parse_err(lineno, "bad clause count"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or(DimacsError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let lit = tok
                .parse::<i64>()
                .map_err(|_| parse_err(lineno, format!("bad literal '{tok}'")))?;
            if lit == 0 {
                clauses.push(lits_to_clause(&pending, n, lineno)?);
                pending.clear();
            } else {
                if lit.unsigned_abs() as usize > n {
                    return Err(parse_err(lineno, format!("literal {lit} out of range")));
                }
                pending.push(lit);
            }
        }
    }

    let (n, m) = header.ok_or(DimacsError::MissingHeader)?;
    if !pending.is_empty() {
        return Err(parse_err(text.lines().count(), "unterminated clause"));
    }
    if clauses.len() != m {
        return Err(DimacsError::ClauseCountMismatch { declared: m, found: clauses.len() });
    }
    if let Some(p) = &penalty {
        if p.bits.iter().any(|&b| b >= n) {
            return Err(parse_err(1, "penalty bits out of range"));
        }
    }
    let mut instance = Instance::new(n, clauses);
    instance.penalty = penalty;
    Ok(instance)
}

fn parse_penalty(tokens: &[&str], lineno: usize) -> Result<PenaltyTerm, DimacsError> {
    if tokens.len() != 7 {
        return Err(parse_err(lineno, "penalty line needs 7 fields"));
    }
    let mut bits = [0usize; 3];
    let mut target = [false; 3];
    for i in 0..3 {
        let v = tokens[i]
            .parse::<usize>()
            .map_err(|_| parse_err(lineno, "bad penalty index"))?;
        if v == 0 {
            return Err(parse_err(lineno, "penalty indices are 1-based"));
        }
        bits[i] = v - 1;
        target[i] = match tokens[3 + i] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(lineno, format!("bad penalty bit '{other}'"))),
        };
    }
    if tokens[6] != "0.5" {
        return Err(parse_err(lineno, format!("unsupported penalty weight '{}'", tokens[6])));
    }
    if bits[0] == bits[1] || bits[0] == bits[2] || bits[1] == bits[2] {
        return Err(parse_err(lineno, "penalty bits must be distinct"));
    }
    if target.iter().any(|&t| t != target[0]) {
        return Err(parse_err(lineno, "penalty pattern must be 000 or 111"));
    }
    Ok(PenaltyTerm { bits, target })
}

fn lits_to_clause(lits: &[i64], n: usize, lineno: usize) -> Result<Clause, DimacsError> {
    if lits.len() != 3 {
        return Err(parse_err(lineno, format!("expected 3 literals, got {}", lits.len())));
    }
    let mut bits = [0usize; 3];
    let mut pattern = [false; 3];
    for (i, &lit) in lits.iter().enumerate() {
        let v = lit.unsigned_abs() as usize;
        if v == 0 || v > n {
            return Err(parse_err(lineno, format!("literal {lit} out of range")));
        }
        bits[i] = v - 1;
        pattern[i] = lit < 0;
    }
    if bits[0] == bits[1] || bits[0] == bits[2] || bits[1] == bits[2] {
        return Err(parse_err(lineno, "repeated variable in clause"));
    }
    Ok(Clause { bits, pattern })
}
