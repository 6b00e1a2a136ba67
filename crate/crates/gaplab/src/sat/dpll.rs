//! A small DPLL solver with unit propagation.
//!
//! Clauses are DIMACS-style literal lists (`+v` / `-v`, variables 1-based) of
//! arbitrary width, so plant-blocking clauses of width `n` are handled the
//! same way as the 3SAT clauses. Branching is fixed to the lowest-index
//! unassigned variable, trying `false` before `true`, which makes every run
//! deterministic. No clause learning: the instances this solver certifies are
//! dense and easy, and reproducibility matters more than speed.

use crate::bits::BitString;
use thiserror::Error;

/// Result of a complete DPLL search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DpllOutcome {
    /// A model; variables never touched by the search default to `false`.
    Sat(BitString),
    Unsat,
}

#[derive(Debug, Error)]
#[error("dpll decision budget exceeded ({budget} decisions)")]
pub struct BudgetExceeded {
    pub budget: u64,
}

pub const DEFAULT_DECISION_BUDGET: u64 = 10_000_000;

/// Solve a CNF over variables `1..=n`.
///
/// Literals are nonzero `i32` values with DIMACS sign convention. Panics on a
/// literal outside `1..=n` (caller bug, not input error: the DIMACS parser
/// range-checks its input).
pub fn dpll_solve(
    clauses: &[Vec<i32>],
    n: usize,
    budget: u64,
) -> Result<DpllOutcome, BudgetExceeded> {
    for clause in clauses {
        for &lit in clause {
            let v = lit.unsigned_abs() as usize;
            assert!(lit != 0 && v >= 1 && v <= n, "literal {lit} out of range 1..={n}");
        }
    }
    let mut solver = Solver {
        clauses,
        assign: vec![None; n + 1],
        decisions: 0,
        budget,
    };
    match solver.search() {
        Some(true) => {
            let bits = (1..=n).map(|v| solver.assign[v].unwrap_or(false)).collect();
            Ok(DpllOutcome::Sat(BitString::from_bits(bits)))
        }
        Some(false) => Ok(DpllOutcome::Unsat),
        None => Err(BudgetExceeded { budget }),
    }
}

struct Solver<'a> {
    clauses: &'a [Vec<i32>],
    // assign[0] unused; assign[v] = Some(value) once set
    assign: Vec<Option<bool>>,
    decisions: u64,
    budget: u64,
}

enum ClauseState {
    Satisfied,
    Conflict,
    Unit(i32),
    Open,
}

impl Solver<'_> {
    fn lit_value(&self, lit: i32) -> Option<bool> {
        let v = lit.unsigned_abs() as usize;
        self.assign[v].map(|b| if lit > 0 { b } else { !b })
    }

    fn clause_state(&self, clause: &[i32]) -> ClauseState {
        let mut unassigned = None;
        let mut n_unassigned = 0;
        for &lit in clause {
            match self.lit_value(lit) {
                Some(true) => return ClauseState::Satisfied,
                Some(false) => {}
                None => {
                    unassigned = Some(lit);
                    n_unassigned += 1;
                }
            }
        }
        match n_unassigned {
            0 => ClauseState::Conflict,
            1 => ClauseState::Unit(unassigned.unwrap()),
            _ => ClauseState::Open,
        }
    }

    /// Unit propagation to fixpoint. Returns false on conflict. Assignments
    /// made here are pushed onto `trail` so the caller can undo them.
    fn propagate(&mut self, trail: &mut Vec<usize>) -> bool {
        loop {
            let mut changed = false;
            for clause in self.clauses {
                match self.clause_state(clause) {
                    ClauseState::Conflict => return false,
                    ClauseState::Unit(lit) => {
                        let v = lit.unsigned_abs() as usize;
                        self.assign[v] = Some(lit > 0);
                        trail.push(v);
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

    fn undo(&mut self, trail: &[usize]) {
        for &v in trail {
            self.assign[v] = None;
        }
    }

    /// Some(true) = SAT, Some(false) = UNSAT, None = budget exhausted.
    fn search(&mut self) -> Option<bool> {
        let mut trail = Vec::new();
        if !self.propagate(&mut trail) {
            self.undo(&trail);
            return Some(false);
        }
        let branch_var = (1..self.assign.len()).find(|&v| self.assign[v].is_none());
        let Some(v) = branch_var else {
            // every variable assigned and no conflict: model found
            return Some(true);
        };
        for value in [false, true] {
            if self.decisions >= self.budget {
                self.undo(&trail);
                return None;
            }
            self.decisions += 1;
            self.assign[v] = Some(value);
            match self.search() {
                Some(true) => return Some(true),
                Some(false) => {
                    self.assign[v] = None;
                }
                None => {
                    self.assign[v] = None;
                    self.undo(&trail);
                    return None;
                }
            }
        }
        self.undo(&trail);
        Some(false)
    }
}
