//! Double-plant 3SAT instances.
//!
//! An instance is built by drawing clauses uniformly at random, each clause
//! consistent with both the all-zeros and all-ones assignments, until those
//! two strings are the only satisfying assignments left. The "exactly two
//! models" property is certified with the embedded DPLL solver by blocking
//! both plants and asking for UNSAT. A weight-1/2 penalty term on three fixed
//! bits can then lift one plant's energy to break the degeneracy.

pub mod dimacs;
pub mod dpll;

use crate::bits::BitString;
use rand::Rng;
use thiserror::Error;

pub use dpll::{dpll_solve, BudgetExceeded, DpllOutcome, DEFAULT_DECISION_BUDGET};

/// The six clause patterns consistent with both plants (neither 000 nor 111).
pub const ALLOWED_PATTERNS: [[bool; 3]; 6] = [
    [true, false, false],
    [false, true, false],
    [false, false, true],
    [true, true, false],
    [true, false, true],
    [false, true, true],
];

/// One 3SAT clause: a disallowed assignment `pattern` on three distinct spins.
///
/// Spin indices are 0-based internally; the DIMACS layer shifts to 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub bits: [usize; 3],
    pub pattern: [bool; 3],
}

impl Clause {
    pub fn new(bits: [usize; 3], pattern: [bool; 3]) -> Self {
        assert!(
            bits[0] != bits[1] && bits[0] != bits[2] && bits[1] != bits[2],
            "clause spins must be pairwise distinct"
        );
        Clause { bits, pattern }
    }

    /// True when `z` matches the disallowed pattern on this clause's bits.
    pub fn violated_by(&self, z: &BitString) -> bool {
        self.bits
            .iter()
            .zip(self.pattern.iter())
            .all(|(&b, &w)| z.get(b) == w)
    }

    pub fn pattern_weight(&self) -> usize {
        self.pattern.iter().filter(|&&w| w).count()
    }
}

/// Which plant an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Plant {
    Zeros,
    Ones,
}

impl Plant {
    pub fn bit_string(self, n: usize) -> BitString {
        match self {
            Plant::Zeros => BitString::zeros(n),
            Plant::Ones => BitString::ones(n),
        }
    }

    pub fn other(self) -> Plant {
        match self {
            Plant::Zeros => Plant::Ones,
            Plant::Ones => Plant::Zeros,
        }
    }
}

/// The weight-1/2 diagonal projector that penalizes one plant.
///
/// Fires (adds energy 1/2) exactly when the state matches `target` on `bits`.
/// The weight is fixed: one half-unit of energy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PenaltyTerm {
    pub bits: [usize; 3],
    pub target: [bool; 3],
}

impl PenaltyTerm {
    /// Energy in half-units (so 1 means an energy of 1/2).
    pub const WEIGHT_HALF_UNITS: i64 = 1;

    pub fn fires_on(&self, z: &BitString) -> bool {
        self.bits
            .iter()
            .zip(self.target.iter())
            .all(|(&b, &t)| z.get(b) == t)
    }

    pub fn penalized_plant(&self) -> Plant {
        if self.target[0] {
            Plant::Ones
        } else {
            Plant::Zeros
        }
    }
}

/// A double-plant instance: clause multiset over `n` spins, plants implicit
/// (all-zeros and all-ones), optional penalty term.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub clauses: Vec<Clause>,
    pub penalty: Option<PenaltyTerm>,
}

impl Instance {
    pub fn new(n: usize, clauses: Vec<Clause>) -> Self {
        Instance { n, clauses, penalty: None }
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn plants(&self) -> (BitString, BitString) {
        (BitString::zeros(self.n), BitString::ones(self.n))
    }

    pub fn satisfies_all_clauses(&self, z: &BitString) -> bool {
        self.clauses.iter().all(|c| !c.violated_by(z))
    }

    /// Both plants satisfy every clause, which for this clause shape is
    /// equivalent to every pattern lying in [`ALLOWED_PATTERNS`].
    pub fn plants_satisfy(&self) -> bool {
        let (z0, z1) = self.plants();
        self.satisfies_all_clauses(&z0) && self.satisfies_all_clauses(&z1)
    }

    /// The plant that was penalized (upper state at s=1), if any.
    pub fn penalized_plant(&self) -> Option<Plant> {
        self.penalty.as_ref().map(|p| p.penalized_plant())
    }

    /// CNF encoding of the clause list in DIMACS literal form (1-based).
    /// The penalty term is an energy feature, never a CNF clause.
    pub fn cnf(&self) -> Vec<Vec<i32>> {
        self.clauses.iter().map(clause_to_lits).collect()
    }
}

fn clause_to_lits(c: &Clause) -> Vec<i32> {
    // The CNF clause falsified exactly by the disallowed pattern: negate the
    // variable where the pattern bit is 1.
    c.bits
        .iter()
        .zip(c.pattern.iter())
        .map(|(&b, &w)| {
            let v = (b + 1) as i32;
            if w { -v } else { v }
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("clause cap {cap} exceeded before certification (n={n})")]
    ClauseCapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Budget(#[from] BudgetExceeded),
}

/// Default cap on generated clauses before giving up: 20 n ln n.
pub fn default_clause_cap(n: usize) -> usize {
    (20.0 * n as f64 * (n as f64).ln()).ceil() as usize
}

fn draw_clause<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Clause {
    // Sorted index triple drawn uniformly, pattern uniform over the six
    // allowed ones; together uniform over (triple, pattern) pairs.
    let mut bits = [0usize; 3];
    bits[0] = rng.gen_range(0..n);
    loop {
        bits[1] = rng.gen_range(0..n);
        if bits[1] != bits[0] {
            break;
        }
    }
    loop {
        bits[2] = rng.gen_range(0..n);
        if bits[2] != bits[0] && bits[2] != bits[1] {
            break;
        }
    }
    bits.sort_unstable();
    let pattern = ALLOWED_PATTERNS[rng.gen_range(0..ALLOWED_PATTERNS.len())];
    Clause::new(bits, pattern)
}

/// True iff the instance has no satisfying assignment besides its two plants,
/// decided by DPLL on the CNF plus one blocking clause per plant.
///
/// Callers must ensure both plants satisfy all clauses first.
pub fn certify_exactly_two(instance: &Instance) -> Result<bool, BudgetExceeded> {
    certify_exactly_two_with_budget(instance, DEFAULT_DECISION_BUDGET)
}

pub fn certify_exactly_two_with_budget(
    instance: &Instance,
    budget: u64,
) -> Result<bool, BudgetExceeded> {
    debug_assert!(instance.plants_satisfy());
    let mut cnf = instance.cnf();
    let n = instance.n;
    // Block all-zeros: at least one variable true. Block all-ones: dual.
    cnf.push((1..=n as i32).collect());
    cnf.push((1..=n as i32).map(|v| -v).collect());
    Ok(matches!(dpll_solve(&cnf, n, budget)?, DpllOutcome::Unsat))
}

/// Generate a certified double-plant instance by uniform clause addition.
///
/// Clauses are appended one at a time (duplicates allowed; the multiset is
/// kept) and the two-model certificate is checked after each addition, so the
/// instance returned is the first certified prefix of the random stream.
pub fn generate_double_plant<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
) -> Result<Instance, GenerateError> {
    generate_double_plant_capped(n, rng, default_clause_cap(n))
}

pub fn generate_double_plant_capped<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    cap: usize,
) -> Result<Instance, GenerateError> {
    assert!(n >= 3, "need at least 3 spins");
    let mut instance = Instance::new(n, Vec::new());
    // Counts of clauses violated by each single-bit flip of either plant. A
    // third model at Hamming distance 1 exists while any count is zero, so
    // the (expensive) DPLL certificate is only attempted once all are hit.
    let mut flip_cover_zeros = vec![0u32; n];
    let mut flip_cover_ones = vec![0u32; n];
    loop {
        if instance.m() >= cap {
            return Err(GenerateError::ClauseCapExceeded { n, cap });
        }
        let clause = draw_clause(n, rng);
        match clause.pattern_weight() {
            1 => {
                let p = clause.pattern.iter().position(|&w| w).unwrap();
                flip_cover_zeros[clause.bits[p]] += 1;
            }
            2 => {
                let p = clause.pattern.iter().position(|&w| !w).unwrap();
                flip_cover_ones[clause.bits[p]] += 1;
            }
            _ => unreachable!(),
        }
        instance.clauses.push(clause);
        let covered = flip_cover_zeros.iter().all(|&c| c > 0)
            && flip_cover_ones.iter().all(|&c| c > 0);
        if covered && certify_exactly_two(&instance)? {
            return Ok(instance);
        }
    }
}

/// Attach the penalty term lifting `target`'s energy by 1/2 on the given bits.
pub fn add_penalty_on_bits(instance: &Instance, target: Plant, bits: [usize; 3]) -> Instance {
    let value = matches!(target, Plant::Ones);
    let mut out = instance.clone();
    out.penalty = Some(PenaltyTerm {
        bits,
        target: [value; 3],
    });
    out
}

/// Attach the penalty on the conventional first three bits.
pub fn add_penalty(instance: &Instance, target: Plant) -> Instance {
    add_penalty_on_bits(instance, target, [0, 1, 2])
}

/// An instance with k planted satisfying assignments, used for the k-plant
/// second-order analysis. Plant 0 is the reference assignment.
#[derive(Debug, Clone)]
pub struct MultiPlantInstance {
    pub n: usize,
    pub clauses: Vec<Clause>,
    pub plants: Vec<BitString>,
}

impl MultiPlantInstance {
    pub fn k(&self) -> usize {
        self.plants.len()
    }

    pub fn satisfies_all_clauses(&self, z: &BitString) -> bool {
        self.clauses.iter().all(|c| !c.violated_by(z))
    }
}

/// Generate an instance whose only models are `k` mutually distant plants.
///
/// Plants: all-zeros, all-ones, and k-2 strings of Hamming weight n/2 drawn
/// at random but kept pairwise at distance >= n/4. Clause patterns are drawn
/// uniformly from the patterns consistent with every plant's projection onto
/// the clause bits; generation stops at the first certified prefix.
pub fn generate_k_plant<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
    cap: usize,
) -> Result<MultiPlantInstance, GenerateError> {
    assert!(k >= 2 && n >= 8, "need k >= 2 plants and n >= 8 spins");
    let mut plants = vec![BitString::zeros(n), BitString::ones(n)];
    while plants.len() < k {
        let mut candidate = BitString::zeros(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..n / 2 {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
            candidate.set(idx[i], true);
        }
        let far = plants.iter().all(|p| hamming_distance(p, &candidate) >= n / 4);
        if far {
            plants.push(candidate);
        }
    }

    let mut clauses: Vec<Clause> = Vec::new();
    // Clauses violated by each single-bit flip of each plant: distance-1
    // third models survive while any count is zero, so the DPLL certificate
    // is pointless until full coverage. Checked every 16 clauses after that.
    let mut flip_cover = vec![vec![0u32; n]; k];
    loop {
        if clauses.len() >= cap {
            return Err(GenerateError::ClauseCapExceeded { n, cap });
        }
        let mut bits = [0usize; 3];
        bits[0] = rng.gen_range(0..n);
        loop {
            bits[1] = rng.gen_range(0..n);
            if bits[1] != bits[0] {
                break;
            }
        }
        loop {
            bits[2] = rng.gen_range(0..n);
            if bits[2] != bits[0] && bits[2] != bits[1] {
                break;
            }
        }
        bits.sort_unstable();
        let allowed: Vec<[bool; 3]> = (0..8)
            .map(|p| [p & 1 == 1, p & 2 == 2, p & 4 == 4])
            .filter(|pat| {
                plants
                    .iter()
                    .all(|z| bits.iter().zip(pat.iter()).any(|(&b, &w)| z.get(b) != w))
            })
            .collect();
        if allowed.is_empty() {
            continue;
        }
        let pattern = allowed[rng.gen_range(0..allowed.len())];
        let clause = Clause::new(bits, pattern);
        for (r, z) in plants.iter().enumerate() {
            // the clause kills z + e_i iff its pattern matches z except at
            // exactly one of its own bits
            let mismatches: Vec<usize> = clause
                .bits
                .iter()
                .zip(clause.pattern.iter())
                .filter(|(&b, &w)| z.get(b) != w)
                .map(|(&b, _)| b)
                .collect();
            if mismatches.len() == 1 {
                flip_cover[r][mismatches[0]] += 1;
            }
        }
        clauses.push(clause);

        let covered = flip_cover.iter().all(|row| row.iter().all(|&c| c > 0));
        if covered && clauses.len() % 16 == 0 {
            let mut cnf: Vec<Vec<i32>> = clauses.iter().map(clause_to_lits).collect();
            for z in &plants {
                cnf.push(
                    (0..n)
                        .map(|i| {
                            let v = (i + 1) as i32;
                            if z.get(i) { -v } else { v }
                        })
                        .collect(),
                );
            }
            if matches!(
                dpll_solve(&cnf, n, DEFAULT_DECISION_BUDGET)?,
                DpllOutcome::Unsat
            ) {
                return Ok(MultiPlantInstance { n, clauses, plants });
            }
        }
    }
}

pub fn hamming_distance(a: &BitString, b: &BitString) -> usize {
    a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
}

/// The canonical 3-spin instance holding all six allowed patterns on bits
/// (0,1,2): its only models are 000 and 111.
pub fn six_pattern_instance() -> Instance {
    Instance::new(
        3,
        ALLOWED_PATTERNS
            .iter()
            .map(|&pattern| Clause::new([0, 1, 2], pattern))
            .collect(),
    )
}
