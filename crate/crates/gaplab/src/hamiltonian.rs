//! Diagonal energies and local fields of H(s) = (1-s) H_B + s H_P.
//!
//! The decomposition used by both perturbation theory and the worldline
//! sampler is H = H_0 + V with
//!
//!   H_0 = s H_P + (1-s) (sum_i c_i) / 2        (diagonal)
//!   V   = - sum_i gamma_i sigma_x^i,  gamma_i = (1-s) c_i / 2
//!
//! Problem energies are exact half-integers (violated clause counts plus an
//! optional 1/2 penalty). They are kept as integer half-unit counts so the
//! reciprocals taken by the perturbation sums see exact denominators.

use crate::bits::BitString;
use crate::sat::Instance;
use serde::{Deserialize, Deserializer, Serialize};
use std::ops::{Add, AddAssign, Sub};

/// An energy stored as an integer number of half-units: `HalfUnits(3)` is 3/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfUnits(pub i64);

impl HalfUnits {
    pub const ZERO: HalfUnits = HalfUnits(0);

    pub fn from_units(units: i64) -> Self {
        HalfUnits(2 * units)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 * 0.5
    }
}

impl Add for HalfUnits {
    type Output = HalfUnits;
    fn add(self, rhs: Self) -> Self {
        HalfUnits(self.0 + rhs.0)
    }
}

impl AddAssign for HalfUnits {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for HalfUnits {
    type Output = HalfUnits;
    fn sub(self, rhs: Self) -> Self {
        HalfUnits(self.0 - rhs.0)
    }
}

/// Per-spin transverse coefficients c_i of the beginning Hamiltonian.
///
/// All entries must be strictly positive: the worldline measure requires the
/// off-diagonal part of H to be nonpositive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCoefficients {
    c: Vec<f64>,
}

impl<'de> Deserialize<'de> for FieldCoefficients {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            c: Vec<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        FieldCoefficients::new(raw.c).map_err(serde::de::Error::custom)
    }
}

impl FieldCoefficients {
    pub fn uniform(n: usize) -> Self {
        FieldCoefficients { c: vec![1.0; n] }
    }

    pub fn new(c: Vec<f64>) -> Result<Self, NonPositiveCoefficient> {
        match c.iter().position(|&x| !(x > 0.0)) {
            Some(i) => Err(NonPositiveCoefficient { index: i, value: c[i] }),
            None => Ok(FieldCoefficients { c }),
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.c[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn sum(&self) -> f64 {
        self.c.iter().sum()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("field coefficient c[{index}] = {value} is not strictly positive")]
pub struct NonPositiveCoefficient {
    pub index: usize,
    pub value: f64,
}

/// The s-dependent split of H(s) into diagonal offset and per-spin couplings.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub s: f64,
    /// (1-s) * sum_i c_i / 2, the constant diagonal shift from H_B.
    pub diagonal_offset: f64,
    /// gamma_i = (1-s) c_i / 2, the sigma_x coupling of each spin.
    pub gamma: Vec<f64>,
}

impl Decomposition {
    pub fn new(coeffs: &FieldCoefficients, s: f64) -> Self {
        assert!((0.0..=1.0).contains(&s), "schedule parameter s={s} outside [0,1]");
        Decomposition {
            s,
            diagonal_offset: (1.0 - s) * coeffs.sum() / 2.0,
            gamma: coeffs.values().iter().map(|&c| (1.0 - s) * c / 2.0).collect(),
        }
    }
}

/// H_P(z): violated clauses counted with multiplicity, plus 1/2 if the
/// penalty fires on z.
pub fn problem_energy(instance: &Instance, z: &BitString) -> HalfUnits {
    debug_assert_eq!(z.len(), instance.n);
    let violated = instance.clauses.iter().filter(|c| c.violated_by(z)).count() as i64;
    let mut e = HalfUnits::from_units(violated);
    if let Some(p) = &instance.penalty {
        if p.fires_on(z) {
            e += HalfUnits(1);
        }
    }
    e
}

/// Full diagonal energy H_0(z) = s H_P(z) + (1-s) sum_i c_i / 2.
pub fn diag_energy(instance: &Instance, coeffs: &FieldCoefficients, s: f64, z: &BitString) -> f64 {
    s * problem_energy(instance, z).as_f64() + (1.0 - s) * coeffs.sum() / 2.0
}

/// Index from spins to the clauses containing them, built once per instance.
/// The worldline sampler's inner loop only ever touches one spin's list.
#[derive(Debug, Clone)]
pub struct Incidence {
    per_spin: Vec<Vec<u32>>,
    /// Spin pairs sharing a clause; the only pairs with non-additive energy.
    clausemates: Vec<(usize, usize)>,
}

impl Incidence {
    pub fn build(instance: &Instance) -> Self {
        let mut per_spin = vec![Vec::new(); instance.n];
        let mut mates = std::collections::BTreeSet::new();
        for (id, c) in instance.clauses.iter().enumerate() {
            for &b in &c.bits {
                per_spin[b].push(id as u32);
            }
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let (lo, hi) = if c.bits[a] < c.bits[b] {
                        (c.bits[a], c.bits[b])
                    } else {
                        (c.bits[b], c.bits[a])
                    };
                    mates.insert((lo, hi));
                }
            }
        }
        if let Some(p) = &instance.penalty {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let (lo, hi) = if p.bits[a] < p.bits[b] {
                        (p.bits[a], p.bits[b])
                    } else {
                        (p.bits[b], p.bits[a])
                    };
                    mates.insert((lo, hi));
                }
            }
        }
        Incidence {
            per_spin,
            clausemates: mates.into_iter().collect(),
        }
    }

    pub fn clauses_of(&self, spin: usize) -> &[u32] {
        &self.per_spin[spin]
    }

    pub fn clausemate_pairs(&self) -> &[(usize, usize)] {
        &self.clausemates
    }

    pub fn are_clausemates(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.clausemates.binary_search(&key).is_ok()
    }
}

/// Difference of problem energy between bit j = 0 and bit j = 1 with all
/// other bits of `z` fixed, in half-units. Only clauses containing j (and the
/// penalty, if it involves j) contribute.
pub fn problem_energy_split(
    instance: &Instance,
    incidence: &Incidence,
    j: usize,
    z: &BitString,
) -> HalfUnits {
    let mut z0 = z.clone();
    z0.set(j, false);
    let mut z1 = z0.clone();
    z1.set(j, true);
    let mut diff = HalfUnits::ZERO;
    for &id in incidence.clauses_of(j) {
        let c = &instance.clauses[id as usize];
        diff += HalfUnits::from_units(c.violated_by(&z0) as i64 - c.violated_by(&z1) as i64);
    }
    if let Some(p) = &instance.penalty {
        if p.bits.contains(&j) {
            diff += HalfUnits(p.fires_on(&z0) as i64 - p.fires_on(&z1) as i64);
        }
    }
    diff
}

/// The local field f_j of the splitting H_0 = g_j + f_j sigma_z^j, evaluated
/// on the other-spin configuration carried by `z` (bit j of `z` is ignored).
///
/// Equal to [diag_energy(bit j = 0) - diag_energy(bit j = 1)] / 2; the
/// transverse offset cancels in the difference, so only s and the clauses
/// containing j enter.
pub fn field_coefficient(
    instance: &Instance,
    incidence: &Incidence,
    s: f64,
    j: usize,
    z: &BitString,
) -> f64 {
    s * problem_energy_split(instance, incidence, j, z).as_f64() / 2.0
}
