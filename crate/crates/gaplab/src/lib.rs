//! A numerical laboratory for adiabatic-optimization Hamiltonians built from
//! planted 3SAT instances.
//!
//! The pieces, in dependency order:
//!
//! - [`sat`]: generation and certification of instances whose only models are
//!   the all-zeros and all-ones strings, plus DIMACS I/O and the penalty term
//!   that breaks their degeneracy.
//! - [`hamiltonian`]: diagonal energies and local fields of the interpolating
//!   Hamiltonian H(s) = (1-s) H_B + s H_P, with exact half-integer bookkeeping.
//! - [`spectrum`]: lowest-two eigenpairs by blocked iteration, the exact
//!   reference for small systems.
//! - [`perturbation`]: second- and fourth-order expansions around s = 1; the
//!   predicted crossing location and the beginning-Hamiltonian randomization
//!   statistics built on them.
//! - [`qmc`]: continuous imaginary-time worldline Monte Carlo with dual-seeded
//!   chains that expose both low-lying levels.
//! - [`experiment`]: the end-to-end pipeline and its file artifacts.
//! - [`dense`]: a brute-force dense route used to validate the others.

pub mod bits;
pub mod dense;
pub mod experiment;
pub mod hamiltonian;
pub mod perturbation;
pub mod qmc;
pub mod sat;
pub mod spectrum;

pub use bits::BitString;
