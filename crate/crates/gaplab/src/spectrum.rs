//! Exact lowest two eigenpairs of H(s) by blocked iteration with an implicit
//! matrix-vector product (the matrix is never stored).
//!
//! The solver is LOBPCG with block size 2 so a nearly degenerate lowest pair
//! converges jointly: the Rayleigh-Ritz step works on the invariant subspace
//! and does not care how the two Ritz vectors rotate inside it. This is what
//! resolves the tiny avoided-crossing gaps the instances are built to have.

use crate::bits::BitString;
use crate::hamiltonian::{FieldCoefficients, problem_energy};
use crate::sat::Instance;
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Largest n accepted by the implicit route (two work vectors of 2^n reals).
pub const MAX_SPECTRUM_N: usize = 20;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("n={n} exceeds the exact-diagonalization cap {cap}")]
    TooManySpins { n: usize, cap: usize },
    #[error("eigensolver did not reach residual {tol:e} at s={s} ({iterations} iterations, residual {residual:e})")]
    NotConverged {
        s: f64,
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("state vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

/// Lowest-two eigendata at one schedule point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumResult {
    pub s: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub w0: f64,
    pub w1: f64,
}

/// H(s) in implicit form: diagonal table plus per-spin flip couplings.
pub struct HamiltonianOperator {
    n: usize,
    dim: usize,
    /// H_P(z) for every basis index, fixed across s.
    problem: Vec<f64>,
    /// gamma_i = (1-s) c_i / 2
    gamma: Vec<f64>,
    offset: f64,
    s: f64,
}

impl HamiltonianOperator {
    pub fn new(
        instance: &Instance,
        coeffs: &FieldCoefficients,
        s: f64,
    ) -> Result<Self, SpectrumError> {
        let table = ProblemTable::build(instance)?;
        Ok(Self::from_table(&table, coeffs, s))
    }

    pub fn from_table(table: &ProblemTable, coeffs: &FieldCoefficients, s: f64) -> Self {
        assert_eq!(coeffs.len(), table.n);
        HamiltonianOperator {
            n: table.n,
            dim: table.energies.len(),
            problem: table.energies.clone(),
            gamma: coeffs.values().iter().map(|&c| (1.0 - s) * c / 2.0).collect(),
            offset: (1.0 - s) * coeffs.sum() / 2.0,
            s,
        }
    }

    /// Reuse the problem-energy table at a different schedule point.
    pub fn retarget(&mut self, coeffs: &FieldCoefficients, s: f64) {
        self.gamma = coeffs.values().iter().map(|&c| (1.0 - s) * c / 2.0).collect();
        self.offset = (1.0 - s) * coeffs.sum() / 2.0;
        self.s = s;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        let s = self.s;
        let off = self.offset;
        for z in 0..self.dim {
            out[z] = (s * self.problem[z] + off) * v[z];
        }
        for (i, &g) in self.gamma.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let bit = 1usize << i;
            for z in 0..self.dim {
                out[z] -= g * v[z ^ bit];
            }
        }
    }
}

/// Precomputed H_P(z) over the whole basis; reused across a scan in s.
pub struct ProblemTable {
    n: usize,
    energies: Vec<f64>,
}

impl ProblemTable {
    pub fn build(instance: &Instance) -> Result<Self, SpectrumError> {
        let n = instance.n;
        if n > MAX_SPECTRUM_N {
            return Err(SpectrumError::TooManySpins { n, cap: MAX_SPECTRUM_N });
        }
        // Compile clauses to (mask, match) pairs for fast index tests.
        let compiled: Vec<(usize, usize)> = instance
            .clauses
            .iter()
            .map(|c| {
                let mask = c.bits.iter().fold(0usize, |m, &b| m | (1 << b));
                let mat = c
                    .bits
                    .iter()
                    .zip(c.pattern.iter())
                    .fold(0usize, |m, (&b, &w)| m | ((w as usize) << b));
                (mask, mat)
            })
            .collect();
        let pen = instance.penalty.as_ref().map(|p| {
            let mask = p.bits.iter().fold(0usize, |m, &b| m | (1 << b));
            let mat = p
                .bits
                .iter()
                .zip(p.target.iter())
                .fold(0usize, |m, (&b, &t)| m | ((t as usize) << b));
            (mask, mat)
        });
        let dim = 1usize << n;
        let mut energies = vec![0.0f64; dim];
        for (z, e) in energies.iter_mut().enumerate() {
            let mut acc = compiled.iter().filter(|&&(m, w)| z & m == w).count() as f64;
            if let Some((m, w)) = pen {
                if z & m == w {
                    acc += 0.5;
                }
            }
            *e = acc;
        }
        debug_assert!({
            let z = 0;
            (energies[z] - problem_energy(instance, &BitString::from_index(z, n)).as_f64()).abs()
                < 1e-12
        });
        Ok(ProblemTable { n, energies })
    }

    pub fn energy(&self, z: usize) -> f64 {
        self.energies[z]
    }
}

/// Matrix-vector product against H(s) without storing the matrix.
pub fn apply_hamiltonian(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s: f64,
    v: &[f64],
) -> Result<Vec<f64>, SpectrumError> {
    let op = HamiltonianOperator::new(instance, coeffs, s)?;
    if v.len() != op.dim() {
        return Err(SpectrumError::DimensionMismatch { got: v.len(), expected: op.dim() });
    }
    let mut out = vec![0.0; op.dim()];
    op.apply(v, &mut out);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Modified Gram-Schmidt with a second pass; near-dependent columns are
/// dropped. Images are NOT carried through the column operations: near
/// convergence the update hv -= c hu cancels catastrophically and the
/// Rayleigh-Ritz matrix stops being B^T H B, which destabilizes the whole
/// iteration. Callers recompute exact images afterwards instead.
fn orthonormalize(basis: &mut Vec<Vec<f64>>) {
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    for mut v in basis.drain(..) {
        let initial = norm(&v).max(1e-300);
        for _ in 0..2 {
            for u in &kept {
                let c = dot(u, &v);
                if c != 0.0 {
                    for (x, y) in v.iter_mut().zip(u) {
                        *x -= c * y;
                    }
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-10 * initial && nv > 1e-14 {
            let inv = 1.0 / nv;
            v.iter_mut().for_each(|x| *x *= inv);
            kept.push(v);
        }
    }
    *basis = kept;
}

/// Rayleigh-Ritz on an orthonormal basis; returns eigenvalues ascending and
/// the coefficient matrix (columns are Ritz vectors in basis coordinates).
fn rayleigh_ritz(basis: &[Vec<f64>], images: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let k = basis.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = dot(&basis[i], &images[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut coeff = DMatrix::zeros(k, k);
    for (col, &i) in order.iter().enumerate() {
        coeff.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, coeff)
}

fn combine(basis: &[Vec<f64>], coeff: &DMatrix<f64>, col: usize) -> Vec<f64> {
    let dim = basis[0].len();
    let mut out = vec![0.0; dim];
    for (i, b) in basis.iter().enumerate() {
        let c = coeff[(i, col)];
        if c != 0.0 {
            for (o, &x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
    }
    out
}

/// Deterministic start pair: the uniform superposition and its
/// Hamming-weight-modulated complement.
fn default_start(op: &HamiltonianOperator) -> [Vec<f64>; 2] {
    let dim = op.dim();
    let amp = 1.0 / (dim as f64).sqrt();
    let x0 = vec![amp; dim];
    let half_n = op.n as f64 / 2.0;
    let x1: Vec<f64> = (0..dim)
        .map(|z| amp * ((z.count_ones() as f64) - half_n))
        .collect();
    [x0, x1]
}

pub struct Lobpcg {
    pub values: [f64; 2],
    pub vectors: [Vec<f64>; 2],
    pub iterations: usize,
}

pub fn lobpcg_lowest_two(
    op: &HamiltonianOperator,
    start: Option<[Vec<f64>; 2]>,
    tol: f64,
    max_iter: usize,
) -> Result<Lobpcg, SpectrumError> {
    let dim = op.dim();
    let mut basis: Vec<Vec<f64>> = match start {
        Some([a, b]) => vec![a, b],
        None => default_start(op).into(),
    };
    orthonormalize(&mut basis);
    // If a start pair collapsed (it may at dim=2 with a dependent column),
    // fall back to coordinate vectors.
    while basis.len() < 2.min(dim) {
        let mut v = vec![0.0; dim];
        v[basis.len()] = 1.0;
        basis.push(v);
        orthonormalize(&mut basis);
    }

    let apply_all = |basis: &[Vec<f64>]| -> Vec<Vec<f64>> {
        basis
            .iter()
            .map(|v| {
                let mut hv = vec![0.0; dim];
                op.apply(v, &mut hv);
                hv
            })
            .collect()
    };

    let mut images: Vec<Vec<f64>> = apply_all(&basis);
    let mut prev_x: Option<[Vec<f64>; 2]> = None;
    let mut residual = f64::INFINITY;
    for iteration in 0..max_iter {
        let (values, coeff) = rayleigh_ritz(&basis, &images);
        let x: Vec<Vec<f64>> = (0..2.min(basis.len())).map(|k| combine(&basis, &coeff, k)).collect();
        let hx: Vec<Vec<f64>> = (0..x.len()).map(|k| combine(&images, &coeff, k)).collect();

        let mut rs: Vec<Vec<f64>> = Vec::with_capacity(x.len());
        residual = 0.0f64;
        for k in 0..x.len() {
            let r: Vec<f64> = hx[k]
                .iter()
                .zip(&x[k])
                .map(|(&h, &v)| h - values[k] * v)
                .collect();
            residual = residual.max(norm(&r));
            rs.push(r);
        }
        if residual <= tol || dim <= 2 {
            let mut vecs = x;
            let v1 = if vecs.len() > 1 { vecs.pop().unwrap() } else { vec![0.0; dim] };
            let v0 = vecs.pop().unwrap();
            return Ok(Lobpcg {
                values: [values[0], if values.len() > 1 { values[1] } else { values[0] }],
                vectors: [v0, v1],
                iterations: iteration,
            });
        }

        // Next search space: current Ritz pair, residuals, previous pair.
        let mut next_basis = Vec::with_capacity(6);
        for v in x.iter() {
            next_basis.push(v.clone());
        }
        for r in rs {
            next_basis.push(r);
        }
        if let Some(prev) = prev_x.take() {
            for p in prev {
                next_basis.push(p);
            }
        }
        prev_x = Some([x[0].clone(), x[1].clone()]);
        basis = next_basis;
        orthonormalize(&mut basis);
        images = apply_all(&basis);
    }
    Err(SpectrumError::NotConverged {
        s: op.s,
        iterations: max_iter,
        residual,
        tol,
    })
}

fn weight_expectation(v: &[f64]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(z, &a)| a * a * z.count_ones() as f64)
        .sum()
}

/// Converged lowest-two eigenpairs of H(s) with Hamming-weight expectations.
pub fn lowest_two(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s: f64,
) -> Result<SpectrumResult, SpectrumError> {
    let table = ProblemTable::build(instance)?;
    let op = HamiltonianOperator::from_table(&table, coeffs, s);
    let sol = lobpcg_lowest_two(&op, None, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(result_from(s, &sol))
}

fn result_from(s: f64, sol: &Lobpcg) -> SpectrumResult {
    SpectrumResult {
        s,
        e0: sol.values[0],
        e1: sol.values[1],
        gap: sol.values[1] - sol.values[0],
        w0: weight_expectation(&sol.vectors[0]),
        w1: weight_expectation(&sol.vectors[1]),
    }
}

/// lowest_two across a grid, warm-starting each point from the previous one.
pub fn spectrum_scan(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s_grid: &[f64],
) -> Result<Vec<SpectrumResult>, SpectrumError> {
    let table = ProblemTable::build(instance)?;
    let mut results = Vec::with_capacity(s_grid.len());
    let mut warm: Option<[Vec<f64>; 2]> = None;
    for &s in s_grid {
        let op = HamiltonianOperator::from_table(&table, coeffs, s);
        let sol = lobpcg_lowest_two(&op, warm.take(), DEFAULT_TOL, DEFAULT_MAX_ITER)
            .map_err(|e| match e {
                SpectrumError::NotConverged { iterations, residual, tol, .. } => {
                    SpectrumError::NotConverged { s, iterations, residual, tol }
                }
                other => other,
            })?;
        results.push(result_from(s, &sol));
        warm = Some(sol.vectors);
    }
    Ok(results)
}
