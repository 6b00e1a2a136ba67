//! Dense reference route for small systems.
//!
//! Builds the full 2^n x 2^n Hamiltonian straight from the definitions and
//! diagonalizes it with nalgebra. Deliberately shares no code with the
//! iterative eigensolver or the worldline sampler so it can serve as an
//! independent check of both. Practical up to n ~ 12.

use crate::bits::BitString;
use crate::hamiltonian::{diag_energy, FieldCoefficients};
use crate::sat::Instance;
use nalgebra::{DMatrix, DVector};

pub const MAX_DENSE_N: usize = 14;

pub fn build_dense(instance: &Instance, coeffs: &FieldCoefficients, s: f64) -> DMatrix<f64> {
    let n = instance.n;
    assert!(n <= MAX_DENSE_N, "dense route capped at n={MAX_DENSE_N}");
    assert_eq!(coeffs.len(), n);
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for z in 0..dim {
        let zb = BitString::from_index(z, n);
        h[(z, z)] = diag_energy(instance, coeffs, s, &zb);
        for i in 0..n {
            h[(z, z ^ (1 << i))] = -(1.0 - s) * coeffs.get(i) / 2.0;
        }
    }
    h
}

/// Eigendecomposition sorted ascending by eigenvalue.
pub fn eigendecompose(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let dim = h.nrows();
    let mut vectors = DMatrix::zeros(dim, order.len());
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Lowest two eigenvalues with Hamming-weight expectations of each state.
pub fn lowest_two_dense(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s: f64,
) -> (f64, f64, f64, f64) {
    let h = build_dense(instance, coeffs, s);
    let (values, vectors) = eigendecompose(&h);
    let weight = |k: usize| {
        vectors
            .column(k)
            .iter()
            .enumerate()
            .map(|(z, &a)| a * a * (z.count_ones() as f64))
            .sum::<f64>()
    };
    (values[0], values[1], weight(0), weight(1))
}

/// Exact thermal averages at inverse temperature beta.
#[derive(Debug, Clone, Copy)]
pub struct ThermalAverages {
    pub h: f64,
    pub h0: f64,
    pub v: f64,
    pub w: f64,
}

pub fn thermal_averages(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s: f64,
    beta: f64,
) -> ThermalAverages {
    let n = instance.n;
    let dim = 1usize << n;
    let h = build_dense(instance, coeffs, s);
    let (values, vectors) = eigendecompose(&h);
    let e_min = values[0];
    let boltzmann: Vec<f64> = values.iter().map(|&e| (-(e - e_min) * beta).exp()).collect();
    let z_part: f64 = boltzmann.iter().sum();

    let diag_h0: DVector<f64> = DVector::from_fn(dim, |z, _| {
        diag_energy(instance, coeffs, s, &BitString::from_index(z, n))
    });
    let diag_w: DVector<f64> = DVector::from_fn(dim, |z, _| z.count_ones() as f64);

    let mut mean_h = 0.0;
    let mut mean_h0 = 0.0;
    let mut mean_w = 0.0;
    for k in 0..dim {
        let col = vectors.column(k);
        let p = boltzmann[k] / z_part;
        mean_h += p * values[k];
        let mut h0_k = 0.0;
        let mut w_k = 0.0;
        for z in 0..dim {
            let a2 = col[z] * col[z];
            h0_k += a2 * diag_h0[z];
            w_k += a2 * diag_w[z];
        }
        mean_h0 += p * h0_k;
        mean_w += p * w_k;
    }
    ThermalAverages {
        h: mean_h,
        h0: mean_h0,
        v: mean_h - mean_h0,
        w: mean_w,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{add_penalty, six_pattern_instance, Instance, Plant};

    #[test]
    fn free_spin_spectrum() {
        let inst = Instance::new(1, vec![]);
        let coeffs = FieldCoefficients::uniform(1);
        for &s in &[0.0, 0.3, 0.8, 1.0] {
            let (e0, e1, _, _) = lowest_two_dense(&inst, &coeffs, s);
            assert!((e0 - 0.0).abs() < 1e-12);
            assert!((e1 - (1.0 - s)).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_instance_diagonal_limit() {
        let inst = add_penalty(&six_pattern_instance(), Plant::Zeros);
        let coeffs = FieldCoefficients::uniform(3);
        let (e0, e1, w0, w1) = lowest_two_dense(&inst, &coeffs, 1.0);
        assert!((e0 - 0.0).abs() < 1e-12);
        assert!((e1 - 0.5).abs() < 1e-12);
        // ground state is 111, first excited is the penalized 000
        assert!((w0 - 3.0).abs() < 1e-9);
        assert!((w1 - 0.0).abs() < 1e-9);
    }

    #[test]
    fn single_spin_thermal_value() {
        let inst = Instance::new(1, vec![]);
        let coeffs = FieldCoefficients::uniform(1);
        let th = thermal_averages(&inst, &coeffs, 0.0, 5.0);
        assert!((th.h - 1.0 / (1.0 + 5.0f64.exp())).abs() < 1e-12);
        assert!((th.w - 0.5).abs() < 1e-12);
    }
}
