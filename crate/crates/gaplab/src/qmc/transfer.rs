//! Per-segment 2x2 propagators and the boundary-bit sampler.
//!
//! On a segment of length lambda where the other spins are frozen, spin j
//! sees the propagator A = exp(-lambda (h sigma_z - c sigma_x)). With
//! omega = sqrt(h^2 + c^2) the closed form is
//!
//!   <0|A|0> = cosh(lambda omega) - (h/omega) sinh(lambda omega)
//!   <1|A|1> = cosh(lambda omega) + (h/omega) sinh(lambda omega)
//!   <0|A|1> = <1|A|0> = (c/omega) sinh(lambda omega)
//!
//! cosh overflows past lambda*omega ~ 710, and beta = 300 segments get well
//! beyond that, so the matrix is stored scaled by e^{-lambda omega} with the
//! log of the scale kept separately. Every probability the sampler needs is a
//! ratio, so the scale cancels.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("boundary weights underflowed to zero (step {step} of {steps})")]
    Degenerate { step: usize, steps: usize },
}

/// A = e^{log_scale} * m with m entries in [0, 1].
#[derive(Debug, Clone, Copy)]
pub struct TransferMatrix {
    m: [[f64; 2]; 2],
    log_scale: f64,
}

impl TransferMatrix {
    pub fn new(lambda: f64, h: f64, c: f64) -> Self {
        assert!(lambda >= 0.0 && c >= 0.0);
        let omega = (h * h + c * c).sqrt();
        if omega == 0.0 || lambda == 0.0 {
            return TransferMatrix { m: [[1.0, 0.0], [0.0, 1.0]], log_scale: 0.0 };
        }
        let x = lambda * omega;
        // cosh(x) e^{-x} and sinh(x) e^{-x} without ever forming e^{x}
        let em2x = (-2.0 * x).exp();
        let cosh_s = 0.5 * (1.0 + em2x);
        let sinh_s = 0.5 * (1.0 - em2x);
        let diag = (h / omega) * sinh_s;
        let off = (c / omega) * sinh_s;
        TransferMatrix {
            m: [[cosh_s - diag, off], [off, cosh_s + diag]],
            log_scale: x,
        }
    }

    /// Scaled entry: e^{-log_scale} <row|A|col>.
    pub fn scaled(&self, row: usize, col: usize) -> f64 {
        self.m[row][col]
    }

    /// True matrix entry; overflows for log_scale beyond ~709.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.m[row][col] * self.log_scale.exp()
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }
}

/// Normalized 2x2 product accumulator (divides by the max entry each step,
/// which is all the boundary sampler needs since it only takes ratios).
#[derive(Debug, Clone, Copy)]
struct Scaled2x2 {
    m: [[f64; 2]; 2],
}

impl Scaled2x2 {
    fn identity() -> Self {
        Scaled2x2 { m: [[1.0, 0.0], [0.0, 1.0]] }
    }

    /// self * a, renormalized.
    fn mul_renorm(&self, a: &TransferMatrix) -> Self {
        let mut out = [[0.0; 2]; 2];
        let mut max = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                let v = self.m[r][0] * a.scaled(0, c) + self.m[r][1] * a.scaled(1, c);
                out[r][c] = v;
                max = max.max(v);
            }
        }
        if max > 0.0 {
            for row in &mut out {
                for v in row {
                    *v /= max;
                }
            }
        }
        Scaled2x2 { m: out }
    }
}

/// Sample the boundary bits s_0 .. s_q of spin j at the segment boundaries,
/// one bit per matrix, from
///
///   Z(s_0..s_q) ~ <s_0|A_q|s_q> <s_q|A_{q-1}|s_{q-1}> ... <s_1|A_0|s_0>
///
/// by sequential conditionals: first s_0 from the diagonal of the full
/// product, then each s_i given s_{i-1} using a precomputed suffix product.
pub fn sample_boundaries<R: Rng + ?Sized>(
    matrices: &[TransferMatrix],
    rng: &mut R,
) -> Result<Vec<bool>, BoundaryError> {
    let q1 = matrices.len();
    assert!(q1 >= 1, "need at least one segment");
    // suffix[i] ~ A_q A_{q-1} ... A_i (scaled); suffix[q1] = identity
    let mut suffix = vec![Scaled2x2::identity(); q1 + 1];
    for i in (0..q1).rev() {
        suffix[i] = suffix[i + 1].mul_renorm(&matrices[i]);
    }

    let mut bits = Vec::with_capacity(q1);
    let w0 = suffix[0].m[0][0];
    let w1 = suffix[0].m[1][1];
    let total = w0 + w1;
    if !(total > 0.0) || !total.is_finite() {
        return Err(BoundaryError::Degenerate { step: 0, steps: q1 });
    }
    let s0 = rng.gen::<f64>() * total >= w0;
    bits.push(s0);

    for i in 1..q1 {
        let prev = bits[i - 1] as usize;
        let s0i = bits[0] as usize;
        let weight = |v: usize| suffix[i].m[s0i][v] * matrices[i - 1].scaled(v, prev);
        let w0 = weight(0);
        let w1 = weight(1);
        let total = w0 + w1;
        if !(total > 0.0) || !total.is_finite() {
            return Err(BoundaryError::Degenerate { step: i, steps: q1 });
        }
        bits.push(rng.gen::<f64>() * total >= w0);
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// exp(-lambda M) for M = [[h, -c], [-c, -h]] by scaled Taylor series.
    fn exp_series(lambda: f64, h: f64, c: f64) -> [[f64; 2]; 2] {
        let m = [[-lambda * h, lambda * c], [lambda * c, lambda * h]];
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut acc = term;
        for k in 1..60 {
            let mut next = [[0.0; 2]; 2];
            for r in 0..2 {
                for cc in 0..2 {
                    next[r][cc] = (term[r][0] * m[0][cc] + term[r][1] * m[1][cc]) / k as f64;
                }
            }
            term = next;
            for r in 0..2 {
                for cc in 0..2 {
                    acc[r][cc] += term[r][cc];
                }
            }
        }
        acc
    }

    #[test]
    fn zero_length_is_identity() {
        let a = TransferMatrix::new(0.0, 1.3, 0.7);
        assert_eq!(a.entry(0, 0), 1.0);
        assert_eq!(a.entry(1, 1), 1.0);
        assert_eq!(a.entry(0, 1), 0.0);
    }

    #[test]
    fn closed_form_matches_series() {
        for &(l, h, c) in &[(1.0, 0.0, 1.0), (0.7, 0.4, 0.9), (2.0, -1.1, 0.3), (0.5, 3.0, 2.0)] {
            let a = TransferMatrix::new(l, h, c);
            let e = exp_series(l, h, c);
            for r in 0..2 {
                for cc in 0..2 {
                    assert!(
                        (a.entry(r, cc) - e[r][cc]).abs() < 1e-12,
                        "lambda={l} h={h} c={c} [{r}{cc}]: {} vs {}",
                        a.entry(r, cc),
                        e[r][cc]
                    );
                }
            }
        }
        let a = TransferMatrix::new(1.0, 0.0, 1.0);
        assert!((a.entry(0, 0) - 1.0f64.cosh()).abs() < 1e-12);
        assert!((a.entry(0, 1) - 1.0f64.sinh()).abs() < 1e-12);
    }

    #[test]
    fn determinant_is_one() {
        // Moderate lambda*omega: the identity det = cosh^2 - sinh^2 loses
        // all relative precision once e^{-2x} sits below roundoff.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let l = rng.gen_range(0.01..2.0);
            let h = rng.gen_range(-1.5..1.5);
            let c = rng.gen_range(0.05..1.5);
            let a = TransferMatrix::new(l, h, c);
            // det(true) = det(scaled) e^{2 log_scale}
            let det = (a.scaled(0, 0) * a.scaled(1, 1) - a.scaled(0, 1) * a.scaled(1, 0))
                * (2.0 * a.log_scale()).exp();
            assert!((det - 1.0).abs() < 1e-9, "det={det}");
        }
    }

    #[test]
    fn semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let l1 = rng.gen_range(0.01..2.0);
            let l2 = rng.gen_range(0.01..2.0);
            let h = rng.gen_range(-2.0..2.0);
            let c = rng.gen_range(0.05..2.0);
            let whole = TransferMatrix::new(l1 + l2, h, c);
            let a1 = TransferMatrix::new(l1, h, c);
            let a2 = TransferMatrix::new(l2, h, c);
            for sp in 0..2 {
                for s in 0..2 {
                    let composed: f64 =
                        (0..2).map(|k| a2.entry(sp, k) * a1.entry(k, s)).sum();
                    let scale = whole.entry(sp, s).abs().max(1.0);
                    assert!(
                        (whole.entry(sp, s) - composed).abs() < 1e-12 * scale,
                        "{} vs {composed}",
                        whole.entry(sp, s)
                    );
                }
            }
        }
    }

    #[test]
    fn no_overflow_at_extreme_scale() {
        let a = TransferMatrix::new(300.0, 10.0, 0.01);
        assert!(a.scaled(0, 0).is_finite());
        assert!(a.scaled(1, 1) > 0.0);
        let mats = vec![a; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // h > 0 strongly favours bit 1; the sampler must not NaN out
        let bits = sample_boundaries(&mats, &mut rng).unwrap();
        assert!(bits.iter().all(|&b| b));
    }

    #[test]
    fn single_segment_symmetric_field_is_fair() {
        let mats = vec![TransferMatrix::new(1.0, 0.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_boundaries(&mats, &mut rng).unwrap()[0])
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "p={p}");
    }

    #[test]
    fn large_beta_prefers_dominant_eigenvector() {
        // Single long segment with h > 0: p(s0 = 1) approaches the |1>-weight
        // of the dominant eigenvector of -h sigma_z + c sigma_x. Checked
        // against the exact value from the 2x2 eigendecomposition.
        let h = 1.0f64;
        let c = 1.0f64;
        let omega = (h * h + c * c).sqrt();
        let lambda = 6.0 / omega;
        // eigenvector for +omega of [[-h, c], [c, h]]: (c, h + omega)
        let (v0, v1) = (c, h + omega);
        let plus_weight = v1 * v1 / (v0 * v0 + v1 * v1);
        let x = lambda * omega;
        let p_exact = (plus_weight + (1.0 - plus_weight) * (-2.0 * x).exp())
            / (1.0 + (-2.0 * x).exp());
        let mats = vec![TransferMatrix::new(lambda, h, c)];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 200_000;
        let ones = (0..n)
            .filter(|_| sample_boundaries(&mats, &mut rng).unwrap()[0])
            .count();
        let p = ones as f64 / n as f64;
        let se = (p_exact * (1.0 - p_exact) / n as f64).sqrt();
        assert!((p - p_exact).abs() < 4.0 * se, "p={p} vs {p_exact}");
        assert!(p > 0.8, "dominant eigenvector must carry most weight, p={p}");
    }

    #[test]
    fn q2_frequencies_match_enumeration() {
        let mats = vec![
            TransferMatrix::new(0.8, 0.6, 1.0),
            TransferMatrix::new(1.3, -0.4, 1.0),
            TransferMatrix::new(0.5, 1.2, 1.0),
        ];
        // exact Z over the 8 boundary configurations
        let mut probs = [0.0f64; 8];
        let mut total = 0.0;
        for conf in 0..8usize {
            let s0 = conf & 1;
            let s1 = (conf >> 1) & 1;
            let s2 = (conf >> 2) & 1;
            let w = mats[2].scaled(s0, s2) * mats[1].scaled(s2, s1) * mats[0].scaled(s1, s0);
            probs[conf] = w;
            total += w;
        }
        for p in &mut probs {
            *p /= total;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 1_000_000usize;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            let bits = sample_boundaries(&mats, &mut rng).unwrap();
            let conf = bits[0] as usize | (bits[1] as usize) << 1 | (bits[2] as usize) << 2;
            counts[conf] += 1;
        }
        let tv: f64 = (0..8)
            .map(|k| (counts[k] as f64 / n as f64 - probs[k]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.005, "total variation {tv}");
    }
}
