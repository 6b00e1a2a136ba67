//! Continuous imaginary-time worldline Monte Carlo.
//!
//! A configuration is a periodic path z(t) on [0, beta] stored as per-spin
//! flip-time lists. The update resamples one spin's entire worldline from its
//! exact conditional given the others: cut the circle at the other spins'
//! flip times, build a transfer matrix per segment, sample the boundary bits
//! from their joint distribution, then fill each segment with the rejection
//! sampler. All moves are heat-bath, so there is no accept/reject at the path
//! level and no discretization error anywhere.
//!
//! Seeding the chain at the two plants and comparing the resulting energy
//! curves is what exposes both low-lying levels: past the point where the
//! sectors decouple, each chain relaxes into its own metastable sector.

pub mod blocking;
pub mod subpath;
pub mod transfer;

use crate::bits::BitString;
use crate::hamiltonian::{
    field_coefficient, problem_energy, problem_energy_split, FieldCoefficients, HalfUnits,
    Incidence,
};
use crate::sat::Instance;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub use subpath::{sample_subpath, SubpathSample, DEFAULT_RETRY_CAP};
pub use transfer::{sample_boundaries, TransferMatrix};

#[derive(Debug, Error)]
pub enum QmcError {
    #[error(transparent)]
    RetryCap(#[from] subpath::RetryCapExceeded),
    #[error(transparent)]
    Boundary(#[from] transfer::BoundaryError),
    #[error("{sweeps} sweeps at thinning {thin} yield {recorded} samples, not more than the {equil} discarded for equilibration")]
    InsufficientSamples {
        sweeps: usize,
        thin: usize,
        recorded: usize,
        equil: usize,
    },
    #[error("path invariant violated: {0}")]
    InvalidPath(String),
}

/// A periodic worldline: state at t=0 plus per-spin sorted flip times.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldlinePath {
    pub beta: f64,
    pub start: BitString,
    pub flips: Vec<Vec<f64>>,
}

impl WorldlinePath {
    /// The flipless seed path sitting at `z` for all imaginary time.
    pub fn seed(z: BitString, beta: f64) -> Self {
        assert!(beta > 0.0);
        let n = z.len();
        WorldlinePath { beta, start: z, flips: vec![Vec::new(); n] }
    }

    pub fn n_spins(&self) -> usize {
        self.start.len()
    }

    /// Total transition count m across all spins.
    pub fn transitions(&self) -> usize {
        self.flips.iter().map(|f| f.len()).sum()
    }

    pub fn validate(&self) -> Result<(), QmcError> {
        if self.flips.len() != self.start.len() {
            return Err(QmcError::InvalidPath("flip-list count != spin count".into()));
        }
        for (j, flips) in self.flips.iter().enumerate() {
            if flips.len() % 2 != 0 {
                return Err(QmcError::InvalidPath(format!(
                    "spin {j} has odd flip count {}",
                    flips.len()
                )));
            }
            let mut prev = -1.0f64;
            for &t in flips {
                if !(t > prev) || !(0.0..self.beta).contains(&t) {
                    return Err(QmcError::InvalidPath(format!(
                        "spin {j} flip time {t} out of order or range"
                    )));
                }
                prev = t;
            }
        }
        Ok(())
    }
}

/// One constant-field stretch of the circle as seen by one spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub length: f64,
    /// Local field f_j on this stretch.
    pub h: f64,
}

/// Cut the circle at every flip of the spins other than `j` and evaluate the
/// local field on each piece. Segments with equal fields are never merged:
/// the boundary times are exactly where boundary bits must be sampled.
pub fn segments_for_spin(
    path: &WorldlinePath,
    j: usize,
    instance: &Instance,
    incidence: &Incidence,
    s: f64,
) -> Vec<Segment> {
    let mut events: Vec<(f64, u32)> = Vec::new();
    for (k, flips) in path.flips.iter().enumerate() {
        if k == j {
            continue;
        }
        events.extend(flips.iter().map(|&t| (t, k as u32)));
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut z = path.start.clone();
    let mut h = field_coefficient(instance, incidence, s, j, &z);
    let mut segments = Vec::with_capacity(events.len() + 1);
    let mut t_prev = 0.0f64;
    for &(t, k) in &events {
        segments.push(Segment { t_start: t_prev, length: t - t_prev, h });
        z.flip(k as usize);
        if incidence.are_clausemates(j, k as usize) {
            h = field_coefficient(instance, incidence, s, j, &z);
        }
        t_prev = t;
    }
    segments.push(Segment { t_start: t_prev, length: path.beta - t_prev, h });
    segments
}

/// Counters for the subpath rejection sampler, exposed for observability.
#[derive(Debug, Clone, Copy, Default)]
pub struct SamplerStats {
    pub accepted: u64,
    pub attempts: u64,
}

impl SamplerStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Resample spin j's worldline from its exact conditional given the rest.
pub fn heat_bath_update<R: Rng + ?Sized>(
    path: &mut WorldlinePath,
    j: usize,
    instance: &Instance,
    incidence: &Incidence,
    coeffs: &FieldCoefficients,
    s: f64,
    rng: &mut R,
    retry_cap: u64,
    stats: &mut SamplerStats,
) -> Result<(), QmcError> {
    let gamma = (1.0 - s) * coeffs.get(j) / 2.0;
    let segments = segments_for_spin(path, j, instance, incidence, s);
    let matrices: Vec<TransferMatrix> = segments
        .iter()
        .map(|seg| TransferMatrix::new(seg.length, seg.h, gamma))
        .collect();
    let bounds = sample_boundaries(&matrices, rng)?;

    let mut new_flips = Vec::new();
    if gamma > 0.0 {
        let q1 = segments.len();
        for (i, seg) in segments.iter().enumerate() {
            let s_in = bounds[i];
            let s_out = bounds[(i + 1) % q1];
            let sub = sample_subpath(seg.length, seg.h, gamma, s_in, s_out, rng, retry_cap)?;
            stats.accepted += 1;
            stats.attempts += sub.attempts;
            new_flips.extend(sub.flips.iter().map(|&tau| seg.t_start + tau));
        }
    } else {
        debug_assert!(bounds.iter().all(|&b| b == bounds[0]));
    }
    path.start.set(j, bounds[0]);
    path.flips[j] = new_flips;
    Ok(())
}

/// One sweep: n heat-bath updates on uniformly random spins.
pub fn sweep<R: Rng + ?Sized>(
    path: &mut WorldlinePath,
    instance: &Instance,
    incidence: &Incidence,
    coeffs: &FieldCoefficients,
    s: f64,
    rng: &mut R,
    retry_cap: u64,
    stats: &mut SamplerStats,
) -> Result<(), QmcError> {
    let n = path.n_spins();
    for _ in 0..n {
        let j = rng.gen_range(0..n);
        heat_bath_update(path, j, instance, incidence, coeffs, s, rng, retry_cap, stats)?;
    }
    Ok(())
}

/// Time-weighted observables of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmcSample {
    /// (1/beta) integral of H_0(z(t)) dt.
    pub diag_integral: f64,
    /// Transition count m.
    pub transitions: usize,
    /// (1/beta) integral of W(z(t)) dt, in [0, n].
    pub weight_integral: f64,
}

/// Exact time averages over the piecewise-constant path.
pub fn measure(
    path: &WorldlinePath,
    instance: &Instance,
    incidence: &Incidence,
    coeffs: &FieldCoefficients,
    s: f64,
) -> QmcSample {
    let beta = path.beta;
    // Hamming weight: per-spin time spent at bit value 1.
    let mut weight_time = 0.0f64;
    for (j, flips) in path.flips.iter().enumerate() {
        let mut bit = path.start.get(j);
        let mut t_prev = 0.0;
        for &t in flips {
            if bit {
                weight_time += t - t_prev;
            }
            bit = !bit;
            t_prev = t;
        }
        if bit {
            weight_time += beta - t_prev;
        }
    }

    // Problem energy: walk the merged flip sequence, updating the exact
    // half-unit count through the clauses incident to the flipped spin.
    let mut events: Vec<(f64, u32)> = Vec::new();
    for (k, flips) in path.flips.iter().enumerate() {
        events.extend(flips.iter().map(|&t| (t, k as u32)));
    }
    events.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut z = path.start.clone();
    let mut e = problem_energy(instance, &z);
    let mut acc = 0.0f64; // integral of H_P dt
    let mut t_prev = 0.0f64;
    for &(t, k) in &events {
        acc += e.as_f64() * (t - t_prev);
        let k = k as usize;
        // split = E(bit_k = 0) - E(bit_k = 1) on the current other-spin state
        let split = problem_energy_split(instance, incidence, k, &z);
        e += if z.get(k) { split } else { HalfUnits(0) - split };
        z.flip(k);
        t_prev = t;
    }
    acc += e.as_f64() * (beta - t_prev);
    debug_assert_eq!(e, problem_energy(instance, &z));

    QmcSample {
        diag_integral: s * acc / beta + (1.0 - s) * coeffs.sum() / 2.0,
        transitions: path.transitions(),
        weight_integral: weight_time / beta,
    }
}

/// A mean with its blocking standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanErr {
    pub mean: f64,
    pub err: f64,
}

/// Thermal estimates from one chain, with blocking errors.
#[derive(Debug, Clone, Serialize)]
pub struct Estimates {
    pub h: MeanErr,
    pub h0: MeanErr,
    pub v: MeanErr,
    pub w: MeanErr,
    pub m_mean: f64,
    pub acc_rate: f64,
    pub samples: usize,
    pub discarded: usize,
}

/// Chain schedule: total sweeps, thinning interval, and samples discarded.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunParams {
    pub beta: f64,
    pub sweeps: usize,
    pub thin: usize,
    pub equil: usize,
    pub retry_cap: u64,
}

impl RunParams {
    pub fn new(beta: f64, sweeps: usize, thin: usize, equil: usize) -> Self {
        RunParams { beta, sweeps, thin, equil, retry_cap: DEFAULT_RETRY_CAP }
    }
}

/// Run one chain from the given seed state and report thermal estimates.
///
/// A sample is recorded every `thin` sweeps; the first `equil` samples are
/// discarded. <V> is -<m>/beta, and <H> = <H_0> + <V> holds identically
/// because both come from the same per-sample series.
pub fn run_point<R: Rng + ?Sized>(
    instance: &Instance,
    coeffs: &FieldCoefficients,
    s: f64,
    seed_state: BitString,
    params: RunParams,
    rng: &mut R,
) -> Result<Estimates, QmcError> {
    assert!(params.thin >= 1 && params.beta > 0.0);
    assert_eq!(coeffs.len(), instance.n);
    let recorded = params.sweeps / params.thin;
    if recorded <= params.equil {
        return Err(QmcError::InsufficientSamples {
            sweeps: params.sweeps,
            thin: params.thin,
            recorded,
            equil: params.equil,
        });
    }
    let incidence = Incidence::build(instance);
    let mut path = WorldlinePath::seed(seed_state, params.beta);
    let mut stats = SamplerStats::default();
    let mut samples: Vec<QmcSample> = Vec::with_capacity(recorded);
    for sweep_idx in 1..=params.sweeps {
        sweep(
            &mut path, instance, &incidence, coeffs, s, rng, params.retry_cap, &mut stats,
        )?;
        if sweep_idx % params.thin == 0 {
            samples.push(measure(&path, instance, &incidence, coeffs, s));
        }
    }
    let kept = &samples[params.equil..];
    let beta = params.beta;
    let h0_series: Vec<f64> = kept.iter().map(|q| q.diag_integral).collect();
    let v_series: Vec<f64> = kept.iter().map(|q| -(q.transitions as f64) / beta).collect();
    let h_series: Vec<f64> = kept
        .iter()
        .map(|q| q.diag_integral - q.transitions as f64 / beta)
        .collect();
    let w_series: Vec<f64> = kept.iter().map(|q| q.weight_integral).collect();
    let m_mean = kept.iter().map(|q| q.transitions as f64).sum::<f64>() / kept.len() as f64;

    let stat = |xs: &[f64]| MeanErr { mean: blocking::mean(xs), err: blocking::blocking_error(xs) };
    let est = Estimates {
        h: stat(&h_series),
        h0: stat(&h0_series),
        v: stat(&v_series),
        w: stat(&w_series),
        m_mean,
        acc_rate: stats.acceptance_rate(),
        samples: kept.len(),
        discarded: params.equil,
    };
    debug_assert!((est.h.mean - (est.h0.mean + est.v.mean)).abs() < 1e-9);
    Ok(est)
}
