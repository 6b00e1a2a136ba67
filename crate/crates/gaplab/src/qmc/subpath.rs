//! Rejection sampler for a single-spin subpath with fixed boundary bits.
//!
//! Target density over flip offsets 0 < tau_1 < ... < tau_w < lambda:
//!
//!   g(tau_1..tau_w) = c^w e^{-h integral (1-2S(t)) dt} / <s_out|A|s_in>
//!
//! Sampling runs a free alternating process: from a state with direction
//! B = 1 - 2*bit, the waiting time to the next flip is exponential with rate
//! sqrt(h^2+c^2) + B h. The path is truncated at lambda and accepted iff the
//! final bit matches s_out. The identity (omega+h)(omega-h) = c^2 collapses
//! the product of rates so the accepted paths carry exactly the density g.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("subpath rejection cap {cap} hit (lambda={lambda}, h={h}, c={c})")]
pub struct RetryCapExceeded {
    pub lambda: f64,
    pub h: f64,
    pub c: f64,
    pub cap: u64,
}

pub const DEFAULT_RETRY_CAP: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct SubpathSample {
    /// Flip offsets, strictly increasing in (0, lambda).
    pub flips: Vec<f64>,
    /// Trials consumed, including the accepted one.
    pub attempts: u64,
}

pub fn sample_subpath<R: Rng + ?Sized>(
    lambda: f64,
    h: f64,
    c: f64,
    s_in: bool,
    s_out: bool,
    rng: &mut R,
    retry_cap: u64,
) -> Result<SubpathSample, RetryCapExceeded> {
    assert!(lambda > 0.0 && c >= 0.0);
    if c == 0.0 {
        // No off-diagonal weight: flips are impossible and the boundary
        // sampler never proposes mismatched ends.
        debug_assert_eq!(s_in, s_out);
        return Ok(SubpathSample { flips: Vec::new(), attempts: 1 });
    }
    let omega = (h * h + c * c).sqrt();
    let mut flips = Vec::new();
    for attempt in 1..=retry_cap {
        flips.clear();
        let mut bit = s_in;
        let mut t = 0.0f64;
        loop {
            let rate = omega + if bit { -h } else { h };
            // rate = omega + B h > 0 whenever c > 0
            let u = -(1.0 - rng.gen::<f64>()).ln() / rate;
            let t_next = t + u;
            if t_next >= lambda {
                break;
            }
            if t_next <= t {
                continue; // collision with the previous flip; redraw
            }
            t = t_next;
            bit = !bit;
            flips.push(t);
        }
        if bit == s_out {
            return Ok(SubpathSample { flips: std::mem::take(&mut flips), attempts: attempt });
        }
    }
    Err(RetryCapExceeded { lambda, h, c, cap: retry_cap })
}
