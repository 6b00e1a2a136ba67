//! Blocking (binning) error analysis for correlated Monte Carlo series.
//!
//! The standard error of the mean is taken from block averages at block size
//! 2^k, using the largest k that still leaves at least 32 blocks. For an
//! equilibrated chain the blocked error grows with k until blocks decorrelate
//! and then plateaus; 32 blocks keeps the variance estimate itself usable.

pub const MIN_BLOCKS: usize = 32;

pub fn mean(series: &[f64]) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    series.iter().sum::<f64>() / series.len() as f64
}

/// Standard error of the mean from the blocking plateau.
pub fn blocking_error(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return f64::NAN;
    }
    let mut level = 0usize;
    while (n >> (level + 1)) >= MIN_BLOCKS {
        level += 1;
    }
    let block = 1usize << level;
    let n_blocks = n / block;
    let means: Vec<f64> = (0..n_blocks)
        .map(|b| series[b * block..(b + 1) * block].iter().sum::<f64>() / block as f64)
        .collect();
    let grand = mean(&means);
    let var = means.iter().map(|&x| (x - grand) * (x - grand)).sum::<f64>()
        / (n_blocks - 1) as f64;
    (var / n_blocks as f64).sqrt()
}
