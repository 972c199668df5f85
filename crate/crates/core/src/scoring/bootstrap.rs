use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_REPLICATES: usize = 5000;
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Zero-based nearest-rank position of percentile `p` among `n` sorted values.
fn percentile_index(p: f64, n: usize) -> usize {
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n) - 1
}

/// Percentile bootstrap interval for the mean of `scores`, resampling dates
/// with replacement. Replicate `r` draws from its own ChaCha stream, so the
/// result does not depend on scheduling.
pub fn bootstrap_ci(scores: &[f64], replicates: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    bootstrap_ci_with(Exec::default(), scores, replicates, level, seed)
}

pub fn bootstrap_ci_with(exec: Exec, scores: &[f64], replicates: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("cannot bootstrap an empty series".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let n = scores.len();
    let mut means = exec.map(replicates, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let sum: f64 = (0..n).map(|_| scores[rng.random_range(0..n)]).sum();
        sum / n as f64
    });
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let lo = means[percentile_index(alpha, replicates)];
    let hi = means[percentile_index(1.0 - alpha, replicates)];
    Ok((lo, hi))
}
