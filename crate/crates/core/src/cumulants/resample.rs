use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CenteredSample, DelaySample};
use crate::error::{Error, Result};
use crate::lattice::PathSet;

/// How replicate estimates are produced from one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResampleMethod {
    /// Contiguous, disjoint subsamples that together cover the sample.
    SampleSplit { splits: usize },
    /// Full-size resamples drawn with replacement.
    Bootstrap { resamples: usize },
}

impl ResampleMethod {
    pub fn replicates(&self) -> usize {
        match *self {
            ResampleMethod::SampleSplit { splits } => splits,
            ResampleMethod::Bootstrap { resamples } => resamples,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonzeroTestConfig {
    pub method: ResampleMethod,
    /// Significance level: an entry is called nonzero when `p < p_threshold`.
    pub p_threshold: f64,
    pub rng_seed: u64,
}

impl NonzeroTestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.method.replicates() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 replicates, got {}",
                self.method.replicates()
            )));
        }
        if !(self.p_threshold > 0.0 && self.p_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "p-value threshold must lie in (0, 1), got {}",
                self.p_threshold
            )));
        }
        Ok(())
    }

    pub fn with_threshold(self, p_threshold: f64) -> Self {
        NonzeroTestConfig { p_threshold, ..self }
    }
}

/// Replicate values of one estimator with their mean and standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithSpread {
    pub mean: f64,
    /// Sample standard deviation of the replicates over `sqrt(M)`.
    pub stderr: f64,
    pub replicates: Vec<f64>,
}

impl EstimateWithSpread {
    pub fn from_replicates(replicates: Vec<f64>) -> Self {
        let m = replicates.len() as f64;
        let mean = replicates.iter().sum::<f64>() / m;
        let var = if replicates.len() > 1 {
            replicates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        EstimateWithSpread {
            mean,
            stderr: (var / m).sqrt(),
            replicates,
        }
    }

    /// Sample standard deviation of the replicates.
    pub fn std_dev(&self) -> f64 {
        self.stderr * (self.replicates.len() as f64).sqrt()
    }
}

/// Row boundaries of split `k` out of `m` over `n` rows. Sizes differ by at
/// most one and the splits partition `0..n` in order.
pub(crate) fn split_bounds(n: usize, m: usize, k: usize) -> (usize, usize) {
    (k * n / m, (k + 1) * n / m)
}

fn replicate_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

/// Row indices of bootstrap resample `k`. Each resample has its own RNG
/// stream, so the result does not depend on evaluation order.
pub(crate) fn bootstrap_indices(n: usize, seed: u64, k: usize) -> Vec<usize> {
    let mut rng = replicate_rng(seed, k);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Evaluate `f` on every replicate of `sample` under `cfg`, in parallel.
/// Output order is the replicate order.
pub fn map_replicates<T, F>(sample: &DelaySample, cfg: &NonzeroTestConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&CenteredSample) -> Result<T> + Sync,
{
    cfg.validate()?;
    let n = sample.len();
    match cfg.method {
        ResampleMethod::SampleSplit { splits } => {
            if n < 2 * splits {
                return Err(Error::SampleTooSmall {
                    needed: 2 * splits - 1,
                    got: n,
                });
            }
            (0..splits)
                .into_par_iter()
                .map(|k| {
                    let (lo, hi) = split_bounds(n, splits, k);
                    f(&CenteredSample::from_range(sample, lo, hi))
                })
                .collect()
        }
        ResampleMethod::Bootstrap { resamples } => (0..resamples)
            .into_par_iter()
            .map(|k| f(&CenteredSample::from_indices(sample, &bootstrap_indices(n, cfg.rng_seed, k))))
            .collect(),
    }
}

/// Replicates of the common-cumulant estimate of `set` at `order`.
pub fn resample_estimates(
    sample: &DelaySample,
    set: PathSet,
    order: usize,
    cfg: &NonzeroTestConfig,
) -> Result<EstimateWithSpread> {
    let reps = map_replicates(sample, cfg, |c| c.common_cumulant(set, order))?;
    Ok(EstimateWithSpread::from_replicates(reps))
}

/// [`resample_estimates`] for many sets at once, sharing each replicate.
pub fn replicate_estimates(
    sample: &DelaySample,
    sets: &[PathSet],
    order: usize,
    cfg: &NonzeroTestConfig,
) -> Result<Vec<EstimateWithSpread>> {
    let per_rep = map_replicates(sample, cfg, |c| {
        sets.iter().map(|&p| c.common_cumulant(p, order)).collect::<Result<Vec<f64>>>()
    })?;
    Ok((0..sets.len())
        .map(|j| EstimateWithSpread::from_replicates(per_rep.iter().map(|r| r[j]).collect()))
        .collect())
}
