//! Significance baselines from a prior-matched random predictor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::f1_unchecked;
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: f64,
    /// Sample standard deviation over replicates.
    pub sigma: f64,
    pub positive_fraction: f64,
    pub replicates: usize,
}

impl Baseline {
    pub fn threshold(&self, sigmas: f64) -> f64 {
        self.mean + sigmas * self.sigma
    }

    pub fn threshold_2sigma(&self) -> f64 {
        self.threshold(2.0)
    }

    pub fn threshold_3sigma(&self) -> f64 {
        self.threshold(3.0)
    }
}

/// F1 of `n_boot` random predictors that emit label 1 with the empirical
/// positive rate of `labels`, each scored against `labels`.
pub fn prior_matched_baseline(labels: &[u8], n_boot: usize, seed: u64) -> Result<Baseline> {
    if n_boot < MIN_REPLICATES {
        return Err(Error::Validation(format!(
            "{n_boot} bootstrap replicates; at least {MIN_REPLICATES} required"
        )));
    }
    if labels.len() < 2 {
        return Err(Error::Validation(format!("baseline over {} labels; need 2", labels.len())));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        log::warn!("baseline over {} labels that all share one value", labels.len());
    }
    let p = positives as f64 / labels.len() as f64;
    let mut rng = rng_for(seed, &[]);
    let mut preds = vec![0u8; labels.len()];
    let scores: Vec<f64> = (0..n_boot)
        .map(|_| {
            for v in preds.iter_mut() {
                *v = u8::from(rng.random_bool(p));
            }
            f1_unchecked(&preds, labels)
        })
        .collect();
    let mean = scores.iter().sum::<f64>() / n_boot as f64;
    let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n_boot - 1) as f64;
    Ok(Baseline {
        mean,
        sigma: var.sqrt(),
        positive_fraction: p,
        replicates: n_boot,
    })
}

/// Window-level baseline; reported with its 3-sigma threshold.
pub fn bootstrap_local_baseline(window_labels: &[u8], n_boot: usize, seed: u64) -> Result<Baseline> {
    prior_matched_baseline(window_labels, n_boot, seed)
}

/// Session-level baseline; reported with 2- and 3-sigma thresholds.
pub fn bootstrap_global_baseline(session_labels: &[u8], n_boot: usize, seed: u64) -> Result<Baseline> {
    prior_matched_baseline(session_labels, n_boot, seed)
}
