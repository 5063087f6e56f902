//! Linear SVM trained by dual coordinate descent, with Platt calibration.
//!
//! The primal objective is `1/2 |w|^2 + (C / n) sum_i max(0, 1 - y_i (w.x_i + b))`
//! with the bias folded into `w` through a constant feature. Averaging the
//! hinge loss makes the optimum independent of duplicating the training set.

use rand::seq::SliceRandom;

use super::logistic::sigmoid;
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Relative duality gap `(P - D) / max(1, |P|)` required for convergence.
pub const DUALITY_GAP_TOL: f64 = 1e-6;
const MAX_EPOCHS: usize = 50_000;

const PLATT_MAX_ITER: usize = 100;
const PLATT_MIN_STEP: f64 = 1e-10;
const PLATT_SIGMA: f64 = 1e-12;
const PLATT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub relative_gap: f64,
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

pub fn fit_linear_svm<R: AsRef<[f64]>>(rows: &[R], labels: &[u8], c: f64, seed: u64) -> Result<SvmFit> {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    let upper = c / n as f64;
    let sign: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let diag: Vec<f64> = rows.iter().map(|r| dot(r.as_ref(), r.as_ref()) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    // Weights followed by the bias.
    let mut w = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(seed, &[]);
    let margin = |w: &[f64], i: usize| dot(&w[..dim], rows[i].as_ref()) + w[dim];

    let mut gap = f64::INFINITY;
    for epoch in 1..=MAX_EPOCHS {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = sign[i] * margin(&w, i) - 1.0;
            let updated = (alpha[i] - g / diag[i]).clamp(0.0, upper);
            let delta = updated - alpha[i];
            if delta != 0.0 {
                alpha[i] = updated;
                let step = delta * sign[i];
                for (wj, xj) in w.iter_mut().zip(rows[i].as_ref()) {
                    *wj += step * xj;
                }
                w[dim] += step;
            }
        }
        let w2 = dot(&w, &w);
        let hinge: f64 = (0..n).map(|i| (1.0 - sign[i] * margin(&w, i)).max(0.0)).sum();
        let primal = 0.5 * w2 + upper * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * w2;
        gap = (primal - dual) / primal.abs().max(1.0);
        if gap < DUALITY_GAP_TOL {
            return Ok(SvmFit {
                bias: w[dim],
                weights: w[..dim].to_vec(),
                epochs: epoch,
                relative_gap: gap,
            });
        }
    }
    Err(Error::Convergence(format!(
        "linear SVM duality gap {gap:.3e} after {MAX_EPOCHS} epochs"
    )))
}

/// Sigmoid parameters `(a, b)` with `P(y = 1 | f) = 1 / (1 + exp(a f + b))`,
/// fitted by Newton's method on smoothed targets.
pub fn platt_scale(decision: &[f64], labels: &[u8]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let target: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&target)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let mut fval = objective(a, b);
    for _ in 0..PLATT_MAX_ITER {
        let (mut h11, mut h22, mut h21) = (PLATT_SIGMA, PLATT_SIGMA, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &t) in decision.iter().zip(&target) {
            // p = P(y = 1), q = 1 - p.
            let p = sigmoid(-(f * a + b));
            let q = 1.0 - p;
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < PLATT_EPS && g2.abs() < PLATT_EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut moved = false;
        while step >= PLATT_MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if !moved {
            log::debug!("Platt line search failed; keeping current sigmoid");
            break;
        }
    }
    (a, b)
}
