//! Evaluation protocol: scoring, grouped folds, bootstrap baselines, grid
//! sweeps and correlation.

pub mod bootstrap;
pub mod folds;
pub mod grid;
pub mod report;

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// F1 on the positive label; 0 when precision and recall are both 0.
pub fn f1_score(preds: &[u8], truth: &[u8]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Validation("F1 of an empty prediction set".into()));
    }
    Ok(f1_unchecked(preds, truth))
}

pub(crate) fn f1_unchecked(preds: &[u8], truth: &[u8]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &t) in preds.iter().zip(truth) {
        match (p == 1, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    // 2PR/(P+R) = 2tp/(2tp+fp+fn); zero denominators mean P + R = 0.
    let denom = 2 * tp + fp + fn_;
    if tp == 0 || denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Sample correlation and its two-sided p-value under a Student t
/// distribution with `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!("pearson: {} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Validation(format!("pearson needs at least 3 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Validation("pearson input has non-finite values".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the inputs has zero variance".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t2 = r * r * df / (1.0 - r * r);
        beta_reg(df / 2.0, 0.5, df / (df + t2))
    };
    Ok((r, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(f1_score(&[1, 1, 1, 1], &[1, 0, 1, 0]).unwrap(), 2.0 / 3.0);
        assert_eq!(f1_score(&[0, 0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 0.0);
        assert!(f1_score(&[1], &[1, 0]).is_err());
        assert!(f1_score(&[], &[]).is_err());
    }

    #[test]
    fn f1_matches_precision_recall_formula() {
        // tp 2, fp 1, fn 2: P = 2/3, R = 1/2, F1 = 4/7.
        let f = f1_score(&[1, 1, 1, 0, 0, 0], &[1, 1, 0, 1, 1, 0]).unwrap();
        assert!((f - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_signs() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &x).unwrap(), (1.0, 0.0));
        assert_eq!(pearson(&x, &neg).unwrap().0, -1.0);
        assert!(matches!(pearson(&x, &[1.0; 5]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&x[..2], &x[..2]).is_err());
    }

    proptest! {
        #[test]
        fn f1_permutation_invariant(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut crate::seed::rng_for(seed, &[]));
            let split = |v: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { v.iter().copied().unzip() };
            let (p1, t1) = split(&pairs);
            let (p2, t2) = split(&shuffled);
            prop_assert_eq!(f1_score(&p1, &t1).unwrap(), f1_score(&p2, &t2).unwrap());
        }

        #[test]
        fn pearson_affine(x in prop::collection::vec(-100.0f64..100.0, 3..30), a in 0.01f64..100.0, b in -50.0f64..50.0) {
            let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-3);
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let (r, _) = pearson(&x, &y).unwrap();
            prop_assert!((r - 1.0).abs() <= 1e-12);
        }
    }
}
