//! Window-level probabilistic classifiers.

pub mod gnb;
pub mod knn;
pub mod logistic;
pub mod store;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use gnb::GaussianNb;
use knn::Neighbors;
use logistic::sigmoid;

/// L2 weight of the logistic-regression classifier.
pub const LR_L2: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub const SVM_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const KNN_K_GRID: [usize; 7] = [1, 3, 5, 10, 30, 50, 100];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ModelKind {
    #[serde(rename = "GNB")]
    Gnb,
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "LSVM")]
    Lsvm { c: f64 },
    #[serde(rename = "KNN")]
    Knn { k: usize, standardize: bool },
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Gnb => f.write_str("GNB"),
            ModelKind::Lr => f.write_str("LR"),
            ModelKind::Lsvm { c } => write!(f, "L-SVM_{c}"),
            ModelKind::Knn { k, standardize: false } => write!(f, "KNN_{k}"),
            ModelKind::Knn { k, standardize: true } => write!(f, "KNN_{k}_std"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    /// Accepts the display names: `GNB`, `LR`, `L-SVM_<c>`, `KNN_<k>` and
    /// `KNN_<k>_std`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("unknown model '{s}'"));
        let upper = s.trim().to_ascii_uppercase();
        if upper == "GNB" {
            return Ok(ModelKind::Gnb);
        }
        if upper == "LR" {
            return Ok(ModelKind::Lr);
        }
        if let Some(c) = upper.strip_prefix("L-SVM_").or_else(|| upper.strip_prefix("LSVM_")) {
            let c: f64 = c.parse().map_err(|_| bad())?;
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Validation(format!("SVM penalty must be positive, got {c}")));
            }
            return Ok(ModelKind::Lsvm { c });
        }
        if let Some(rest) = upper.strip_prefix("KNN_") {
            let (k, standardize) = match rest.strip_suffix("_STD") {
                Some(k) => (k, true),
                None => (rest, false),
            };
            let k: usize = k.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(Error::Validation("KNN needs k >= 1".into()));
            }
            return Ok(ModelKind::Knn { k, standardize });
        }
        Err(bad())
    }
}

/// The fourteen models of the default grid.
pub fn default_model_grid() -> Vec<ModelKind> {
    let mut grid = vec![ModelKind::Gnb, ModelKind::Lr];
    grid.extend(SVM_C_GRID.iter().map(|&c| ModelKind::Lsvm { c }));
    grid.extend(KNN_K_GRID.iter().map(|&k| ModelKind::Knn { k, standardize: false }));
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    /// Only the SVM draws random numbers (coordinate order).
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        ModelSpec { kind, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parameters {
    Gnb(GaussianNb),
    Lr { weights: Vec<f64>, bias: f64 },
    Lsvm { weights: Vec<f64>, bias: f64, platt_a: f64, platt_b: f64 },
    Knn(Neighbors),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub feature_dim: usize,
    pub parameters: Parameters,
}

fn check_rows<R: AsRef<[f64]>>(rows: &[R], labels: &[u8]) -> Result<usize> {
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            location: "training labels".into(),
            expected: rows.len(),
            found: labels.len(),
        });
    }
    let dim = rows.first().map_or(0, |r| r.as_ref().len());
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                location: format!("training row {i}"),
                expected: dim,
                found: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("training row {i} has a non-finite feature")));
        }
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Validation(format!("label {bad} is not binary")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateTraining(format!(
            "{} training examples with a single label",
            labels.len()
        )));
    }
    Ok(dim)
}

pub fn train<R: AsRef<[f64]>>(spec: ModelSpec, rows: &[R], labels: &[u8]) -> Result<TrainedModel> {
    let feature_dim = check_rows(rows, labels)?;
    let parameters = match spec.kind {
        ModelKind::Gnb => Parameters::Gnb(gnb::fit_gnb(rows, labels)),
        ModelKind::Lr => {
            let fit = logistic::fit_logistic(rows, labels, LR_L2)?;
            Parameters::Lr {
                weights: fit.weights,
                bias: fit.bias,
            }
        }
        ModelKind::Lsvm { c } => {
            let fit = svm::fit_linear_svm(rows, labels, c, spec.seed)?;
            let decision: Vec<f64> = rows
                .iter()
                .map(|r| affine(&fit.weights, fit.bias, r.as_ref()))
                .collect();
            let (platt_a, platt_b) = svm::platt_scale(&decision, labels);
            Parameters::Lsvm {
                weights: fit.weights,
                bias: fit.bias,
                platt_a,
                platt_b,
            }
        }
        ModelKind::Knn { k, standardize } => Parameters::Knn(knn::fit_knn(rows, labels, k, standardize)),
    };
    Ok(TrainedModel {
        spec,
        feature_dim,
        parameters,
    })
}

fn affine(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    weights.iter().zip(x).fold(bias, |acc, (w, v)| acc + w * v)
}

impl TrainedModel {
    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                location: "feature vector".into(),
                expected: self.feature_dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("query has a non-finite feature".into()));
        }
        Ok(())
    }

    /// Signed distance-like score for the linear models.
    pub fn decision_function(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        match &self.parameters {
            Parameters::Lr { weights, bias } | Parameters::Lsvm { weights, bias, .. } => Ok(affine(weights, *bias, x)),
            _ => Err(Error::Validation(format!("{} has no decision function", self.spec.kind))),
        }
    }

    /// Probability that the window comes from a label-1 session.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.parameters {
            Parameters::Gnb(m) => m.posterior(x),
            Parameters::Lr { weights, bias } => sigmoid(affine(weights, *bias, x)),
            Parameters::Lsvm {
                weights,
                bias,
                platt_a,
                platt_b,
            } => sigmoid(-(platt_a * affine(weights, *bias, x) + platt_b)),
            Parameters::Knn(m) => m.vote(x),
        })
    }

    pub fn predict_label(&self, x: &[f64], threshold: f64) -> Result<u8> {
        Ok(u8::from(self.predict_proba(x)? >= threshold))
    }
}
