//! From window probabilities to session labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::logistic::{fit_logistic, sigmoid};
use crate::classify::LR_L2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accumulator {
    /// Number of windows at or above the threshold.
    Sum,
    /// That number divided by the window count.
    Avg,
    /// Sum of the raw probabilities.
    SoftSum,
}

impl Accumulator {
    pub const DEFAULT: [Accumulator; 2] = [Accumulator::Sum, Accumulator::Avg];

    pub fn as_str(self) -> &'static str {
        match self {
            Accumulator::Sum => "sum",
            Accumulator::Avg => "avg",
            Accumulator::SoftSum => "softsum",
        }
    }
}

impl fmt::Display for Accumulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Accumulator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Accumulator::Sum),
            "avg" | "average" => Ok(Accumulator::Avg),
            "softsum" | "soft-sum" => Ok(Accumulator::SoftSum),
            other => Err(Error::Validation(format!("unknown accumulator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AggregatorKind {
    #[serde(rename = "TM")]
    TrainingMean,
    #[serde(rename = "LR")]
    Logistic,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 2] = [AggregatorKind::TrainingMean, AggregatorKind::Logistic];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregatorKind::TrainingMean => "TM",
            AggregatorKind::Logistic => "LR",
        }
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TM" => Ok(AggregatorKind::TrainingMean),
            "LR" => Ok(AggregatorKind::Logistic),
            other => Err(Error::Validation(format!("unknown aggregator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScore {
    pub session_id: String,
    pub accumulator: Accumulator,
    pub value: f64,
    pub n_windows: usize,
}

pub fn accumulate(session_id: &str, probs: &[f64], accumulator: Accumulator, threshold: f64) -> Result<SessionScore> {
    if probs.is_empty() {
        return Err(Error::EmptySession(session_id.to_string()));
    }
    let count = probs.iter().filter(|&&p| p >= threshold).count() as f64;
    let value = match accumulator {
        Accumulator::Sum => count,
        Accumulator::Avg => count / probs.len() as f64,
        Accumulator::SoftSum => probs.iter().sum(),
    };
    Ok(SessionScore {
        session_id: session_id.to_string(),
        accumulator,
        value,
        n_windows: probs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    TrainingMean { accumulator: Accumulator, mean: f64 },
    Logistic { accumulator: Accumulator, weight: f64, bias: f64 },
}

fn single_accumulator(scores: &[SessionScore]) -> Result<Accumulator> {
    let first = scores
        .first()
        .ok_or_else(|| Error::Validation("no training sessions for the aggregator".into()))?
        .accumulator;
    if scores.iter().any(|s| s.accumulator != first) {
        return Err(Error::Validation("training scores mix accumulators".into()));
    }
    Ok(first)
}

pub fn fit_aggregator(kind: AggregatorKind, scores: &[SessionScore], labels: &[u8]) -> Result<Aggregator> {
    let accumulator = single_accumulator(scores)?;
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            location: "aggregator labels".into(),
            expected: scores.len(),
            found: labels.len(),
        });
    }
    match kind {
        AggregatorKind::TrainingMean => {
            let mean = scores.iter().map(|s| s.value).sum::<f64>() / scores.len() as f64;
            Ok(Aggregator::TrainingMean { accumulator, mean })
        }
        AggregatorKind::Logistic => {
            let positives = labels.iter().filter(|&&l| l == 1).count();
            if positives == 0 || positives == labels.len() {
                return Err(Error::DegenerateTraining(
                    "logistic aggregator needs sessions of both labels".into(),
                ));
            }
            let rows: Vec<[f64; 1]> = scores.iter().map(|s| [s.value]).collect();
            let fit = fit_logistic(&rows, labels, LR_L2)?;
            Ok(Aggregator::Logistic {
                accumulator,
                weight: fit.weights[0],
                bias: fit.bias,
            })
        }
    }
}

impl Aggregator {
    pub fn accumulator(&self) -> Accumulator {
        match *self {
            Aggregator::TrainingMean { accumulator, .. } | Aggregator::Logistic { accumulator, .. } => accumulator,
        }
    }

    pub fn predict_session(&self, score: &SessionScore) -> Result<u8> {
        if score.accumulator != self.accumulator() {
            return Err(Error::Validation(format!(
                "aggregator fitted on {} scores given a {} score",
                self.accumulator(),
                score.accumulator
            )));
        }
        Ok(match *self {
            Aggregator::TrainingMean { mean, .. } => u8::from(score.value >= mean),
            Aggregator::Logistic { weight, bias, .. } => u8::from(sigmoid(weight * score.value + bias) >= 0.5),
        })
    }
}

/// Running count of windows at or above the threshold, one point per window.
pub fn trajectory(session_id: &str, probs: &[f64], threshold: f64) -> Result<Vec<(usize, usize)>> {
    if probs.is_empty() {
        return Err(Error::EmptySession(session_id.to_string()));
    }
    let mut total = 0;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            total += usize::from(p >= threshold);
            (i, total)
        })
        .collect())
}
