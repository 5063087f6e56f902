//! Model files: an 8-byte magic, a little-endian `u32` header length, a JSON
//! header, then every parameter as a little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gnb::GaussianNb;
use super::knn::Neighbors;
use super::{ModelSpec, Parameters, TrainedModel};
use crate::dmdc::InputType;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DMDCMODL";
const FORMAT_VERSION: u32 = 1;

/// Where a model came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub score: Option<String>,
    pub w: Option<usize>,
    pub n_lambda: Option<usize>,
    pub input_type: Option<InputType>,
    /// Cross-validation fold whose sessions were held out, if any.
    pub fold: Option<usize>,
    pub held_out: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    spec: ModelSpec,
    feature_dim: usize,
    /// Stored training points (KNN only).
    n_points: usize,
    standardized: bool,
    parameter_count: usize,
    metadata: ModelMetadata,
}

fn flatten(params: &Parameters) -> Vec<f64> {
    let mut out = Vec::new();
    match params {
        Parameters::Gnb(m) => {
            for v in m.means.iter().chain(&m.variances) {
                out.extend_from_slice(v);
            }
            out.extend_from_slice(&m.log_priors);
        }
        Parameters::Lr { weights, bias } => {
            out.extend_from_slice(weights);
            out.push(*bias);
        }
        Parameters::Lsvm {
            weights,
            bias,
            platt_a,
            platt_b,
        } => {
            out.extend_from_slice(weights);
            out.extend([*bias, *platt_a, *platt_b]);
        }
        Parameters::Knn(m) => {
            for p in &m.points {
                out.extend_from_slice(p);
            }
            out.extend(m.labels.iter().map(|&l| f64::from(l)));
            if let Some((centre, scale)) = &m.standardize {
                out.extend_from_slice(centre);
                out.extend_from_slice(scale);
            }
        }
    }
    out
}

pub fn encode_model(model: &TrainedModel, metadata: &ModelMetadata) -> Result<Vec<u8>> {
    let params = flatten(&model.parameters);
    let (n_points, standardized) = match &model.parameters {
        Parameters::Knn(m) => (m.points.len(), m.standardize.is_some()),
        _ => (0, false),
    };
    let header = Header {
        format_version: FORMAT_VERSION,
        spec: model.spec,
        feature_dim: model.feature_dim,
        n_points,
        standardized,
        parameter_count: params.len(),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Validation(format!("model header: {e}")))?;
    let header_len = u32::try_from(json.len()).map_err(|_| Error::Validation("model header too large".into()))?;
    let mut out = Vec::with_capacity(12 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Validation(format!("model file: {}", msg.into()))
}

pub fn decode_model(bytes: &[u8]) -> Result<(TrainedModel, ModelMetadata)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + header_len).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported version {}", header.format_version)));
    }
    let raw = &bytes[12 + header_len..];
    if raw.len() != 8 * header.parameter_count {
        return Err(corrupt(format!(
            "expected {} parameters, found {} bytes",
            header.parameter_count,
            raw.len()
        )));
    }
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let d = header.feature_dim;
    let expected = match header.spec.kind {
        super::ModelKind::Gnb => 4 * d + 2,
        super::ModelKind::Lr => d + 1,
        super::ModelKind::Lsvm { .. } => d + 3,
        super::ModelKind::Knn { .. } => header.n_points * (d + 1) + if header.standardized { 2 * d } else { 0 },
    };
    if values.len() != expected {
        return Err(corrupt(format!("expected {expected} parameters, header says {}", values.len())));
    }
    let mut cursor = values.into_iter();
    let mut take = |n: usize| -> Vec<f64> { cursor.by_ref().take(n).collect() };
    let parameters = match header.spec.kind {
        super::ModelKind::Gnb => {
            let means = [take(d), take(d)];
            let variances = [take(d), take(d)];
            let p = take(2);
            Parameters::Gnb(GaussianNb {
                means,
                variances,
                log_priors: [p[0], p[1]],
            })
        }
        super::ModelKind::Lr => {
            let weights = take(d);
            Parameters::Lr {
                weights,
                bias: take(1)[0],
            }
        }
        super::ModelKind::Lsvm { .. } => {
            let weights = take(d);
            let tail = take(3);
            Parameters::Lsvm {
                weights,
                bias: tail[0],
                platt_a: tail[1],
                platt_b: tail[2],
            }
        }
        super::ModelKind::Knn { k, .. } => {
            let points = (0..header.n_points).map(|_| take(d)).collect();
            let labels = take(header.n_points).into_iter().map(|l| u8::from(l == 1.0)).collect();
            let standardize = header.standardized.then(|| (take(d), take(d)));
            Parameters::Knn(Neighbors {
                k,
                points,
                labels,
                standardize,
            })
        }
    };
    let model = TrainedModel {
        spec: header.spec,
        feature_dim: d,
        parameters,
    };
    Ok((model, header.metadata))
}

pub fn write_model(path: impl AsRef<Path>, model: &TrainedModel, metadata: &ModelMetadata) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_model(model, metadata)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<(TrainedModel, ModelMetadata)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
