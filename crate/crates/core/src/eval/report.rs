//! CSV exports in the layouts of the published result tables.
//!
//! | file       | columns                                                        |
//! |------------|----------------------------------------------------------------|
//! | table 2    | `Score,Window Size,F1` (local 3-sigma threshold)              |
//! | table 3    | `Score,2σ,3σ` (global thresholds)                              |
//! | table 4    | `Score,Model,Input Type,w,n_λ,F1`                              |
//! | table 5    | `Score,Model,n_λ,Input Type,w,Accumulator,Aggregator,F1`      |
//!
//! Scores are printed with four decimals.

use std::io::Write;

use super::bootstrap::Baseline;
use super::grid::{ExperimentResult, GlobalScore, GridReport, SpectrumBank};
use crate::corpus::ScoreKey;
use crate::dmdc::{build_features, InputType};
use crate::error::{Error, Result};

pub const TABLE2_HEADER: [&str; 3] = ["Score", "Window Size", "F1"];
pub const TABLE3_HEADER: [&str; 3] = ["Score", "2σ", "3σ"];
pub const TABLE4_HEADER: [&str; 6] = ["Score", "Model", "Input Type", "w", "n_λ", "F1"];
pub const TABLE5_HEADER: [&str; 8] = ["Score", "Model", "n_λ", "Input Type", "w", "Accumulator", "Aggregator", "F1"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv output>".into(),
            source: io,
        },
        other => Error::Validation(format!("csv: {other:?}")),
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().flexible(false).from_writer(out)
}

pub fn f4(v: f64) -> String {
    format!("{v:.4}")
}

/// Highest local F1 among cells for `score` (and `w`, if given) that passed
/// `filter`; ties go to the lower cell index.
pub fn best_local<'a>(
    results: &'a [ExperimentResult],
    score: ScoreKey,
    w: Option<usize>,
    filter: impl Fn(&ExperimentResult) -> bool,
) -> Option<&'a ExperimentResult> {
    results
        .iter()
        .filter(|r| r.key.score == score && w.is_none_or(|w| r.key.w == w) && r.local_f1.is_some() && filter(r))
        .fold(None, |best: Option<&ExperimentResult>, r| match best {
            Some(b) if b.local_f1 >= r.local_f1 => Some(b),
            _ => Some(r),
        })
}

/// Best (cell, accumulator x aggregator) for `score` on the global task.
pub fn best_global(results: &[ExperimentResult], score: ScoreKey) -> Option<(&ExperimentResult, &GlobalScore)> {
    results
        .iter()
        .filter(|r| r.key.score == score)
        .filter_map(|r| r.best_global().map(|g| (r, g)))
        .fold(None, |best: Option<(&ExperimentResult, &GlobalScore)>, cand| match best {
            Some(b) if b.1.f1 >= cand.1.f1 => Some(b),
            _ => Some(cand),
        })
}

pub fn write_table2<W: Write>(out: W, local: &[(ScoreKey, usize, Baseline)]) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(TABLE2_HEADER).map_err(csv_err)?;
    for (score, w, b) in local {
        wtr.write_record([score.as_str().to_string(), w.to_string(), f4(b.threshold_3sigma())])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_table3<W: Write>(out: W, global: &[(ScoreKey, Baseline)]) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(TABLE3_HEADER).map_err(csv_err)?;
    for (score, b) in global {
        wtr.write_record([score.as_str().to_string(), f4(b.threshold_2sigma()), f4(b.threshold_3sigma())])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Best advancing cell per (score, w), in grid order.
pub fn write_table4<W: Write>(out: W, report: &GridReport) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(TABLE4_HEADER).map_err(csv_err)?;
    for &score in &report.config.score_keys {
        for &w in &report.config.windows {
            if let Some(r) = best_local(&report.results, score, Some(w), |r| r.advanced) {
                wtr.write_record([
                    score.as_str().to_string(),
                    r.key.model.to_string(),
                    r.key.input_type.to_string(),
                    r.key.w.to_string(),
                    r.key.n_lambda.to_string(),
                    f4(r.local_f1.unwrap_or(0.0)),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Best global configuration per score.
pub fn write_table5<W: Write>(out: W, report: &GridReport) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(TABLE5_HEADER).map_err(csv_err)?;
    for &score in &report.config.score_keys {
        if let Some((r, g)) = best_global(&report.results, score) {
            wtr.write_record([
                score.as_str().to_string(),
                r.key.model.to_string(),
                r.key.n_lambda.to_string(),
                r.key.input_type.to_string(),
                r.key.w.to_string(),
                g.accumulator.to_string(),
                g.aggregator.to_string(),
                f4(g.f1.unwrap_or(0.0)),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

fn opt(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_default()
}

/// One row per cell with every score, in cell order.
pub fn write_cells<W: Write>(out: W, report: &GridReport) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record([
        "index",
        "Score",
        "Model",
        "Input Type",
        "w",
        "n_λ",
        "local_f1",
        "local_3σ",
        "advanced",
        "global_2σ",
        "global_3σ",
        "best_global_f1",
        "best_accumulator",
        "best_aggregator",
        "failure",
    ])
    .map_err(csv_err)?;
    for r in &report.results {
        let best = r.best_global();
        wtr.write_record([
            r.index.to_string(),
            r.key.score.to_string(),
            r.key.model.to_string(),
            r.key.input_type.to_string(),
            r.key.w.to_string(),
            r.key.n_lambda.to_string(),
            opt(r.local_f1),
            opt(r.baseline_3sigma_local()),
            r.advanced.to_string(),
            opt(r.baseline_2sigma_global()),
            opt(r.baseline_3sigma_global()),
            opt(best.and_then(|g| g.f1)),
            best.map(|g| g.accumulator.to_string()).unwrap_or_default(),
            best.map(|g| g.aggregator.to_string()).unwrap_or_default(),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Held-out window and session predictions of every advancing cell.
pub fn write_predictions<W: Write>(out: W, report: &GridReport) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record([
        "index", "level", "session_id", "t", "fold", "accumulator", "aggregator", "value", "predicted", "label",
    ])
    .map_err(csv_err)?;
    for r in report.results.iter().filter(|r| r.advanced) {
        for p in &r.window_predictions {
            let predicted = u8::from(p.probability >= report.config.threshold);
            wtr.write_record([
                r.index.to_string(),
                "window".into(),
                p.session_id.clone(),
                p.t.to_string(),
                p.fold.to_string(),
                String::new(),
                String::new(),
                format!("{}", p.probability),
                predicted.to_string(),
                p.label.to_string(),
            ])
            .map_err(csv_err)?;
        }
        for p in &r.session_predictions {
            wtr.write_record([
                r.index.to_string(),
                "session".into(),
                p.session_id.clone(),
                String::new(),
                p.fold.to_string(),
                p.accumulator.to_string(),
                p.aggregator.to_string(),
                format!("{}", p.value),
                p.predicted.to_string(),
                p.label.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

/// One row per (window, w, n_lambda, input type); shorter vectors are padded
/// with empty fields up to the widest configuration.
pub fn write_features<W: Write>(
    out: W,
    bank: &SpectrumBank,
    n_lambdas: &[usize],
    input_types: &[InputType],
) -> Result<()> {
    let width = n_lambdas
        .iter()
        .flat_map(|&n| input_types.iter().map(move |it| it.feature_len(n)))
        .max()
        .unwrap_or(0);
    let mut wtr = writer(out);
    let mut header: Vec<String> = ["session_id", "t", "w", "input_type", "n_lambda"].map(String::from).to_vec();
    header.extend((0..width).map(|i| format!("v{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (&w, windows) in &bank.by_window {
        for ws in windows {
            for &n in n_lambdas {
                for &it in input_types {
                    let fv = build_features(&ws.spectrum, it, n);
                    let mut row = vec![
                        bank.sessions[ws.session].session_id.clone(),
                        ws.t.to_string(),
                        w.to_string(),
                        it.to_string(),
                        n.to_string(),
                    ];
                    row.extend(fv.values.iter().map(|v| format!("{v}")));
                    row.resize(header.len(), String::new());
                    wtr.write_record(&row).map_err(csv_err)?;
                }
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_spectra<W: Write>(out: W, bank: &SpectrumBank) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["session_id", "t", "w", "nonzero_T", "nonzero_C", "degenerate"])
        .map_err(csv_err)?;
    for (&w, windows) in &bank.by_window {
        for ws in windows {
            wtr.write_record([
                bank.sessions[ws.session].session_id.clone(),
                ws.t.to_string(),
                w.to_string(),
                ws.spectrum.nonzero_t.to_string(),
                ws.spectrum.nonzero_c.to_string(),
                ws.spectrum.degenerate.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_labels<W: Write>(out: W, bank: &SpectrumBank) -> Result<()> {
    let mut wtr = writer(out);
    let mut header = vec!["session_id".to_string()];
    header.extend(ScoreKey::ALL.iter().map(|k| k.to_string()));
    wtr.write_record(&header).map_err(csv_err)?;
    for s in &bank.sessions {
        let mut row = vec![s.session_id.clone()];
        row.extend(ScoreKey::ALL.iter().map(|&k| s.labels.get(k).to_string()));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_trajectory<W: Write>(out: W, session_id: &str, points: &[(usize, usize)]) -> Result<()> {
    let mut wtr = writer(out);
    wtr.write_record(["session_id", "window_index", "cumulative_score"])
        .map_err(csv_err)?;
    for (i, c) in points {
        wtr.write_record([session_id.to_string(), i.to_string(), c.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv output>", e))
}
