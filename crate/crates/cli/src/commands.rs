use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dmdc_core::aggregate::trajectory;
use dmdc_core::classify::store::{read_model, write_model, ModelMetadata};
use dmdc_core::classify::{train, ModelSpec};
use dmdc_core::corpus::{load_corpus, write_corpus, ScoreKey};
use dmdc_core::eval::grid::{
    build_bank, cell_features, compute_baselines, fit_fold_model, fold_model_seed, run_grid_on_bank,
    ExperimentResult, GridReport, SpectrumBank,
};
use dmdc_core::eval::report::{
    best_global, best_local, write_cells, write_features, write_labels, write_predictions, write_spectra,
    write_table2, write_table3, write_table4, write_table5, write_trajectory,
};
use dmdc_core::synth::generate_corpus;
use dmdc_core::{Error, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some grid cells failed; their rows carry the failure message.
    Partial,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

/// Writes `path` through `f`, mapping I/O failures to the file's path.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    f(&mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    out.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |out| {
        serde_json::to_writer_pretty(&mut *out, value)
            .map_err(|e| Error::Validation(format!("manifest: {e}")))?;
        out.write_all(b"\n").map_err(io_err(path))
    })
}

pub fn synth(cfg: &RunConfig) -> Result<Status> {
    let (sessions, manifest) = generate_corpus(&cfg.synth)?;
    create_dir(&cfg.out)?;
    write_corpus(cfg.out.join("corpus.jsonl"), &sessions)?;
    write_json(&cfg.out.join("corpus_manifest.json"), &manifest)?;
    log::info!("wrote {} sessions to {}", sessions.len(), cfg.out.display());
    Ok(Status::Complete)
}

fn load_bank(cfg: &RunConfig) -> Result<SpectrumBank> {
    let sessions = load_corpus(cfg.input()?)?;
    log::info!("loaded {} sessions", sessions.len());
    build_bank(&sessions, &cfg.grid.windows, cfg.grid.stride, cfg.grid.rcond)
}

pub fn featurize(cfg: &RunConfig) -> Result<Status> {
    let bank = load_bank(cfg)?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("features.csv"), |out| {
        write_features(out, &bank, &cfg.grid.n_lambdas, &cfg.grid.input_types)
    })?;
    write_file(&cfg.out.join("spectra.csv"), |out| write_spectra(out, &bank))?;
    write_file(&cfg.out.join("labels.csv"), |out| write_labels(out, &bank))?;
    Ok(Status::Complete)
}

pub fn baseline(cfg: &RunConfig) -> Result<Status> {
    let bank = load_bank(cfg)?;
    let baselines = compute_baselines(&bank, &cfg.grid)?;
    create_dir(&cfg.out)?;
    write_file(&cfg.out.join("table2.csv"), |out| write_table2(out, &baselines.local))?;
    write_file(&cfg.out.join("table3.csv"), |out| write_table3(out, &baselines.global))?;
    Ok(Status::Complete)
}

#[derive(Serialize)]
struct BestCell {
    score: ScoreKey,
    index: usize,
    model: String,
    input_type: String,
    w: usize,
    n_lambda: usize,
    local_f1: Option<f64>,
    advanced: bool,
    best_global_f1: Option<f64>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config: &'a RunConfig,
    sessions: usize,
    cells: usize,
    failed_cells: usize,
    advanced_cells: usize,
    best: Vec<BestCell>,
}

pub fn evaluate(cfg: &RunConfig) -> Result<Status> {
    let bank = load_bank(cfg)?;
    let report = run_grid_on_bank(&bank, &cfg.grid)?;
    create_dir(&cfg.out)?;
    let out = &cfg.out;
    write_file(&out.join("table2.csv"), |o| write_table2(o, &report.local_baselines))?;
    write_file(&out.join("table3.csv"), |o| write_table3(o, &report.global_baselines))?;
    write_file(&out.join("table4.csv"), |o| write_table4(o, &report))?;
    write_file(&out.join("table5.csv"), |o| write_table5(o, &report))?;
    write_file(&out.join("cells.csv"), |o| write_cells(o, &report))?;
    write_file(&out.join("predictions.csv"), |o| write_predictions(o, &report))?;

    let best: Vec<&ExperimentResult> = cfg
        .grid
        .score_keys
        .iter()
        .filter_map(|&k| best_local(&report.results, k, None, |_| true))
        .collect();
    for cell in &best {
        store_models(cfg, &bank, &report, cell)?;
    }
    let manifest = RunManifest {
        config: cfg,
        sessions: bank.sessions.len(),
        cells: report.results.len(),
        failed_cells: report.failed(),
        advanced_cells: report.results.iter().filter(|r| r.advanced).count(),
        best: best
            .iter()
            .map(|r| BestCell {
                score: r.key.score,
                index: r.index,
                model: r.key.model.to_string(),
                input_type: r.key.input_type.to_string(),
                w: r.key.w,
                n_lambda: r.key.n_lambda,
                local_f1: r.local_f1,
                advanced: r.advanced,
                best_global_f1: best_global(&report.results, r.key.score).and_then(|(_, g)| g.f1),
            })
            .collect(),
    };
    write_json(&out.join("run_manifest.json"), &manifest)?;

    let failed = report.failed();
    if failed == report.results.len() {
        return Err(Error::Validation(format!("all {failed} grid cells failed")));
    }
    if failed > 0 {
        log::warn!("{failed} of {} grid cells failed", report.results.len());
        return Ok(Status::Partial);
    }
    Ok(Status::Complete)
}

fn model_dir(out: &Path, score: ScoreKey) -> PathBuf {
    out.join("models").join(score.as_str())
}

/// Per-fold and all-window models of the best cell for one score.
fn store_models(cfg: &RunConfig, bank: &SpectrumBank, report: &GridReport, cell: &ExperimentResult) -> Result<()> {
    let key = cell.key;
    let Some(folds) = report.folds_for(key.score) else {
        return Ok(());
    };
    let data = cell_features(bank, key.w, key.n_lambda, key.input_type);
    let labels = data.labels(bank, key.score);
    let dir = model_dir(&cfg.out, key.score);
    create_dir(&dir)?;
    let metadata = |fold: Option<usize>, held_out: Vec<String>| ModelMetadata {
        score: Some(key.score.to_string()),
        w: Some(key.w),
        n_lambda: Some(key.n_lambda),
        input_type: Some(key.input_type),
        fold,
        held_out,
    };
    for fold in 0..folds.k {
        let held_out: Vec<String> = folds
            .members(fold)
            .into_iter()
            .map(|i| bank.sessions[i].session_id.clone())
            .collect();
        if held_out.is_empty() {
            continue;
        }
        let spec = ModelSpec::new(key.model, fold_model_seed(cfg.grid.seed, cell.index, fold));
        match fit_fold_model(spec, &data, &labels, folds, fold) {
            Ok(model) => write_model(dir.join(format!("fold{fold}.model")), &model, &metadata(Some(fold), held_out))?,
            Err(e) => log::warn!("{}: fold {fold} model not stored: {e}", key.score),
        }
    }
    let spec = ModelSpec::new(key.model, fold_model_seed(cfg.grid.seed, cell.index, folds.k));
    match train(spec, &data.rows, &labels) {
        Ok(model) => write_model(dir.join("all.model"), &model, &metadata(None, Vec::new()))?,
        Err(e) => log::warn!("{}: all-window model not stored: {e}", key.score),
    }
    Ok(())
}

/// Cumulative count of windows predicted positive across one session, scored
/// by the stored model that did not see that session in training.
pub fn trajectory_cmd(cfg: &RunConfig, session_id: &str, score: ScoreKey) -> Result<Status> {
    let sessions = load_corpus(cfg.input()?)?;
    let session = sessions
        .iter()
        .find(|s| s.session_id == session_id)
        .ok_or_else(|| Error::NotFound(format!("session '{session_id}' is not in the corpus")))?;

    let dir = model_dir(&cfg.out, score);
    let entries = fs::read_dir(&dir).map_err(io_err(&dir))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "model"))
        .collect();
    paths.sort();
    let mut chosen = None;
    let mut fallback = None;
    for path in paths {
        let (model, meta) = read_model(&path)?;
        if meta.held_out.iter().any(|s| s == session_id) {
            chosen = Some((model, meta));
            break;
        }
        if meta.fold.is_none() {
            fallback = Some((model, meta));
        }
    }
    let (model, meta) = match chosen {
        Some(m) => m,
        None => {
            log::warn!("session '{session_id}' was not held out by any stored fold; using the all-window model");
            fallback.ok_or_else(|| Error::NotFound(format!("no usable model in {}", dir.display())))?
        }
    };
    let (Some(w), Some(n_lambda), Some(input_type)) = (meta.w, meta.n_lambda, meta.input_type) else {
        return Err(Error::Validation("stored model lacks its feature configuration".into()));
    };
    let bank = build_bank(std::slice::from_ref(session), &[w], cfg.grid.stride, cfg.grid.rcond)?;
    let data = cell_features(&bank, w, n_lambda, input_type);
    let probs = data
        .rows
        .iter()
        .map(|r| model.predict_proba(r))
        .collect::<Result<Vec<f64>>>()?;
    if probs.is_empty() {
        log::warn!("session '{session_id}' has no windows of size {w}");
    }
    let points = trajectory(session_id, &probs, cfg.grid.threshold)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join(format!("trajectory_{session_id}_{score}.csv"));
    write_file(&path, |out| write_trajectory(out, session_id, &points))?;
    Ok(Status::Complete)
}
