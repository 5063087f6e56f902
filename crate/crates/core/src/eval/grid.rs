//! Cross-validated sweeps over (score x model x w x n_lambda x input type).
//!
//! Spectra are computed once per (session, w); feature matrices once per
//! (w, n_lambda, input type). Every cell then trains one model per fold on
//! the windows of the other folds, scores the held-out windows (local task),
//! and, if it beats the local 3-sigma baseline, accumulates and aggregates
//! window predictions into session labels (global task). Cells run in
//! parallel but each is evaluated sequentially from its own derived seed, so
//! results do not depend on the worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_global_baseline, bootstrap_local_baseline, Baseline, DEFAULT_REPLICATES};
use super::f1_unchecked;
use super::folds::{assign_groups, FoldAssignment};
use crate::aggregate::{accumulate, fit_aggregator, Accumulator, AggregatorKind, SessionScore};
use crate::classify::{default_model_grid, train, ModelKind, ModelSpec, TrainedModel, DEFAULT_THRESHOLD};
use crate::corpus::{align_pairs, binarize_labels, extract_windows, normalize_turns, LabelSet, ScoreKey, Session};
use crate::dmdc::{analyze_window, build_features, InputType, ModeSpectrum};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub const DEFAULT_WINDOWS: [usize; 3] = [3, 5, 8];
pub const DEFAULT_N_LAMBDAS: [usize; 4] = [1, 3, 5, 7];
pub const DEFAULT_FOLDS: usize = 5;

// Seed stream tags.
const FOLD_STREAM: u64 = 1;
const LOCAL_BASELINE_STREAM: u64 = 2;
const GLOBAL_BASELINE_STREAM: u64 = 3;
const MODEL_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub score_keys: Vec<ScoreKey>,
    pub models: Vec<ModelKind>,
    pub windows: Vec<usize>,
    pub n_lambdas: Vec<usize>,
    pub input_types: Vec<InputType>,
    pub accumulators: Vec<Accumulator>,
    pub aggregators: Vec<AggregatorKind>,
    pub folds: usize,
    pub n_boot: usize,
    pub stride: usize,
    pub threshold: f64,
    /// Relative singular-value cutoff; `None` uses the machine-epsilon default.
    pub rcond: Option<f64>,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            score_keys: ScoreKey::ALL.to_vec(),
            models: default_model_grid(),
            windows: DEFAULT_WINDOWS.to_vec(),
            n_lambdas: DEFAULT_N_LAMBDAS.to_vec(),
            input_types: InputType::ALL.to_vec(),
            accumulators: Accumulator::DEFAULT.to_vec(),
            aggregators: AggregatorKind::ALL.to_vec(),
            folds: DEFAULT_FOLDS,
            n_boot: DEFAULT_REPLICATES,
            stride: 1,
            threshold: DEFAULT_THRESHOLD,
            rcond: None,
            seed: 0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("score keys", self.score_keys.is_empty()),
            ("models", self.models.is_empty()),
            ("window sizes", self.windows.is_empty()),
            ("n_lambda values", self.n_lambdas.is_empty()),
            ("input types", self.input_types.is_empty()),
            ("accumulators", self.accumulators.is_empty()),
            ("aggregators", self.aggregators.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Validation(format!("grid has no {name}")));
        }
        if let Some(w) = self.windows.iter().find(|&&w| w < 2) {
            return Err(Error::Validation(format!("window size {w} < 2")));
        }
        if self.n_lambdas.contains(&0) {
            return Err(Error::Validation("n_lambda must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::Validation(format!("{} folds; need at least 2", self.folds)));
        }
        if self.stride == 0 {
            return Err(Error::Validation("stride must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Validation(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }

    /// Cells in evaluation order: score, model, w, n_lambda, input type.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &score in &self.score_keys {
            for &model in &self.models {
                for &w in &self.windows {
                    for &n_lambda in &self.n_lambdas {
                        for &input_type in &self.input_types {
                            out.push(CellKey {
                                score,
                                model,
                                w,
                                n_lambda,
                                input_type,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub score: ScoreKey,
    pub model: ModelKind,
    pub w: usize,
    pub n_lambda: usize,
    pub input_type: InputType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionInfo {
    pub session_id: String,
    pub client_id: String,
    pub labels: LabelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpectrum {
    /// Index into [`SpectrumBank::sessions`].
    pub session: usize,
    pub t: usize,
    pub spectrum: ModeSpectrum,
}

/// Window spectra of a whole corpus for a set of window sizes.
#[derive(Debug, Clone)]
pub struct SpectrumBank {
    pub sessions: Vec<SessionInfo>,
    pub by_window: BTreeMap<usize, Vec<WindowSpectrum>>,
}

pub fn build_bank(sessions: &[Session], windows: &[usize], stride: usize, rcond: Option<f64>) -> Result<SpectrumBank> {
    let pairs: Vec<_> = sessions
        .par_iter()
        .map(|s| normalize_turns(s).and_then(|n| align_pairs(&n)))
        .collect::<Result<_>>()?;
    let mut by_window = BTreeMap::new();
    for &w in windows {
        let per_session: Vec<Vec<WindowSpectrum>> = pairs
            .par_iter()
            .enumerate()
            .map(|(i, pair)| {
                extract_windows(pair, w, stride)?
                    .iter()
                    .map(|win| {
                        Ok(WindowSpectrum {
                            session: i,
                            t: win.t,
                            spectrum: analyze_window(win, rcond)?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let flat: Vec<_> = per_session.into_iter().flatten().collect();
        let degenerate = flat.iter().filter(|s| s.spectrum.degenerate).count();
        if degenerate > 0 {
            log::info!("w={w}: {degenerate} of {} windows flagged degenerate", flat.len());
        }
        by_window.insert(w, flat);
    }
    let sessions = sessions
        .iter()
        .map(|s| SessionInfo {
            session_id: s.session_id.clone(),
            client_id: s.client_id.clone(),
            labels: binarize_labels(s),
        })
        .collect();
    Ok(SpectrumBank { sessions, by_window })
}

/// Feature rows for one (w, n_lambda, input type) configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub rows: Vec<Vec<f64>>,
    pub window_session: Vec<usize>,
    pub window_t: Vec<usize>,
}

impl CellData {
    pub fn labels(&self, bank: &SpectrumBank, key: ScoreKey) -> Vec<u8> {
        self.window_session.iter().map(|&s| bank.sessions[s].labels.get(key)).collect()
    }
}

pub fn cell_features(bank: &SpectrumBank, w: usize, n_lambda: usize, input_type: InputType) -> CellData {
    let windows = bank.by_window.get(&w).map(Vec::as_slice).unwrap_or(&[]);
    CellData {
        rows: windows
            .iter()
            .map(|ws| build_features(&ws.spectrum, input_type, n_lambda).values)
            .collect(),
        window_session: windows.iter().map(|ws| ws.session).collect(),
        window_t: windows.iter().map(|ws| ws.t).collect(),
    }
}

/// Seed of the model trained for `fold` of cell `cell_index`; `fold ==
/// folds` denotes a model trained on every window.
pub fn fold_model_seed(seed: u64, cell_index: usize, fold: usize) -> u64 {
    derive_seed(seed, &[MODEL_STREAM, cell_index as u64, fold as u64])
}

/// Trains on the windows whose session is outside `fold`. Nothing from the
/// held-out fold is read.
pub fn fit_fold_model(
    spec: ModelSpec,
    data: &CellData,
    labels: &[u8],
    folds: &FoldAssignment,
    fold: usize,
) -> Result<TrainedModel> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, &s) in data.window_session.iter().enumerate() {
        if folds.fold_of[s] != fold {
            rows.push(data.rows[i].as_slice());
            y.push(labels[i]);
        }
    }
    if rows.is_empty() {
        return Err(Error::DegenerateTraining(format!("fold {fold} leaves no training windows")));
    }
    train(spec, &rows, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPrediction {
    pub session_id: String,
    pub t: usize,
    pub fold: usize,
    pub probability: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPrediction {
    pub session_id: String,
    pub fold: usize,
    pub accumulator: Accumulator,
    pub aggregator: AggregatorKind,
    pub value: f64,
    pub predicted: u8,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalScore {
    pub accumulator: Accumulator,
    pub aggregator: AggregatorKind,
    /// Unweighted mean over folds with at least one test session.
    pub f1: Option<f64>,
    pub fold_f1: Vec<Option<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub index: usize,
    pub key: CellKey,
    /// Set when any fold failed to train; the cell then has no scores.
    pub failure: Option<String>,
    pub local_f1: Option<f64>,
    pub fold_local_f1: Vec<Option<f64>>,
    pub local_baseline: Option<Baseline>,
    pub global_baseline: Option<Baseline>,
    /// Local F1 strictly above the local 3-sigma threshold.
    pub advanced: bool,
    pub global: Vec<GlobalScore>,
    pub window_predictions: Vec<WindowPrediction>,
    pub session_predictions: Vec<SessionPrediction>,
}

impl ExperimentResult {
    pub fn baseline_3sigma_local(&self) -> Option<f64> {
        self.local_baseline.map(|b| b.threshold_3sigma())
    }

    pub fn baseline_2sigma_global(&self) -> Option<f64> {
        self.global_baseline.map(|b| b.threshold_2sigma())
    }

    pub fn baseline_3sigma_global(&self) -> Option<f64> {
        self.global_baseline.map(|b| b.threshold_3sigma())
    }

    pub fn best_global(&self) -> Option<&GlobalScore> {
        self.global
            .iter()
            .filter(|g| g.f1.is_some())
            .fold(None, |best: Option<&GlobalScore>, g| match best {
                Some(b) if b.f1 >= g.f1 => Some(b),
                _ => Some(g),
            })
    }
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub config: GridConfig,
    pub sessions: Vec<SessionInfo>,
    pub folds: Vec<(ScoreKey, FoldAssignment)>,
    pub local_baselines: Vec<(ScoreKey, usize, Baseline)>,
    pub global_baselines: Vec<(ScoreKey, Baseline)>,
    pub results: Vec<ExperimentResult>,
}

impl GridReport {
    pub fn failed(&self) -> usize {
        self.results.iter().filter(|r| r.failure.is_some()).count()
    }

    pub fn folds_for(&self, key: ScoreKey) -> Option<&FoldAssignment> {
        self.folds.iter().find(|(k, _)| *k == key).map(|(_, f)| f)
    }
}

/// Featurizes `sessions` and evaluates every grid cell.
pub fn run_grid(sessions: &[Session], config: &GridConfig) -> Result<GridReport> {
    config.validate()?;
    let bank = build_bank(sessions, &config.windows, config.stride, config.rcond)?;
    run_grid_on_bank(&bank, config)
}

struct ScoreContext {
    folds: FoldAssignment,
    session_labels: Vec<u8>,
    local: BTreeMap<usize, Result<Baseline>>,
    global: Result<Baseline>,
}

pub fn run_grid_on_bank(bank: &SpectrumBank, config: &GridConfig) -> Result<GridReport> {
    config.validate()?;
    let clients: Vec<&str> = bank.sessions.iter().map(|s| s.client_id.as_str()).collect();
    let mut contexts = BTreeMap::new();
    for (si, &key) in config.score_keys.iter().enumerate() {
        let session_labels: Vec<u8> = bank.sessions.iter().map(|s| s.labels.get(key)).collect();
        let folds = assign_groups(&clients, &session_labels, config.folds, derive_seed(config.seed, &[FOLD_STREAM, si as u64]))?;
        let (local, global) = score_baselines(bank, config, si, &session_labels);
        contexts.insert(
            key,
            ScoreContext {
                folds,
                session_labels,
                local,
                global,
            },
        );
    }

    let mut feature_keys = Vec::new();
    for &w in &config.windows {
        for &n in &config.n_lambdas {
            for &it in &config.input_types {
                feature_keys.push((w, n, it));
            }
        }
    }
    let features: BTreeMap<(usize, usize, InputType), CellData> = feature_keys
        .par_iter()
        .map(|&(w, n, it)| ((w, n, it), cell_features(bank, w, n, it)))
        .collect();

    let cells = config.cells();
    log::info!("evaluating {} grid cells", cells.len());
    let results: Vec<ExperimentResult> = cells
        .par_iter()
        .enumerate()
        .map(|(index, key)| {
            let data = &features[&(key.w, key.n_lambda, key.input_type)];
            evaluate_cell(bank, config, &contexts[&key.score], data, index, *key)
        })
        .collect();

    let folds = config.score_keys.iter().map(|k| (*k, contexts[k].folds.clone())).collect();
    let mut local_baselines = Vec::new();
    let mut global_baselines = Vec::new();
    for &k in &config.score_keys {
        collect_baselines(k, &contexts[&k].local, &contexts[&k].global, &mut local_baselines, &mut global_baselines);
    }
    Ok(GridReport {
        config: config.clone(),
        sessions: bank.sessions.clone(),
        folds,
        local_baselines,
        global_baselines,
        results,
    })
}

type LocalBaselines = BTreeMap<usize, Result<Baseline>>;

fn score_baselines(
    bank: &SpectrumBank,
    config: &GridConfig,
    score_index: usize,
    session_labels: &[u8],
) -> (LocalBaselines, Result<Baseline>) {
    let si = score_index as u64;
    let local = config
        .windows
        .iter()
        .map(|&w| {
            let labels: Vec<u8> = bank
                .by_window
                .get(&w)
                .map(|ws| ws.iter().map(|x| session_labels[x.session]).collect())
                .unwrap_or_default();
            let seed = derive_seed(config.seed, &[LOCAL_BASELINE_STREAM, si, w as u64]);
            (w, bootstrap_local_baseline(&labels, config.n_boot, seed))
        })
        .collect();
    let global = bootstrap_global_baseline(
        session_labels,
        config.n_boot,
        derive_seed(config.seed, &[GLOBAL_BASELINE_STREAM, si]),
    );
    (local, global)
}

fn collect_baselines(
    key: ScoreKey,
    local: &LocalBaselines,
    global: &Result<Baseline>,
    local_out: &mut Vec<(ScoreKey, usize, Baseline)>,
    global_out: &mut Vec<(ScoreKey, Baseline)>,
) {
    for (&w, b) in local {
        match b {
            Ok(b) => local_out.push((key, w, *b)),
            Err(e) => log::warn!("{key} w={w}: no local baseline: {e}"),
        }
    }
    match global {
        Ok(b) => global_out.push((key, *b)),
        Err(e) => log::warn!("{key}: no global baseline: {e}"),
    }
}

/// Local (per window size) and global baselines for every score, with the
/// same seeds [`run_grid_on_bank`] uses.
pub fn compute_baselines(bank: &SpectrumBank, config: &GridConfig) -> Result<Baselines> {
    config.validate()?;
    let mut out = Baselines::default();
    for (si, &key) in config.score_keys.iter().enumerate() {
        let session_labels: Vec<u8> = bank.sessions.iter().map(|s| s.labels.get(key)).collect();
        let (local, global) = score_baselines(bank, config, si, &session_labels);
        collect_baselines(key, &local, &global, &mut out.local, &mut out.global);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Baselines {
    pub local: Vec<(ScoreKey, usize, Baseline)>,
    pub global: Vec<(ScoreKey, Baseline)>,
}

fn failed(index: usize, key: CellKey, message: String, ctx: &ScoreContext) -> ExperimentResult {
    ExperimentResult {
        index,
        key,
        failure: Some(message),
        local_f1: None,
        fold_local_f1: Vec::new(),
        local_baseline: ctx.local.get(&key.w).and_then(|b| b.as_ref().ok().copied()),
        global_baseline: ctx.global.as_ref().ok().copied(),
        advanced: false,
        global: Vec::new(),
        window_predictions: Vec::new(),
        session_predictions: Vec::new(),
    }
}

fn evaluate_cell(
    bank: &SpectrumBank,
    config: &GridConfig,
    ctx: &ScoreContext,
    data: &CellData,
    index: usize,
    key: CellKey,
) -> ExperimentResult {
    let local_baseline = match ctx.local.get(&key.w) {
        Some(Ok(b)) => *b,
        Some(Err(e)) => return failed(index, key, format!("local baseline: {e}"), ctx),
        None => return failed(index, key, "no local baseline".into(), ctx),
    };
    let labels = data.labels(bank, key.score);
    let folds = &ctx.folds;
    let k = folds.k;

    // Local task.
    let mut models = Vec::with_capacity(k);
    let mut fold_f1 = Vec::with_capacity(k);
    let mut window_predictions = Vec::new();
    let mut test_probs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    for fold in 0..k {
        let spec = ModelSpec::new(key.model, fold_model_seed(config.seed, index, fold));
        let model = match fit_fold_model(spec, data, &labels, folds, fold) {
            Ok(m) => m,
            Err(e) => return failed(index, key, format!("fold {fold}: {e}"), ctx),
        };
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for (i, &s) in data.window_session.iter().enumerate() {
            if folds.fold_of[s] != fold {
                continue;
            }
            let p = match model.predict_proba(&data.rows[i]) {
                Ok(p) => p,
                Err(e) => return failed(index, key, format!("fold {fold}: {e}"), ctx),
            };
            preds.push(u8::from(p >= config.threshold));
            truth.push(labels[i]);
            test_probs[fold].push((i, p));
            window_predictions.push(WindowPrediction {
                session_id: bank.sessions[s].session_id.clone(),
                t: data.window_t[i],
                fold,
                probability: p,
                label: labels[i],
            });
        }
        fold_f1.push((!preds.is_empty()).then(|| f1_unchecked(&preds, &truth)));
        models.push(model);
    }
    let scored: Vec<f64> = fold_f1.iter().flatten().copied().collect();
    if scored.is_empty() {
        return failed(index, key, "no fold has test windows".into(), ctx);
    }
    let local_f1 = scored.iter().sum::<f64>() / scored.len() as f64;
    let advanced = local_f1 > local_baseline.threshold_3sigma();

    let mut result = ExperimentResult {
        index,
        key,
        failure: None,
        local_f1: Some(local_f1),
        fold_local_f1: fold_f1,
        local_baseline: Some(local_baseline),
        global_baseline: ctx.global.as_ref().ok().copied(),
        advanced,
        global: Vec::new(),
        window_predictions: Vec::new(),
        session_predictions: Vec::new(),
    };
    if !advanced {
        return result;
    }
    result.window_predictions = window_predictions;
    let (global, session_predictions) = global_task(bank, config, ctx, data, &models, &test_probs);
    result.global = global;
    result.session_predictions = session_predictions;
    result
}

/// Window probabilities grouped by session, in window order.
fn group_by_session(data: &CellData, probs: impl Iterator<Item = (usize, f64)>) -> BTreeMap<usize, Vec<f64>> {
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, p) in probs {
        out.entry(data.window_session[i]).or_default().push(p);
    }
    out
}

fn global_task(
    bank: &SpectrumBank,
    config: &GridConfig,
    ctx: &ScoreContext,
    data: &CellData,
    models: &[TrainedModel],
    test_probs: &[Vec<(usize, f64)>],
) -> (Vec<GlobalScore>, Vec<SessionPrediction>) {
    let folds = &ctx.folds;
    let mut session_predictions = Vec::new();
    let mut table: BTreeMap<(Accumulator, AggregatorKind), (Vec<Option<f64>>, Option<String>)> = BTreeMap::new();
    for (fold, model) in models.iter().enumerate() {
        // In-sample probabilities for the training sessions; the model has
        // already seen these windows, so nothing leaks from the test fold.
        let train_probs = data
            .window_session
            .iter()
            .enumerate()
            .filter(|(_, &s)| folds.fold_of[s] != fold)
            .map(|(i, _)| (i, model.predict_proba(&data.rows[i]).expect("dimension checked at training")));
        let train_sessions = group_by_session(data, train_probs);
        let test_sessions = group_by_session(data, test_probs[fold].iter().copied());
        for &acc in &config.accumulators {
            let score_all = |groups: &BTreeMap<usize, Vec<f64>>| -> Vec<(usize, SessionScore)> {
                groups
                    .iter()
                    .map(|(&s, p)| {
                        let sc = accumulate(&bank.sessions[s].session_id, p, acc, config.threshold).expect("non-empty");
                        (s, sc)
                    })
                    .collect()
            };
            let train_scores = score_all(&train_sessions);
            let test_scores = score_all(&test_sessions);
            let train_labels: Vec<u8> = train_scores.iter().map(|(s, _)| ctx.session_labels[*s]).collect();
            let train_only: Vec<SessionScore> = train_scores.into_iter().map(|(_, sc)| sc).collect();
            for &agg in &config.aggregators {
                let entry = table.entry((acc, agg)).or_insert_with(|| (Vec::new(), None));
                let aggregator = match fit_aggregator(agg, &train_only, &train_labels) {
                    Ok(a) => a,
                    Err(e) => {
                        entry.0.push(None);
                        entry.1.get_or_insert_with(|| format!("fold {fold}: {e}"));
                        continue;
                    }
                };
                if test_scores.is_empty() {
                    entry.0.push(None);
                    continue;
                }
                let mut preds = Vec::with_capacity(test_scores.len());
                let mut truth = Vec::with_capacity(test_scores.len());
                for (s, sc) in &test_scores {
                    let predicted = aggregator.predict_session(sc).expect("accumulator matches");
                    preds.push(predicted);
                    truth.push(ctx.session_labels[*s]);
                    session_predictions.push(SessionPrediction {
                        session_id: bank.sessions[*s].session_id.clone(),
                        fold,
                        accumulator: acc,
                        aggregator: agg,
                        value: sc.value,
                        predicted,
                        label: ctx.session_labels[*s],
                    });
                }
                entry.0.push(Some(f1_unchecked(&preds, &truth)));
            }
        }
    }
    let global = table
        .into_iter()
        .map(|((accumulator, aggregator), (fold_f1, error))| {
            let f1 = if error.is_some() {
                None
            } else {
                let vals: Vec<f64> = fold_f1.iter().flatten().copied().collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            GlobalScore {
                accumulator,
                aggregator,
                f1,
                fold_f1,
                error,
            }
        })
        .collect();
    (global, session_predictions)
}

/// Runs `f` on a pool of `jobs` workers (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Validation("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
