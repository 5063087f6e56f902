//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use dmdc_core::aggregate::{Accumulator, AggregatorKind};
use dmdc_core::classify::{default_model_grid, ModelKind};
use dmdc_core::corpus::ScoreKey;
use dmdc_core::dmdc::InputType;
use dmdc_core::eval::grid::GridConfig;
use dmdc_core::synth::CorpusConfig;
use dmdc_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with any of the settings below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Session file (one JSON record per line).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated score keys, e.g. `ctrs,ag`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub scores: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub windows: Option<Vec<usize>>,
    #[arg(long = "n-lambda", global = true, value_delimiter = ',')]
    pub n_lambda: Option<Vec<usize>>,
    /// Comma-separated input types: `T`, `C`, `T+C`.
    #[arg(long = "input-types", global = true, value_delimiter = ',')]
    pub input_types: Option<Vec<String>>,
    /// Comma-separated model names, e.g. `GNB,LR,L-SVM_1,KNN_5,KNN_5_std`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub accumulators: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub aggregators: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bootstrap replicates per baseline.
    #[arg(long, global = true)]
    pub boot: Option<usize>,
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Relative singular-value cutoff for the pseudo-inverse.
    #[arg(long, global = true)]
    pub rcond: Option<f64>,
    /// Worker threads (all cores by default).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Synthesize a corpus whose two labels share one system.
    #[arg(long, global = true)]
    pub null: bool,
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scores: Option<Vec<String>>,
    pub windows: Option<Vec<usize>>,
    pub n_lambda: Option<Vec<usize>>,
    pub input_types: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub accumulators: Option<Vec<String>>,
    pub aggregators: Option<Vec<String>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub boot: Option<usize>,
    pub stride: Option<usize>,
    pub threshold: Option<f64>,
    pub rcond: Option<f64>,
    pub jobs: Option<usize>,
    pub synth: Option<CorpusConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub grid: GridConfig,
    pub synth: CorpusConfig,
    pub jobs: Option<usize>,
}

fn parse_all<T: FromStr<Err = Error>>(values: &[String]) -> Result<Vec<T>> {
    values.iter().map(|v| v.parse()).collect()
}

fn note_override<T: PartialEq + std::fmt::Debug>(name: &str, value: &T, default: &T) {
    if value != default {
        log::info!("{name} overridden: {value:?} (default {default:?})");
    }
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let defaults = GridConfig::default();
        let mut grid = GridConfig::default();
        if let Some(v) = args.scores.as_ref().or(file.scores.as_ref()) {
            grid.score_keys = parse_all::<ScoreKey>(v)?;
        }
        if let Some(v) = args.windows.as_ref().or(file.windows.as_ref()) {
            grid.windows = v.clone();
        }
        if let Some(v) = args.n_lambda.as_ref().or(file.n_lambda.as_ref()) {
            grid.n_lambdas = v.clone();
        }
        if let Some(v) = args.input_types.as_ref().or(file.input_types.as_ref()) {
            grid.input_types = parse_all::<InputType>(v)?;
        }
        if let Some(v) = args.models.as_ref().or(file.models.as_ref()) {
            grid.models = if v.len() == 1 && v[0].eq_ignore_ascii_case("all") {
                default_model_grid()
            } else {
                parse_all::<ModelKind>(v)?
            };
        }
        if let Some(v) = args.accumulators.as_ref().or(file.accumulators.as_ref()) {
            grid.accumulators = parse_all::<Accumulator>(v)?;
        }
        if let Some(v) = args.aggregators.as_ref().or(file.aggregators.as_ref()) {
            grid.aggregators = parse_all::<AggregatorKind>(v)?;
        }
        grid.folds = args.folds.or(file.folds).unwrap_or(grid.folds);
        grid.seed = args.seed.or(file.seed).unwrap_or(grid.seed);
        grid.n_boot = args.boot.or(file.boot).unwrap_or(grid.n_boot);
        grid.stride = args.stride.or(file.stride).unwrap_or(grid.stride);
        grid.threshold = args.threshold.or(file.threshold).unwrap_or(grid.threshold);
        grid.rcond = args.rcond.or(file.rcond);
        grid.validate()?;

        note_override("scores", &grid.score_keys, &defaults.score_keys);
        note_override("windows", &grid.windows, &defaults.windows);
        note_override("n_lambda", &grid.n_lambdas, &defaults.n_lambdas);
        note_override("input types", &grid.input_types, &defaults.input_types);
        note_override("models", &grid.models, &defaults.models);
        note_override("accumulators", &grid.accumulators, &defaults.accumulators);
        note_override("aggregators", &grid.aggregators, &defaults.aggregators);
        note_override("folds", &grid.folds, &defaults.folds);
        note_override("bootstrap replicates", &grid.n_boot, &defaults.n_boot);
        note_override("stride", &grid.stride, &defaults.stride);
        note_override("threshold", &grid.threshold, &defaults.threshold);
        note_override("rcond", &grid.rcond, &defaults.rcond);

        let mut synth = file.synth.unwrap_or_default();
        synth.seed = args.seed.or(file.seed).unwrap_or(synth.seed);
        synth.null |= args.null;

        let jobs = args.jobs.or(file.jobs);
        if jobs == Some(0) {
            return Err(Error::Validation("--jobs must be positive".into()));
        }
        Ok(RunConfig {
            input: args.input.clone().or(file.input),
            out: args
                .out
                .clone()
                .or(file.out)
                .ok_or_else(|| Error::Validation("an output directory is required (--out)".into()))?,
            grid,
            synth,
            jobs,
        })
    }

    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Validation("a session file is required (--input)".into()))
    }
}
