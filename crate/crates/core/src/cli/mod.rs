//! Command-line surface.
//!
//! Exit codes: 0 success, 1 I/O or environment failure, 2 domain or
//! validation error.

mod commands;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Normalization;
use crate::preprocess::LabelMode;
use crate::svm::HyperGrid;
use crate::synth::{SynthConfig, DEFAULT_SEED};

#[derive(Debug, Parser)]
#[command(name = "vocal-fatigue", version, about = "Detect vocal fatigue from speech embedding sequences")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Recording manifest (JSON)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Smoothing window in seconds, 0 disables smoothing
    #[arg(long = "window-s", global = true)]
    pub window_s: Option<f64>,
    #[arg(long, value_enum, global = true)]
    pub normalize: Option<NormalizeArg>,
    #[arg(long, value_enum, global = true)]
    pub mode: Option<ModeArg>,
    /// JSON file with keys mirroring the pipeline configuration; flags
    /// override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Mean,
    External,
}

impl From<NormalizeArg> for Normalization {
    fn from(v: NormalizeArg) -> Self {
        match v {
            NormalizeArg::None => Normalization::None,
            NormalizeArg::Mean => Normalization::Mean,
            NormalizeArg::External => Normalization::External,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Binary,
    Three,
}

impl From<ModeArg> for LabelMode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Binary => LabelMode::Binary,
            ModeArg::Three => LabelMode::ThreeClass,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus of drifting embedding sequences
    Synth(SynthArgs),
    /// Grid-search and train on the training split
    Train(TrainArgs),
    /// Score a trained model on a split of the manifest
    Evaluate(EvaluateArgs),
    /// Per-frame fatigue labels and decision scores for one recording
    Predict(PredictArgs),
    /// t-SNE projection of recordings to CSV
    Project(ProjectArgs),
    /// Train and evaluate every (normalization, window) experiment
    Matrix(MatrixArgs),
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_recordings: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Recording duration in seconds
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Total drift over a recording in units of the noise sigma
    #[arg(long)]
    pub drift: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub offset_sigma: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct GridArgs {
    #[arg(long = "n-pca", value_delimiter = ',')]
    pub n_pca: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long = "c", value_delimiter = ',')]
    pub c: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    /// Directory written by `train` (defaults to --out)
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Split to score
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
}

#[derive(Debug, Args, Default)]
pub struct PredictArgs {
    /// EMB1 file of the recording to label
    #[arg(long)]
    pub recording: PathBuf,
    /// EMB1 prototype file, needed when the model uses external normalization
    #[arg(long)]
    pub prototype: Option<PathBuf>,
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct ProjectArgs {
    /// Project a single EMB1 file instead of every manifest recording
    #[arg(long)]
    pub recording: Option<PathBuf>,
    #[arg(long)]
    pub prototype: Option<PathBuf>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

/// Every knob of a run. Written next to each command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub window_s: f64,
    pub normalize: Normalization,
    pub mode: LabelMode,
    pub segment_duration_s: f64,
    pub grid: GridOverrides,
    pub synth: SynthConfig,
    pub tsne: TsneOverrides,
    /// Rows of the experiment table built by `matrix`.
    pub experiments: Vec<Experiment>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOverrides {
    pub n_pca: Option<Vec<usize>>,
    pub gamma: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub folds: Option<usize>,
}

impl GridOverrides {
    /// The default grid for `dim` with any overridden axis replaced.
    pub fn resolve(&self, dim: usize) -> HyperGrid {
        let mut g = HyperGrid::default_for_dim(dim);
        if let Some(v) = &self.n_pca {
            g.n_pca = v.clone();
        }
        if let Some(v) = &self.gamma {
            g.gamma = v.clone();
        }
        if let Some(v) = &self.c {
            g.c = v.clone();
        }
        if let Some(v) = self.folds {
            g.folds = v;
        }
        g
    }

    fn merge(&mut self, args: &GridArgs) {
        if args.n_pca.is_some() {
            self.n_pca = args.n_pca.clone();
        }
        if args.gamma.is_some() {
            self.gamma = args.gamma.clone();
        }
        if args.c.is_some() {
            self.c = args.c.clone();
        }
        if args.folds.is_some() {
            self.folds = args.folds;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneOverrides {
    pub perplexity: f64,
    pub iterations: usize,
}

impl Default for TsneOverrides {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub normalize: Normalization,
    pub window_s: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let experiments = [Normalization::None, Normalization::Mean]
            .into_iter()
            .flat_map(|normalize| {
                [0.0, 30.0, 60.0].map(|window_s| Experiment { normalize, window_s })
            })
            .collect();
        Self {
            manifest: None,
            out: PathBuf::from("out"),
            seed: DEFAULT_SEED,
            window_s: 60.0,
            normalize: Normalization::Mean,
            mode: LabelMode::Binary,
            segment_duration_s: 600.0,
            grid: GridOverrides::default(),
            synth: SynthConfig::default(),
            tsne: TsneOverrides::default(),
            experiments,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })
    }

    /// Config file (if any) overlaid with the flags that were given.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let g = &cli.global;
        let mut cfg = match &g.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if g.manifest.is_some() {
            cfg.manifest = g.manifest.clone();
        }
        if let Some(o) = &g.out {
            cfg.out = o.clone();
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
            cfg.synth.seed = s;
        }
        if let Some(w) = g.window_s {
            cfg.window_s = w;
        }
        if let Some(n) = g.normalize {
            cfg.normalize = n.into();
        }
        if let Some(m) = g.mode {
            cfg.mode = m.into();
        }
        match &cli.command {
            Command::Synth(a) => {
                let s = &mut cfg.synth;
                s.n_recordings = a.n_recordings.unwrap_or(s.n_recordings);
                s.n_train = a.n_train.unwrap_or(s.n_train);
                s.duration_s = a.duration.unwrap_or(s.duration_s);
                s.dim = a.dim.unwrap_or(s.dim);
                s.drift_magnitude = a.drift.unwrap_or(s.drift_magnitude);
                s.noise_sigma = a.noise_sigma.unwrap_or(s.noise_sigma);
                s.per_recording_offset_sigma = a.offset_sigma.unwrap_or(s.per_recording_offset_sigma);
            }
            Command::Train(a) => cfg.grid.merge(&a.grid),
            Command::Matrix(a) => cfg.grid.merge(&a.grid),
            Command::Project(a) => {
                cfg.tsne.perplexity = a.perplexity.unwrap_or(cfg.tsne.perplexity);
                cfg.tsne.iterations = a.iterations.unwrap_or(cfg.tsne.iterations);
            }
            Command::Evaluate(_) | Command::Predict(_) => {}
        }
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--manifest is required".into()))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_environmental() {
        1
    } else {
        2
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::resolve(&cli)?;
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Train(_) => commands::train(&cfg),
        Command::Evaluate(a) => commands::evaluate(&cfg, a),
        Command::Predict(a) => commands::predict(&cfg, a),
        Command::Project(a) => commands::project(&cfg, a),
        Command::Matrix(_) => commands::matrix(&cfg),
    }
}
