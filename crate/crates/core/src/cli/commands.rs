use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{EvaluateArgs, PipelineConfig, PredictArgs, ProjectArgs, SplitArg};
use crate::emb1;
use crate::error::{Error, Result};
use crate::eval::{results_table, Scores};
use crate::manifest::{Manifest, Split};
use crate::pipeline::{self, write_json, Preprocessing, Recording, TrainedModel};
use crate::preprocess::LabelSpec;
use crate::sequence::{EmbeddingSequence, Prototype};
use crate::synth;
use crate::tsne::{tsne_project, TsneConfig};

/// t-SNE coloring boundary: frames before 40 minutes are the first half.
pub const PROJECT_HALF_BOUNDARY_S: f64 = 2400.0;

fn save_config(cfg: &PipelineConfig, command: &str) -> Result<()> {
    write_json(&cfg.out.join(format!("{command}.config.json")), cfg)
}

fn label_spec(cfg: &PipelineConfig) -> Result<LabelSpec> {
    LabelSpec::new(cfg.mode, cfg.segment_duration_s)
}

fn load_manifest(cfg: &PipelineConfig) -> Result<Manifest> {
    Manifest::load(cfg.manifest_path()?)
}

pub fn synth(cfg: &PipelineConfig) -> Result<()> {
    let recordings = synth::generate(&cfg.synth)?;
    let manifest = synth::write_corpus(&cfg.out, &recordings)?;
    save_config(cfg, "synth")?;
    println!(
        "wrote {} recordings ({} train, {} test) and {}",
        recordings.len(),
        cfg.synth.n_train,
        recordings.len() - cfg.synth.n_train,
        manifest.display()
    );
    Ok(())
}

pub fn train(cfg: &PipelineConfig) -> Result<()> {
    let manifest = load_manifest(cfg)?;
    let recordings = Recording::load_split(&manifest, Split::Train)?;
    if recordings.is_empty() {
        return Err(Error::Manifest("manifest lists no training recordings".into()));
    }
    let pre = Preprocessing::new(cfg.normalize, cfg.window_s)?;
    let grid = cfg.grid.resolve(recordings[0].sequence.dim());
    let model = pipeline::train(&recordings, &pre, &label_spec(cfg)?, Some(&grid), cfg.seed)?;
    model.save(&cfg.out)?;
    save_config(cfg, "train")?;
    let best = model.grid.best_row();
    println!(
        "best: n_pca={} gamma={:e} C={} cv_accuracy={:.4} ({} combinations)",
        best.n_pca,
        best.gamma,
        best.c,
        best.mean_accuracy,
        model.grid.rows.len()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport<'a> {
    split: SplitArg,
    recordings: Vec<&'a str>,
    class_names: Vec<&'static str>,
    cv_accuracy: f64,
    #[serde(flatten)]
    scores: Scores,
}

pub fn evaluate(cfg: &PipelineConfig, args: &EvaluateArgs) -> Result<()> {
    let model_dir = args.model_dir.as_deref().unwrap_or(&cfg.out);
    let model = TrainedModel::load(model_dir)?;
    let manifest = load_manifest(cfg)?;
    let split_arg = args.split.unwrap_or(SplitArg::Test);
    let split = match split_arg {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let recordings = Recording::load_split(&manifest, split)?;
    if recordings.is_empty() {
        return Err(Error::TooFewSamples(format!(
            "manifest lists no {split_arg:?} recordings"
        )));
    }
    let scores = model.evaluate(&recordings)?;
    let names = model.labels.mode.class_names();
    let report = EvaluationReport {
        split: split_arg,
        recordings: recordings.iter().map(Recording::id).collect(),
        class_names: names.to_vec(),
        cv_accuracy: model.grid.best_row().mean_accuracy,
        scores: scores.rounded(),
    };
    write_json(&cfg.out.join("metrics.json"), &report)?;
    let setup = format!(
        "norm={:?} win={}s",
        model.preprocessing.normalization, model.preprocessing.smoothing.window_s
    )
    .to_lowercase();
    let table = scores.table(names, &setup);
    crate::write_atomic(cfg.out.join("table.txt"), table.as_bytes())?;
    crate::write_atomic(
        cfg.out.join("confusion.csv"),
        scores.confusion.to_csv(names).as_bytes(),
    )?;
    save_config(cfg, "evaluate")?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct FrameRecord {
    time_s: f64,
    label: usize,
    class: &'static str,
    scores: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct PredictionReport {
    recording_id: String,
    mode: crate::preprocess::LabelMode,
    class_names: Vec<&'static str>,
    frame_duration_s: f64,
    counts: Vec<usize>,
    frames: Vec<FrameRecord>,
}

fn load_prototype(path: Option<&Path>) -> Result<Option<Prototype>> {
    path.map(|p| Prototype::from_sequence(&emb1::read_embeddings(p)?))
        .transpose()
}

pub fn predict(cfg: &PipelineConfig, args: &PredictArgs) -> Result<()> {
    let model_dir = args.model_dir.as_deref().unwrap_or(&cfg.out);
    let model = TrainedModel::load(model_dir)?;
    let seq = emb1::read_embeddings(&args.recording)?;
    let prototype = load_prototype(args.prototype.as_deref())?;
    if seq.dim() != model.pca.dim() {
        return Err(Error::DimMismatch {
            expected: model.pca.dim(),
            found: seq.dim(),
        });
    }
    let preds = model.predict_recording(&seq, prototype.as_ref())?;
    let names = model.labels.mode.class_names();
    let mut counts = vec![0; names.len()];
    for &l in &preds.labels {
        counts[l] += 1;
    }
    let frames = preds
        .times_s
        .iter()
        .zip(&preds.labels)
        .zip(preds.scores.rows())
        .map(|((&time_s, &label), s)| FrameRecord {
            time_s,
            label,
            class: names[label],
            scores: s.iter().map(|v| (v * 1e4).round() / 1e4).collect(),
        })
        .collect();
    let report = PredictionReport {
        recording_id: seq.recording_id().to_owned(),
        mode: model.labels.mode,
        class_names: names.to_vec(),
        frame_duration_s: seq.frame_duration_s(),
        counts,
        frames,
    };
    let path = cfg.out.join(format!("{}.predictions.json", seq.recording_id()));
    write_json(&path, &report)?;
    save_config(cfg, "predict")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn project_one(
    cfg: &PipelineConfig,
    seq: &EmbeddingSequence,
    prototype: Option<&Prototype>,
) -> Result<std::path::PathBuf> {
    let pre = Preprocessing::new(cfg.normalize, cfg.window_s)?;
    let prepared = pipeline::preprocess(seq, prototype, &pre)?;
    let tcfg = TsneConfig {
        perplexity: cfg.tsne.perplexity,
        iterations: cfg.tsne.iterations,
        seed: cfg.seed,
        ..TsneConfig::default()
    };
    let y = tsne_project(prepared.frames().view(), &tcfg)?;
    let mut csv = String::from("time_s,x,y,half\n");
    for (t, row) in prepared.timestamps().zip(y.rows()) {
        let half = if t < PROJECT_HALF_BOUNDARY_S { "first" } else { "second" };
        writeln!(csv, "{t},{:.6},{:.6},{half}", row[0], row[1]).expect("string write");
    }
    let path = cfg.out.join(format!("{}.tsne.csv", seq.recording_id()));
    crate::write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

pub fn project(cfg: &PipelineConfig, args: &ProjectArgs) -> Result<()> {
    let written = if let Some(rec) = &args.recording {
        let seq = emb1::read_embeddings(rec)?;
        let prototype = load_prototype(args.prototype.as_deref())?;
        vec![project_one(cfg, &seq, prototype.as_ref())?]
    } else {
        let manifest = load_manifest(cfg)?;
        manifest
            .recordings
            .iter()
            .map(|m| {
                let r = Recording::load(m)?;
                project_one(cfg, &r.sequence, r.prototype.as_ref())
            })
            .collect::<Result<Vec<_>>>()?
    };
    save_config(cfg, "project")?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MatrixRow {
    normalize: pipeline::Normalization,
    window_s: f64,
    n_pca: usize,
    gamma: f64,
    c: f64,
    cv_accuracy: f64,
    scores: Scores,
}

pub fn matrix(cfg: &PipelineConfig) -> Result<()> {
    let manifest = load_manifest(cfg)?;
    let mut all = Recording::load_split(&manifest, Split::Train)?;
    all.extend(Recording::load_split(&manifest, Split::Test)?);
    let Some(first) = all.first() else {
        return Err(Error::Manifest("manifest lists no recordings".into()));
    };
    let grid = cfg.grid.resolve(first.sequence.dim());
    let labels = label_spec(cfg)?;
    let names = cfg.mode.class_names();
    let mut rows = Vec::new();
    let mut setups = Vec::new();
    for (i, exp) in cfg.experiments.iter().enumerate() {
        let pre = Preprocessing::new(exp.normalize, exp.window_s)?;
        let (model, scores) = pipeline::run_experiment(&all, &pre, &labels, Some(&grid), cfg.seed)?;
        let best = model.grid.best_row();
        let setup = format!("#{} norm={:?} win={}s", i + 1, exp.normalize, exp.window_s).to_lowercase();
        setups.push((setup, scores.clone()));
        rows.push(MatrixRow {
            normalize: exp.normalize,
            window_s: exp.window_s,
            n_pca: best.n_pca,
            gamma: best.gamma,
            c: best.c,
            cv_accuracy: (best.mean_accuracy * 1e4).round() / 1e4,
            scores: scores.rounded(),
        });
    }
    let labelled: Vec<(&str, &Scores)> = setups.iter().map(|(l, s)| (l.as_str(), s)).collect();
    let table = results_table(names, &labelled);
    write_json(&cfg.out.join("matrix.json"), &rows)?;
    crate::write_atomic(cfg.out.join("matrix.txt"), table.as_bytes())?;
    save_config(cfg, "matrix")?;
    print!("{table}");
    Ok(())
}
