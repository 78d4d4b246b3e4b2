//! End-to-end experiment: preprocessing, labeling, grid search, final fit
//! and scoring on held-out recordings.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::emb1;
use crate::error::{Error, Result};
use crate::eval::{score, Scores};
use crate::manifest::{Manifest, RecordingManifest, Split};
use crate::preprocess::{assign_labels, compute_prototype, normalize, smooth, LabelSpec, SmoothingConfig};
use crate::reduce::{fit_pca, PcaModel};
use crate::sequence::{EmbeddingSequence, LabeledDataset, Prototype};
use crate::svm::{grid_search_cv, Classifier, GridResult, HyperGrid, SvmParams};
use crate::synth::SyntheticRecording;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    /// Subtract the mean of the recording's own frames.
    Mean,
    /// Subtract the prototype file listed in the manifest.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub normalization: Normalization,
    pub smoothing: SmoothingConfig,
}

impl Preprocessing {
    pub fn new(normalization: Normalization, window_s: f64) -> Result<Self> {
        Ok(Self {
            normalization,
            smoothing: SmoothingConfig::new(window_s)?,
        })
    }

    pub fn raw() -> Self {
        Self {
            normalization: Normalization::None,
            smoothing: SmoothingConfig::none(),
        }
    }
}

/// One recording held in memory.
#[derive(Debug, Clone)]
pub struct Recording {
    pub manifest: RecordingManifest,
    pub sequence: EmbeddingSequence,
    pub prototype: Option<Prototype>,
}

impl Recording {
    /// Read the embedding file and, if listed, the prototype file.
    pub fn load(manifest: &RecordingManifest) -> Result<Self> {
        let sequence = emb1::read_embeddings(&manifest.embedding_path)?;
        if sequence.recording_id() != manifest.recording_id {
            return Err(Error::Manifest(format!(
                "{} holds recording '{}', manifest says '{}'",
                manifest.embedding_path.display(),
                sequence.recording_id(),
                manifest.recording_id
            )));
        }
        let prototype = match &manifest.prototype_path {
            Some(p) => Some(Prototype::from_sequence(&emb1::read_embeddings(p)?)?),
            None => None,
        };
        Ok(Self {
            manifest: manifest.clone(),
            sequence,
            prototype,
        })
    }

    pub fn load_split(manifest: &Manifest, split: Split) -> Result<Vec<Self>> {
        manifest.split(split).map(Self::load).collect()
    }

    pub fn id(&self) -> &str {
        &self.manifest.recording_id
    }
}

impl From<SyntheticRecording> for Recording {
    fn from(r: SyntheticRecording) -> Self {
        Self {
            manifest: r.manifest,
            sequence: r.sequence,
            prototype: Some(r.prototype),
        }
    }
}

/// Normalize (if requested) and then smooth.
pub fn preprocess(
    seq: &EmbeddingSequence,
    external: Option<&Prototype>,
    pre: &Preprocessing,
) -> Result<EmbeddingSequence> {
    let normalized = match pre.normalization {
        Normalization::None => seq.clone(),
        Normalization::Mean => normalize(seq, &compute_prototype(seq))?,
        Normalization::External => {
            let p = external.ok_or_else(|| {
                Error::Manifest(format!(
                    "external normalization requested but '{}' has no prototype",
                    seq.recording_id()
                ))
            })?;
            normalize(seq, p)?
        }
    };
    smooth(&normalized, &pre.smoothing)
}

pub fn labeled_dataset(
    recordings: &[Recording],
    pre: &Preprocessing,
    labels: &LabelSpec,
) -> Result<LabeledDataset> {
    let parts = recordings
        .iter()
        .map(|r| {
            let seq = preprocess(&r.sequence, r.prototype.as_ref(), pre)?;
            assign_labels(&seq, labels, r.manifest.duration_s)
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::concat(&parts)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub preprocessing: Preprocessing,
    pub labels: LabelSpec,
    pub pca: PcaModel,
    pub classifier: Classifier,
    pub grid: GridResult,
    pub train_recordings: Vec<String>,
}

/// Grid search on the training recordings, then refit PCA and the classifier
/// on all of them with the selected combination.
pub fn train(
    recordings: &[Recording],
    pre: &Preprocessing,
    labels: &LabelSpec,
    grid: Option<&HyperGrid>,
    seed: u64,
) -> Result<TrainedModel> {
    if recordings.is_empty() {
        return Err(Error::TooFewSamples("no training recordings".into()));
    }
    if let Some(r) = recordings.iter().find(|r| r.manifest.split != Split::Train) {
        return Err(Error::Manifest(format!(
            "recording '{}' is not in the training split",
            r.id()
        )));
    }
    let data = labeled_dataset(recordings, pre, labels)?;
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = HyperGrid::default_for_dim(data.dim());
            &default_grid
        }
    };
    let result = grid_search_cv(&data, grid, seed)?;
    let best = result.best_row().clone();
    log::info!(
        "best combination: n_pca={} gamma={:e} C={} cv_accuracy={:.4}",
        best.n_pca,
        best.gamma,
        best.c,
        best.mean_accuracy
    );
    let pca = fit_pca(data.features.view(), best.n_pca)?;
    let projected = pca.transform(data.features.view())?;
    let classifier = Classifier::fit(projected.view(), &data.labels, &SvmParams::new(best.c, best.gamma))?;
    Ok(TrainedModel {
        preprocessing: *pre,
        labels: *labels,
        pca,
        classifier,
        grid: result,
        train_recordings: recordings.iter().map(|r| r.id().to_owned()).collect(),
    })
}

/// Per-frame predictions for one recording.
#[derive(Debug, Clone)]
pub struct FramePredictions {
    pub times_s: Vec<f64>,
    pub labels: Vec<usize>,
    pub scores: Array2<f64>,
}

impl TrainedModel {
    pub fn predict_features(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        let projected = self.pca.transform(x)?;
        self.classifier.predict_with_scores(projected.view())
    }

    /// Preprocess a whole recording and classify every resulting frame.
    pub fn predict_recording(
        &self,
        seq: &EmbeddingSequence,
        prototype: Option<&Prototype>,
    ) -> Result<FramePredictions> {
        let pre = preprocess(seq, prototype, &self.preprocessing)?;
        let (labels, scores) = self.predict_features(pre.frames().view())?;
        Ok(FramePredictions {
            times_s: pre.timestamps().collect(),
            labels,
            scores,
        })
    }

    /// Label windows of the given recordings, classified and scored.
    pub fn evaluate(&self, recordings: &[Recording]) -> Result<Scores> {
        if recordings.is_empty() {
            return Err(Error::TooFewSamples("no recordings to evaluate".into()));
        }
        let data = labeled_dataset(recordings, &self.preprocessing, &self.labels)?;
        let (pred, _) = self.predict_features(data.features.view())?;
        score(&data.labels, &pred, self.labels.mode.n_classes())
    }

    /// Recordings shared with the training set.
    pub fn overlap_with_training<'a>(&self, recordings: &'a [Recording]) -> Vec<&'a str> {
        let train: BTreeSet<&str> = self.train_recordings.iter().map(String::as_str).collect();
        recordings
            .iter()
            .map(Recording::id)
            .filter(|id| train.contains(id))
            .collect()
    }
}

/// Summary written as `model.json` in a model directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub mode: crate::preprocess::LabelMode,
    pub class_names: Vec<String>,
    pub segment_duration_s: f64,
    pub normalize: Normalization,
    pub window_s: f64,
    pub dim: usize,
    pub n_pca: usize,
    pub gamma: f64,
    pub c: f64,
    pub cv_accuracy: f64,
    pub converged: bool,
    pub train_recordings: Vec<String>,
}

pub const MODEL_META: &str = "model.json";
pub const PCA_FILE: &str = "pca.emb";
pub const CLASSIFIER_FILE: &str = "classifier.svm";
pub const GRID_RESULT: &str = "grid_result.json";
pub const CV_TABLE: &str = "cv_table.csv";

impl TrainedModel {
    pub fn meta(&self) -> ModelMeta {
        let best = self.grid.best_row();
        ModelMeta {
            mode: self.labels.mode,
            class_names: self.labels.mode.class_names().iter().map(|s| s.to_string()).collect(),
            segment_duration_s: self.labels.segment_duration_s,
            normalize: self.preprocessing.normalization,
            window_s: self.preprocessing.smoothing.window_s,
            dim: self.pca.dim(),
            n_pca: best.n_pca,
            gamma: best.gamma,
            c: best.c,
            cv_accuracy: best.mean_accuracy,
            converged: self.classifier.converged(),
            train_recordings: self.train_recordings.clone(),
        }
    }

    /// Write `model.json`, the PCA model, the classifier, the grid result
    /// and the CV table into `dir`.
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(MODEL_META), &self.meta())?;
        self.pca.save(dir.join(PCA_FILE))?;
        self.classifier.save(dir.join(CLASSIFIER_FILE))?;
        write_json(&dir.join(GRID_RESULT), &self.grid)?;
        crate::write_atomic(dir.join(CV_TABLE), self.grid.to_csv().as_bytes())
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        let meta: ModelMeta = read_json(&dir.join(MODEL_META))?;
        let grid: GridResult = read_json(&dir.join(GRID_RESULT))?;
        let pca = PcaModel::load(dir.join(PCA_FILE))?;
        let classifier = Classifier::load(dir.join(CLASSIFIER_FILE))?;
        if classifier.dim() != pca.n_components() {
            return Err(Error::Format(format!(
                "classifier expects {} features, PCA yields {}",
                classifier.dim(),
                pca.n_components()
            )));
        }
        Ok(Self {
            preprocessing: Preprocessing::new(meta.normalize, meta.window_s)?,
            labels: LabelSpec::new(meta.mode, meta.segment_duration_s)?,
            pca,
            classifier,
            grid,
            train_recordings: meta.train_recordings,
        })
    }
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    crate::write_atomic(path, format!("{text}\n").as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })
}

/// Train on the training split and score on the test split.
pub fn run_experiment(
    recordings: &[Recording],
    pre: &Preprocessing,
    labels: &LabelSpec,
    grid: Option<&HyperGrid>,
    seed: u64,
) -> Result<(TrainedModel, Scores)> {
    let (train_set, test_set): (Vec<Recording>, Vec<Recording>) = recordings
        .iter()
        .cloned()
        .partition(|r| r.manifest.split == Split::Train);
    let model = train(&train_set, pre, labels, grid, seed)?;
    let leaked = model.overlap_with_training(&test_set);
    assert!(leaked.is_empty(), "test recordings seen in training: {leaked:?}");
    let scores = model.evaluate(&test_set)?;
    Ok((model, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::LabelMode;
    use crate::synth::{generate, SynthConfig};

    fn corpus(drift: f64) -> Vec<Recording> {
        let cfg = SynthConfig {
            n_recordings: 4,
            n_train: 2,
            dim: 16,
            drift_magnitude: drift,
            ..SynthConfig::default()
        };
        generate(&cfg).unwrap().into_iter().map(Recording::from).collect()
    }

    fn small_grid() -> HyperGrid {
        HyperGrid {
            n_pca: vec![8],
            gamma: vec![1e-2],
            c: vec![10.0],
            folds: 5,
        }
    }

    #[test]
    fn external_needs_prototype() {
        let mut rec = corpus(8.0).remove(0);
        rec.prototype = None;
        let pre = Preprocessing::new(Normalization::External, 0.0).unwrap();
        assert!(preprocess(&rec.sequence, None, &pre).is_err());
    }

    #[test]
    fn normalized_smoothed_experiment_separates() {
        let recs = corpus(8.0);
        let pre = Preprocessing::new(Normalization::Mean, 60.0).unwrap();
        let (model, scores) =
            run_experiment(&recs, &pre, &LabelSpec::default(), Some(&small_grid()), 1).unwrap();
        assert_eq!(model.train_recordings, vec!["IMIP01", "IMIP02"]);
        assert!(scores.accuracy > 0.95, "accuracy {}", scores.accuracy);
    }

    #[test]
    fn three_class_dataset_has_three_labels() {
        let recs = corpus(8.0);
        let spec = LabelSpec::new(LabelMode::ThreeClass, 600.0).unwrap();
        let data = labeled_dataset(&recs, &Preprocessing::raw(), &spec).unwrap();
        assert_eq!(data.class_counts(3), vec![800, 800, 800]);
    }

    #[test]
    fn training_rejects_test_split() {
        let recs = corpus(8.0);
        let err = train(&recs[2..], &Preprocessing::raw(), &LabelSpec::default(), Some(&small_grid()), 0);
        assert!(matches!(err, Err(Error::Manifest(_))));
    }
}
