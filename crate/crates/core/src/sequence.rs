//! Domain types shared by every stage of the pipeline.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Time-ordered embedding frames of one recording.
///
/// Frame `i` is stamped `start_offset_s + i * frame_duration_s`; timestamps
/// are never stored per frame. Frames are held in `f64` for processing and
/// narrowed to `f32` when written to an EMB1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    recording_id: String,
    model_id: String,
    layer: u32,
    frame_duration_s: f64,
    start_offset_s: f64,
    frames: Array2<f64>,
}

impl EmbeddingSequence {
    pub fn new(
        recording_id: impl Into<String>,
        model_id: impl Into<String>,
        layer: u32,
        frame_duration_s: f64,
        start_offset_s: f64,
        frames: Array2<f64>,
    ) -> Result<Self> {
        if frames.nrows() == 0 || frames.ncols() == 0 {
            return Err(Error::InvalidValue(format!(
                "sequence must have at least one frame and one dimension, got {}x{}",
                frames.nrows(),
                frames.ncols()
            )));
        }
        if !(frame_duration_s.is_finite() && frame_duration_s > 0.0) {
            return Err(Error::InvalidValue(format!(
                "frame duration must be positive, got {frame_duration_s}"
            )));
        }
        if !(start_offset_s.is_finite() && start_offset_s >= 0.0) {
            return Err(Error::InvalidValue(format!(
                "start offset must be non-negative, got {start_offset_s}"
            )));
        }
        if let Some((idx, v)) = frames.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let d = frames.ncols();
            return Err(Error::InvalidValue(format!(
                "non-finite value {v} at frame {}, channel {}",
                idx / d,
                idx % d
            )));
        }
        Ok(Self {
            recording_id: recording_id.into(),
            model_id: model_id.into(),
            layer,
            frame_duration_s,
            start_offset_s,
            frames,
        })
    }

    pub fn recording_id(&self) -> &str {
        &self.recording_id
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    pub fn frame_duration_s(&self) -> f64 {
        self.frame_duration_s
    }

    pub fn start_offset_s(&self) -> f64 {
        self.start_offset_s
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    /// Always false: a valid sequence holds at least one frame.
    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn timestamp(&self, i: usize) -> f64 {
        self.start_offset_s + i as f64 * self.frame_duration_s
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.timestamp(i))
    }

    pub fn frame(&self, i: usize) -> ArrayView1<'_, f64> {
        self.frames.row(i)
    }

    /// Same metadata, new frames. Callers guarantee the frames are finite.
    pub(crate) fn with_frames(&self, frames: Array2<f64>) -> Self {
        debug_assert!(frames.nrows() >= 1);
        Self {
            recording_id: self.recording_id.clone(),
            model_id: self.model_id.clone(),
            layer: self.layer,
            frame_duration_s: self.frame_duration_s,
            start_offset_s: self.start_offset_s,
            frames,
        }
    }

    /// Frames whose timestamp `t` satisfies `start_s <= t < end_s`.
    /// `end_s` may be infinite.
    pub fn slice_by_time(&self, start_s: f64, end_s: f64) -> Result<Self> {
        if !(start_s >= 0.0 && start_s < end_s) {
            return Err(Error::InvalidValue(format!(
                "slice bounds must satisfy 0 <= start < end, got [{start_s}, {end_s})"
            )));
        }
        let first = (0..self.len()).find(|&i| self.timestamp(i) >= start_s);
        let Some(first) = first else {
            return Err(Error::EmptySlice { start_s, end_s });
        };
        let last = (first..self.len())
            .take_while(|&i| self.timestamp(i) < end_s)
            .last();
        let Some(last) = last else {
            return Err(Error::EmptySlice { start_s, end_s });
        };
        Ok(Self {
            recording_id: self.recording_id.clone(),
            model_id: self.model_id.clone(),
            layer: self.layer,
            frame_duration_s: self.frame_duration_s,
            start_offset_s: self.timestamp(first),
            frames: self.frames.slice(s![first..=last, ..]).to_owned(),
        })
    }

    /// Channel-wise mean over all frames.
    pub fn mean_frame(&self) -> Array1<f64> {
        self.frames
            .mean_axis(Axis(0))
            .expect("sequence has at least one frame")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeSource {
    /// Whole-recording embedding produced outside this crate.
    ExternallySupplied,
    /// Arithmetic mean of the recording's frame embeddings.
    MeanOfFrames,
}

/// The constant vector subtracted from every frame of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub recording_id: String,
    pub vector: Array1<f64>,
    pub source: PrototypeSource,
}

impl Prototype {
    pub fn new(
        recording_id: impl Into<String>,
        vector: Array1<f64>,
        source: PrototypeSource,
    ) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::InvalidValue("empty prototype vector".into()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("prototype has non-finite entries".into()));
        }
        Ok(Self {
            recording_id: recording_id.into(),
            vector,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    /// An externally supplied prototype stored as a single-frame sequence.
    pub fn from_sequence(seq: &EmbeddingSequence) -> Result<Self> {
        if seq.len() != 1 {
            return Err(Error::Format(format!(
                "prototype file must hold exactly one frame, found {}",
                seq.len()
            )));
        }
        Self::new(
            seq.recording_id(),
            seq.frame(0).to_owned(),
            PrototypeSource::ExternallySupplied,
        )
    }

    pub fn to_sequence(&self, model_id: &str, layer: u32) -> Result<EmbeddingSequence> {
        let frames = self
            .vector
            .clone()
            .into_shape_with_order((1, self.dim()))
            .expect("vector reshapes to a single row");
        EmbeddingSequence::new(&self.recording_id, model_id, layer, 1.0, 0.0, frames)
    }
}

/// Feature rows with class labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub recording_ids: Vec<String>,
    pub times_s: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        recording_ids: Vec<String>,
        times_s: Vec<f64>,
    ) -> Result<Self> {
        let m = features.nrows();
        for len in [labels.len(), recording_ids.len(), times_s.len()] {
            if len != m {
                return Err(Error::LengthMismatch { left: m, right: len });
            }
        }
        if m == 0 {
            return Err(Error::TooFewSamples("dataset is empty".into()));
        }
        Ok(Self {
            features,
            labels,
            recording_ids,
            times_s,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Number of classes implied by the largest label.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Training datasets need K in {2, 3} and at least two members per
    /// class present.
    pub fn validate_for_training(&self) -> Result<usize> {
        let k = self.n_classes();
        if !(2..=3).contains(&k) {
            return Err(Error::DegenerateLabels(format!(
                "expected 2 or 3 classes, labels imply {k}"
            )));
        }
        let counts = self.class_counts(k);
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            return Err(Error::DegenerateLabels(
                "training data contains a single class".into(),
            ));
        }
        if let Some(c) = counts.iter().position(|&c| c == 1) {
            return Err(Error::TooFewSamples(format!(
                "class {c} has a single member"
            )));
        }
        Ok(k)
    }

    /// Stack datasets row-wise.
    pub fn concat(parts: &[LabeledDataset]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::TooFewSamples("no datasets to concatenate".into()));
        };
        let d = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != d) {
            return Err(Error::DimMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views).expect("equal column counts");
        Self::new(
            features,
            parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            parts
                .iter()
                .flat_map(|p| p.recording_ids.iter().cloned())
                .collect(),
            parts.iter().flat_map(|p| p.times_s.iter().copied()).collect(),
        )
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            recording_ids: rows.iter().map(|&i| self.recording_ids[i].clone()).collect(),
            times_s: rows.iter().map(|&i| self.times_s[i]).collect(),
        }
    }
}
