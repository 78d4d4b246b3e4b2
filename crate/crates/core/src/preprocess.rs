//! Temporal smoothing, recording-level normalization and label assignment.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::MIN_BINARY_DURATION_S;
use crate::sequence::{EmbeddingSequence, LabeledDataset, Prototype, PrototypeSource};

/// Sliding-window length in seconds; 0 disables smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub window_s: f64,
}

impl SmoothingConfig {
    pub fn new(window_s: f64) -> Result<Self> {
        if !(window_s.is_finite() && window_s >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "smoothing window must be >= 0 s, got {window_s}"
            )));
        }
        Ok(Self { window_s })
    }

    pub fn none() -> Self {
        Self { window_s: 0.0 }
    }

    /// Window length in frames, `round(window_s / frame_duration_s)`.
    /// Returns 1 when smoothing is disabled.
    pub fn window_frames(&self, frame_duration_s: f64) -> Result<usize> {
        if self.window_s == 0.0 {
            return Ok(1);
        }
        let w = (self.window_s / frame_duration_s).round();
        if w < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "window of {} s is shorter than half a {} s frame",
                self.window_s, frame_duration_s
            )));
        }
        Ok(w as usize)
    }
}

/// Moving average with stride one frame.
///
/// Output frame `i` is the channel-wise mean of input frames `i..i+w` and
/// keeps the timestamp of input frame `i`, so a sequence of `N` frames
/// yields `N - w + 1`.
pub fn smooth(seq: &EmbeddingSequence, cfg: &SmoothingConfig) -> Result<EmbeddingSequence> {
    let w = cfg.window_frames(seq.frame_duration_s())?;
    smooth_frames(seq, w)
}

pub fn smooth_frames(seq: &EmbeddingSequence, w: usize) -> Result<EmbeddingSequence> {
    let n = seq.len();
    if w == 0 {
        return Err(Error::InvalidConfig("window must span at least one frame".into()));
    }
    if w > n {
        return Err(Error::WindowTooLarge { window: w, len: n });
    }
    if w == 1 {
        return Ok(seq.clone());
    }
    let frames = seq.frames();
    let out_len = n - w + 1;
    let mut out = Array2::zeros((out_len, seq.dim()));
    let scale = 1.0 / w as f64;
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        for j in i..i + w {
            row += &frames.row(j);
        }
        row *= scale;
    }
    Ok(seq.with_frames(out))
}

/// Channel-wise mean over all frames of the recording.
pub fn compute_prototype(seq: &EmbeddingSequence) -> Prototype {
    Prototype {
        recording_id: seq.recording_id().to_owned(),
        vector: seq.mean_frame(),
        source: PrototypeSource::MeanOfFrames,
    }
}

/// Subtract the prototype from every frame.
pub fn normalize(seq: &EmbeddingSequence, p: &Prototype) -> Result<EmbeddingSequence> {
    if p.dim() != seq.dim() {
        return Err(Error::DimMismatch {
            expected: seq.dim(),
            found: p.dim(),
        });
    }
    if !p.recording_id.is_empty() && p.recording_id != seq.recording_id() {
        return Err(Error::Provenance {
            prototype: p.recording_id.clone(),
            sequence: seq.recording_id().to_owned(),
        });
    }
    let frames = seq.frames() - &p.vector;
    Ok(seq.with_frames(frames))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Binary,
    #[serde(rename = "three")]
    ThreeClass,
}

impl LabelMode {
    pub fn n_classes(self) -> usize {
        match self {
            LabelMode::Binary => 2,
            LabelMode::ThreeClass => 3,
        }
    }

    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            LabelMode::Binary => &["NF", "F"],
            LabelMode::ThreeClass => &["NF", "F", "Mid"],
        }
    }
}

pub const NON_FATIGUED: usize = 0;
pub const FATIGUED: usize = 1;
pub const TRANSITION: usize = 2;

/// Start of the binary fatigued window (minute 50).
pub const BINARY_FATIGUE_START_S: f64 = 3000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub mode: LabelMode,
    pub segment_duration_s: f64,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self {
            mode: LabelMode::Binary,
            segment_duration_s: 600.0,
        }
    }
}

/// A half-open time window `[start_s, end_s)` carrying one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelWindow {
    pub class: usize,
    pub start_s: f64,
    pub end_s: f64,
}

impl LabelSpec {
    pub fn new(mode: LabelMode, segment_duration_s: f64) -> Result<Self> {
        if !(segment_duration_s.is_finite() && segment_duration_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "segment duration must be positive, got {segment_duration_s}"
            )));
        }
        Ok(Self {
            mode,
            segment_duration_s,
        })
    }

    /// Label windows for a recording of the given true duration.
    pub fn windows(&self, recording_id: &str, duration_s: f64) -> Result<Vec<LabelWindow>> {
        let d = self.segment_duration_s;
        let windows = match self.mode {
            LabelMode::Binary => {
                if duration_s < MIN_BINARY_DURATION_S {
                    return Err(Error::RecordingTooShort {
                        recording_id: recording_id.to_owned(),
                        duration_s,
                        required_s: MIN_BINARY_DURATION_S,
                    });
                }
                vec![
                    LabelWindow {
                        class: NON_FATIGUED,
                        start_s: 0.0,
                        end_s: d,
                    },
                    LabelWindow {
                        class: FATIGUED,
                        start_s: BINARY_FATIGUE_START_S,
                        end_s: BINARY_FATIGUE_START_S + d,
                    },
                ]
            }
            LabelMode::ThreeClass => {
                let mid = duration_s / 2.0;
                vec![
                    LabelWindow {
                        class: NON_FATIGUED,
                        start_s: 0.0,
                        end_s: d,
                    },
                    LabelWindow {
                        class: TRANSITION,
                        start_s: mid - d / 2.0,
                        end_s: mid + d / 2.0,
                    },
                    LabelWindow {
                        class: FATIGUED,
                        start_s: duration_s - d,
                        end_s: duration_s,
                    },
                ]
            }
        };
        for (i, a) in windows.iter().enumerate() {
            for b in &windows[i + 1..] {
                if a.start_s < b.end_s && b.start_s < a.end_s {
                    return Err(Error::OverlappingWindows(format!(
                        "[{}, {}) and [{}, {}) on '{recording_id}' ({duration_s} s)",
                        a.start_s, a.end_s, b.start_s, b.end_s
                    )));
                }
            }
        }
        Ok(windows)
    }
}

/// Emit every frame that falls inside a label window with that window's
/// class; frames outside all windows are dropped.
pub fn assign_labels(
    seq: &EmbeddingSequence,
    spec: &LabelSpec,
    duration_s: f64,
) -> Result<LabeledDataset> {
    let windows = spec.windows(seq.recording_id(), duration_s)?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut times = Vec::new();
    for (i, t) in seq.timestamps().enumerate() {
        if let Some(w) = windows.iter().find(|w| w.start_s <= t && t < w.end_s) {
            rows.push(i);
            labels.push(w.class);
            times.push(t);
        }
    }
    if rows.is_empty() {
        return Err(Error::TooFewSamples(format!(
            "no frames of '{}' fall inside a label window",
            seq.recording_id()
        )));
    }
    let features = seq.frames().select(Axis(0), &rows);
    let ids = vec![seq.recording_id().to_owned(); rows.len()];
    LabeledDataset::new(features, labels, ids, times)
}
