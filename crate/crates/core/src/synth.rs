//! Seeded synthetic corpus of slowly drifting embedding sequences.
//!
//! Frame at time `t` of recording `r`:
//!
//! ```text
//! base + offset_r + (t / duration) * drift + noise
//! ```
//!
//! `base` and the drift direction are shared by all recordings; `offset_r`
//! is a per-recording Gaussian trait vector and `noise` is i.i.d. per frame.
//! Values are rounded to `f32` so in-memory sequences equal what is written
//! to disk.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::emb1;
use crate::error::{Error, Result};
use crate::manifest::{Manifest, RecordingManifest, Split};
use crate::sequence::{EmbeddingSequence, Prototype, PrototypeSource};

pub const FRAME_DURATION_S: f64 = 3.0;
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_recordings: usize,
    /// The first `n_train` recordings form the training split.
    pub n_train: usize,
    pub duration_s: f64,
    pub dim: usize,
    /// Total mean displacement over a recording, in units of `noise_sigma`.
    pub drift_magnitude: f64,
    pub noise_sigma: f64,
    pub per_recording_offset_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_recordings: 19,
            n_train: 10,
            duration_s: 3600.0,
            dim: 192,
            drift_magnitude: 8.0,
            noise_sigma: 1.0,
            per_recording_offset_sigma: 10.0,
            seed: DEFAULT_SEED,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_recordings == 0 || self.dim == 0 {
            return bad("recording count and dimension must be positive".into());
        }
        if self.n_train > self.n_recordings {
            return bad(format!(
                "{} training recordings requested out of {}",
                self.n_train, self.n_recordings
            ));
        }
        if !(self.duration_s >= FRAME_DURATION_S && self.duration_s.is_finite()) {
            return bad(format!("duration {} s is shorter than one frame", self.duration_s));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be positive, got {}", self.noise_sigma));
        }
        if !(self.drift_magnitude >= 0.0 && self.drift_magnitude.is_finite()) {
            return bad(format!("drift magnitude must be >= 0, got {}", self.drift_magnitude));
        }
        if !(self.per_recording_offset_sigma >= 0.0 && self.per_recording_offset_sigma.is_finite()) {
            return bad(format!(
                "offset sigma must be >= 0, got {}",
                self.per_recording_offset_sigma
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub sequence: EmbeddingSequence,
    pub manifest: RecordingManifest,
    /// Noise-free summary of the recording (`base + offset + drift / 2`),
    /// standing in for a whole-recording model embedding.
    pub prototype: Prototype,
}

/// Corpus-wide vectors shared by every recording.
#[derive(Debug, Clone)]
pub struct Ground {
    pub base: Array1<f64>,
    pub drift: Array1<f64>,
}

pub fn ground(cfg: &SynthConfig) -> Ground {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base: Array1<f64> = (0..cfg.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut dir: Array1<f64> = (0..cfg.dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = dir.dot(&dir).sqrt();
    dir /= norm;
    let drift = dir * (cfg.drift_magnitude * cfg.noise_sigma);
    Ground { base, drift }
}

fn recording_id(cfg: &SynthConfig, r: usize) -> String {
    if r < cfg.n_train {
        format!("IMIP{:02}", r + 1)
    } else {
        format!("PA{:02}", r - cfg.n_train + 1)
    }
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

pub fn generate(cfg: &SynthConfig) -> Result<Vec<SyntheticRecording>> {
    cfg.validate()?;
    let g = ground(cfg);
    let n_frames = (cfg.duration_s / FRAME_DURATION_S).floor() as usize;
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
    let offset_dist = Normal::new(0.0, cfg.per_recording_offset_sigma).expect("sigma validated");

    (0..cfg.n_recordings)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64 + 1);
            let offset: Array1<f64> = (0..cfg.dim).map(|_| offset_dist.sample(&mut rng)).collect();
            let level = &g.base + &offset;
            let mut frames = Array2::zeros((n_frames, cfg.dim));
            for (i, mut row) in frames.rows_mut().into_iter().enumerate() {
                let frac = i as f64 * FRAME_DURATION_S / cfg.duration_s;
                for (j, v) in row.iter_mut().enumerate() {
                    *v = round_f32(level[j] + frac * g.drift[j] + noise.sample(&mut rng));
                }
            }
            let id = recording_id(cfg, r);
            let sequence = EmbeddingSequence::new(&id, "synthetic", 0, FRAME_DURATION_S, 0.0, frames)?;
            let proto_vec = (&level + &(&g.drift * 0.5)).mapv(round_f32);
            let prototype = Prototype::new(&id, proto_vec, PrototypeSource::ExternallySupplied)?;
            let manifest = RecordingManifest {
                recording_id: id.clone(),
                split: if r < cfg.n_train { Split::Train } else { Split::Test },
                duration_s: cfg.duration_s,
                embedding_path: PathBuf::from(format!("{id}.emb")),
                prototype_path: Some(PathBuf::from(format!("{id}.proto.emb"))),
            };
            Ok(SyntheticRecording {
                sequence,
                manifest,
                prototype,
            })
        })
        .collect()
}

/// Write every recording and prototype as EMB1 plus `manifest.json` into
/// `dir`; returns the manifest path.
pub fn write_corpus(dir: impl AsRef<Path>, recordings: &[SyntheticRecording]) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for rec in recordings {
        let path = dir.join(&rec.manifest.embedding_path);
        crate::write_atomic(&path, &emb1::encode(&rec.sequence))?;
        if let Some(p) = &rec.manifest.prototype_path {
            let seq = rec.prototype.to_sequence(rec.sequence.model_id(), rec.sequence.layer())?;
            crate::write_atomic(dir.join(p), &emb1::encode(&seq))?;
        }
    }
    let manifest = Manifest {
        recordings: recordings.iter().map(|r| r.manifest.clone()).collect(),
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_recordings: 3,
            n_train: 2,
            dim: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
    }

    #[test]
    fn layout_and_split() {
        let recs = generate(&small()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].sequence.len(), 1200);
        assert_eq!(recs[0].sequence.dim(), 8);
        assert_eq!(recs[0].manifest.split, Split::Train);
        assert_eq!(recs[2].manifest.split, Split::Test);
        assert_eq!(recs[2].manifest.recording_id, "PA01");
        assert_eq!(recs[2].sequence.timestamp(1), 3.0);
    }

    #[test]
    fn drift_shows_in_window_means() {
        let cfg = SynthConfig {
            n_recordings: 1,
            n_train: 1,
            dim: 16,
            per_recording_offset_sigma: 0.0,
            ..SynthConfig::default()
        };
        let rec = &generate(&cfg).unwrap()[0];
        let g = ground(&cfg);
        let first = rec.sequence.slice_by_time(0.0, 600.0).unwrap().mean_frame();
        let last = rec.sequence.slice_by_time(3000.0, 3600.0).unwrap().mean_frame();
        // window centres sit at 298.5 s and 3298.5 s
        let expected = &g.drift * (3000.0 / 3600.0);
        let bound = 4.0 * cfg.noise_sigma * (2.0f64 / 200.0).sqrt();
        for (d, e) in (&last - &first).iter().zip(expected.iter()) {
            assert!((d - e).abs() < bound, "{d} vs {e}");
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            ..small()
        };
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
    }
}
