//! Recording manifests: which embedding files make up a corpus, their split
//! and true durations.
//!
//! On disk a manifest is JSON:
//!
//! ```json
//! {
//!   "recordings": [
//!     {
//!       "recording_id": "IMIP01",
//!       "split": "train",
//!       "duration_s": 5040.0,
//!       "embedding_path": "IMIP01.emb",
//!       "prototype_path": "IMIP01.proto.emb"
//!     }
//!   ]
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.
//! `prototype_path` may be omitted or `null`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recordings shorter than this are excluded from the binary experiment.
pub const MIN_BINARY_DURATION_S: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingManifest {
    pub recording_id: String,
    pub split: Split,
    pub duration_s: f64,
    pub embedding_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prototype_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub recordings: Vec<RecordingManifest>,
}

impl Manifest {
    /// Load a manifest, resolving relative paths and checking that every
    /// referenced file is readable and every recording id is unique.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut seen = HashSet::new();
        for rec in &mut manifest.recordings {
            if !seen.insert(rec.recording_id.clone()) {
                return Err(Error::Manifest(format!(
                    "duplicate recording id '{}'",
                    rec.recording_id
                )));
            }
            if !(rec.duration_s.is_finite() && rec.duration_s > 0.0) {
                return Err(Error::Manifest(format!(
                    "recording '{}' has invalid duration {}",
                    rec.recording_id, rec.duration_s
                )));
            }
            rec.embedding_path = resolve(base, &rec.embedding_path)?;
            if let Some(p) = rec.prototype_path.take() {
                rec.prototype_path = Some(resolve(base, &p)?);
            }
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        crate::write_atomic(path, format!("{text}\n").as_bytes())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &RecordingManifest> {
        self.recordings.iter().filter(move |r| r.split == split)
    }
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    };
    fs::File::open(&full).map_err(|e| Error::io(&full, e))?;
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.emb", "x");
        let m = write(
            dir.path(),
            "m.json",
            r#"{"recordings":[{"recording_id":"a","split":"train","duration_s":3600,"embedding_path":"a.emb"}]}"#,
        );
        let manifest = Manifest::load(&m).unwrap();
        assert_eq!(manifest.recordings[0].embedding_path, dir.path().join("a.emb"));
        assert_eq!(manifest.recordings[0].prototype_path, None);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.emb", "x");
        let m = write(
            dir.path(),
            "m.json",
            r#"{"recordings":[
                {"recording_id":"a","split":"train","duration_s":3600,"embedding_path":"a.emb"},
                {"recording_id":"a","split":"test","duration_s":3600,"embedding_path":"a.emb"}]}"#,
        );
        assert!(matches!(Manifest::load(&m), Err(Error::Manifest(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(
            dir.path(),
            "m.json",
            r#"{"recordings":[{"recording_id":"a","split":"train","duration_s":3600,"embedding_path":"nope.emb"}]}"#,
        );
        let err = Manifest::load(&m).unwrap_err();
        assert!(err.is_environmental());
    }
}
