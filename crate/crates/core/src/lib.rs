//! Vocal fatigue detection from sequences of speech embeddings.
//!
//! Pipeline: recording-level normalization, sliding-window smoothing,
//! labeling of early/late lecture windows, PCA, RBF-SVM with cross-validated
//! grid search, evaluation, plus t-SNE projections and a synthetic corpus
//! generator.

pub mod cli;
pub mod emb1;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod manifest;
pub mod pipeline;
pub mod preprocess;
pub mod reduce;
pub mod sequence;
pub mod svm;
pub mod synth;
pub mod tsne;

use std::io::Write;
use std::path::Path;

pub use error::{Error, Result};
pub use sequence::{EmbeddingSequence, LabeledDataset, Prototype, PrototypeSource};

/// Write to a sibling temporary file and rename it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
