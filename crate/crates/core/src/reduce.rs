//! Principal component analysis.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::emb1;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::sequence::EmbeddingSequence;

/// Centering vector plus orthonormal principal axes (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
}

/// Fit PCA keeping `k` components.
///
/// The covariance is normalized by `M - 1`. When the data has rank below
/// `k`, the trailing axes are an orthonormal completion taken from the
/// eigendecomposition and carry zero variance. Each axis is oriented so
/// that its entry of largest magnitude is nonnegative.
pub fn fit_pca(x: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel> {
    let full = fit_full(x)?;
    let max = x.nrows().min(x.ncols());
    if k == 0 || k > max {
        return Err(Error::BadComponentCount { k, max });
    }
    Ok(full.truncate(k))
}

/// Full decomposition with `min(M, D)` components; truncate it to share one
/// eigendecomposition between several component counts.
pub fn fit_full(x: ArrayView2<'_, f64>) -> Result<PcaModel> {
    let (m, d) = x.dim();
    if m < 2 {
        return Err(Error::TooFewSamples(format!(
            "PCA needs at least 2 samples, got {m}"
        )));
    }
    if d == 0 {
        return Err(Error::BadComponentCount { k: 0, max: 0 });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("PCA input has non-finite entries".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("m >= 2");
    let centered = &x - &mean;
    let mut cov = centered.t().dot(&centered);
    cov /= (m - 1) as f64;
    let sym = (&cov + &cov.t()) * 0.5;
    let eig = symmetric_eigen(&sym);

    let keep = m.min(d);
    let mut components = eig.vectors.slice(s![.., ..keep]).t().to_owned();
    for mut row in components.axis_iter_mut(Axis(0)) {
        let pivot = row
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| {
                if v.abs() > best.1.abs() {
                    (i, v)
                } else {
                    best
                }
            });
        if pivot.1 < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    let explained_variance = eig.values.slice(s![..keep]).mapv(|v| v.max(0.0));
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n_components: usize,
    dim: usize,
    explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn truncate(&self, k: usize) -> PcaModel {
        assert!(k >= 1 && k <= self.n_components());
        PcaModel {
            mean: self.mean.clone(),
            components: self.components.slice(s![..k, ..]).to_owned(),
            explained_variance: self.explained_variance.slice(s![..k]).to_owned(),
        }
    }

    /// Project rows: `components * (row - mean)`.
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let centered = &x - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    /// Map projected coordinates back into the input space.
    pub fn inverse_transform(&self, y: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.n_components() {
            return Err(Error::DimMismatch {
                expected: self.n_components(),
                found: y.ncols(),
            });
        }
        Ok(y.dot(&self.components) + &self.mean)
    }

    /// Write the model as an EMB1 file (row 0 the mean, rows 1..=K the
    /// components) plus `<path>.json` holding the explained variances.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut rows = Array2::zeros((self.n_components() + 1, self.dim()));
        rows.row_mut(0).assign(&self.mean);
        rows.slice_mut(s![1.., ..]).assign(&self.components);
        let seq = EmbeddingSequence::new("pca", "pca", 0, 1.0, 0.0, rows)?;
        crate::write_atomic(path, &emb1::encode(&seq))?;
        let sidecar = Sidecar {
            n_components: self.n_components(),
            dim: self.dim(),
            explained_variance: self.explained_variance.to_vec(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        crate::write_atomic(sidecar_path(path), format!("{json}\n").as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PcaModel> {
        let path = path.as_ref();
        let seq = emb1::read_embeddings(path)?;
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: side.clone(),
            source: e,
        })?;
        if seq.len() != sidecar.n_components + 1
            || seq.dim() != sidecar.dim
            || sidecar.explained_variance.len() != sidecar.n_components
        {
            return Err(Error::Format(format!(
                "PCA file {} disagrees with its sidecar",
                path.display()
            )));
        }
        let frames = seq.into_frames();
        Ok(PcaModel {
            mean: frames.row(0).to_owned(),
            components: frames.slice(s![1.., ..]).to_owned(),
            explained_variance: Array1::from(sidecar.explained_variance),
        })
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}
