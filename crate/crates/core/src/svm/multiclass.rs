//! One-vs-one wrapper; with two classes it is a single binary SVM.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{signed_labels, train_with_kernel, KernelMatrix, SvmModel, SvmParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub n_classes: usize,
    /// One model per class pair `(a, b)`, `a < b`, in lexicographic order.
    pub models: Vec<SvmModel>,
}

/// Multipliers of `prev` laid out over `rows`, the training rows of the pair.
fn warm_alpha(prev: &SvmModel, rows: &[usize], y: &[f64]) -> Vec<f64> {
    let mut alpha = vec![0.0; rows.len()];
    for (&idx, &coef) in prev.support_indices.iter().zip(&prev.dual_coefs) {
        if let Ok(p) = rows.binary_search(&idx) {
            alpha[p] = coef * y[p];
        }
    }
    alpha
}

impl Classifier {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], params: &SvmParams) -> Result<Self> {
        if x.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: x.nrows(),
                right: labels.len(),
            });
        }
        let k = KernelMatrix::rbf(x, params.gamma);
        Self::fit_with_kernel(x, &k, labels, params, None)
    }

    pub(crate) fn fit_with_kernel(
        x: ArrayView2<'_, f64>,
        k: &KernelMatrix,
        labels: &[usize],
        params: &SvmParams,
        warm: Option<&Classifier>,
    ) -> Result<Self> {
        let warm = warm.filter(|w| w.models.iter().all(|m| m.c <= params.c));
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut present: Vec<usize> = labels.to_vec();
        present.sort_unstable();
        present.dedup();
        if present.len() < 2 {
            return Err(Error::DegenerateLabels(
                "training data contains a single class".into(),
            ));
        }
        let mut models = Vec::new();
        for (ai, &a) in present.iter().enumerate() {
            for &b in &present[ai + 1..] {
                let start = |rows: &[usize], y: &[f64]| {
                    warm.map(|w| warm_alpha(&w.models[models.len()], rows, y))
                };
                let model = if present.len() == 2 {
                    let (classes, y) = signed_labels(labels)?;
                    let rows: Vec<usize> = (0..labels.len()).collect();
                    train_with_kernel(x, k, &y, classes, params, start(&rows, &y))
                } else {
                    let rows: Vec<usize> = (0..labels.len())
                        .filter(|&i| labels[i] == a || labels[i] == b)
                        .collect();
                    let sub_labels: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
                    let (classes, y) = signed_labels(&sub_labels)?;
                    let sub_x = x.select(Axis(0), &rows);
                    let init = start(&rows, &y);
                    let mut m = train_with_kernel(sub_x.view(), &k.subset(&rows), &y, classes, params, init);
                    for idx in &mut m.support_indices {
                        *idx = rows[*idx];
                    }
                    m
                };
                models.push(model);
            }
        }
        Ok(Self { n_classes, models })
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn converged(&self) -> bool {
        self.models.iter().all(|m| m.converged)
    }

    /// Decision values, one column per pairwise model.
    pub fn decision_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.models.len()));
        for (j, m) in self.models.iter().enumerate() {
            out.column_mut(j).assign(&m.decision_function(x)?);
        }
        Ok(out)
    }

    /// Predicted labels plus per-class scores. With two classes the score of
    /// the positive class is the decision value and the other its negation;
    /// with more, scores are decision values summed over the pairs a class
    /// takes part in.
    pub fn predict_with_scores(&self, x: ArrayView2<'_, f64>) -> Result<(Vec<usize>, Array2<f64>)> {
        let dec = self.decision_matrix(x)?;
        Ok(self.vote(&dec))
    }

    /// Majority vote over pairwise decisions; ties go to the larger summed
    /// decision value, then to the lower class index.
    fn vote(&self, dec: &Array2<f64>) -> (Vec<usize>, Array2<f64>) {
        let mut labels = Vec::with_capacity(dec.nrows());
        let mut scores = Array2::<f64>::zeros((dec.nrows(), self.n_classes));
        for (r, row) in dec.rows().into_iter().enumerate() {
            let mut votes = vec![0usize; self.n_classes];
            for (m, &f) in self.models.iter().zip(row.iter()) {
                let [neg, pos] = m.classes;
                votes[m.label_for(f)] += 1;
                scores[[r, pos]] += f;
                scores[[r, neg]] -= f;
            }
            let best = (0..self.n_classes)
                .max_by(|&a, &b| {
                    votes[a]
                        .cmp(&votes[b])
                        .then(scores[[r, a]].total_cmp(&scores[[r, b]]))
                        .then(b.cmp(&a))
                })
                .expect("at least two classes");
            labels.push(best);
        }
        (labels, scores)
    }

    /// Predict columns of a precomputed `train x query` kernel matrix; only
    /// valid for models fitted in this process (support indices known).
    pub(crate) fn predict_from_cross(&self, cross: &Array2<f64>) -> Vec<usize> {
        let mut dec = Array2::zeros((cross.ncols(), self.models.len()));
        for (j, m) in self.models.iter().enumerate() {
            for col in 0..cross.ncols() {
                dec[[col, j]] = decision_from_kernel(m, cross, col);
            }
        }
        self.vote(&dec).0
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self.predict_with_scores(x)?.0)
    }

    /// `u32` model count followed by that many binary SVM containers.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = (self.models.len() as u32).to_le_bytes().to_vec();
        for m in &self.models {
            out.extend(m.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Format("classifier file too short".into()));
        }
        let count = u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        if count == 0 {
            return Err(Error::Format("classifier holds no models".into()));
        }
        let mut pos = 4;
        let mut models = Vec::with_capacity(count);
        for _ in 0..count {
            let (m, used) = SvmModel::from_bytes(&bytes[pos..])?;
            pos += used;
            models.push(m);
        }
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after classifier".into()));
        }
        let dim = models[0].dim();
        if models.iter().any(|m| m.dim() != dim) {
            return Err(Error::Format("pairwise models disagree on dimension".into()));
        }
        let n_classes = models.iter().map(|m| m.classes[1]).max().unwrap_or(0) + 1;
        Ok(Self { n_classes, models })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Fraction of matching labels.
pub(crate) fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Column vector helper used when predicting from precomputed kernels.
pub(crate) fn decision_from_kernel(model: &SvmModel, cross: &Array2<f64>, col: usize) -> f64 {
    let coefs: &Array1<f64> = &model.dual_coefs;
    model
        .support_indices
        .iter()
        .zip(coefs.iter())
        .map(|(&i, &a)| a * cross[[i, col]])
        .sum::<f64>()
        + model.bias
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn three_blobs() -> (Array2<f64>, Vec<usize>) {
        let x = array![
            [0.0, 0.0],
            [0.2, 0.1],
            [0.1, 0.3],
            [5.0, 5.0],
            [5.2, 4.9],
            [4.8, 5.1],
            [10.0, 0.0],
            [10.1, 0.2],
            [9.9, -0.1]
        ];
        (x, vec![0, 0, 0, 1, 1, 1, 2, 2, 2])
    }

    #[test]
    fn three_classes_one_vs_one() {
        let (x, labels) = three_blobs();
        let clf = Classifier::fit(x.view(), &labels, &SvmParams::new(10.0, 0.5)).unwrap();
        assert_eq!(clf.models.len(), 3);
        assert_eq!(clf.n_classes, 3);
        assert_eq!(clf.predict(x.view()).unwrap(), labels);
    }

    #[test]
    fn bytes_round_trip() {
        let (x, labels) = three_blobs();
        let clf = Classifier::fit(x.view(), &labels, &SvmParams::new(10.0, 0.5)).unwrap();
        let back = Classifier::from_bytes(&clf.to_bytes()).unwrap();
        assert_eq!(back.n_classes, 3);
        assert_eq!(back.predict(x.view()).unwrap(), labels);
    }

    #[test]
    fn binary_scores_are_signed_decisions() {
        let x = array![[0.0], [0.1], [3.0], [3.1]];
        let labels = [0, 0, 1, 1];
        let clf = Classifier::fit(x.view(), &labels, &SvmParams::new(10.0, 1.0)).unwrap();
        let (pred, scores) = clf.predict_with_scores(x.view()).unwrap();
        assert_eq!(pred, labels.to_vec());
        let f = clf.models[0].decision_function(x.view()).unwrap();
        for i in 0..4 {
            assert_eq!(scores[[i, 1]], f[i]);
            assert_eq!(scores[[i, 0]], -f[i]);
        }
    }
}
