//! RBF-kernel soft-margin SVM.

mod grid;
mod io;
mod kernel;
mod multiclass;
pub mod smo;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::{grid_search_cv, stratified_folds, GridResult, GridRow, HyperGrid};
pub use kernel::{rbf_kernel, self_squared_distances, squared_distances, KernelMatrix};
pub use multiclass::Classifier;

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Self {
        Self {
            c,
            gamma,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Trained binary RBF-SVM.
///
/// `decision(x) = sum_i dual_coefs[i] * k(sv_i, x) + bias`; a nonnegative
/// decision predicts `classes[1]`, a negative one `classes[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub support_vectors: Array2<f64>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Array1<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub tol: f64,
    pub classes: [usize; 2],
    pub converged: bool,
    pub iterations: usize,
    /// Rows of the training matrix that became support vectors. Empty for
    /// models loaded from disk.
    pub support_indices: Vec<usize>,
}

/// Map two distinct labels onto -1 (smaller) and +1 (larger).
pub fn signed_labels(labels: &[usize]) -> Result<([usize; 2], Vec<f64>)> {
    let lo = labels.iter().copied().min();
    let hi = labels.iter().copied().max();
    let (Some(lo), Some(hi)) = (lo, hi) else {
        return Err(Error::DegenerateLabels("no labels".into()));
    };
    if lo == hi {
        return Err(Error::DegenerateLabels(format!(
            "all {} samples carry label {lo}",
            labels.len()
        )));
    }
    if let Some(&other) = labels.iter().find(|&&l| l != lo && l != hi) {
        return Err(Error::DegenerateLabels(format!(
            "binary SVM got a third label {other}"
        )));
    }
    let y = labels
        .iter()
        .map(|&l| if l == hi { 1.0 } else { -1.0 })
        .collect();
    Ok(([lo, hi], y))
}

/// Train on the rows of `x` with two distinct labels.
pub fn train_svm(x: ArrayView2<'_, f64>, labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if x.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: labels.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::TooFewSamples(format!(
            "SVM needs at least 2 samples, got {}",
            x.nrows()
        )));
    }
    params.validate()?;
    let (classes, y) = signed_labels(labels)?;
    let k = KernelMatrix::rbf(x, params.gamma);
    Ok(train_with_kernel(x, &k, &y, classes, params, None))
}

/// Train from a precomputed Gram matrix over the rows of `x`.
pub(crate) fn train_with_kernel(
    x: ArrayView2<'_, f64>,
    k: &KernelMatrix,
    y: &[f64],
    classes: [usize; 2],
    params: &SvmParams,
    init: Option<Vec<f64>>,
) -> SvmModel {
    let sol = match init {
        Some(a) => smo::solve_dual_from(k, y, params.c, params.tol, params.max_passes, a),
        None => smo::solve_dual(k, y, params.c, params.tol, params.max_passes),
    };
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} updates without reaching tol {} (C={}, gamma={})",
            sol.iterations,
            params.tol,
            params.c,
            params.gamma
        );
    }
    from_solution(x, y, &sol, classes, params)
}

fn from_solution(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    sol: &smo::DualSolution,
    classes: [usize; 2],
    params: &SvmParams,
) -> SvmModel {
    let mut support_indices: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    if support_indices.is_empty() {
        // Zero multipliers only happen for degenerate kernels; keep one vector
        // with a zero coefficient so the model stays well formed.
        support_indices.push(0);
    }
    let dual_coefs = support_indices
        .iter()
        .map(|&i| sol.alpha[i] * y[i])
        .collect();
    SvmModel {
        support_vectors: x.select(Axis(0), &support_indices),
        dual_coefs,
        bias: sol.bias,
        gamma: params.gamma,
        c: params.c,
        tol: params.tol,
        classes,
        converged: sol.converged,
        iterations: sol.iterations,
        support_indices,
    }
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.nrows()
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        let d2 = squared_distances(x, self.support_vectors.view());
        let gamma = self.gamma;
        Ok(d2
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(self.dual_coefs.iter())
                    .map(|(&d, &a)| a * (-gamma * d).exp())
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(self
            .decision_function(x)?
            .iter()
            .map(|&f| self.label_for(f))
            .collect())
    }

    pub fn label_for(&self, decision: f64) -> usize {
        if decision >= 0.0 {
            self.classes[1]
        } else {
            self.classes[0]
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::encode_model(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(SvmModel, usize)> {
        io::decode_model(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn clusters(n: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut x = Array2::zeros((2 * n, 2));
        let mut labels = Vec::new();
        for i in 0..2 * n {
            let center = if i < n { 0.0 } else { 10.0 };
            x[[i, 0]] = center + noise.sample(&mut rng);
            x[[i, 1]] = center + noise.sample(&mut rng);
            labels.push(usize::from(i >= n));
        }
        (x, labels)
    }

    #[test]
    fn separated_clusters() {
        let (x, labels) = clusters(10, 0.1, 3);
        let params = SvmParams::new(10.0, 0.1);
        let model = train_svm(x.view(), &labels, &params).unwrap();
        assert!(model.converged);
        assert_eq!(model.predict(x.view()).unwrap(), labels);
        let f = model.decision_function(x.view()).unwrap();
        for (fi, &l) in f.iter().zip(&labels) {
            let y = if l == 1 { 1.0 } else { -1.0 };
            assert!(y * fi >= 1.0 - params.tol);
        }
    }

    #[test]
    fn xor() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let labels = [1, 1, 0, 0];
        let model = train_svm(x.view(), &labels, &SvmParams::new(100.0, 1.0)).unwrap();
        assert_eq!(model.predict(x.view()).unwrap(), labels.to_vec());
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            train_svm(x.view(), &[1, 1], &SvmParams::new(1.0, 1.0)),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn far_point_scores_bias() {
        let (x, labels) = clusters(5, 0.1, 9);
        let model = train_svm(x.view(), &labels, &SvmParams::new(10.0, 0.1)).unwrap();
        let f = model.decision_function(array![[1e3, -1e3]].view()).unwrap();
        assert!((f[0] - model.bias).abs() < 1e-12);
    }

    #[test]
    fn dimension_checked_at_inference() {
        let (x, labels) = clusters(5, 0.1, 1);
        let model = train_svm(x.view(), &labels, &SvmParams::new(10.0, 0.1)).unwrap();
        assert!(matches!(
            model.decision_function(Array2::zeros((1, 3)).view()),
            Err(Error::DimMismatch { .. })
        ));
    }
}
