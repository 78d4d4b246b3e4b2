//! Hyperparameter grid search with stratified k-fold cross-validation.
//!
//! For every fold the PCA basis is fitted on the fold's training part only.
//! One eigendecomposition per fold serves all component counts, and one
//! Gram matrix per (fold, component count, gamma) serves all values of C.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{self_squared_distances, squared_distances, KernelMatrix};
use super::multiclass::{accuracy, Classifier};
use super::SvmParams;
use crate::error::{Error, Result};
use crate::reduce::fit_full;
use crate::sequence::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub n_pca: Vec<usize>,
    pub gamma: Vec<f64>,
    pub c: Vec<f64>,
    pub folds: usize,
}

impl HyperGrid {
    /// Component counts `2^k, k = 5..=floor(log2 dim)`, gamma `10^-5..10^-1`,
    /// C in {5, 10, 20, 50}, five folds. Inputs narrower than 32 dimensions
    /// fall back to a single component count equal to `dim`.
    pub fn default_for_dim(dim: usize) -> Self {
        let mut n_pca: Vec<usize> = (5..usize::BITS)
            .map(|k| 1usize << k)
            .take_while(|&n| n <= dim)
            .collect();
        if n_pca.is_empty() {
            n_pca.push(dim);
        }
        Self {
            n_pca,
            gamma: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            c: vec![5.0, 10.0, 20.0, 50.0],
            folds: 5,
        }
    }

    pub fn n_combinations(&self) -> usize {
        self.n_pca.len() * self.gamma.len() * self.c.len()
    }

    fn validate(&self, dim: usize, min_train_rows: usize) -> Result<()> {
        if self.n_pca.is_empty() || self.gamma.is_empty() || self.c.is_empty() {
            return Err(Error::InvalidConfig("every grid axis needs at least one value".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        let max = dim.min(min_train_rows);
        if let Some(&n) = self.n_pca.iter().find(|&&n| n == 0 || n > max) {
            return Err(Error::BadComponentCount { k: n, max });
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig(format!("gamma must be positive, got {g}")));
        }
        if let Some(c) = self.c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {c}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n_pca: usize,
    pub gamma: f64,
    pub c: f64,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the selected combination.
    pub best: usize,
    /// Indices of every combination that reached the best mean accuracy.
    pub tied: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    /// CSV with one line per combination, in grid order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_pca,gamma,c");
        for f in 0..self.folds {
            out.push_str(&format!(",fold{f}"));
        }
        out.push_str(",mean_accuracy,converged\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{}", r.n_pca, r.gamma, r.c));
            for a in &r.fold_accuracies {
                out.push_str(&format!(",{a:.4}"));
            }
            out.push_str(&format!(",{:.4},{}\n", r.mean_accuracy, r.converged));
        }
        out
    }
}

/// Fold index per row: each class is shuffled with the seeded generator and
/// dealt round-robin, so class ratios are preserved in every fold.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    assignment
}

/// Mean cross-validated accuracy for every (n_pca, gamma, C) combination.
///
/// Ties on accuracy go to the smallest component count, then the smallest
/// C, then the smallest gamma.
#[allow(clippy::needless_range_loop)]
pub fn grid_search_cv(data: &LabeledDataset, grid: &HyperGrid, seed: u64) -> Result<GridResult> {
    let k = data.validate_for_training()?;
    let counts = data.class_counts(k);
    if let Some((class, &n)) = counts
        .iter()
        .enumerate()
        .find(|(_, &n)| n > 0 && n < grid.folds)
    {
        return Err(Error::TooFewSamples(format!(
            "class {class} has {n} samples, {} folds need at least as many",
            grid.folds
        )));
    }
    let fold_of = stratified_folds(&data.labels, grid.folds, seed);
    let smallest_train = (0..grid.folds)
        .map(|f| fold_of.iter().filter(|&&g| g != f).count())
        .min()
        .unwrap_or(0);
    grid.validate(data.dim(), smallest_train)?;

    let n_c = grid.c.len();
    let n_g = grid.gamma.len();
    let combo = |pi: usize, gi: usize, ci: usize| (pi * n_g + gi) * n_c + ci;
    let mut acc = vec![vec![0.0; grid.folds]; grid.n_combinations()];
    let mut converged = vec![true; grid.n_combinations()];
    let mut c_order: Vec<usize> = (0..n_c).collect();
    c_order.sort_by(|&a, &b| grid.c[a].total_cmp(&grid.c[b]));

    for fold in 0..grid.folds {
        let train_rows: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] != fold).collect();
        let val_rows: Vec<usize> = (0..data.len()).filter(|&i| fold_of[i] == fold).collect();
        let train = data.select(&train_rows);
        let val = data.select(&val_rows);
        let basis = fit_full(train.features.view())?;

        for (pi, &n_pca) in grid.n_pca.iter().enumerate() {
            let pca = basis.truncate(n_pca);
            let tx = pca.transform(train.features.view())?;
            let vx = pca.transform(val.features.view())?;
            let d2 = self_squared_distances(tx.view());
            let cross_d2 = squared_distances(tx.view(), vx.view());

            for (gi, &gamma) in grid.gamma.iter().enumerate() {
                let kernel = KernelMatrix::from_squared_distances(&d2, gamma);
                let cross = cross_d2.mapv(|d| (-gamma * d).exp());
                // ascending C: each solution is a feasible start for the next
                let mut prev: Option<Classifier> = None;
                for &ci in &c_order {
                    let params = SvmParams::new(grid.c[ci], gamma);
                    let clf = Classifier::fit_with_kernel(
                        tx.view(),
                        &kernel,
                        &train.labels,
                        &params,
                        prev.as_ref(),
                    )?;
                    let pred = clf.predict_from_cross(&cross);
                    let idx = combo(pi, gi, ci);
                    acc[idx][fold] = accuracy(&val.labels, &pred);
                    converged[idx] &= clf.converged();
                    prev = Some(clf);
                }
            }
        }
        log::debug!("fold {}/{} done", fold + 1, grid.folds);
    }

    let mut rows = Vec::with_capacity(grid.n_combinations());
    for (pi, &n_pca) in grid.n_pca.iter().enumerate() {
        for (gi, &gamma) in grid.gamma.iter().enumerate() {
            for (ci, &c) in grid.c.iter().enumerate() {
                let idx = combo(pi, gi, ci);
                let fold_accuracies = acc[idx].clone();
                let mean_accuracy = fold_accuracies.iter().sum::<f64>() / grid.folds as f64;
                rows.push(GridRow {
                    n_pca,
                    gamma,
                    c,
                    fold_accuracies,
                    mean_accuracy,
                    converged: converged[idx],
                });
            }
        }
    }

    let top = rows
        .iter()
        .map(|r| r.mean_accuracy)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].mean_accuracy == top).collect();
    let best = *tied
        .iter()
        .min_by(|&&a, &&b| {
            let (ra, rb) = (&rows[a], &rows[b]);
            ra.n_pca
                .cmp(&rb.n_pca)
                .then(ra.c.total_cmp(&rb.c))
                .then(ra.gamma.total_cmp(&rb.gamma))
        })
        .expect("grid is nonempty");

    Ok(GridResult {
        rows,
        best,
        tied,
        folds: grid.folds,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(n_per_class: usize) -> LabeledDataset {
        let m = 2 * n_per_class;
        let features = Array2::from_shape_fn((m, 4), |(i, j)| {
            let class = (i >= n_per_class) as usize as f64;
            class * 3.0 + ((i * 7 + j * 3) % 5) as f64 * 0.1
        });
        let labels = (0..m).map(|i| usize::from(i >= n_per_class)).collect();
        LabeledDataset::new(features, labels, vec!["r".into(); m], vec![0.0; m]).unwrap()
    }

    #[test]
    fn default_grid_for_common_dims() {
        assert_eq!(HyperGrid::default_for_dim(192).n_pca, vec![32, 64, 128]);
        assert_eq!(HyperGrid::default_for_dim(512).n_pca, vec![32, 64, 128, 256, 512]);
        assert_eq!(HyperGrid::default_for_dim(768).n_pca, vec![32, 64, 128, 256, 512]);
        let g = HyperGrid::default_for_dim(192);
        assert_eq!(g.gamma, vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1]);
        assert_eq!(g.c, vec![5.0, 10.0, 20.0, 50.0]);
        assert_eq!(g.folds, 5);
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i % 5 == 0)).collect();
        let fold_of = stratified_folds(&labels, 5, 11);
        for f in 0..5 {
            let pos = (0..50).filter(|&i| fold_of[i] == f && labels[i] == 1).count();
            let neg = (0..50).filter(|&i| fold_of[i] == f && labels[i] == 0).count();
            assert_eq!((pos, neg), (2, 8));
        }
    }

    #[test]
    fn single_combination() {
        let data = toy(10);
        let grid = HyperGrid {
            n_pca: vec![2],
            gamma: vec![0.1],
            c: vec![10.0],
            folds: 5,
        };
        let res = grid_search_cv(&data, &grid, 3).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.best, 0);
        assert_eq!(res.best_row().mean_accuracy, 1.0);
    }

    #[test]
    fn tie_break_prefers_simpler_models() {
        let data = toy(10);
        let grid = HyperGrid {
            n_pca: vec![3, 2],
            gamma: vec![0.1, 0.05],
            c: vec![20.0, 10.0],
            folds: 5,
        };
        let res = grid_search_cv(&data, &grid, 3).unwrap();
        // every combination separates the toy data perfectly
        assert_eq!(res.tied.len(), 8);
        let best = res.best_row();
        assert_eq!((best.n_pca, best.c, best.gamma), (2, 10.0, 0.05));
    }

    #[test]
    fn too_few_samples_per_class() {
        let data = toy(4);
        let grid = HyperGrid {
            n_pca: vec![2],
            gamma: vec![0.1],
            c: vec![10.0],
            folds: 5,
        };
        assert!(matches!(
            grid_search_cv(&data, &grid, 0),
            Err(Error::TooFewSamples(_))
        ));
    }
}
