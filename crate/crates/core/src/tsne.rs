//! Exact t-SNE.
//!
//! Per-point bandwidths are found by bisection on the precision so the
//! conditional distribution has the requested perplexity; the joint
//! distribution is `P = (P_{j|i} + P_{i|j}) / 2N`. The embedding follows
//! gradient descent on `KL(P || Q)` with a Student-t `Q`, early
//! exaggeration, momentum and per-coordinate gains. Gains and momentum
//! restart when the exaggeration phase ends.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::fit_full;
use crate::svm::self_squared_distances;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub out_dims: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            out_dims: 2,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MIN_GAIN: f64 = 0.01;
const INIT_STD: f64 = 1e-4;
const INIT_JITTER: f64 = 1e-6;
/// Bisection stops once the entropy is this close to the target, in bits.
const ENTROPY_TOL: f64 = 1e-10;
const MAX_BISECTION_STEPS: usize = 200;

impl TsneConfig {
    pub fn validate(&self, n: usize, dim: usize) -> Result<()> {
        if n < 4 {
            return Err(Error::TooFewPoints(n));
        }
        let limit = (n as f64 - 1.0) / 3.0;
        if self.perplexity.is_nan() || self.perplexity <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "perplexity must be positive, got {}",
                self.perplexity
            )));
        }
        if self.perplexity >= limit {
            return Err(Error::PerplexityTooLarge {
                perplexity: self.perplexity,
                n,
                limit,
            });
        }
        if self.out_dims == 0 || self.out_dims > dim.min(n) {
            return Err(Error::InvalidConfig(format!(
                "output dimension {} must lie in 1..={}",
                self.out_dims,
                dim.min(n)
            )));
        }
        if !(self.learning_rate > 0.0 && self.early_exaggeration > 0.0) {
            return Err(Error::InvalidConfig(
                "learning rate and exaggeration must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TsneReport {
    pub embedding: Array2<f64>,
    /// Joint affinities of the input.
    pub p: Array2<f64>,
    /// Precision `1 / (2 sigma_i^2)` per point.
    pub betas: Array1<f64>,
    pub kl_initial: f64,
    pub kl_final: f64,
}

pub fn tsne_project(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<Array2<f64>> {
    Ok(tsne_run(x, cfg)?.embedding)
}

pub fn tsne_run(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<TsneReport> {
    let (n, d) = x.dim();
    cfg.validate(n, d)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("t-SNE input has non-finite entries".into()));
    }
    let d2 = self_squared_distances(x);
    let (cond, betas) = conditional_probabilities(&d2, cfg.perplexity);
    let p = symmetrize(&cond);

    let mut y = initial_embedding(x, cfg)?;
    let kl_initial = kl_divergence(&p, &y);

    let mut update = Array2::<f64>::zeros(y.dim());
    let mut gains = Array2::<f64>::ones(y.dim());
    let exaggerated = &p * cfg.early_exaggeration;
    for it in 0..cfg.iterations {
        let early = it < cfg.exaggeration_iters;
        if it == cfg.exaggeration_iters {
            update.fill(0.0);
            gains.fill(1.0);
        }
        let grad = if early {
            kl_gradient(&exaggerated, &y)
        } else {
            kl_gradient(&p, &y)
        };
        let momentum = if early { MOMENTUM_EARLY } else { MOMENTUM_LATE };
        ndarray::Zip::from(&mut gains)
            .and(&mut update)
            .and(&grad)
            .for_each(|g, u, &dy| {
                *g = if (dy > 0.0) != (*u > 0.0) {
                    *g + 0.2
                } else {
                    (*g * 0.8).max(MIN_GAIN)
                };
                *u = momentum * *u - cfg.learning_rate * *g * dy;
            });
        y += &update;
        center(&mut y);
    }
    let kl_final = kl_divergence(&p, &y);
    Ok(TsneReport {
        embedding: y,
        p,
        betas,
        kl_initial,
        kl_final,
    })
}

/// Row-conditional affinities `P_{j|i}` calibrated to `perplexity`, and the
/// precision found for each row.
pub fn conditional_probabilities(d2: &Array2<f64>, perplexity: f64) -> (Array2<f64>, Array1<f64>) {
    let n = d2.nrows();
    let target = perplexity.log2();
    let mut p = Array2::zeros((n, n));
    let mut betas = Array1::zeros(n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let di = d2.row(i);
        // shift by the nearest distance so the largest weight is 1
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| di[j])
            .fold(f64::INFINITY, f64::min);
        let mut beta = 1.0;
        let mut lo = 0.0;
        let mut hi = f64::INFINITY;
        for _ in 0..MAX_BISECTION_STEPS {
            let h = row_distribution(di.as_slice().expect("standard layout"), i, dmin, beta, &mut row);
            let diff = h - target;
            if diff.abs() <= ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                // too flat: sharpen
                lo = beta;
                beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        row_distribution(di.as_slice().expect("standard layout"), i, dmin, beta, &mut row);
        p.row_mut(i).assign(&Array1::from(row.clone()));
        betas[i] = beta;
    }
    (p, betas)
}

/// Fill `out` with the normalized Gaussian weights of row `i` and return
/// their Shannon entropy in bits.
fn row_distribution(d: &[f64], i: usize, dmin: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut z = 0.0;
    let mut weighted = 0.0;
    for (j, (&dj, o)) in d.iter().zip(out.iter_mut()).enumerate() {
        if j == i {
            *o = 0.0;
            continue;
        }
        let shifted = dj - dmin;
        let w = (-beta * shifted).exp();
        *o = w;
        z += w;
        weighted += w * shifted;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
    (z.ln() + beta * weighted / z) / std::f64::consts::LN_2
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.log2())
        .sum::<f64>()
}

pub fn symmetrize(cond: &Array2<f64>) -> Array2<f64> {
    let n = cond.nrows() as f64;
    (cond + &cond.t()) / (2.0 * n)
}

/// Student-t weights `1 / (1 + |y_i - y_j|^2)` with a zero diagonal.
fn student_weights(y: &Array2<f64>) -> Array2<f64> {
    let d2 = self_squared_distances(y.view());
    let mut w = d2.mapv(|d| 1.0 / (1.0 + d));
    w.diag_mut().fill(0.0);
    w
}

pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let w = student_weights(y);
    let z = w.sum();
    p.iter()
        .zip(w.iter())
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &wij)| pij * (pij / (wij / z)).ln())
        .sum()
}

/// `dKL/dy_i = 4 sum_j (p_ij - q_ij) w_ij (y_i - y_j)`, accumulated
/// pairwise so the per-point gradients sum to zero.
pub fn kl_gradient(p: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let (n, k) = y.dim();
    let w = student_weights(y);
    let z = w.sum();
    let mut grad = Array2::zeros((n, k));
    for i in 0..n {
        for j in i + 1..n {
            let wij = w[[i, j]];
            let coef = 4.0 * (p[[i, j]] - wij / z) * wij;
            for c in 0..k {
                let f = coef * (y[[i, c]] - y[[j, c]]);
                grad[[i, c]] += f;
                grad[[j, c]] -= f;
            }
        }
    }
    grad
}

fn center(y: &mut Array2<f64>) {
    let mean = y.mean_axis(Axis(0)).expect("n >= 4");
    *y -= &mean;
}

/// Leading principal coordinates scaled to standard deviation 1e-4, plus
/// seeded Gaussian jitter of 1e-6.
fn initial_embedding(x: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<Array2<f64>> {
    let pca = fit_full(x)?;
    let k = cfg.out_dims;
    let coords = pca.truncate(k).transform(x)?;
    let mut y = coords.slice(s![.., ..k]).to_owned();
    for mut col in y.axis_iter_mut(Axis(1)) {
        let std = col.std(0.0);
        if std > 0.0 {
            col.mapv_inplace(|v| v / std * INIT_STD);
        } else {
            col.fill(0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, INIT_JITTER).expect("valid normal");
    y.mapv_inplace(|v| v + jitter.sample(&mut rng));
    center(&mut y);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 3), |(i, j)| ((i * 31 + j * 17) % 23) as f64 * 0.37 + i as f64 * 0.01)
    }

    #[test]
    fn perplexity_calibrated() {
        let x = grid_points(120);
        let d2 = self_squared_distances(x.view());
        let (p, _) = conditional_probabilities(&d2, 30.0);
        for row in p.rows() {
            let h = entropy_bits(row.as_slice().unwrap());
            assert!((h - 30f64.log2()).abs() < 1e-4, "entropy {h}");
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_is_symmetric_and_normalized() {
        let x = grid_points(40);
        let d2 = self_squared_distances(x.view());
        let (cond, _) = conditional_probabilities(&d2, 5.0);
        let p = symmetrize(&cond);
        assert!((p.sum() - 1.0).abs() < 1e-9);
        for i in 0..40 {
            assert_eq!(p[[i, i]], 0.0);
            for j in 0..40 {
                assert_eq!(p[[i, j]], p[[j, i]]);
                assert!(p[[i, j]] >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let cfg = TsneConfig::default();
        assert!(matches!(
            tsne_project(Array2::zeros((3, 2)).view(), &cfg),
            Err(Error::TooFewPoints(3))
        ));
        assert!(matches!(
            tsne_project(grid_points(80).view(), &cfg),
            Err(Error::PerplexityTooLarge { .. })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = grid_points(12);
        let d2 = self_squared_distances(x.view());
        let p = symmetrize(&conditional_probabilities(&d2, 3.0).0);
        let y = Array2::from_shape_fn((12, 2), |(i, j)| ((i * 5 + j * 3) % 7) as f64 * 0.3 - 1.0);
        let g = kl_gradient(&p, &y);
        let h = 1e-6;
        for i in [0, 5, 11] {
            for c in 0..2 {
                let mut yp = y.clone();
                yp[[i, c]] += h;
                let mut ym = y.clone();
                ym[[i, c]] -= h;
                let fd = (kl_divergence(&p, &yp) - kl_divergence(&p, &ym)) / (2.0 * h);
                assert!((fd - g[[i, c]]).abs() < 1e-6, "{fd} vs {}", g[[i, c]]);
            }
        }
    }

    #[test]
    fn seeded_output_is_stable() {
        let x = grid_points(30);
        let cfg = TsneConfig {
            perplexity: 5.0,
            iterations: 200,
            ..TsneConfig::default()
        };
        let a = tsne_project(x.view(), &cfg).unwrap();
        let b = tsne_project(x.view(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
