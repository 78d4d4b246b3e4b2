#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vocal_fatigue::sequence::Prototype;
use vocal_fatigue::svm::smo::dual_objective;
use vocal_fatigue::svm::KernelMatrix;
use vocal_fatigue::{EmbeddingSequence, PrototypeSource};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

/// Random sequence whose values are exactly representable as `f32`.
pub fn sequence(rng: &mut impl Rng, n: usize, d: usize) -> EmbeddingSequence {
    let frames = gaussian(rng, n, d, 3.0).mapv(|v| v as f32 as f64);
    EmbeddingSequence::new("rec", "model", 0, 3.0, 0.0, frames).unwrap()
}

pub fn prototype(rng: &mut impl Rng, d: usize) -> Prototype {
    let v = gaussian(rng, 1, d, 3.0).row(0).to_owned();
    Prototype::new("rec", v, PrototypeSource::ExternallySupplied).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exhaustive maximization of the dual: every assignment of each multiplier
/// to {0, C, free} gives an equality-constrained quadratic solved exactly;
/// the best feasible stationary point is the optimum of the concave dual.
pub fn brute_force_dual(k: &KernelMatrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if free.is_empty() {
            let balance: f64 = alpha.iter().zip(y).map(|(a, y)| a * y).sum();
            if balance.abs() > 1e-12 {
                continue;
            }
        } else {
            let f = free.len();
            let mut a = DMatrix::zeros(f + 1, f + 1);
            let mut b = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q(i, j);
                }
                a[(r, f)] = y[i];
                a[(f, r)] = y[i];
                b[r] = 1.0 - (0..n).filter(|&j| state[j] == 1).map(|j| q(i, j) * c).sum::<f64>();
            }
            b[f] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = a.lu().solve(&b) else { continue };
            if free.iter().enumerate().any(|(r, _)| sol[r] < -1e-12 || sol[r] > c + 1e-12) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r].clamp(0.0, c);
            }
        }
        best = best.max(dual_objective(k, y, &alpha));
    }
    best
}

