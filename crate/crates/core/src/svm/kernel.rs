use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// `exp(-gamma * |x - y|^2)`.
pub fn rbf_kernel(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, gamma: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gamma * d2).exp())
}

/// Pairwise squared Euclidean distances between the rows of `a` and `b`,
/// computed through the Gram matrix and clamped at zero.
pub fn squared_distances(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let na = a.map_axis(Axis(1), |r| r.dot(&r));
    let nb = b.map_axis(Axis(1), |r| r.dot(&r));
    let mut d = a.dot(&b.t());
    for ((i, j), v) in d.indexed_iter_mut() {
        *v = (na[i] + nb[j] - 2.0 * *v).max(0.0);
    }
    d
}

/// Squared distances among the rows of `a`; exactly symmetric with a zero
/// diagonal.
pub fn self_squared_distances(a: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut d = squared_distances(a, a);
    let n = d.nrows();
    for i in 0..n {
        d[[i, i]] = 0.0;
        for j in 0..i {
            let v = 0.5 * (d[[i, j]] + d[[j, i]]);
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Dense, row-major RBF Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn rbf(x: ArrayView2<'_, f64>, gamma: f64) -> Self {
        Self::from_squared_distances(&self_squared_distances(x), gamma)
    }

    pub fn from_squared_distances(d2: &Array2<f64>, gamma: f64) -> Self {
        assert_eq!(d2.nrows(), d2.ncols());
        let n = d2.nrows();
        let values = d2.iter().map(|&d| (-gamma * d).exp()).collect();
        Self { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Principal submatrix on the given rows and columns.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut values = Vec::with_capacity(n * n);
        for &i in idx {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Self { n, values }
    }
}
