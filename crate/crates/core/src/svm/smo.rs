//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! Each step updates the maximal violating pair (first-order working set
//! selection). The gradient of the minimization form is kept up to date, so
//! the stopping gap `max_{I_up} -y G - min_{I_low} -y G <= tol` is exact.

use super::kernel::KernelMatrix;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Solve the dual for labels `y` in {-1, +1}.
///
/// Stops when the maximal KKT violation falls below `tol` or after
/// `max_passes * n` pair updates; in the latter case the current iterate is
/// returned with `converged == false`.
pub fn solve_dual(k: &KernelMatrix, y: &[f64], c: f64, tol: f64, max_passes: usize) -> DualSolution {
    solve_dual_from(k, y, c, tol, max_passes, vec![0.0; y.len()])
}

/// As [`solve_dual`], starting from a feasible `alpha` (box and equality
/// constraints hold), e.g. the solution for a smaller `C`.
pub fn solve_dual_from(
    k: &KernelMatrix,
    y: &[f64],
    c: f64,
    tol: f64,
    max_passes: usize,
    mut alpha: Vec<f64>,
) -> DualSolution {
    let n = y.len();
    assert_eq!(k.len(), n);
    assert_eq!(alpha.len(), n);
    // gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    for s in 0..n {
        if alpha[s] != 0.0 {
            let coef = alpha[s] * y[s];
            for (t, (g, kv)) in grad.iter_mut().zip(k.row(s)).enumerate() {
                *g += y[t] * coef * kv;
            }
        }
    }
    let max_iter = max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut converged = false;
    let mut pair = select_pair(&alpha, &grad, y, c, tol);

    while iterations < max_iter {
        let Some((i, j)) = pair else {
            converged = true;
            break;
        };
        iterations += 1;

        let ki = k.row(i);
        let kj = k.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        update_pair(&mut alpha, &grad, y, ki[i], kj[j], ki[j], i, j, c);

        // gradient update fused with the next working-set selection
        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        let mut up = (usize::MAX, f64::NEG_INFINITY);
        let mut low = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let yt = y[t];
            let g = grad[t] + yt * (ki[t] * di + kj[t] * dj);
            grad[t] = g;
            let v = -yt * g;
            let a = alpha[t];
            if v > up.1 && in_up(a, yt, c) {
                up = (t, v);
            }
            if v < low.1 && in_low(a, yt, c) {
                low = (t, v);
            }
        }
        pair = (up.0 != usize::MAX && low.0 != usize::MAX && up.1 - low.1 > tol).then_some((up.0, low.0));
    }

    let bias = compute_bias(&alpha, &grad, y, c);
    DualSolution {
        alpha,
        bias,
        converged,
        iterations,
    }
}

/// Analytic two-variable step, clipped to the box.
#[allow(clippy::too_many_arguments)]
#[inline]
fn update_pair(alpha: &mut [f64], grad: &[f64], y: &[f64], kii: f64, kjj: f64, kij: f64, i: usize, j: usize, c: f64) {
    let qij = y[i] * y[j] * kij;
    if y[i] != y[j] {
        let quad = (kii + kjj + 2.0 * qij).max(TAU);
        let delta = (-grad[i] - grad[j]) / quad;
        let diff = alpha[i] - alpha[j];
        alpha[i] += delta;
        alpha[j] += delta;
        if diff > 0.0 {
            if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = diff;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = -diff;
        }
        if diff > 0.0 {
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = c - diff;
            }
        } else if alpha[j] > c {
            alpha[j] = c;
            alpha[i] = c + diff;
        }
    } else {
        let quad = (kii + kjj - 2.0 * qij).max(TAU);
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > c {
            if alpha[i] > c {
                alpha[i] = c;
                alpha[j] = sum - c;
            }
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > c {
            if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = sum - c;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }
    }
}

#[inline]
fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

#[inline]
fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64, tol: f64) -> Option<(usize, usize)> {
    let mut up = (usize::MAX, f64::NEG_INFINITY);
    let mut low = (usize::MAX, f64::INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && v > up.1 {
            up = (t, v);
        }
        if in_low(alpha[t], y[t], c) && v < low.1 {
            low = (t, v);
        }
    }
    if up.0 == usize::MAX || low.0 == usize::MAX || up.1 - low.1 <= tol {
        None
    } else {
        Some((up.0, low.0))
    }
}

/// Mean of `y_i - sum_j a_j y_j K_ij` over free vectors, or the midpoint of
/// the feasible interval when every multiplier sits at a bound.
fn compute_bias(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        // candidate bias value for vector t
        let b = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += b;
            free += 1;
        } else if in_up(alpha[t], y[t], c) {
            // b must be at least this value
            lower = lower.max(b);
        } else {
            upper = upper.min(b);
        }
    }
    if free > 0 {
        sum / free as f64
    } else if lower.is_finite() && upper.is_finite() {
        0.5 * (lower + upper)
    } else if lower.is_finite() {
        lower
    } else {
        upper
    }
}

/// Dual objective `sum(a) - 1/2 a'Qa`.
pub fn dual_objective(k: &KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let row = k.row(i);
        let s: f64 = (0..n).map(|j| alpha[j] * y[j] * row[j]).sum();
        quad += alpha[i] * y[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Largest violation of the KKT conditions
/// `a=0 => y f >= 1`, `0<a<C => y f = 1`, `a=C => y f <= 1`
/// with `f(x_i) = sum_j a_j y_j K_ij + b`.
pub fn kkt_violation(k: &KernelMatrix, y: &[f64], alpha: &[f64], bias: f64, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let row = k.row(i);
        let f: f64 = (0..n).map(|j| alpha[j] * y[j] * row[j]).sum::<f64>() + bias;
        let margin = y[i] * f;
        let v = if alpha[i] <= 0.0 {
            1.0 - margin
        } else if alpha[i] >= c {
            margin - 1.0
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}
