//! Soft-margin SVM dual on a precomputed kernel, solved by SMO with
//! second-order working-set selection.
//!
//! The dual is `min 1/2 a'Qa - e'a` subject to `y'a = 0`, `0 <= a_i <= C`,
//! with `Q_ij = y_i y_j K_ij`. When the pair curvature
//! `K_ii + K_jj - 2 K_ij` is not positive the step uses a tiny curvature
//! instead, which pushes the pair to the edge of the box.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            tolerance: 1e-5,
            max_iter: 10_000_000,
        }
    }
}

/// Trained two-class machine. `dual_coefs[k] = alpha * y` for the training
/// sample `support_indices[k]`; decision value for a kernel row `r` is
/// `sum_k dual_coefs[k] * r[support_indices[k]] + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub(crate) support_indices: Vec<usize>,
    pub(crate) dual_coefs: Vec<f64>,
    pub(crate) bias: f64,
    pub(crate) c: f64,
    pub(crate) n_train: usize,
    pub(crate) iterations: usize,
    pub(crate) kkt_violation: f64,
}

impl BinarySvmModel {
    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn dual_coefs(&self) -> &[f64] {
        &self.dual_coefs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Maximal KKT violation when the solver stopped.
    pub fn kkt_violation(&self) -> f64 {
        self.kkt_violation
    }

    /// Decision value for one row of kernel values against the training set.
    pub fn decision_value(&self, kernel_row: &[f64]) -> f64 {
        self.support_indices
            .iter()
            .zip(&self.dual_coefs)
            .map(|(&i, &coef)| coef * kernel_row[i])
            .sum::<f64>()
            + self.bias
    }

    pub(crate) fn remap_indices(&mut self, map: &[usize], n_train: usize) {
        for i in &mut self.support_indices {
            *i = map[*i];
        }
        self.n_train = n_train;
    }
}

pub(crate) fn validate_kernel(kernel: ArrayView2<'_, f64>, n: usize) -> Result<()> {
    if kernel.dim() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: kernel.nrows(),
        });
    }
    for i in 0..n {
        for j in 0..=i {
            let (a, b) = (kernel[[i, j]], kernel[[j, i]]);
            if !a.is_finite() {
                return Err(Error::Validation(format!(
                    "kernel entry ({i}, {j}) is not finite"
                )));
            }
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::Validation(format!(
                    "kernel is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Trains on an `N x N` kernel with labels in `{-1, +1}`.
pub fn train_binary_svm(
    kernel: ArrayView2<'_, f64>,
    labels: &[i8],
    c: f64,
    params: &SmoParams,
) -> Result<BinarySvmModel> {
    let n = labels.len();
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("C must be positive, got {c}")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::Label(format!(
            "binary labels must be +1 or -1, got {bad}"
        )));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::Training("binary problem needs both classes".into()));
    }
    validate_kernel(kernel, n)?;
    let sol = solve(kernel, labels, c, params)?;
    let (support_indices, dual_coefs): (Vec<usize>, Vec<f64>) = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| (i, a * f64::from(labels[i])))
        .unzip();
    Ok(BinarySvmModel {
        support_indices,
        dual_coefs,
        bias: -sol.rho,
        c,
        n_train: n,
        iterations: sol.iterations,
        kkt_violation: sol.violation,
    })
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    iterations: usize,
    violation: f64,
}

fn solve(k: ArrayView2<'_, f64>, labels: &[i8], c: f64, params: &SmoParams) -> Result<Solution> {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
    let diag: Vec<f64> = (0..n).map(|i| k[[i, i]]).collect();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective, Q a - e
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;

    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    loop {
        // i maximises -y_t G_t over the "up" set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 {
                !upper(alpha[t])
            } else {
                !lower(alpha[t])
            };
            if in_up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            let ki = k.row(i);
            for t in 0..n {
                let in_low = if y[t] > 0.0 {
                    !lower(alpha[t])
                } else {
                    !upper(alpha[t])
                };
                if !in_low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let grad_diff = gmax + yg;
                if grad_diff > 0.0 {
                    let quad = diag[i] + diag[t] - 2.0 * ki[t];
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }

        let violation = if i_sel.is_some() && gmax2 > f64::NEG_INFINITY {
            gmax + gmax2
        } else {
            0.0
        };
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if violation >= params.tolerance => (i, j),
            _ => {
                return Ok(Solution {
                    rho: compute_rho(&alpha, &grad, &y, c),
                    alpha,
                    iterations,
                    violation: violation.max(0.0),
                })
            }
        };
        if iterations >= params.max_iter {
            return Err(Error::Convergence {
                iterations,
                max_violation: violation,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = k[[i, j]];
        let quad = {
            let q = diag[i] + diag[j] - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        if y[i] != y[j] {
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

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ki, kj) = (k.row(i), k.row(j));
        for t in 0..n {
            // Q_it = y_i y_t K_it
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }
}

/// Offset `rho` with decision `f(x) = sum a_i y_i K(x_i, x) - rho`: the mean of
/// `y_i G_i` over free variables, or the midpoint of the feasible interval
/// when every variable sits at a bound.
fn compute_rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut n_free = 0usize;
    let mut sum_free = 0.0;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}
