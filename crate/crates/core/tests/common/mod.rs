#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense solution of the soft-margin SVM dual
/// `min 1/2 a'Qa - sum(a)`, `0 <= a <= C`, `y'a = 0`, `Q = yy' * K`.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

impl QpSolution {
    pub fn decision(&self, kernel_row: &[f64], y: &[i8]) -> f64 {
        self.alpha
            .iter()
            .zip(y)
            .zip(kernel_row)
            .map(|((a, &yi), k)| a * yi as f64 * k)
            .sum::<f64>()
            + self.bias
    }
}

/// Euclidean projection onto the box-and-hyperplane feasible set, by
/// bisection on the hyperplane multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c))
            .collect()
    };
    let g = |lam: f64| -> f64 { at(lam).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let span = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn solve_dual_qp(kernel: ArrayView2<'_, f64>, y: &[i8], c: f64) -> QpSolution {
    let n = y.len();
    let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let q = DMatrix::from_fn(n, n, |i, j| yf[i] * yf[j] * kernel[[i, j]]);
    let lipschitz = q.clone().symmetric_eigen().eigenvalues.max().max(1e-12);
    let grad = |a: &DVector<f64>| &q * a - DVector::from_element(n, 1.0);

    // accelerated projected gradient
    let mut a = DVector::from_vec(project(&vec![0.0; n], &yf, c));
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let step = &z - grad(&z) / lipschitz;
        let next = DVector::from_vec(project(step.as_slice(), &yf, c));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &a) * ((t - 1.0) / t_next);
        if (&next - &a).amax() < 1e-15 {
            a = next;
            break;
        }
        a = next;
        t = t_next;
    }

    // exact KKT solve on the free set
    let eps = 1e-7 * c.max(1.0);
    let free: Vec<usize> = (0..n).filter(|&i| a[i] > eps && a[i] < c - eps).collect();
    if !free.is_empty() {
        let fixed: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
        for &i in &fixed {
            a[i] = if a[i] >= c - eps { c } else { 0.0 };
        }
        let m = free.len();
        let mut lhs = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                lhs[(r, s)] = q[(i, j)];
            }
            lhs[(r, m)] = yf[i];
            lhs[(m, r)] = yf[i];
            rhs[r] = 1.0 - fixed.iter().map(|&j| q[(i, j)] * a[j]).sum::<f64>();
        }
        rhs[m] = -fixed.iter().map(|&j| yf[j] * a[j]).sum::<f64>();
        let sol = lhs.svd(true, true).solve(&rhs, 1e-13).expect("svd solve");
        if (0..m).all(|r| sol[r] >= -1e-9 && sol[r] <= c + 1e-9) {
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r].clamp(0.0, c);
            }
            let alpha: Vec<f64> = a.iter().copied().collect();
            return QpSolution {
                alpha,
                bias: sol[m],
            };
        }
    }

    // no free variables: any bias in the KKT interval is optimal; take its middle
    // (y f >= 1 where alpha = 0, y f <= 1 where alpha = C)
    let g = grad(&a);
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..n {
        let v = -yf[i] * g[i];
        let at_upper = a[i] >= c - eps;
        let at_lower = a[i] <= eps;
        let caps_bias = (yf[i] > 0.0 && at_upper) || (yf[i] < 0.0 && at_lower);
        if caps_bias {
            ub = ub.min(v);
        } else {
            lb = lb.max(v);
        }
    }
    let bias = if lb.is_finite() && ub.is_finite() {
        0.5 * (lb + ub)
    } else if lb.is_finite() {
        lb
    } else {
        ub
    };
    QpSolution {
        alpha: a.iter().copied().collect(),
        bias,
    }
}

/// Gaussian kernel on random points: symmetric, unit diagonal, entries in (0, 1].
pub fn rbf_kernel(points: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let n = points.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            return 1.0;
        }
        let d2: f64 = points
            .row(i)
            .iter()
            .zip(points.row(j))
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        (-gamma * d2).exp()
    })
}

/// Binary problem with two overlapping Gaussian clouds.
pub fn random_binary_problem(seed: u64) -> (Array2<f64>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..=30);
    let d = 3;
    let mut y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    y.swap(0, n - 1);
    let points = Array2::from_shape_fn((n, d), |(i, _)| {
        let shift = if y[i] > 0 { 0.7 } else { -0.7 };
        shift + rng.random_range(-1.5..1.5)
    });
    (points, y)
}
