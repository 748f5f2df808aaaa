//! Random forest dissimilarity.
//!
//! Two samples are at distance 0 under a tree when they reach the same leaf
//! and 1 otherwise; a forest averages that over its trees. Per-view matrices
//! are fused by an elementwise mean and turned into a kernel with `S = 1 - D`.
//!
//! Forest matrices are built by bucketing samples per leaf and counting
//! co-membership, which gives exactly the value of the per-pair definition.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView1, ArrayView2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::{DecisionTree, RandomForestModel};
use crate::ingest::{read_view, write_table, FeatureView};

/// Symmetric `N x N` matrix in `[0, 1]` with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    sample_ids: Vec<String>,
    values: Array2<f64>,
}

impl DissimilarityMatrix {
    pub fn new(sample_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let n = sample_ids.len();
        if values.dim() != (n, n) {
            return Err(Error::Validation(format!(
                "dissimilarity matrix is {:?} for {n} samples",
                values.dim()
            )));
        }
        for i in 0..n {
            if values[[i, i]] != 0.0 {
                return Err(Error::Validation(format!(
                    "diagonal entry {i} is {}",
                    values[[i, i]]
                )));
            }
            for j in 0..i {
                let v = values[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "entry ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
                if v != values[[j, i]] {
                    return Err(Error::Validation(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(DissimilarityMatrix { sample_ids, values })
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_square_csv(path.as_ref(), &self.sample_ids, &self.values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let (ids, values) = read_square_csv(path.as_ref())?;
        DissimilarityMatrix::new(ids, values)
    }
}

/// Test-by-train dissimilarities: rows are unseen samples, columns training samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossDissimilarityBlock {
    row_ids: Vec<String>,
    col_ids: Vec<String>,
    values: Array2<f64>,
}

impl CrossDissimilarityBlock {
    pub fn new(row_ids: Vec<String>, col_ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (row_ids.len(), col_ids.len()) {
            return Err(Error::Validation(format!(
                "cross block is {:?} for {} x {} ids",
                values.dim(),
                row_ids.len(),
                col_ids.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!(
                "cross block entry {v} outside [0, 1]"
            )));
        }
        Ok(CrossDissimilarityBlock {
            row_ids,
            col_ids,
            values,
        })
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[String] {
        &self.col_ids
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

/// Kernel matrix `1 - D`, unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    sample_ids: Vec<String>,
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_square_csv(path.as_ref(), &self.sample_ids, &self.values)
    }
}

fn write_square_csv(path: &Path, ids: &[String], values: &Array2<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let rows = ids
        .iter()
        .zip(values.rows())
        .map(|(id, row)| (id.as_str(), row));
    write_table(std::io::BufWriter::new(file), ids, rows).map_err(|e| Error::Serde(e.to_string()))
}

/// Reads a square matrix stored in the view-file layout, with column headers
/// repeating the row ids.
pub fn read_square_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let view: FeatureView = read_view(file, "matrix", &path.display().to_string())?;
    if view.feature_names() != view.sample_ids() {
        return Err(Error::Format {
            path: path.display().to_string(),
            message: "column headers must list the row ids in the same order".into(),
        });
    }
    Ok((view.sample_ids().to_vec(), view.matrix().to_owned()))
}

/// 0 when both points reach the same leaf of `tree`, 1 otherwise.
pub fn tree_dissimilarity(
    tree: &DecisionTree,
    xi: ArrayView1<'_, f64>,
    xj: ArrayView1<'_, f64>,
) -> Result<f64> {
    let a = tree.leaf_assign(xi)?;
    let b = tree.leaf_assign(xj)?;
    Ok(if a == b { 0.0 } else { 1.0 })
}

fn leaf_buckets(leaves: ArrayView1<'_, usize>, leaf_count: usize) -> Vec<Vec<usize>> {
    let mut buckets = vec![Vec::new(); leaf_count];
    for (i, &l) in leaves.iter().enumerate() {
        buckets[l].push(i);
    }
    buckets
}

/// Fraction of trees that separate each pair of rows of `view`.
pub fn forest_dissimilarity_matrix(
    model: &RandomForestModel,
    view: &FeatureView,
) -> Result<DissimilarityMatrix> {
    let values = forest_dissimilarity_values(model, view.matrix())?;
    Ok(DissimilarityMatrix {
        sample_ids: view.sample_ids().to_vec(),
        values,
    })
}

pub(crate) fn forest_dissimilarity_values(
    model: &RandomForestModel,
    x: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let leaves = model.leaf_ids(x)?;
    let n = x.nrows();
    let m = model.n_trees();
    let same = model
        .trees()
        .par_iter()
        .enumerate()
        .fold(
            || Array2::<u32>::zeros((n, n)),
            |mut acc, (k, tree)| {
                for bucket in leaf_buckets(leaves.row(k), tree.leaf_count()) {
                    for (k, &a) in bucket.iter().enumerate() {
                        for &b in &bucket[k + 1..] {
                            acc[[a, b]] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| Array2::<u32>::zeros((n, n)), |a, b| a + b);

    let mut values = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = (m as u32 - same[[i, j]]) as f64 / m as f64;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(values)
}

/// Dissimilarity of each test row to each training row under a forest
/// trained on the training rows.
pub fn cross_dissimilarity(
    model: &RandomForestModel,
    train_view: &FeatureView,
    test_view: &FeatureView,
) -> Result<CrossDissimilarityBlock> {
    let values = cross_dissimilarity_values(model, train_view.matrix(), test_view.matrix())?;
    Ok(CrossDissimilarityBlock {
        row_ids: test_view.sample_ids().to_vec(),
        col_ids: train_view.sample_ids().to_vec(),
        values,
    })
}

pub(crate) fn cross_dissimilarity_values(
    model: &RandomForestModel,
    train: ArrayView2<'_, f64>,
    test: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    let train_leaves = model.leaf_ids(train)?;
    let test_leaves = model.leaf_ids(test)?;
    let (n_test, n_train) = (test.nrows(), train.nrows());
    let m = model.n_trees();
    let same = model
        .trees()
        .par_iter()
        .enumerate()
        .fold(
            || Array2::<u32>::zeros((n_test, n_train)),
            |mut acc, (k, tree)| {
                let buckets = leaf_buckets(train_leaves.row(k), tree.leaf_count());
                for (t, &leaf) in test_leaves.row(k).iter().enumerate() {
                    for &i in &buckets[leaf] {
                        acc[[t, i]] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Array2::<u32>::zeros((n_test, n_train)), |a, b| a + b);
    Ok(same.mapv(|s| (m as u32 - s) as f64 / m as f64))
}

/// Elementwise mean of the values at one position, independent of the order
/// of `vals` and exact when all values are equal.
fn order_free_mean(vals: &mut [f64]) -> f64 {
    vals.sort_unstable_by(f64::total_cmp);
    let mut mean = 0.0;
    for (k, &v) in vals.iter().enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

pub(crate) fn mean_of(views: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    let shape = views[0].dim();
    let mut out = Array2::<f64>::zeros(shape);
    let mut buf = vec![0.0; views.len()];
    for ((i, j), o) in out.indexed_iter_mut() {
        for (b, v) in buf.iter_mut().zip(views) {
            *b = v[[i, j]];
        }
        *o = order_free_mean(&mut buf);
    }
    out
}

/// Joint matrix of several views: the elementwise mean.
pub fn joint_dissimilarity(matrices: &[DissimilarityMatrix]) -> Result<DissimilarityMatrix> {
    let Some(first) = matrices.first() else {
        return Err(Error::Parameter(
            "at least one dissimilarity matrix is required".into(),
        ));
    };
    if let Some(bad) = matrices.iter().find(|m| m.sample_ids != first.sample_ids) {
        return Err(Error::Alignment {
            offending: mismatched_ids(&first.sample_ids, &bad.sample_ids),
        });
    }
    let views: Vec<_> = matrices.iter().map(|m| m.values.view()).collect();
    Ok(DissimilarityMatrix {
        sample_ids: first.sample_ids.clone(),
        values: mean_of(&views),
    })
}

/// Fuses test-by-train blocks the same way [`joint_dissimilarity`] fuses training matrices.
pub fn joint_cross_dissimilarity(
    blocks: &[CrossDissimilarityBlock],
) -> Result<CrossDissimilarityBlock> {
    let Some(first) = blocks.first() else {
        return Err(Error::Parameter(
            "at least one cross block is required".into(),
        ));
    };
    for b in blocks {
        if b.row_ids != first.row_ids {
            return Err(Error::Alignment {
                offending: mismatched_ids(&first.row_ids, &b.row_ids),
            });
        }
        if b.col_ids != first.col_ids {
            return Err(Error::Alignment {
                offending: mismatched_ids(&first.col_ids, &b.col_ids),
            });
        }
    }
    let views: Vec<_> = blocks.iter().map(|b| b.values.view()).collect();
    Ok(CrossDissimilarityBlock {
        row_ids: first.row_ids.clone(),
        col_ids: first.col_ids.clone(),
        values: mean_of(&views),
    })
}

fn mismatched_ids(a: &[String], b: &[String]) -> Vec<String> {
    let mut out: Vec<String> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x != y)
        .flat_map(|(x, y)| [x.clone(), y.clone()])
        .collect();
    let shorter = a.len().min(b.len());
    out.extend(a[shorter..].iter().chain(&b[shorter..]).cloned());
    if out.is_empty() {
        out.push("<order differs>".into());
    }
    out
}

/// `S = 1 - D`.
pub fn similarity_from_dissimilarity(d: &DissimilarityMatrix) -> SimilarityMatrix {
    SimilarityMatrix {
        sample_ids: d.sample_ids.clone(),
        values: d.values.mapv(|v| 1.0 - v),
    }
}

/// `1 - D` for a test-by-train block; the rows are kernel rows for prediction.
pub fn cross_similarity(block: &CrossDissimilarityBlock) -> Array2<f64> {
    block.values.mapv(|v| 1.0 - v)
}

/// Nearest positive semidefinite matrix in Frobenius norm: negative
/// eigenvalues are set to zero and the matrix is rebuilt.
pub fn clip_negative_eigenvalues(kernel: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = kernel.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| kernel[[i, j]]);
    let eig = SymmetricEigen::new(m);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let mut out = Array2::from_shape_fn((n, n), |(i, j)| rebuilt[(i, j)]);
    // rounding leaves the product slightly asymmetric
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(kernel: ArrayView2<'_, f64>) -> f64 {
    let n = kernel.nrows();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| kernel[[i, j]]);
    SymmetricEigen::new(m).eigenvalues.min()
}

/// True when every entry of `a` equals the matching entry of `b`.
pub fn bit_equal(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> bool {
    a.dim() == b.dim() && Zip::from(a).and(b).all(|x, y| x.to_bits() == y.to_bits())
}
