//! Multiclass SVM on a precomputed similarity kernel.
//!
//! Multiclass problems are reduced one-vs-one: a binary machine per pair of
//! classes, trained on that pair's kernel submatrix, and a plurality vote at
//! prediction time. One C is shared by all pairs and chosen by stratified
//! k-fold cross-validation on the training kernel.

mod smo;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use smo::{train_binary_svm, BinarySvmModel, SmoParams};

use crate::error::{Error, Result};
use crate::ingest::validate_c_grid;
use crate::rng::stream_rng;

pub const SVM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    /// Class voted for by a positive decision value.
    pub class_a: usize,
    /// Class voted for otherwise.
    pub class_b: usize,
    pub model: BinarySvmModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassSvmModel {
    format_version: u32,
    class_names: Vec<String>,
    n_train: usize,
    c: f64,
    pairs: Vec<PairModel>,
}

impl MulticlassSvmModel {
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn pairs(&self) -> &[PairModel] {
        &self.pairs
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Decision value of every pair for every row, shape `(n_rows, n_pairs)`.
    pub fn decision_values(&self, kernel_rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if kernel_rows.ncols() != self.n_train {
            return Err(Error::DimensionMismatch {
                expected: self.n_train,
                actual: kernel_rows.ncols(),
            });
        }
        let mut out = Array2::zeros((kernel_rows.nrows(), self.pairs.len()));
        for (mut out_row, row) in out.outer_iter_mut().zip(kernel_rows.outer_iter()) {
            let row = row.to_vec();
            for (o, pair) in out_row.iter_mut().zip(&self.pairs) {
                *o = pair.model.decision_value(&row);
            }
        }
        Ok(out)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: MulticlassSvmModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Serde(e.to_string()))?;
        if model.format_version != SVM_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported SVM format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if n_classes < 2 {
        return Err(Error::Training(format!(
            "need at least 2 classes, got {n_classes}"
        )));
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::Label(format!(
                "class index {l} out of range for {n_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Training(format!(
            "class {missing} has no training samples"
        )));
    }
    Ok(())
}

/// Trains one binary machine per class pair `(a, b)`, `a < b`.
pub fn train_multiclass_svm(
    kernel: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    c: f64,
    params: &SmoParams,
) -> Result<MulticlassSvmModel> {
    let n = labels.len();
    smo::validate_kernel(kernel, n)?;
    check_labels(labels, class_names.len())?;
    let k = class_names.len();
    let pair_ids: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();

    let pairs = pair_ids
        .into_par_iter()
        .map(|(a, b)| {
            let (sub_kernel, sub_labels, members) = pair_subproblem(kernel, labels, a, b);
            let mut model = train_binary_svm(sub_kernel.view(), &sub_labels, c, params)?;
            model.remap_indices(&members, n);
            Ok(PairModel {
                class_a: a,
                class_b: b,
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MulticlassSvmModel {
        format_version: SVM_FORMAT_VERSION,
        class_names: class_names.to_vec(),
        n_train: n,
        c,
        pairs,
    })
}

/// Kernel submatrix, `+1/-1` labels and original indices of the samples of
/// classes `a` (positive) and `b` (negative).
pub fn pair_subproblem(
    kernel: ArrayView2<'_, f64>,
    labels: &[usize],
    a: usize,
    b: usize,
) -> (Array2<f64>, Vec<i8>, Vec<usize>) {
    let members: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == a || labels[i] == b)
        .collect();
    let sub = kernel.select(Axis(0), &members).select(Axis(1), &members);
    let y = members
        .iter()
        .map(|&i| if labels[i] == a { 1 } else { -1 })
        .collect();
    (sub, y, members)
}

/// Predicted class index for each row of `kernel_rows` (test-by-train
/// similarities, columns in training order). Each pair votes by the sign of
/// its decision value; ties go to the class listed first.
pub fn predict_multiclass(
    model: &MulticlassSvmModel,
    kernel_rows: ArrayView2<'_, f64>,
) -> Result<Vec<usize>> {
    let values = model.decision_values(kernel_rows)?;
    Ok(values
        .outer_iter()
        .map(|row| {
            let mut votes = vec![0usize; model.class_names.len()];
            for (v, pair) in row.iter().zip(&model.pairs) {
                votes[if *v > 0.0 { pair.class_a } else { pair.class_b }] += 1;
            }
            let mut best = 0;
            for (i, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

/// Assigns every sample to one of `folds` folds so that each class is spread
/// evenly. Returns the fold index of each sample.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let mut assignment = vec![0usize; labels.len()];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < folds {
            return Err(Error::Stratification(format!(
                "class {class} has {} samples, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut stream_rng(seed, class as u64));
        for (k, &i) in members.iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_c: f64,
    /// Pooled cross-validation accuracy for each C, in grid order.
    pub cv_scores: Vec<f64>,
}

/// Cross-validated accuracy of the SVM for each C; the best C wins, ties
/// going to the smaller C.
pub fn grid_search_c(
    kernel: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    c_grid: &[f64],
    folds: usize,
    seed: u64,
    params: &SmoParams,
) -> Result<GridSearchResult> {
    validate_c_grid(c_grid)?;
    smo::validate_kernel(kernel, labels.len())?;
    check_labels(labels, class_names.len())?;
    let assignment = stratified_folds(labels, class_names.len(), folds, seed)?;

    let cv_scores = c_grid
        .par_iter()
        .map(|&c| {
            cross_validated_accuracy(kernel, labels, class_names, &assignment, folds, c, params)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    for (i, &s) in cv_scores.iter().enumerate() {
        if s > cv_scores[best] {
            best = i;
        }
    }
    Ok(GridSearchResult {
        best_c: c_grid[best],
        cv_scores,
    })
}

fn cross_validated_accuracy(
    kernel: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    assignment: &[usize],
    folds: usize,
    c: f64,
    params: &SmoParams,
) -> Result<f64> {
    let mut correct = 0usize;
    for fold in 0..folds {
        let train: Vec<usize> = (0..labels.len())
            .filter(|&i| assignment[i] != fold)
            .collect();
        let held: Vec<usize> = (0..labels.len())
            .filter(|&i| assignment[i] == fold)
            .collect();
        let train_kernel = kernel.select(Axis(0), &train).select(Axis(1), &train);
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let model =
            train_multiclass_svm(train_kernel.view(), &train_labels, class_names, c, params)?;
        let rows = kernel.select(Axis(0), &held).select(Axis(1), &train);
        let predicted = predict_multiclass(&model, rows.view())?;
        correct += held
            .iter()
            .zip(&predicted)
            .filter(|(&i, &p)| labels[i] == p)
            .count();
    }
    Ok(correct as f64 / labels.len() as f64)
}
