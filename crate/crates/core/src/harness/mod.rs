//! Repeated stratified holdout evaluation of the RF baselines and of RFSVM.

mod metrics;
mod report;
mod synthetic;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{train_forest_on, ForestParams, RandomForestModel};
use crate::ingest::{LabeledDataset, RunConfig};
use crate::rfd::{
    clip_negative_eigenvalues, cross_dissimilarity_values, forest_dissimilarity_values, mean_of,
};
use crate::rng::{derive_seed, stream_rng};
use crate::svm::{
    grid_search_c, predict_multiclass, train_multiclass_svm, GridSearchResult, MulticlassSvmModel,
};

pub use metrics::{compute_metrics, compute_metrics_named, Metrics};
pub use report::{emit_report, format_accuracy, render_text, EvalReport, ReportFormat, RunOutcome};
pub use synthetic::{complementary_views, ComplementaryParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub repeats: Vec<Split>,
}

/// Seeds used inside repeat `r`: one each for the split, the forests and
/// the cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatSeeds {
    pub split: u64,
    pub forest: u64,
    pub folds: u64,
}

impl RepeatSeeds {
    pub fn new(seed: u64, repeat: usize) -> Self {
        let base = derive_seed(seed, repeat as u64);
        RepeatSeeds {
            split: derive_seed(base, 0),
            forest: derive_seed(base, 1),
            folds: derive_seed(base, 2),
        }
    }
}

/// Number of training samples taken from a class of `count` samples.
pub fn class_train_count(count: usize, train_fraction: f64) -> usize {
    ((train_fraction * count as f64).round() as usize).clamp(1, count - 1)
}

/// `n_repeats` stratified train/test partitions. Within each class the
/// members are shuffled and the first `round(fraction * count)` go to
/// training. Index lists are sorted.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    n_repeats: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if n_repeats == 0 {
        return Err(Error::Parameter("at least one repeat is required".into()));
    }
    let mut members = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::Label(format!(
                "class index {l} outside {n_classes} classes"
            )));
        }
        members[l].push(i);
    }
    if let Some(c) = members.iter().position(|m| m.len() < 2) {
        return Err(Error::Stratification(format!(
            "class {c} has {} samples; at least 2 are needed",
            members[c].len()
        )));
    }

    let repeats = (0..n_repeats)
        .map(|r| {
            let split_seed = RepeatSeeds::new(seed, r).split;
            let mut train = Vec::with_capacity(labels.len());
            let mut test = Vec::with_capacity(labels.len());
            for (c, m) in members.iter().enumerate() {
                let mut shuffled = m.clone();
                shuffled.shuffle(&mut stream_rng(split_seed, c as u64));
                let cut = class_train_count(m.len(), train_fraction);
                train.extend_from_slice(&shuffled[..cut]);
                test.extend_from_slice(&shuffled[cut..]);
            }
            train.sort_unstable();
            test.sort_unstable();
            Split { train, test }
        })
        .collect();
    Ok(SplitPlan { seed, repeats })
}

pub fn plan_for(dataset: &LabeledDataset, config: &RunConfig) -> Result<SplitPlan> {
    stratified_split(
        dataset.labels(),
        dataset.n_classes(),
        config.train_fraction,
        config.n_repeats,
        config.rng_seed,
    )
}

fn subset_labels(labels: &[usize], rows: &[usize]) -> Vec<usize> {
    rows.iter().map(|&i| labels[i]).collect()
}

fn view_matrices<'a>(
    dataset: &'a LabeledDataset,
    view_names: &[&str],
) -> Result<Vec<ArrayView2<'a, f64>>> {
    if view_names.is_empty() {
        return Err(Error::Parameter("at least one view is required".into()));
    }
    for (i, name) in view_names.iter().enumerate() {
        if view_names[..i].contains(name) {
            return Err(Error::Parameter(format!("view {name:?} listed twice")));
        }
    }
    view_names
        .iter()
        .map(|name| {
            dataset.view(name).map(|v| v.matrix()).ok_or_else(|| {
                Error::Parameter(format!(
                    "unknown view {name:?}; available: {:?}",
                    dataset.view_names()
                ))
            })
        })
        .collect()
}

fn forest_params(config: &RunConfig, seed: u64) -> ForestParams {
    ForestParams {
        n_trees: config.n_trees,
        mtry: config.mtry,
        seed,
    }
}

/// Random forest trained on one view's training rows, scored on its test rows.
pub fn run_single_view_baseline(
    dataset: &LabeledDataset,
    view_name: &str,
    config: &RunConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let plan = plan_for(dataset, config)?;
    run_single_view_baseline_with_plan(dataset, view_name, config, &plan)
}

pub fn run_single_view_baseline_with_plan(
    dataset: &LabeledDataset,
    view_name: &str,
    config: &RunConfig,
    plan: &SplitPlan,
) -> Result<EvalReport> {
    let x = view_matrices(dataset, &[view_name])?[0];
    let labels = dataset.labels();
    let names = dataset.class_names();
    let runs = plan
        .repeats
        .par_iter()
        .enumerate()
        .map(|(r, split)| {
            let seeds = RepeatSeeds::new(config.rng_seed, r);
            let train_x = x.select(Axis(0), &split.train);
            let model = train_forest_on(
                train_x.view(),
                &subset_labels(labels, &split.train),
                names,
                &forest_params(config, seeds.forest),
            )?;
            let predicted = model.predict_rows(x.select(Axis(0), &split.test).view())?;
            let metrics = compute_metrics(&subset_labels(labels, &split.test), &predicted, names)?;
            Ok(RunOutcome {
                metrics,
                selected_c: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_runs(
        "RF",
        vec![view_name.to_string()],
        names.to_vec(),
        config.rng_seed,
        runs,
    )
}

/// Everything RFSVM learns from one training split.
#[derive(Debug, Clone, PartialEq)]
pub struct RfsvmModel {
    pub forests: Vec<RandomForestModel>,
    /// Training rows of each view, needed to place test rows in the forests' leaves.
    pub train_rows: Vec<Array2<f64>>,
    /// Fused training similarity kernel the SVM was fitted on.
    pub kernel: Array2<f64>,
    pub grid: GridSearchResult,
    pub svm: MulticlassSvmModel,
}

/// Fits RFSVM on training rows only: one forest per view, per-view
/// dissimilarities averaged, `1 - D` as the kernel, C picked by
/// cross-validation, then the multiclass SVM.
pub fn fit_rfsvm(
    train_views: &[ArrayView2<'_, f64>],
    labels: &[usize],
    class_names: &[String],
    config: &RunConfig,
    seeds: RepeatSeeds,
) -> Result<RfsvmModel> {
    if train_views.is_empty() {
        return Err(Error::Parameter("at least one view is required".into()));
    }
    // one forest seed for all views
    let params = forest_params(config, seeds.forest);
    let forests = train_views
        .iter()
        .map(|x| train_forest_on(*x, labels, class_names, &params))
        .collect::<Result<Vec<_>>>()?;
    let dissimilarities = forests
        .iter()
        .zip(train_views)
        .map(|(f, x)| forest_dissimilarity_values(f, *x))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = dissimilarities.iter().map(|d| d.view()).collect();
    let mut kernel = mean_of(&views).mapv(|d| 1.0 - d);
    if config.psd_repair {
        kernel = clip_negative_eigenvalues(kernel.view());
    }
    let smo = config.smo_params();
    let grid = grid_search_c(
        kernel.view(),
        labels,
        class_names,
        &config.c_grid,
        config.cv_folds,
        seeds.folds,
        &smo,
    )?;
    let svm = train_multiclass_svm(kernel.view(), labels, class_names, grid.best_c, &smo)?;
    Ok(RfsvmModel {
        forests,
        train_rows: train_views.iter().map(|x| x.to_owned()).collect(),
        kernel,
        grid,
        svm,
    })
}

impl RfsvmModel {
    /// Test-by-train similarity rows, fused across views like the training kernel.
    pub fn kernel_rows(&self, test_views: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>> {
        if test_views.len() != self.forests.len() {
            return Err(Error::DimensionMismatch {
                expected: self.forests.len(),
                actual: test_views.len(),
            });
        }
        let blocks = self
            .forests
            .iter()
            .zip(&self.train_rows)
            .zip(test_views)
            .map(|((f, train), test)| cross_dissimilarity_values(f, train.view(), *test))
            .collect::<Result<Vec<_>>>()?;
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        Ok(mean_of(&views).mapv(|d| 1.0 - d))
    }

    pub fn predict(&self, test_views: &[ArrayView2<'_, f64>]) -> Result<Vec<usize>> {
        predict_multiclass(&self.svm, self.kernel_rows(test_views)?.view())
    }
}

/// RFSVM over the named views.
pub fn run_rfsvm(
    dataset: &LabeledDataset,
    view_names: &[&str],
    config: &RunConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let plan = plan_for(dataset, config)?;
    run_rfsvm_with_plan(dataset, view_names, config, &plan)
}

/// Fits RFSVM for repeat `r` of `plan` and returns the model with its test
/// predictions.
pub fn fit_repeat(
    dataset: &LabeledDataset,
    view_names: &[&str],
    config: &RunConfig,
    plan: &SplitPlan,
    r: usize,
) -> Result<(RfsvmModel, Vec<usize>)> {
    let matrices = view_matrices(dataset, view_names)?;
    let split = plan
        .repeats
        .get(r)
        .ok_or_else(|| Error::Parameter(format!("repeat {r} not in plan")))?;
    let train: Vec<Array2<f64>> = matrices
        .iter()
        .map(|x| x.select(Axis(0), &split.train))
        .collect();
    let test: Vec<Array2<f64>> = matrices
        .iter()
        .map(|x| x.select(Axis(0), &split.test))
        .collect();
    let train_views: Vec<_> = train.iter().map(|x| x.view()).collect();
    let test_views: Vec<_> = test.iter().map(|x| x.view()).collect();
    let model = fit_rfsvm(
        &train_views,
        &subset_labels(dataset.labels(), &split.train),
        dataset.class_names(),
        config,
        RepeatSeeds::new(config.rng_seed, r),
    )?;
    let predicted = model.predict(&test_views)?;
    Ok((model, predicted))
}

pub fn run_rfsvm_with_plan(
    dataset: &LabeledDataset,
    view_names: &[&str],
    config: &RunConfig,
    plan: &SplitPlan,
) -> Result<EvalReport> {
    view_matrices(dataset, view_names)?;
    let names = dataset.class_names();
    let runs = (0..plan.repeats.len())
        .into_par_iter()
        .map(|r| {
            let (model, predicted) = fit_repeat(dataset, view_names, config, plan, r)?;
            let truth = subset_labels(dataset.labels(), &plan.repeats[r].test);
            Ok(RunOutcome {
                metrics: compute_metrics(&truth, &predicted, names)?,
                selected_c: Some(model.grid.best_c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_runs(
        "RFSVM",
        view_names.iter().map(|s| s.to_string()).collect(),
        names.to_vec(),
        config.rng_seed,
        runs,
    )
}
