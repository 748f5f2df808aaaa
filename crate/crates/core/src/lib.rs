//! Random-forest dissimilarity multi-view classification.
//!
//! Each feature view trains its own random forest. Forest leaf co-membership
//! gives a per-view dissimilarity, the views are averaged into one joint
//! matrix, and an SVM on `1 - D` does the classification.

pub mod error;
pub mod forest;
pub mod harness;
pub mod ingest;
pub mod rfd;
pub mod rng;
pub mod svm;
pub mod texture;

pub use error::{Error, Result};
pub use forest::{train_forest, ForestParams, RandomForestModel};
pub use harness::{run_rfsvm, run_single_view_baseline, stratified_split, EvalReport, SplitPlan};
pub use ingest::{assemble_dataset, load_view, FeatureView, LabeledDataset, Mtry, RunConfig};
pub use rfd::{joint_dissimilarity, DissimilarityMatrix, SimilarityMatrix};
pub use svm::{
    grid_search_c, predict_multiclass, train_multiclass_svm, MulticlassSvmModel, SmoParams,
};
