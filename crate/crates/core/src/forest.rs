//! Random forest classification trees: bagging plus random feature
//! selection, Gini splits, grown without a depth limit.
//!
//! Every tree is grown from its own ChaCha8 stream derived from the forest
//! seed and the tree index, so a model is identical whether trees are grown
//! sequentially or in parallel.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FeatureView, Mtry};
use crate::rng::stream_rng;

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Improvements smaller than this are treated as no improvement.
const MIN_IMPURITY_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
        class_histogram: Vec<u32>,
    },
}

#[derive(Debug, Clone, Deserialize)]
struct RawTree {
    n_features: usize,
    nodes: Vec<Node>,
}

/// A binary classification tree. Node 0 is the root; a sample goes left iff
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct DecisionTree {
    n_features: usize,
    nodes: Vec<Node>,
    #[serde(skip)]
    leaf_nodes: Vec<usize>,
}

impl TryFrom<RawTree> for DecisionTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        DecisionTree::from_nodes(raw.nodes, raw.n_features)
    }
}

impl DecisionTree {
    /// Builds a tree from explicit nodes, checking that they form a tree
    /// rooted at node 0 with dense leaf ids.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Validation("tree has no nodes".into()));
        }
        let mut visited = vec![false; nodes.len()];
        let mut leaf_nodes: Vec<Option<usize>> = Vec::new();
        let mut stack = vec![0usize];
        let mut n_classes = None;
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut visited[i], true) {
                return Err(Error::Validation(format!("node {i} is reachable twice")));
            }
            match &nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err(Error::Validation(format!("node {i} has an invalid split")));
                    }
                    for &child in [left, right] {
                        if child >= nodes.len() {
                            return Err(Error::Validation(format!("node {i} points past the end")));
                        }
                        stack.push(child);
                    }
                }
                Node::Leaf {
                    leaf_id,
                    class_histogram,
                } => {
                    if *n_classes.get_or_insert(class_histogram.len()) != class_histogram.len() {
                        return Err(Error::Validation("leaf histograms differ in length".into()));
                    }
                    if *leaf_id >= leaf_nodes.len() {
                        leaf_nodes.resize(leaf_id + 1, None);
                    }
                    if leaf_nodes[*leaf_id].replace(i).is_some() {
                        return Err(Error::Validation(format!("leaf id {leaf_id} used twice")));
                    }
                }
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(Error::Validation("tree has unreachable nodes".into()));
        }
        let leaf_nodes = leaf_nodes
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Validation("leaf ids are not dense".into()))?;
        Ok(DecisionTree {
            n_features,
            nodes,
            leaf_nodes,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn leaf_histogram(&self, leaf_id: usize) -> &[u32] {
        match &self.nodes[self.leaf_nodes[leaf_id]] {
            Node::Leaf {
                class_histogram, ..
            } => class_histogram,
            Node::Split { .. } => unreachable!("leaf_nodes only indexes leaves"),
        }
    }

    /// Majority class of a leaf; ties go to the lower class index.
    pub fn leaf_class(&self, leaf_id: usize) -> usize {
        argmax_first(self.leaf_histogram(leaf_id))
    }

    /// Id of the leaf reached by `x`.
    pub fn leaf_assign(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.len(),
            });
        }
        Ok(self.descend(x))
    }

    pub(crate) fn descend(&self, x: ArrayView1<'_, f64>) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { leaf_id, .. } => return *leaf_id,
            }
        }
    }
}

fn argmax_first<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: Mtry::Sqrt,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    format_version: u32,
    trees: Vec<DecisionTree>,
    n_features: usize,
    class_names: Vec<String>,
    seed: u64,
}

impl RandomForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: d,
            });
        }
        Ok(())
    }

    /// Plurality vote of the trees' leaf majorities, as a class index. Ties go
    /// to the class listed first in `class_names`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        self.check_dim(x.len())?;
        let mut votes = vec![0usize; self.class_names.len()];
        for tree in &self.trees {
            votes[tree.leaf_class(tree.descend(x))] += 1;
        }
        Ok(argmax_first(&votes))
    }

    pub fn predict_label(&self, x: ArrayView1<'_, f64>) -> Result<&str> {
        Ok(&self.class_names[self.predict(x)?])
    }

    pub fn predict_rows(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        self.check_dim(x.ncols())?;
        x.rows().into_iter().map(|row| self.predict(row)).collect()
    }

    /// Leaf id of every row under every tree, shape `(n_trees, n_rows)`.
    pub fn leaf_ids(&self, x: ArrayView2<'_, f64>) -> Result<Array2<usize>> {
        self.check_dim(x.ncols())?;
        let n = x.nrows();
        let flat: Vec<usize> = self
            .trees
            .par_iter()
            .flat_map_iter(|tree| x.rows().into_iter().map(move |row| tree.descend(row)))
            .collect();
        Ok(Array2::from_shape_vec((self.trees.len(), n), flat).expect("one leaf per tree and row"))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: RandomForestModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Serde(e.to_string()))?;
        if model.format_version != FOREST_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported forest format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Trains a forest on a view. `labels[i]` is the class index of row `i`.
pub fn train_forest(
    view: &FeatureView,
    labels: &[usize],
    class_names: &[String],
    params: &ForestParams,
) -> Result<RandomForestModel> {
    train_forest_on(view.matrix(), labels, class_names, params)
}

pub fn train_forest_on(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    class_names: &[String],
    params: &ForestParams,
) -> Result<RandomForestModel> {
    let (n, d) = x.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::Training(format!("need at least 2 samples, got {n}")));
    }
    if params.n_trees == 0 {
        return Err(Error::Parameter("n_trees must be positive".into()));
    }
    let n_classes = class_names.len();
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::Label(format!(
            "class index {bad} out of range for {n_classes} classes"
        )));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Training("labels contain a single class".into()));
    }
    let mtry = params.mtry.resolve(d);
    if mtry == 0 || mtry > d {
        return Err(Error::Parameter(format!(
            "mtry must lie in 1..={d}, got {mtry}"
        )));
    }

    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(params.seed, t as u64);
            grow_tree(x, labels, n_classes, mtry, &mut rng).0
        })
        .collect();

    Ok(RandomForestModel {
        format_version: FOREST_FORMAT_VERSION,
        trees,
        n_features: d,
        class_names: class_names.to_vec(),
        seed: params.seed,
    })
}

/// Grows one tree on a bootstrap sample of the rows. Returns the tree and the
/// bag (row indices with multiplicity).
pub(crate) fn grow_tree(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> (DecisionTree, Vec<usize>) {
    let (n, d) = x.dim();
    let bag: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();

    let mut nodes = vec![placeholder()];
    let mut leaf_nodes = Vec::new();
    let mut stack = vec![(0usize, bag.clone())];
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);

    while let Some((slot, rows)) = stack.pop() {
        let counts = class_counts(&rows, labels, n_classes);
        let split = if rows.len() < 2 || counts.iter().filter(|&&c| c > 0).count() < 2 {
            None
        } else {
            let mut features = index::sample(rng, d, mtry).into_vec();
            features.sort_unstable();
            best_split(x, labels, &rows, &counts, &features, &mut pairs)
        };
        match split {
            Some((feature, threshold)) => {
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
                let left = nodes.len();
                let right = left + 1;
                nodes.push(placeholder());
                nodes.push(placeholder());
                nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                // left subtree is popped first, so leaf ids run left to right
                stack.push((right, right_rows));
                stack.push((left, left_rows));
            }
            None => {
                nodes[slot] = Node::Leaf {
                    leaf_id: leaf_nodes.len(),
                    class_histogram: counts.iter().map(|&c| c as u32).collect(),
                };
                leaf_nodes.push(slot);
            }
        }
    }

    let tree = DecisionTree {
        n_features: d,
        nodes,
        leaf_nodes,
    };
    (tree, bag)
}

fn placeholder() -> Node {
    Node::Leaf {
        leaf_id: usize::MAX,
        class_histogram: Vec::new(),
    }
}

fn class_counts(rows: &[usize], labels: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for &r in rows {
        counts[labels[r]] += 1;
    }
    counts
}

/// `n * gini` for a node with the given count and sum of squared class counts.
fn scaled_gini(n: u64, sum_sq: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n * n - sum_sq) as f64 / n as f64
    }
}

/// Best `(feature, threshold)` by weighted child Gini over the candidate
/// features, or `None` when no threshold lowers the impurity. Candidates are
/// midpoints between consecutive distinct values; ties keep the lowest
/// feature, then the lowest threshold.
fn best_split(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    rows: &[usize],
    counts: &[u64],
    features: &[usize],
    pairs: &mut Vec<(f64, usize)>,
) -> Option<(usize, f64)> {
    let n = rows.len() as u64;
    let total_sq: u64 = counts.iter().map(|c| c * c).sum();
    let parent = scaled_gini(n, total_sq);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut left = vec![0u64; counts.len()];

    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x[[r, f]], labels[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[pairs.len() - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        let (mut left_sq, mut right_sq) = (0u64, total_sq);
        for k in 0..pairs.len() - 1 {
            let class = pairs[k].1;
            let right_c = counts[class] - left[class];
            left_sq += 2 * left[class] + 1;
            right_sq -= 2 * right_c - 1;
            left[class] += 1;

            let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = k as u64 + 1;
            let score = scaled_gini(n_left, left_sq) + scaled_gini(n - n_left, right_sq);
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, f, midpoint(lo, hi)));
            }
        }
    }

    best.filter(|&(score, _, _)| score < parent - MIN_IMPURITY_DECREASE * n as f64)
        .map(|(_, f, t)| (f, t))
}

/// Midpoint of `lo < hi` that keeps `lo` on the left and `hi` on the right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid.is_finite() && mid >= lo && mid < hi {
        mid
    } else {
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, aview1, Array2};
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};
    use rand::SeedableRng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn leaf(id: usize, hist: Vec<u32>) -> Node {
        Node::Leaf {
            leaf_id: id,
            class_histogram: hist,
        }
    }

    fn blobs(n: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let shift = if j < 2 { labels[i] as f64 * 2.5 } else { 0.0 };
            shift + rng.random_range(-1.0..1.0)
        });
        (x, labels)
    }

    /// Recursive walk, independent of `descend`.
    fn walk(tree: &DecisionTree, node: usize, x: &[f64]) -> usize {
        match &tree.nodes()[node] {
            Node::Leaf { leaf_id, .. } => *leaf_id,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    walk(tree, *left, x)
                } else {
                    walk(tree, *right, x)
                }
            }
        }
    }

    #[test]
    fn single_leaf_tree_returns_leaf_zero() {
        let tree = DecisionTree::from_nodes(vec![leaf(0, vec![1, 1])], 2).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.leaf_assign(aview1(&[123.0, -4.0])).unwrap(), 0);
    }

    #[test]
    fn root_split_sends_small_values_left() {
        let tree = DecisionTree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 5.0,
                    left: 1,
                    right: 2,
                },
                leaf(0, vec![1, 0]),
                leaf(1, vec![0, 1]),
            ],
            1,
        )
        .unwrap();
        assert_eq!(tree.leaf_assign(aview1(&[3.0])).unwrap(), 0);
        assert_eq!(tree.leaf_assign(aview1(&[5.0])).unwrap(), 0);
        assert_eq!(tree.leaf_assign(aview1(&[9.0])).unwrap(), 1);
        assert!(matches!(
            tree.leaf_assign(aview1(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn malformed_trees_are_rejected() {
        assert!(DecisionTree::from_nodes(vec![], 1).is_err());
        // leaf ids not dense
        let bad = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            leaf(0, vec![1]),
            leaf(2, vec![1]),
        ];
        assert!(DecisionTree::from_nodes(bad, 1).is_err());
        // cycle back to the root
        let cyc = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 0,
                right: 1,
            },
            leaf(0, vec![1]),
        ];
        assert!(DecisionTree::from_nodes(cyc, 1).is_err());
    }

    #[test]
    fn root_threshold_separates_two_clusters() {
        let x = array![[0.0], [0.1], [10.0], [10.1]];
        let labels = [0, 0, 1, 1];
        let model = train_forest_on(
            x.view(),
            &labels,
            &names(2),
            &ForestParams {
                n_trees: 10,
                mtry: Mtry::Count(1),
                seed: 3,
            },
        )
        .unwrap();
        let mut splits = 0;
        for tree in model.trees() {
            match &tree.nodes()[0] {
                Node::Split { threshold, .. } => {
                    splits += 1;
                    assert!(
                        *threshold > 0.1 && *threshold < 10.0,
                        "threshold {threshold}"
                    );
                }
                // a bag drawn from one cluster only cannot be split
                Node::Leaf {
                    class_histogram, ..
                } => assert_eq!(class_histogram.iter().filter(|&&c| c > 0).count(), 1),
            }
        }
        assert!(splits > 0);
    }

    #[test]
    fn n_trees_is_respected() {
        let (x, y) = blobs(40, 1);
        let params = ForestParams {
            n_trees: 500,
            mtry: Mtry::Sqrt,
            seed: 9,
        };
        assert_eq!(
            train_forest_on(x.view(), &y, &names(2), &params)
                .unwrap()
                .n_trees(),
            500
        );
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = blobs(60, 2);
        let params = ForestParams {
            n_trees: 25,
            mtry: Mtry::Sqrt,
            seed: 11,
        };
        let a = train_forest_on(x.view(), &y, &names(2), &params).unwrap();
        let b = train_forest_on(x.view(), &y, &names(2), &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let c = train_forest_on(
            x.view(),
            &y,
            &names(2),
            &ForestParams { seed: 12, ..params },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn training_errors() {
        let x = array![[0.0], [1.0], [2.0]];
        let p = ForestParams {
            n_trees: 3,
            mtry: Mtry::Sqrt,
            seed: 0,
        };
        assert!(matches!(
            train_forest_on(x.view(), &[0, 0, 0], &names(2), &p),
            Err(Error::Training(_))
        ));
        assert!(matches!(
            train_forest_on(
                x.view(),
                &[0, 1, 0],
                &names(2),
                &ForestParams {
                    mtry: Mtry::Count(2),
                    ..p
                }
            ),
            Err(Error::Parameter(_))
        ));
        assert!(train_forest_on(x.view(), &[0, 1], &names(2), &p).is_err());
        assert!(train_forest_on(x.view(), &[0, 1, 2], &names(2), &p).is_err());
    }

    #[test]
    fn unanimous_and_tied_votes() {
        let pure_benign = DecisionTree::from_nodes(vec![leaf(0, vec![3, 0, 0, 0])], 1).unwrap();
        let pure_normal = DecisionTree::from_nodes(vec![leaf(0, vec![0, 0, 0, 2])], 1).unwrap();
        let class_names: Vec<String> = ["benign", "insitu", "invasive", "normal"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let model = |trees| RandomForestModel {
            format_version: FOREST_FORMAT_VERSION,
            trees,
            n_features: 1,
            class_names: class_names.clone(),
            seed: 0,
        };
        let unanimous = model(vec![pure_benign.clone(), pure_benign.clone()]);
        assert_eq!(unanimous.predict_label(aview1(&[0.0])).unwrap(), "benign");
        let tied = model(vec![pure_normal, pure_benign]);
        assert_eq!(tied.predict_label(aview1(&[0.0])).unwrap(), "benign");
        assert!(tied.predict(aview1(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn votes_match_histogram_tally() {
        let (x, y) = blobs(100, 5);
        let (test, _) = blobs(40, 6);
        let model = train_forest_on(
            x.view(),
            &y,
            &names(2),
            &ForestParams {
                n_trees: 15,
                mtry: Mtry::Sqrt,
                seed: 1,
            },
        )
        .unwrap();
        for row in test.rows() {
            let xs = row.to_vec();
            let mut tally = [0usize; 2];
            for tree in model.trees() {
                let hist = tree.leaf_histogram(walk(tree, 0, &xs));
                tally[if hist[1] > hist[0] { 1 } else { 0 }] += 1;
            }
            let expected = if tally[1] > tally[0] { 1 } else { 0 };
            assert_eq!(model.predict(row).unwrap(), expected);
        }
    }

    #[test]
    fn bagged_samples_land_in_nonempty_leaves_and_splits_reduce_gini() {
        let (x, y) = blobs(80, 7);
        for seed in 0..10 {
            let mut rng = stream_rng(seed, 0);
            let (tree, bag) = grow_tree(x.view(), &y, 2, 2, &mut rng);
            for &r in &bag {
                let leaf = tree.leaf_assign(x.row(r)).unwrap();
                assert!(tree.leaf_histogram(leaf).iter().sum::<u32>() >= 1);
            }
            // histogram totals equal bag multiplicity per leaf
            let mut per_leaf = vec![0u32; tree.leaf_count()];
            for &r in &bag {
                per_leaf[tree.leaf_assign(x.row(r)).unwrap()] += 1;
            }
            for (l, &count) in per_leaf.iter().enumerate() {
                assert_eq!(tree.leaf_histogram(l).iter().sum::<u32>(), count);
            }
            assert_weighted_gini_decreases(&tree, &x, &y, &bag);
        }
    }

    fn gini(counts: &[f64]) -> f64 {
        let n: f64 = counts.iter().sum();
        if n == 0.0 {
            return 0.0;
        }
        1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
    }

    fn assert_weighted_gini_decreases(
        tree: &DecisionTree,
        x: &Array2<f64>,
        y: &[usize],
        bag: &[usize],
    ) {
        fn collect(
            tree: &DecisionTree,
            node: usize,
            rows: Vec<usize>,
            x: &Array2<f64>,
            y: &[usize],
        ) {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = &tree.nodes()[node]
            {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| x[[i, *feature]] <= *threshold);
                let counts = |rs: &[usize]| {
                    let mut c = vec![0.0; 2];
                    rs.iter().for_each(|&i| c[y[i]] += 1.0);
                    c
                };
                let n = rows.len() as f64;
                let parent = gini(&counts(&rows));
                let weighted =
                    l.len() as f64 / n * gini(&counts(&l)) + r.len() as f64 / n * gini(&counts(&r));
                assert!(
                    weighted < parent,
                    "split at node {node} does not reduce impurity"
                );
                assert!(!l.is_empty() && !r.is_empty());
                collect(tree, *left, l, x, y);
                collect(tree, *right, r, x, y);
            }
        }
        collect(tree, 0, bag.to_vec(), x, y);
    }

    #[test]
    fn single_tree_fits_separable_one_dimensional_data() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| {
            if i < 10 {
                i as f64 * 0.01
            } else {
                10.0 + i as f64 * 0.01
            }
        });
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        for seed in 0..5 {
            let model = train_forest_on(
                x.view(),
                &y,
                &names(2),
                &ForestParams {
                    n_trees: 1,
                    mtry: Mtry::Count(1),
                    seed,
                },
            )
            .unwrap();
            assert_eq!(model.predict_rows(x.view()).unwrap(), y);
        }
    }

    #[test]
    fn permuting_duplicate_columns_keeps_predictions() {
        let (base, y) = blobs(60, 8);
        let mut x = Array2::zeros((60, 4));
        for i in 0..60 {
            x[[i, 0]] = base[[i, 0]];
            x[[i, 1]] = base[[i, 1]];
            x[[i, 2]] = base[[i, 0]];
            x[[i, 3]] = base[[i, 2]];
        }
        let mut swapped = x.clone();
        for i in 0..60 {
            swapped.swap([i, 0], [i, 2]);
        }
        let params = ForestParams {
            n_trees: 20,
            mtry: Mtry::Count(2),
            seed: 4,
        };
        let a = train_forest_on(x.view(), &y, &names(2), &params).unwrap();
        let b = train_forest_on(swapped.view(), &y, &names(2), &params).unwrap();
        let (probe, _) = blobs(30, 9);
        let probe = Array2::from_shape_fn((30, 4), |(i, j)| probe[[i, [0, 1, 0, 2][j]]]);
        assert_eq!(
            a.predict_rows(probe.view()).unwrap(),
            b.predict_rows(probe.view()).unwrap()
        );
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = blobs(30, 10);
        let model = train_forest_on(
            x.view(),
            &y,
            &names(2),
            &ForestParams {
                n_trees: 4,
                mtry: Mtry::Sqrt,
                seed: 2,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        model.save_json(&path).unwrap();
        let back = RandomForestModel::load_json(&path).unwrap();
        assert_eq!(model, back);
        assert_eq!(back.trees()[0].leaf_count(), model.trees()[0].leaf_count());
    }

    #[test]
    fn midpoint_stays_between_neighbours() {
        assert_eq!(midpoint(1.0, 3.0), 2.0);
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(m >= lo && m < hi);
        let m = midpoint(-f64::MAX, f64::MAX);
        assert!(m.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn leaf_assign_matches_recursive_walk(seed in 0u64..1000, n in 4usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-5.0..5.0));
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let mut tree_rng = stream_rng(seed, 1);
            let (tree, _) = grow_tree(x.view(), &y, 3, 2, &mut tree_rng);
            for _ in 0..20 {
                let probe: Vec<f64> = (0..3).map(|_| rng.random_range(-6.0..6.0)).collect();
                prop_assert_eq!(tree.leaf_assign(aview1(&probe)).unwrap(), walk(&tree, 0, &probe));
            }
        }
    }
}
