//! CART classification trees with the Gini criterion.

use std::ops::{AddAssign, SubAssign};

use rand::seq::index::sample_weighted;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::data::{best_split, better, partition_rows, SplitStats};
use crate::learner::{FeatureMatrix, FeatureSchema, ProbMatrix, SplitRule};
use crate::table::Table;

/// Numeric features with at most this many distinct values are split at
/// every midpoint; beyond it candidate thresholds are quantiles.
pub const TREE_MAX_BINS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 4,
            min_leaf: 20,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::param("min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeSplit {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// Listed levels go left.
    LeftCategories(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: String,
        split: TreeSplit,
        missing_left: bool,
        n: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        probs: Vec<f64>,
        n: usize,
    },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn collect_features<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let TreeNode::Split {
            feature, left, right, ..
        } = self
        {
            if !out.contains(&feature.as_str()) {
                out.push(feature);
            }
            left.collect_features(out);
            right.collect_features(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub classes: Vec<String>,
    pub features: Vec<FeatureSchema>,
    pub params: TreeParams,
    pub root: TreeNode,
}

impl TreeModel {
    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Features that appear in at least one split.
    pub fn features_used(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.root.collect_features(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ClassCounts {
    counts: Vec<usize>,
    n: usize,
}

impl ClassCounts {
    fn zeros(k: usize) -> Self {
        ClassCounts {
            counts: vec![0; k],
            n: 0,
        }
    }

    fn majority(&self) -> usize {
        let mut best = 0;
        for (c, &v) in self.counts.iter().enumerate() {
            if v > self.counts[best] {
                best = c;
            }
        }
        best
    }
}

impl AddAssign for ClassCounts {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
        self.n += o.n;
    }
}

impl SubAssign<&ClassCounts> for ClassCounts {
    fn sub_assign(&mut self, o: &ClassCounts) {
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a -= b;
        }
        self.n -= o.n;
    }
}

impl SplitStats for ClassCounts {
    fn count(&self) -> usize {
        self.n
    }

    /// `n - n * gini`, so that the Gini decrease is the score gain.
    fn score(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / self.n as f64
    }

    /// Share of the parent's majority class, which orders levels optimally
    /// for two classes.
    fn order_key(&self, parent: &Self) -> f64 {
        self.counts[parent.majority()] as f64 / self.n as f64
    }
}

/// Per-node feature subsampling for forest members.
pub(crate) struct FeatureSampler<'a, R: Rng> {
    pub rng: &'a mut R,
    pub weights: &'a [f64],
    pub per_node: usize,
}

struct Grower<'a, 'r, R: Rng> {
    matrix: &'a FeatureMatrix,
    targets: &'a [u32],
    k: usize,
    params: TreeParams,
    sampler: Option<FeatureSampler<'r, R>>,
}

impl<R: Rng> Grower<'_, '_, R> {
    fn candidates(&mut self) -> Vec<usize> {
        let all = self.matrix.features.len();
        match &mut self.sampler {
            None => (0..all).collect(),
            Some(s) => {
                let eligible = s.weights.iter().filter(|&&w| w > 0.0).count();
                let amount = s.per_node.min(eligible);
                let weights = s.weights;
                let mut chosen: Vec<usize> = sample_weighted(s.rng, all, |i| weights[i], amount)
                    .map(|idx| idx.into_vec())
                    .unwrap_or_default();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let mut total = ClassCounts::zeros(self.k);
        for &r in rows.iter() {
            total.counts[self.targets[r] as usize] += 1;
        }
        total.n = rows.len();
        let pure = total.counts.iter().filter(|&&c| c > 0).count() <= 1;
        let mut best = None;
        if !pure && depth < self.params.max_depth && rows.len() >= 2 * self.params.min_leaf {
            for f in self.candidates() {
                let feature = &self.matrix.features[f];
                let mut hist = vec![ClassCounts::zeros(self.k); feature.n_bins + 1];
                for &r in rows.iter() {
                    let h = &mut hist[feature.bins[r] as usize];
                    h.counts[self.targets[r] as usize] += 1;
                    h.n += 1;
                }
                let cand = best_split(f, feature, &hist, &total, self.params.min_leaf);
                best = better(best, cand);
            }
        }
        let Some(split) = best else {
            return TreeNode::Leaf {
                probs: total
                    .counts
                    .iter()
                    .map(|&c| c as f64 / total.n as f64)
                    .collect(),
                n: total.n,
            };
        };
        let feature = &self.matrix.features[split.feature];
        let tree_split = match split.rule(feature) {
            SplitRule::Threshold(t) => TreeSplit::Threshold(t),
            SplitRule::LeftCategories(codes) => {
                let cats = feature.schema.categories.as_ref().expect("categorical schema");
                TreeSplit::LeftCategories(codes.iter().map(|&c| cats[c as usize].clone()).collect())
            }
        };
        let mask = split.left_mask(feature);
        let n_left = partition_rows(rows, &feature.bins, &mask);
        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        TreeNode::Split {
            feature: feature.schema.name.clone(),
            split: tree_split,
            missing_left: split.missing_left,
            n: total.n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

pub(crate) fn grow_tree<R: Rng>(
    matrix: &FeatureMatrix,
    targets: &[u32],
    classes: &[String],
    rows: &mut [usize],
    params: TreeParams,
    sampler: Option<FeatureSampler<'_, R>>,
) -> TreeModel {
    let mut grower = Grower {
        matrix,
        targets,
        k: classes.len(),
        params,
        sampler,
    };
    let root = grower.grow(rows, 0);
    TreeModel {
        classes: classes.to_vec(),
        features: matrix.features.iter().map(|f| f.schema.clone()).collect(),
        params,
        root,
    }
}

/// Greedy CART tree maximizing the Gini decrease at each split. Ties go to
/// the lowest feature index, then the lowest threshold. Rows with a missing
/// split value follow the side chosen at fit time: the larger child when the
/// training rows had no missing values, else the side with the larger gain.
pub fn fit_tree<S: AsRef<str>>(
    table: &Table,
    y: &str,
    features: &[S],
    params: &TreeParams,
) -> Result<TreeModel> {
    params.validate()?;
    if features.is_empty() {
        return Err(Error::param("at least one feature is required"));
    }
    if features.iter().any(|f| f.as_ref() == y) {
        return Err(Error::RoleConflict(format!("target {y:?} listed as a feature")));
    }
    let labels = table.class_labels(y)?;
    if labels.n_classes() < 2 {
        return Err(Error::DegenerateTarget(y.to_string()));
    }
    let matrix = FeatureMatrix::from_table(table, features, TREE_MAX_BINS)?;
    let mut rows: Vec<usize> = (0..table.n_rows()).collect();
    Ok(grow_tree::<rand_chacha::ChaCha8Rng>(
        &matrix,
        &labels.codes,
        &labels.labels,
        &mut rows,
        *params,
        None,
    ))
}

fn route<'a>(node: &'a TreeNode, values: &[Option<Value<'_>>], index: &dyn Fn(&str) -> usize) -> &'a [f64] {
    match node {
        TreeNode::Leaf { probs, .. } => probs,
        TreeNode::Split {
            feature,
            split,
            missing_left,
            left,
            right,
            ..
        } => {
            let goes_left = match (&values[index(feature)], split) {
                (None, _) => *missing_left,
                (Some(Value::Number(v)), TreeSplit::Threshold(t)) => v <= t,
                (Some(Value::Label(l)), TreeSplit::LeftCategories(set)) => set.iter().any(|s| s == l),
                // unseen level
                (Some(Value::Unseen), _) => *missing_left,
                _ => unreachable!("kinds are checked against the schema"),
            };
            route(if goes_left { left } else { right }, values, index)
        }
    }
}

enum Value<'a> {
    Number(f64),
    Label(&'a str),
    Unseen,
}

pub fn predict_tree(tree: &TreeModel, table: &Table) -> Result<ProbMatrix> {
    let encoded = tree
        .features
        .iter()
        .map(|s| s.encode(table))
        .collect::<Result<Vec<_>>>()?;
    let index = |name: &str| {
        tree.features
            .iter()
            .position(|f| f.name == name)
            .expect("split feature is in the schema")
    };
    let k = tree.classes.len();
    let mut probs = Vec::with_capacity(table.n_rows() * k);
    for i in 0..table.n_rows() {
        let values: Vec<Option<Value>> = tree
            .features
            .iter()
            .zip(&encoded)
            .map(|(schema, col)| {
                let v = col[i];
                match &schema.categories {
                    None => (!v.is_nan()).then_some(Value::Number(v)),
                    Some(cats) => {
                        if v.is_nan() {
                            let raw = table.column(&schema.name).ok()?;
                            (!raw.is_missing(i)).then_some(Value::Unseen)
                        } else {
                            Some(Value::Label(&cats[v as usize]))
                        }
                    }
                }
            })
            .collect();
        probs.extend_from_slice(route(&tree.root, &values, &index));
    }
    Ok(ProbMatrix {
        classes: tree.classes.clone(),
        n_rows: table.n_rows(),
        probs,
    })
}
