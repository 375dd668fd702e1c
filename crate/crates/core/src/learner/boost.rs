//! Multiclass gradient-boosted classification trees.
//!
//! Each round fits one regression tree per class (a single tree for binary
//! targets) to the negative log-loss gradient `1{y = c} - p_c` with a
//! squared-error split criterion, then sets leaf values by a one-step Newton
//! update. Scores pass through a softmax link (a logit link in the binary
//! case, written as a two-class softmax with the first class pinned at 0).

use std::collections::BTreeMap;
use std::ops::{AddAssign, SubAssign};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{
    best_split, better, partition_rows, FeatureMatrix, FeatureSchema, SplitRule, SplitStats,
    DEFAULT_MAX_BINS,
};
use crate::error::{Error, Result};
use crate::table::Table;

/// Cap on the magnitude of a single Newton leaf step before shrinkage.
const MAX_NEWTON_STEP: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds < 1 {
            return Err(Error::param("n_rounds must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::param("learning_rate must lie in (0, 1]"));
        }
        if self.max_depth < 1 {
            return Err(Error::param("max_depth must be at least 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::param("subsample must lie in (0, 1]"));
        }
        if self.min_leaf < 1 {
            return Err(Error::param("min_leaf must be at least 1"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegNode {
    Split {
        feature: usize,
        rule: SplitRule,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree stored as an arena; node 0 is the root. Leaf values
/// already include the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
}

impl RegTree {
    fn predict(&self, columns: &[&[f64]], row: usize) -> f64 {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                RegNode::Leaf { value } => return *value,
                RegNode::Split {
                    feature,
                    rule,
                    missing_left,
                    left,
                    right,
                } => {
                    let goes_left = rule
                        .goes_left(columns[*feature][row])
                        .unwrap_or(*missing_left);
                    id = if goes_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[RegNode], id: usize) -> usize {
            match &nodes[id] {
                RegNode::Leaf { .. } => 0,
                RegNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Row-stochastic class-probability matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    pub classes: Vec<String>,
    pub n_rows: usize,
    /// Row-major `n_rows x classes.len()`.
    pub probs: Vec<f64>,
}

impl ProbMatrix {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.n_classes();
        &self.probs[i * k..(i + 1) * k]
    }

    /// Probability of `label` in row `i`; zero for labels the model never saw.
    pub fn prob_of(&self, i: usize, label: &str) -> f64 {
        self.classes
            .iter()
            .position(|c| c == label)
            .map_or(0.0, |c| self.row(i)[c])
    }

    /// Most probable class per row; ties go to the earlier class.
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn predicted_labels(&self) -> Vec<String> {
        self.argmax()
            .into_iter()
            .map(|c| self.classes[c].clone())
            .collect()
    }
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub classes: Vec<String>,
    pub features: Vec<FeatureSchema>,
    pub base_scores: Vec<f64>,
    pub params: BoostParams,
    /// One group per round: `classes.len()` trees, or one tree when binary.
    pub trees: Vec<Vec<RegTree>>,
    pub feature_gain: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Debug, Default)]
struct GradStats {
    grad: f64,
    hess: f64,
    n: usize,
}

impl AddAssign for GradStats {
    fn add_assign(&mut self, o: Self) {
        self.grad += o.grad;
        self.hess += o.hess;
        self.n += o.n;
    }
}

impl SubAssign<&GradStats> for GradStats {
    fn sub_assign(&mut self, o: &GradStats) {
        self.grad -= o.grad;
        self.hess -= o.hess;
        self.n -= o.n;
    }
}

impl SplitStats for GradStats {
    fn count(&self) -> usize {
        self.n
    }
    fn score(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.grad * self.grad / self.n as f64
        }
    }
    fn order_key(&self, _parent: &Self) -> f64 {
        self.grad / self.n as f64
    }
}

struct TreeGrower<'a> {
    matrix: &'a FeatureMatrix,
    features: &'a [usize],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a BoostParams,
    /// Newton scaling: 1 for binary, (K-1)/K for multiclass.
    newton_scale: f64,
    nodes: Vec<RegNode>,
    gains: Vec<f64>,
    hist: Vec<GradStats>,
    /// (rows, leaf value) for each leaf, to update training scores in place.
    leaves: Vec<(Vec<usize>, f64)>,
}

impl TreeGrower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let mut total = GradStats::default();
        let mut sum_sq = 0.0;
        for &r in rows.iter() {
            total += GradStats {
                grad: self.grad[r],
                hess: self.hess[r],
                n: 1,
            };
            sum_sq += self.grad[r] * self.grad[r];
        }
        let spread = sum_sq - total.score();
        let splittable = depth < self.params.max_depth
            && rows.len() >= 2 * self.params.min_leaf
            && spread > 1e-14 * rows.len() as f64;

        let mut best = None;
        if splittable {
            for (local, &f) in self.features.iter().enumerate() {
                let feature = &self.matrix.features[f];
                let size = feature.n_bins + 1;
                self.hist.clear();
                self.hist.resize(size, GradStats::default());
                for &r in rows.iter() {
                    let h = &mut self.hist[feature.bins[r] as usize];
                    h.grad += self.grad[r];
                    h.hess += self.hess[r];
                    h.n += 1;
                }
                let cand = best_split(local, feature, &self.hist, &total, self.params.min_leaf);
                best = better(best, cand);
            }
        }

        let id = self.nodes.len();
        let Some(split) = best else {
            let step = self.newton_scale * total.grad / total.hess.max(1e-12);
            let value = self.params.learning_rate * step.clamp(-MAX_NEWTON_STEP, MAX_NEWTON_STEP);
            self.nodes.push(RegNode::Leaf { value });
            self.leaves.push((rows.to_vec(), value));
            return id;
        };

        let feature = &self.matrix.features[self.features[split.feature]];
        let rule = split.rule(feature);
        let mask = split.left_mask(feature);
        self.gains[split.feature] += split.gain;
        self.nodes.push(RegNode::Leaf { value: 0.0 });
        let n_left = partition_rows(rows, &feature.bins, &mask);
        let (left_rows, right_rows) = rows.split_at_mut(n_left);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = RegNode::Split {
            feature: split.feature,
            rule,
            missing_left: split.missing_left,
            left,
            right,
        };
        id
    }
}

impl BoostedEnsemble {
    /// Fits on the given rows of `matrix`, using the listed feature columns.
    /// `targets` holds class codes into `classes` for every matrix row; only
    /// classes observed among `rows` are kept.
    pub fn fit_matrix(
        matrix: &FeatureMatrix,
        features: &[usize],
        rows: &[usize],
        targets: &[u32],
        classes: &[String],
        params: &BoostParams,
    ) -> Result<Self> {
        params.validate()?;
        if features.is_empty() {
            return Err(Error::param("at least one feature is required"));
        }
        let mut counts = vec![0usize; classes.len()];
        for &r in rows {
            counts[targets[r] as usize] += 1;
        }
        let observed: Vec<usize> = (0..classes.len()).filter(|&c| counts[c] > 0).collect();
        if observed.len() < 2 {
            return Err(Error::DegenerateTarget("target".into()));
        }
        let mut remap = vec![usize::MAX; classes.len()];
        for (i, &c) in observed.iter().enumerate() {
            remap[c] = i;
        }
        let k = observed.len();
        let n = rows.len();
        let y: Vec<usize> = rows.iter().map(|&r| remap[targets[r] as usize]).collect();
        let priors: Vec<f64> = observed.iter().map(|&c| counts[c] as f64 / n as f64).collect();
        let base_scores: Vec<f64> = if k == 2 {
            vec![0.0, (priors[1] / priors[0]).ln()]
        } else {
            priors.iter().map(|p| p.ln()).collect()
        };

        let columns: Vec<&[f64]> = features
            .iter()
            .map(|&f| matrix.features[f].values.as_slice())
            .collect();
        let n_trees = if k == 2 { 1 } else { k };
        let newton_scale = if k == 2 { 1.0 } else { (k - 1) as f64 / k as f64 };

        // scores indexed by position in `rows`
        let mut scores = vec![0.0; n * k];
        for i in 0..n {
            scores[i * k..(i + 1) * k].copy_from_slice(&base_scores);
        }
        let mut probs = vec![0.0; n * k];
        let mut gains = vec![0.0; features.len()];
        let mut trees = Vec::with_capacity(params.n_rounds);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let n_sample = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        // grower works on matrix row ids
        let mut grad = vec![0.0; matrix.n_rows];
        let mut hess = vec![0.0; matrix.n_rows];
        let mut hist = Vec::new();
        let pos = row_positions(rows, matrix.n_rows);

        for _ in 0..params.n_rounds {
            for i in 0..n {
                softmax_into(&scores[i * k..(i + 1) * k], &mut probs[i * k..(i + 1) * k]);
            }
            let sampled: Vec<usize> = if n_sample == n {
                (0..n).collect()
            } else {
                let mut s = sample(&mut rng, n, n_sample).into_vec();
                s.sort_unstable();
                s
            };
            let mut group = Vec::with_capacity(n_trees);
            for t in 0..n_trees {
                let class = if k == 2 { 1 } else { t };
                for &i in &sampled {
                    let r = rows[i];
                    let p = probs[i * k + class];
                    let g = (y[i] == class) as u8 as f64 - p;
                    grad[r] = g;
                    hess[r] = if k == 2 { p * (1.0 - p) } else { g.abs() * (1.0 - g.abs()) };
                }
                let mut node_rows: Vec<usize> = sampled.iter().map(|&i| rows[i]).collect();
                let mut grower = TreeGrower {
                    matrix,
                    features,
                    grad: &grad,
                    hess: &hess,
                    params,
                    newton_scale,
                    nodes: Vec::new(),
                    gains: vec![0.0; features.len()],
                    hist: std::mem::take(&mut hist),
                    leaves: Vec::new(),
                };
                grower.grow(&mut node_rows, 0);
                hist = std::mem::take(&mut grower.hist);
                for (g, add) in gains.iter_mut().zip(&grower.gains) {
                    *g += add;
                }
                let tree = RegTree {
                    nodes: grower.nodes,
                };
                if n_sample == n {
                    for (leaf_rows, value) in &grower.leaves {
                        for &r in leaf_rows {
                            scores[pos[r] * k + class] += value;
                        }
                    }
                } else {
                    for i in 0..n {
                        scores[i * k + class] += tree.predict(&columns, rows[i]);
                    }
                }
                group.push(tree);
            }
            trees.push(group);
        }

        let feature_gain = features
            .iter()
            .zip(&gains)
            .map(|(&f, &g)| (matrix.features[f].schema.name.clone(), g))
            .collect();
        Ok(BoostedEnsemble {
            classes: observed.iter().map(|&c| classes[c].clone()).collect(),
            features: features
                .iter()
                .map(|&f| matrix.features[f].schema.clone())
                .collect(),
            base_scores,
            params: *params,
            trees,
            feature_gain,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// The first `rounds` rounds of this ensemble.
    pub fn truncated(&self, rounds: usize) -> BoostedEnsemble {
        let mut out = self.clone();
        out.trees.truncate(rounds);
        out
    }

    /// Class probabilities from pre-encoded columns (in `self.features`
    /// order) for the given row ids.
    pub fn predict_encoded(&self, columns: &[&[f64]], rows: &[usize]) -> ProbMatrix {
        let k = self.n_classes();
        let mut probs = vec![0.0; rows.len() * k];
        let mut scores = vec![0.0; k];
        for (i, &r) in rows.iter().enumerate() {
            scores.copy_from_slice(&self.base_scores);
            for group in &self.trees {
                if k == 2 {
                    scores[1] += group[0].predict(columns, r);
                } else {
                    for (c, tree) in group.iter().enumerate() {
                        scores[c] += tree.predict(columns, r);
                    }
                }
            }
            softmax_into(&scores, &mut probs[i * k..(i + 1) * k]);
        }
        ProbMatrix {
            classes: self.classes.clone(),
            n_rows: rows.len(),
            probs,
        }
    }

    /// Predictions for rows of `matrix`, matching features by name.
    pub fn predict_matrix(&self, matrix: &FeatureMatrix, rows: &[usize]) -> Result<ProbMatrix> {
        let cols = self
            .features
            .iter()
            .map(|s| {
                let f = &matrix.features[matrix.index_of(&s.name)?];
                if f.schema != *s {
                    return Err(Error::SchemaMismatch(format!(
                        "feature {:?} differs from the training schema",
                        s.name
                    )));
                }
                Ok(f.values.as_slice())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.predict_encoded(&cols, rows))
    }
}

fn row_positions(rows: &[usize], n_rows: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n_rows];
    for (i, &r) in rows.iter().enumerate() {
        pos[r] = i;
    }
    pos
}

/// Fits a boosted classifier of `target` on `features`.
pub fn fit_boosted<S: AsRef<str>>(
    table: &Table,
    target: &str,
    features: &[S],
    params: &BoostParams,
) -> Result<BoostedEnsemble> {
    params.validate()?;
    if features.is_empty() {
        return Err(Error::param("at least one feature is required"));
    }
    if features.iter().any(|f| f.as_ref() == target) {
        return Err(Error::RoleConflict(format!("target {target:?} listed as a feature")));
    }
    let labels = table.class_labels(target)?;
    if labels.n_classes() < 2 {
        return Err(Error::DegenerateTarget(target.to_string()));
    }
    if table.n_rows() < 2 * params.min_leaf {
        return Err(Error::param(format!(
            "{} rows is fewer than twice min_leaf ({})",
            table.n_rows(),
            params.min_leaf
        )));
    }
    let matrix = FeatureMatrix::from_table(table, features, DEFAULT_MAX_BINS)?;
    let all: Vec<usize> = (0..matrix.features.len()).collect();
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    BoostedEnsemble::fit_matrix(&matrix, &all, &rows, &labels.codes, &labels.labels, params)
}

/// Class probabilities for every row of `table`. Unseen category levels are
/// treated as missing.
pub fn predict_proba(model: &BoostedEnsemble, table: &Table) -> Result<ProbMatrix> {
    let encoded = model
        .features
        .iter()
        .map(|s| s.encode(table))
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<&[f64]> = encoded.iter().map(Vec::as_slice).collect();
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    Ok(model.predict_encoded(&cols, &rows))
}

/// Split-gain relevance normalized by its maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relevance {
    /// Features in training order with scores in `[0, 1]`.
    pub scores: Vec<(String, f64)>,
    /// Raw accumulated gains, same order.
    pub raw: Vec<(String, f64)>,
    /// Set when every gain is zero; all scores are then zero.
    pub degenerate: bool,
}

impl Relevance {
    pub fn get(&self, feature: &str) -> Option<f64> {
        self.scores.iter().find(|(f, _)| f == feature).map(|(_, s)| *s)
    }

    /// Features by descending score, ties by training order.
    pub fn ranked(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].1.total_cmp(&self.scores[a].1).then(a.cmp(&b)));
        idx.into_iter().map(|i| self.scores[i].0.as_str()).collect()
    }
}

pub fn relevance_scores(model: &BoostedEnsemble) -> Relevance {
    let raw: Vec<(String, f64)> = model
        .features
        .iter()
        .map(|f| (f.name.clone(), model.feature_gain.get(&f.name).copied().unwrap_or(0.0)))
        .collect();
    let max = raw.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    let degenerate = max <= 0.0;
    let scores = raw
        .iter()
        .map(|(f, g)| (f.clone(), if degenerate { 0.0 } else { g / max }))
        .collect();
    Relevance {
        scores,
        raw,
        degenerate,
    }
}

/// Mean negative log-likelihood (nats) of the true classes.
pub fn log_loss(probs: &ProbMatrix, labels: &[String]) -> f64 {
    let n = probs.n_rows as f64;
    labels
        .iter()
        .enumerate()
        .map(|(i, l)| -probs.prob_of(i, l).max(1e-300).ln())
        .sum::<f64>()
        / n
}
