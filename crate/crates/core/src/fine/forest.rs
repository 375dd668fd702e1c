//! Bagged trees whose split candidates are drawn with probability
//! proportional to each feature's safety index.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, predict_tree, FeatureSampler, TreeModel, TreeParams, TREE_MAX_BINS};
use crate::error::{Error, Result};
use crate::learner::{FeatureMatrix, ProbMatrix};
use crate::table::Table;

/// Normalizes nonnegative feature scores into selection probabilities.
pub fn forest_selection_probs(f_values: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if let Some((name, v)) = f_values.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::param(format!("score for {name:?} must be finite and nonnegative, got {v}")));
    }
    let total: f64 = f_values.values().sum();
    if total <= 0.0 {
        return Err(Error::param("at least one feature score must be positive"));
    }
    Ok(f_values.iter().map(|(k, v)| (k.clone(), v / total)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Split candidates per node; `None` uses the square root of the number
    /// of features with positive probability.
    pub features_per_split: Option<usize>,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            features_per_split: None,
            tree: TreeParams {
                max_depth: 8,
                min_leaf: 5,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedForest {
    pub classes: Vec<String>,
    pub selection_probs: BTreeMap<String, f64>,
    pub params: ForestParams,
    pub trees: Vec<TreeModel>,
}

/// Each tree sees a bootstrap sample of rows; features with probability
/// zero are never split on.
pub fn fit_weighted_forest(
    table: &Table,
    y: &str,
    f_values: &BTreeMap<String, f64>,
    params: &ForestParams,
) -> Result<WeightedForest> {
    params.tree.validate()?;
    if params.n_trees == 0 {
        return Err(Error::param("n_trees must be at least 1"));
    }
    if f_values.contains_key(y) {
        return Err(Error::RoleConflict(format!("target {y:?} listed as a feature")));
    }
    let probs = forest_selection_probs(f_values)?;
    let names: Vec<&str> = probs.keys().map(String::as_str).collect();
    let weights: Vec<f64> = probs.values().copied().collect();
    let labels = table.class_labels(y)?;
    if labels.n_classes() < 2 {
        return Err(Error::DegenerateTarget(y.to_string()));
    }
    let matrix = FeatureMatrix::from_table(table, &names, TREE_MAX_BINS)?;
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    let per_node = params
        .features_per_split
        .unwrap_or_else(|| (positive as f64).sqrt().round() as usize)
        .clamp(1, positive);
    let n = table.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let mut rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sampler = FeatureSampler {
                rng: &mut rng,
                weights: &weights,
                per_node,
            };
            grow_tree(&matrix, &labels.codes, &labels.labels, &mut rows, params.tree, Some(sampler))
        })
        .collect();
    Ok(WeightedForest {
        classes: labels.labels,
        selection_probs: probs,
        params: *params,
        trees,
    })
}

/// Mean of the member trees' leaf distributions.
pub fn predict_forest(forest: &WeightedForest, table: &Table) -> Result<ProbMatrix> {
    let mut total = vec![0.0; table.n_rows() * forest.classes.len()];
    for tree in &forest.trees {
        let p = predict_tree(tree, table)?;
        for (acc, v) in total.iter_mut().zip(&p.probs) {
            *acc += v;
        }
    }
    let scale = 1.0 / forest.trees.len() as f64;
    total.iter_mut().for_each(|v| *v *= scale);
    Ok(ProbMatrix {
        classes: forest.classes.clone(),
        n_rows: table.n_rows(),
        probs: total,
    })
}

