//! Plug-in estimation and bootstrap testing of conditional mutual
//! information, plus exact oracles for finite joints.
//!
//! The estimate of `I(Y; X | S)` is the sample mean of
//! `log2 P(y_i | x_i, s_i) / P(y_i | s_i)` where both conditionals come from
//! boosted classifiers trained on the same sample.

mod exact;

pub use exact::{entropy_difference_cmi, exact_cmi, DiscreteJoint};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{BoostParams, BoostedEnsemble, FeatureMatrix, DEFAULT_MAX_BINS};
use crate::table::Table;

/// Smallest number of bootstrap replicates accepted.
pub const MIN_REPLICATES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmiConfig {
    pub learner_params: BoostParams,
    /// Always 2: estimates are in bits.
    pub log_base: u32,
    /// Probabilities are clipped into `[clip, 1 - clip]` before the log-ratio.
    pub clip: f64,
    /// 0 evaluates in-sample; `k >= 2` scores each row with models that did
    /// not see its fold.
    pub cross_fit_folds: usize,
}

impl Default for CmiConfig {
    fn default() -> Self {
        CmiConfig {
            learner_params: BoostParams::default(),
            log_base: 2,
            clip: 1e-6,
            cross_fit_folds: 0,
        }
    }
}

impl CmiConfig {
    pub fn validate(&self) -> Result<()> {
        self.learner_params.validate()?;
        if self.log_base != 2 {
            return Err(Error::param("log_base is fixed at 2"));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::param("clip must lie in (0, 0.5)"));
        }
        if self.cross_fit_folds == 1 {
            return Err(Error::param("cross_fit_folds must be 0 or at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmiEstimate {
    pub value_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pvalue: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_samples: Option<Vec<f64>>,
    pub n_used: usize,
    pub config: CmiConfig,
}

/// Bootstrap p-value `(1 + #{null >= observed}) / (B + 1)`.
pub fn bootstrap_pvalue(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    (1 + exceed) as f64 / (null.len() + 1) as f64
}

/// Encoded columns and target codes shared by repeated estimator calls.
pub(crate) struct PluginData {
    pub matrix: FeatureMatrix,
    pub classes: Vec<String>,
    pub targets: Vec<u32>,
}

impl PluginData {
    pub fn new<S: AsRef<str>>(table: &Table, target: &str, columns: &[S]) -> Result<Self> {
        if columns.iter().any(|c| c.as_ref() == target) {
            return Err(Error::RoleConflict(format!(
                "target {target:?} cannot also be a predictor"
            )));
        }
        let labels = table.class_labels(target)?;
        Ok(PluginData {
            matrix: FeatureMatrix::from_table(table, columns, DEFAULT_MAX_BINS)?,
            classes: labels.labels,
            targets: labels.codes,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Full class distributions `P(. | features)` for `eval` rows from a
    /// model trained on `train` rows, row-major with `n_classes` columns.
    fn fit_predict(
        &self,
        features: &[usize],
        targets: &[u32],
        train: &[usize],
        eval: &[usize],
        params: &BoostParams,
    ) -> Result<Vec<f64>> {
        let k = self.n_classes();
        let mut counts = vec![0usize; k];
        for &r in train {
            counts[targets[r] as usize] += 1;
        }
        let observed = counts.iter().filter(|&&c| c > 0).count();
        if features.is_empty() || observed < 2 {
            let freq: Vec<f64> = counts
                .iter()
                .map(|&c| c as f64 / train.len() as f64)
                .collect();
            return Ok(freq.repeat(eval.len()));
        }
        let model =
            BoostedEnsemble::fit_matrix(&self.matrix, features, train, targets, &self.classes, params)?;
        let local = model.predict_matrix(&self.matrix, eval)?;
        let slots: Vec<usize> = model
            .classes
            .iter()
            .map(|c| self.classes.iter().position(|g| g == c).expect("model class is known"))
            .collect();
        let mut out = vec![0.0; eval.len() * k];
        for i in 0..eval.len() {
            for (m, &slot) in slots.iter().enumerate() {
                out[i * k + slot] = local.row(i)[m];
            }
        }
        Ok(out)
    }

    /// In-sample class distributions for all rows.
    pub fn distributions(
        &self,
        features: &[usize],
        targets: &[u32],
        params: &BoostParams,
    ) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.n_rows()).collect();
        self.fit_predict(features, targets, &all, &all, params)
    }

    /// `P(y_i | features)` for each row's own class, in-sample or
    /// cross-fitted per `cfg`.
    pub fn truth_probs(&self, features: &[usize], targets: &[u32], cfg: &CmiConfig) -> Result<Vec<f64>> {
        let n = self.n_rows();
        let k = self.n_classes();
        let mut out = vec![0.0; n];
        if cfg.cross_fit_folds == 0 {
            let dist = self.distributions(features, targets, &cfg.learner_params)?;
            for (i, o) in out.iter_mut().enumerate() {
                *o = dist[i * k + targets[i] as usize];
            }
            return Ok(out);
        }
        for (train, eval) in folds(n, cfg.cross_fit_folds, cfg.learner_params.seed)? {
            let dist = self.fit_predict(features, targets, &train, &eval, &cfg.learner_params)?;
            for (j, &r) in eval.iter().enumerate() {
                out[r] = dist[j * k + targets[r] as usize];
            }
        }
        Ok(out)
    }
}

fn folds(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k > n {
        return Err(Error::param(format!("{k} folds exceed {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &r) in order.iter().enumerate() {
        fold_of[r] = pos % k;
    }
    Ok((0..k)
        .map(|f| {
            let (eval, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&r| fold_of[r] == f);
            (train, eval)
        })
        .collect())
}

/// Mean clipped log2-ratio of numerator to denominator probabilities.
pub(crate) fn mean_log_ratio(numerator: &[f64], denominator: &[f64], clip: f64) -> f64 {
    let hi = 1.0 - clip;
    let total: f64 = numerator
        .iter()
        .zip(denominator)
        .map(|(&a, &b)| (a.clamp(clip, hi) / b.clamp(clip, hi)).log2())
        .sum();
    total / numerator.len() as f64
}

pub(crate) fn check_roles<S: AsRef<str>, T: AsRef<str>>(y: &str, x_cols: &[S], s_cols: &[T]) -> Result<()> {
    if x_cols.is_empty() {
        return Err(Error::param("at least one X column is required"));
    }
    if x_cols.iter().any(|c| c.as_ref() == y) || s_cols.iter().any(|c| c.as_ref() == y) {
        return Err(Error::RoleConflict(format!(
            "target {y:?} appears among the X or S columns"
        )));
    }
    if let Some(c) = x_cols
        .iter()
        .find(|c| s_cols.iter().any(|s| s.as_ref() == c.as_ref()))
    {
        return Err(Error::RoleConflict(format!(
            "{:?} is in both the X and S column sets",
            c.as_ref()
        )));
    }
    Ok(())
}

/// One evaluation of the estimator on pre-encoded data.
pub(crate) fn cmi_on(
    data: &PluginData,
    x_idx: &[usize],
    s_idx: &[usize],
    targets: &[u32],
    cfg: &CmiConfig,
) -> Result<f64> {
    let joint: Vec<usize> = x_idx.iter().chain(s_idx).copied().collect();
    let numerator = data.truth_probs(&joint, targets, cfg)?;
    let denominator = data.truth_probs(s_idx, targets, cfg)?;
    Ok(mean_log_ratio(&numerator, &denominator, cfg.clip))
}

/// Estimates `I(Y; X | S)` in bits. An empty `s_cols` gives the plain mutual
/// information `I(Y; X)`.
pub fn estimate_cmi<S: AsRef<str>, T: AsRef<str>>(
    table: &Table,
    y: &str,
    x_cols: &[S],
    s_cols: &[T],
    cfg: &CmiConfig,
) -> Result<CmiEstimate> {
    let (data, x_idx, s_idx) = prepare(table, y, x_cols, s_cols, cfg)?;
    let value = cmi_on(&data, &x_idx, &s_idx, &data.targets, cfg)?;
    Ok(CmiEstimate {
        value_bits: value,
        pvalue: None,
        replicates: None,
        null_samples: None,
        n_used: data.n_rows(),
        config: *cfg,
    })
}

fn prepare<S: AsRef<str>, T: AsRef<str>>(
    table: &Table,
    y: &str,
    x_cols: &[S],
    s_cols: &[T],
    cfg: &CmiConfig,
) -> Result<(PluginData, Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    check_roles(y, x_cols, s_cols)?;
    let names: Vec<&str> = x_cols
        .iter()
        .map(AsRef::as_ref)
        .chain(s_cols.iter().map(AsRef::as_ref))
        .collect();
    let data = PluginData::new(table, y, &names)?;
    let x_idx: Vec<usize> = (0..x_cols.len()).collect();
    let s_idx: Vec<usize> = (x_cols.len()..names.len()).collect();
    Ok((data, x_idx, s_idx))
}

/// Null replicates of the estimator under `Y independent of X given S`:
/// each replicate redraws `Y*_i` from the fitted `P(. | s_i)` with seed
/// `seed + b` and refits both models.
pub(crate) fn bootstrap_null(
    data: &PluginData,
    x_idx: &[usize],
    s_idx: &[usize],
    cfg: &CmiConfig,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if replicates < MIN_REPLICATES {
        return Err(Error::param(format!(
            "at least {MIN_REPLICATES} bootstrap replicates are required, got {replicates}"
        )));
    }
    let k = data.n_classes();
    let null_dist = data.distributions(s_idx, &data.targets, &cfg.learner_params)?;
    let samplers = (0..data.n_rows())
        .map(|i| WeightedIndex::new(&null_dist[i * k..(i + 1) * k]))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::param(format!("null distribution: {e}")))?;
    (0..replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
            let y_star: Vec<u32> = samplers.iter().map(|d| d.sample(&mut rng) as u32).collect();
            cmi_on(data, x_idx, s_idx, &y_star, cfg)
        })
        .collect()
}

/// Estimate plus model-based bootstrap p-value with `replicates` null draws.
pub fn cmi_pvalue<S: AsRef<str>, T: AsRef<str>>(
    table: &Table,
    y: &str,
    x_cols: &[S],
    s_cols: &[T],
    cfg: &CmiConfig,
    replicates: usize,
    seed: u64,
) -> Result<CmiEstimate> {
    let (data, x_idx, s_idx) = prepare(table, y, x_cols, s_cols, cfg)?;
    let value = cmi_on(&data, &x_idx, &s_idx, &data.targets, cfg)?;
    let null = bootstrap_null(&data, &x_idx, &s_idx, cfg, replicates, seed)?;
    Ok(CmiEstimate {
        value_bits: value,
        pvalue: Some(bootstrap_pvalue(value, &null)),
        replicates: Some(replicates),
        null_samples: Some(null),
        n_used: data.n_rows(),
        config: *cfg,
    })
}
