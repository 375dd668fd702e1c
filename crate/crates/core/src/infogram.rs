//! Infograms: per-feature (relevance, net information) coordinates.
//!
//! In core mode the vertical coordinate is the net-predictive information
//! `I(Y; X_j | X_-j)`; in fair mode it is the safety index `I(Y; X_j | S)`.
//! Features with either coordinate below its threshold fall in the L-shaped
//! zone and are not admissible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{mean_log_ratio, CmiConfig, PluginData};
use crate::learner::{relevance_scores, BoostedEnsemble, Relevance};
use crate::table::{Table, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InfogramConfig {
    pub threshold_x: f64,
    pub threshold_y: f64,
    pub top_k_prescreen: usize,
    pub cmi_cfg: CmiConfig,
}

impl Default for InfogramConfig {
    fn default() -> Self {
        InfogramConfig {
            threshold_x: 0.1,
            threshold_y: 0.1,
            top_k_prescreen: 50,
            cmi_cfg: CmiConfig::default(),
        }
    }
}

impl InfogramConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("threshold_x", self.threshold_x), ("threshold_y", self.threshold_y)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::param(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        if self.top_k_prescreen < 1 {
            return Err(Error::param("top_k_prescreen must be at least 1"));
        }
        self.cmi_cfg.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfogramMode {
    Core,
    Fair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfogramPoint {
    pub feature: String,
    pub relevance: f64,
    pub net_info: f64,
    pub raw_relevance: f64,
    pub raw_net_info_bits: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infogram {
    pub mode: InfogramMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protected: Option<Vec<String>>,
    pub config: InfogramConfig,
    pub points: Vec<InfogramPoint>,
    /// Features dropped by the relevance prescreen.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<String>,
    /// Set when no raw net-information value is positive.
    #[serde(default)]
    pub degenerate: bool,
}

impl Infogram {
    pub fn point(&self, feature: &str) -> Option<&InfogramPoint> {
        self.points.iter().find(|p| p.feature == feature)
    }

    /// Same coordinates with admissibility recomputed for new thresholds.
    pub fn reflagged(&self, threshold_x: f64, threshold_y: f64) -> Infogram {
        let mut out = self.clone();
        out.config.threshold_x = threshold_x;
        out.config.threshold_y = threshold_y;
        for p in &mut out.points {
            p.admissible = is_admissible(p.relevance, p.net_info, threshold_x, threshold_y);
        }
        out
    }
}

pub fn is_admissible(relevance: f64, net_info: f64, threshold_x: f64, threshold_y: f64) -> bool {
    relevance >= threshold_x && net_info >= threshold_y
}

/// Admissible features by descending net information, then descending
/// relevance, then name.
pub fn select_admissible(ig: &Infogram) -> Vec<String> {
    let mut chosen: Vec<&InfogramPoint> = ig.points.iter().filter(|p| p.admissible).collect();
    chosen.sort_by(|a, b| {
        b.net_info
            .total_cmp(&a.net_info)
            .then(b.relevance.total_cmp(&a.relevance))
            .then(a.feature.cmp(&b.feature))
    });
    chosen.into_iter().map(|p| p.feature.clone()).collect()
}

/// Relevance of every feature from one ensemble, and the indices of the
/// `top_k` most relevant (in feature order).
fn prescreen(
    data: &PluginData,
    features: &[usize],
    cfg: &InfogramConfig,
) -> Result<(Relevance, Vec<usize>)> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let model = BoostedEnsemble::fit_matrix(
        &data.matrix,
        features,
        &rows,
        &data.targets,
        &data.classes,
        &cfg.cmi_cfg.learner_params,
    )?;
    let relevance = relevance_scores(&model);
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        relevance.scores[b]
            .1
            .total_cmp(&relevance.scores[a].1)
            .then(a.cmp(&b))
    });
    order.truncate(cfg.top_k_prescreen);
    order.sort_unstable();
    Ok((relevance, order))
}

fn assemble(
    mode: InfogramMode,
    protected: Option<Vec<String>>,
    cfg: &InfogramConfig,
    relevance: &Relevance,
    survivors: &[usize],
    raw_net: &[f64],
) -> Infogram {
    let max = raw_net.iter().copied().fold(0.0, f64::max);
    let degenerate = max <= 0.0;
    let points = survivors
        .iter()
        .zip(raw_net)
        .map(|(&j, &raw)| {
            let net_info = if degenerate { 0.0 } else { raw.max(0.0) / max };
            let rel = relevance.scores[j].1;
            InfogramPoint {
                feature: relevance.scores[j].0.clone(),
                relevance: rel,
                net_info,
                raw_relevance: relevance.raw[j].1,
                raw_net_info_bits: raw,
                admissible: is_admissible(rel, net_info, cfg.threshold_x, cfg.threshold_y),
            }
        })
        .collect();
    let pruned = (0..relevance.scores.len())
        .filter(|j| !survivors.contains(j))
        .map(|j| relevance.scores[j].0.clone())
        .collect();
    Infogram {
        mode,
        protected,
        config: *cfg,
        points,
        pruned,
        degenerate,
    }
}

fn with_seed(cfg: &CmiConfig, offset: usize) -> CmiConfig {
    let mut out = *cfg;
    out.learner_params.seed = cfg.learner_params.seed.wrapping_add(offset as u64);
    out
}

/// Core-mode infogram: relevance against net-predictive information, each
/// feature conditioned on the other prescreened features.
pub fn core_infogram(table: &Table, spec: &TaskSpec, cfg: &InfogramConfig) -> Result<Infogram> {
    cfg.validate()?;
    spec.validate(table)?;
    if spec.features.len() < 2 {
        return Err(Error::param("a core infogram needs at least two features"));
    }
    let data = PluginData::new(table, &spec.target, &spec.features)?;
    let features: Vec<usize> = (0..spec.features.len()).collect();
    let (relevance, survivors) = prescreen(&data, &features, cfg)?;
    let numerator = data.truth_probs(&survivors, &data.targets, &cfg.cmi_cfg)?;
    let raw_net = survivors
        .par_iter()
        .map(|&j| {
            let others: Vec<usize> = survivors.iter().copied().filter(|&o| o != j).collect();
            let denominator =
                data.truth_probs(&others, &data.targets, &with_seed(&cfg.cmi_cfg, j + 1))?;
            Ok(mean_log_ratio(&numerator, &denominator, cfg.cmi_cfg.clip))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(assemble(InfogramMode::Core, None, cfg, &relevance, &survivors, &raw_net))
}

/// Fair-mode infogram: relevance against the safety index `I(Y; X_j | S)`.
/// The relevance model never sees the protected columns.
pub fn fair_infogram(table: &Table, spec: &TaskSpec, cfg: &InfogramConfig) -> Result<Infogram> {
    cfg.validate()?;
    if spec.protected.is_empty() {
        return Err(Error::param(
            "fair infogram needs at least one protected attribute; use the core infogram instead",
        ));
    }
    spec.validate(table)?;
    if spec.features.is_empty() {
        return Err(Error::param("no candidate features"));
    }
    let names: Vec<&str> = spec
        .features
        .iter()
        .chain(&spec.protected)
        .map(String::as_str)
        .collect();
    let data = PluginData::new(table, &spec.target, &names)?;
    let features: Vec<usize> = (0..spec.features.len()).collect();
    let protected: Vec<usize> = (spec.features.len()..names.len()).collect();
    let (relevance, survivors) = prescreen(&data, &features, cfg)?;
    let denominator = data.truth_probs(&protected, &data.targets, &cfg.cmi_cfg)?;
    let raw_net = survivors
        .par_iter()
        .map(|&j| {
            let joint: Vec<usize> = std::iter::once(j).chain(protected.iter().copied()).collect();
            let numerator =
                data.truth_probs(&joint, &data.targets, &with_seed(&cfg.cmi_cfg, j + 1))?;
            Ok(mean_log_ratio(&numerator, &denominator, cfg.cmi_cfg.clip))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(assemble(
        InfogramMode::Fair,
        Some(spec.protected.clone()),
        cfg,
        &relevance,
        &survivors,
        &raw_net,
    ))
}

/// Fair mode when `spec` names protected attributes, core mode otherwise.
pub fn infogram(table: &Table, spec: &TaskSpec, cfg: &InfogramConfig) -> Result<Infogram> {
    if spec.protected.is_empty() {
        core_infogram(table, spec, cfg)
    } else {
        fair_infogram(table, spec, cfg)
    }
}
