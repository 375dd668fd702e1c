//! Gradient-boosted classification trees used as the plug-in probability
//! engine of the CMI estimator and as the source of relevance scores.

mod boost;
pub mod data;

pub use boost::{
    fit_boosted, log_loss, predict_proba, relevance_scores, BoostParams, BoostedEnsemble,
    ProbMatrix, RegNode, RegTree, Relevance,
};
pub use data::{FeatureMatrix, FeatureSchema, SplitRule, DEFAULT_MAX_BINS};
