//! Compact predictors built on selected features: CART trees, logistic
//! regression with AIC backward selection, an adaptive-penalty lasso, and a
//! weighted forest.

mod forest;
mod glm;
mod lasso;
mod tree;

pub use forest::{fit_weighted_forest, forest_selection_probs, predict_forest, ForestParams, WeightedForest};
pub use glm::{aic_backward_select, fit_logistic, predict_glm, GlmModel, PenaltyWeight, Term};
pub use lasso::{fit_fine_lasso, fit_weighted_lasso, safety_indices, safety_weight, SAFETY_FLOOR};
pub use tree::{fit_tree, predict_tree, TreeModel, TreeNode, TreeParams, TreeSplit, TREE_MAX_BINS};
