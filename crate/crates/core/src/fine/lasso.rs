//! Adaptive-penalty lasso for logistic regression.
//!
//! Minimizes `-loglik(b0, b) + lambda * sum_j w_j |b_j|` by proximal Newton
//! steps: each outer iteration forms the IRLS quadratic approximation and
//! solves its penalized form by cyclic coordinate descent with
//! soft-thresholding. The intercept is never penalized and features with an
//! infinite weight are held at exactly zero.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::glm::{linear_predictor, log_likelihood, sigmoid, Design, GlmModel, PenaltyWeight};
use crate::error::{Error, Result};
use crate::infotheory::{check_roles, mean_log_ratio, CmiConfig, PluginData};
use crate::table::Table;

/// Safety indices at or below this value give an infinite penalty weight.
pub const SAFETY_FLOOR: f64 = 1e-4;

const MAX_OUTER: usize = 500;
const MAX_SWEEPS: usize = 100_000;
const INNER_TOL: f64 = 1e-13;
const OUTER_TOL: f64 = 1e-11;

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Raw safety index `I(Y; X_j | S)` in bits for each feature, sharing one
/// fit of the protected-only model.
pub fn safety_indices<S: AsRef<str>, P: AsRef<str>>(
    table: &Table,
    y: &str,
    features: &[S],
    protected: &[P],
    cfg: &CmiConfig,
) -> Result<BTreeMap<String, f64>> {
    cfg.validate()?;
    if protected.is_empty() {
        return Err(Error::param("at least one protected attribute is required"));
    }
    check_roles(y, features, protected)?;
    let names: Vec<&str> = features
        .iter()
        .map(AsRef::as_ref)
        .chain(protected.iter().map(AsRef::as_ref))
        .collect();
    let data = PluginData::new(table, y, &names)?;
    let s_idx: Vec<usize> = (features.len()..names.len()).collect();
    let denominator = data.truth_probs(&s_idx, &data.targets, cfg)?;
    let values = (0..features.len())
        .into_par_iter()
        .map(|j| {
            let joint: Vec<usize> = std::iter::once(j).chain(s_idx.iter().copied()).collect();
            let numerator = data.truth_probs(&joint, &data.targets, cfg)?;
            Ok(mean_log_ratio(&numerator, &denominator, cfg.clip))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(features
        .iter()
        .map(|f| f.as_ref().to_string())
        .zip(values)
        .collect())
}

/// Penalty weight `1 / F_j`, infinite at or below the floor.
pub fn safety_weight(safety: f64) -> f64 {
    if safety <= SAFETY_FLOOR {
        f64::INFINITY
    } else {
        1.0 / safety
    }
}

fn objective(d: &Design, intercept: f64, beta: &[f64], penalty: &[f64], lambda: f64) -> f64 {
    let eta = linear_predictor(d, intercept, beta);
    let l1: f64 = beta
        .iter()
        .zip(penalty)
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| w * b.abs())
        .sum();
    -log_likelihood(&eta, &d.y) + lambda * l1
}

struct LassoFit {
    intercept: f64,
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// `penalty[j]` is the weight of design column `j`.
fn solve(d: &Design, penalty: &[f64], lambda: f64) -> LassoFit {
    let n = d.n;
    let p = d.p();
    let free: Vec<usize> = (0..p).filter(|&j| penalty[j].is_finite()).collect();
    let mean = d.y.iter().sum::<f64>() / n as f64;
    let mut intercept = (mean / (1.0 - mean)).ln();
    let mut beta = vec![0.0; p];
    let mut obj = objective(d, intercept, &beta, penalty, lambda);
    let mut converged = false;
    let mut iterations = 0;
    let mut weights = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut curvature = vec![0.0; p];

    for it in 1..=MAX_OUTER {
        iterations = it;
        let eta = linear_predictor(d, intercept, &beta);
        for i in 0..n {
            let mu = sigmoid(eta[i]);
            weights[i] = (mu * (1.0 - mu)).max(1e-10);
            // working response minus current fit
            resid[i] = (d.y[i] - mu) / weights[i];
        }
        for &j in &free {
            curvature[j] = (0..n).map(|i| weights[i] * d.at(i, j) * d.at(i, j)).sum();
        }
        let total_weight: f64 = weights.iter().sum();
        let mut next_intercept = intercept;
        let mut next = beta.clone();
        for _ in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            let shift = (0..n).map(|i| weights[i] * resid[i]).sum::<f64>() / total_weight;
            next_intercept += shift;
            for r in resid.iter_mut() {
                *r -= shift;
            }
            max_change = max_change.max(shift.abs() * total_weight.sqrt());
            for &j in &free {
                if curvature[j] <= 0.0 {
                    continue;
                }
                let old = next[j];
                let g: f64 = (0..n).map(|i| weights[i] * d.at(i, j) * resid[i]).sum::<f64>()
                    + old * curvature[j];
                let new = soft_threshold(g, lambda * penalty[j]) / curvature[j];
                if new != old {
                    let delta = new - old;
                    for i in 0..n {
                        resid[i] -= delta * d.at(i, j);
                    }
                    next[j] = new;
                    max_change = max_change.max(delta.abs() * curvature[j].sqrt());
                }
            }
            if max_change < INNER_TOL {
                break;
            }
        }

        // Backtrack along the Newton direction until the objective decreases.
        let mut step = 1.0;
        let (mut cand_intercept, mut cand) = (next_intercept, next.clone());
        let mut cand_obj = objective(d, cand_intercept, &cand, penalty, lambda);
        while cand_obj > obj && step > 1e-10 {
            step *= 0.5;
            cand_intercept = intercept + step * (next_intercept - intercept);
            cand = beta
                .iter()
                .zip(&next)
                .map(|(&b, &nb)| b + step * (nb - b))
                .collect();
            cand_obj = objective(d, cand_intercept, &cand, penalty, lambda);
        }
        if cand_obj > obj {
            converged = true;
            break;
        }
        let change = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold((intercept - cand_intercept).abs(), f64::max);
        intercept = cand_intercept;
        beta = cand;
        let improvement = obj - cand_obj;
        obj = cand_obj;
        if change < OUTER_TOL || improvement <= 1e-15 * obj.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    LassoFit {
        intercept,
        beta,
        iterations,
        converged,
    }
}

/// Lasso with an explicit per-feature weight (infinite weights exclude the
/// feature).
pub fn fit_weighted_lasso<S: AsRef<str>>(
    table: &Table,
    y: &str,
    features: &[S],
    weights: &BTreeMap<String, f64>,
    lambda: f64,
) -> Result<GlmModel> {
    if !(lambda >= 0.0) || lambda.is_infinite() {
        return Err(Error::param(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    let d = Design::build(table, y, features)?;
    let penalty = d
        .terms
        .iter()
        .map(|t| {
            let w = *weights.get(t.feature()).ok_or_else(|| {
                Error::param(format!("no penalty weight for feature {:?}", t.feature()))
            })?;
            if w.is_nan() || w < 0.0 {
                return Err(Error::param(format!("invalid penalty weight {w} for {:?}", t.feature())));
            }
            Ok(w)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = solve(&d, &penalty, lambda);
    let eta = linear_predictor(&d, fit.intercept, &fit.beta);
    let loglik = log_likelihood(&eta, &d.y);
    let nonzero = fit.beta.iter().filter(|b| **b != 0.0).count();
    Ok(GlmModel {
        link: "logit".into(),
        classes: d.classes.clone(),
        intercept: fit.intercept,
        coefficients: d.terms.iter().map(|t| t.name()).zip(fit.beta.iter().copied()).collect(),
        lambda,
        penalty_weights: features
            .iter()
            .map(|f| (f.as_ref().to_string(), PenaltyWeight(weights[f.as_ref()])))
            .collect(),
        std_errors: None,
        log_likelihood: loglik,
        aic: 2.0 * (nonzero + 1) as f64 - 2.0 * loglik,
        iterations: fit.iterations,
        converged: fit.converged,
        terms: d.terms,
        dropped: Vec::new(),
    })
}

/// Lasso whose feature weights are inverse safety indices, so features that
/// carry little information about the target beyond the protected
/// attributes are penalized heavily or excluded.
pub fn fit_fine_lasso<S: AsRef<str>, P: AsRef<str>>(
    table: &Table,
    y: &str,
    features: &[S],
    protected: &[P],
    lambda: f64,
    cfg: &CmiConfig,
) -> Result<GlmModel> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be nonnegative, got {lambda}")));
    }
    let safety = safety_indices(table, y, features, protected, cfg)?;
    let weights = safety.iter().map(|(f, &v)| (f.clone(), safety_weight(v))).collect();
    fit_weighted_lasso(table, y, features, &weights, lambda)
}
