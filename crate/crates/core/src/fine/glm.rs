//! Logistic regression: design matrices, IRLS maximum likelihood and
//! AIC-based backward elimination.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::learner::ProbMatrix;
use crate::table::{ColumnData, Table};

/// Fitted probabilities closer than this to 0 or 1 indicate separation.
const SEPARATION_EPS: f64 = 1e-8;
const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;

/// One design-matrix column derived from a table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Numeric { feature: String },
    Indicator { feature: String, level: String },
}

impl Term {
    pub fn feature(&self) -> &str {
        match self {
            Term::Numeric { feature } | Term::Indicator { feature, .. } => feature,
        }
    }

    /// Coefficient name: the feature, or `feature=level` for indicators.
    pub fn name(&self) -> String {
        match self {
            Term::Numeric { feature } => feature.clone(),
            Term::Indicator { feature, level } => format!("{feature}={level}"),
        }
    }
}

/// Penalty weight that may be infinite; infinity is written as `"inf"` in
/// JSON.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeight(pub f64);

impl Serialize for PenaltyWeight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for PenaltyWeight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Number(f64),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Number(v) => Ok(PenaltyWeight(v)),
            Wire::Text(t) if t == "inf" => Ok(PenaltyWeight(f64::INFINITY)),
            Wire::Text(t) => Err(serde::de::Error::custom(format!("invalid penalty weight {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub link: String,
    /// `[negative, positive]` class labels.
    pub classes: Vec<String>,
    pub intercept: f64,
    pub coefficients: BTreeMap<String, f64>,
    pub lambda: f64,
    #[serde(default)]
    pub penalty_weights: BTreeMap<String, PenaltyWeight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<BTreeMap<String, f64>>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub terms: Vec<Term>,
    /// Features removed by backward selection, in removal order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

impl GlmModel {
    /// Feature names with at least one nonzero coefficient.
    pub fn active_features(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for term in &self.terms {
            if self.coefficients[&term.name()] != 0.0 && !out.contains(&term.feature()) {
                out.push(term.feature());
            }
        }
        out
    }
}

/// Dense design matrix (without the intercept column) and binary response.
pub(crate) struct Design {
    pub terms: Vec<Term>,
    /// Row-major `n x terms.len()`.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub classes: Vec<String>,
    pub n: usize,
}

impl Design {
    pub fn p(&self) -> usize {
        self.terms.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.terms.len() + j]
    }

    pub fn build<S: AsRef<str>>(table: &Table, y: &str, features: &[S]) -> Result<Design> {
        if features.iter().any(|f| f.as_ref() == y) {
            return Err(Error::RoleConflict(format!("target {y:?} listed as a feature")));
        }
        let labels = table.class_labels(y)?;
        if labels.n_classes() != 2 {
            return Err(Error::invalid_column(
                y,
                format!("logistic models need a binary target, found {} classes", labels.n_classes()),
            ));
        }
        let terms = terms_for(table, features)?;
        let x = encode_terms(table, &terms)?;
        let mut classes = labels.labels;
        let flip = label_order(&classes[0], &classes[1]).is_gt();
        if flip {
            classes.swap(0, 1);
        }
        Ok(Design {
            terms,
            x,
            y: labels.codes.iter().map(|&c| ((c == 1) != flip) as u8 as f64).collect(),
            classes,
            n: table.n_rows(),
        })
    }

    /// Design restricted to the terms of the listed features.
    pub fn subset(&self, features: &[&str]) -> Design {
        let keep: Vec<usize> = (0..self.p())
            .filter(|&j| features.contains(&self.terms[j].feature()))
            .collect();
        let mut x = Vec::with_capacity(self.n * keep.len());
        for i in 0..self.n {
            for &j in &keep {
                x.push(self.at(i, j));
            }
        }
        Design {
            terms: keep.iter().map(|&j| self.terms[j].clone()).collect(),
            x,
            y: self.y.clone(),
            classes: self.classes.clone(),
            n: self.n,
        }
    }
}

/// Numeric order when both labels parse as numbers, else lexicographic.
fn label_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

/// Terms for the given features; categorical features get one indicator
/// per level except the first observed one.
fn terms_for<S: AsRef<str>>(table: &Table, features: &[S]) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    for f in features {
        let name = f.as_ref();
        let col = table.column(name)?;
        if !col.missing_rows().is_empty() {
            return Err(Error::invalid_column(
                name,
                "logistic models do not accept missing values",
            ));
        }
        match col.data() {
            ColumnData::Numeric(_) => terms.push(Term::Numeric {
                feature: name.to_string(),
            }),
            ColumnData::Categorical { codes, categories } => {
                let mut used = vec![false; categories.len()];
                for c in codes.iter().flatten() {
                    used[*c as usize] = true;
                }
                let levels: Vec<&String> = categories
                    .iter()
                    .zip(&used)
                    .filter(|(_, u)| **u)
                    .map(|(c, _)| c)
                    .collect();
                for level in levels.iter().skip(1) {
                    terms.push(Term::Indicator {
                        feature: name.to_string(),
                        level: (*level).clone(),
                    });
                }
            }
        }
    }
    Ok(terms)
}

pub(crate) fn encode_terms(table: &Table, terms: &[Term]) -> Result<Vec<f64>> {
    let n = table.n_rows();
    let p = terms.len();
    let mut x = vec![0.0; n * p];
    for (j, term) in terms.iter().enumerate() {
        let col = table.column(term.feature())?;
        for i in 0..n {
            if col.is_missing(i) {
                return Err(Error::invalid_column(
                    term.feature(),
                    "logistic models do not accept missing values",
                ));
            }
        }
        match (term, col.data()) {
            (Term::Numeric { .. }, ColumnData::Numeric(values)) => {
                for i in 0..n {
                    x[i * p + j] = values[i].expect("checked above");
                }
            }
            (Term::Indicator { level, .. }, ColumnData::Categorical { codes, categories }) => {
                let code = categories.iter().position(|c| c == level);
                for i in 0..n {
                    x[i * p + j] = (Some(codes[i].expect("checked above") as usize) == code) as u8 as f64;
                }
            }
            _ => {
                return Err(Error::SchemaMismatch(format!(
                    "column {:?} changed kind since training",
                    term.feature()
                )))
            }
        }
    }
    Ok(x)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli log-likelihood of linear predictors `eta`.
pub(crate) fn log_likelihood(eta: &[f64], y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            // log(1 + exp(e)) computed stably
            let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            yi * e - softplus
        })
        .sum()
}

pub(crate) fn linear_predictor(d: &Design, intercept: f64, beta: &[f64]) -> Vec<f64> {
    (0..d.n)
        .map(|i| intercept + (0..d.p()).map(|j| d.at(i, j) * beta[j]).sum::<f64>())
        .collect()
}

fn separated(eta: &[f64]) -> bool {
    let limit = ((1.0 - SEPARATION_EPS) / SEPARATION_EPS).ln();
    eta.iter().any(|e| e.abs() > limit)
}

fn separation_error(d: &Design) -> Error {
    let mut names: Vec<String> = Vec::new();
    for t in &d.terms {
        if !names.iter().any(|n| n == t.feature()) {
            names.push(t.feature().to_string());
        }
    }
    Error::Separation(names)
}

struct IrlsFit {
    intercept: f64,
    beta: Vec<f64>,
    std_errors: Vec<f64>,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
}

fn irls(d: &Design) -> Result<IrlsFit> {
    let p = d.p() + 1;
    let mean = d.y.iter().sum::<f64>() / d.n as f64;
    let mut coef = DVector::<f64>::zeros(p);
    coef[0] = (mean / (1.0 - mean)).ln();
    let row = |i: usize, j: usize| if j == 0 { 1.0 } else { d.at(i, j - 1) };
    let eta_of = |coef: &DVector<f64>| -> Vec<f64> {
        (0..d.n).map(|i| (0..p).map(|j| row(i, j) * coef[j]).sum()).collect()
    };
    let mut eta = eta_of(&coef);
    let mut loglik = log_likelihood(&eta, &d.y);
    let mut converged = false;
    let mut iterations = 0;
    let mut information = DMatrix::<f64>::zeros(p, p);
    for it in 1..=IRLS_MAX_ITER {
        iterations = it;
        information.fill(0.0);
        let mut rhs = DVector::<f64>::zeros(p);
        for i in 0..d.n {
            let mu = sigmoid(eta[i]);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let z = eta[i] + (d.y[i] - mu) / w;
            for a in 0..p {
                let xa = row(i, a);
                if xa == 0.0 {
                    continue;
                }
                rhs[a] += w * xa * z;
                for b in a..p {
                    information[(a, b)] += w * xa * row(i, b);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                information[(a, b)] = information[(b, a)];
            }
        }
        let Some(factor) = information.clone().cholesky() else {
            if separated(&eta) {
                return Err(separation_error(d));
            }
            return Err(Error::param(
                "design matrix is singular; drop collinear or constant features",
            ));
        };
        let next = factor.solve(&rhs);
        let next_eta = eta_of(&next);
        let next_loglik = log_likelihood(&next_eta, &d.y);
        let change = (next_loglik - loglik).abs();
        coef = next;
        eta = next_eta;
        loglik = next_loglik;
        if change < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if separated(&eta) {
        return Err(separation_error(d));
    }
    // Information at the final coefficients for standard errors.
    information.fill(0.0);
    for i in 0..d.n {
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        for a in 0..p {
            for b in 0..p {
                information[(a, b)] += w * row(i, a) * row(i, b);
            }
        }
    }
    let covariance = information
        .try_inverse()
        .ok_or_else(|| Error::param("information matrix is singular"))?;
    Ok(IrlsFit {
        intercept: coef[0],
        beta: coef.iter().skip(1).copied().collect(),
        std_errors: (1..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect(),
        log_likelihood: loglik,
        iterations,
        converged,
    })
}

fn model_from_irls(d: &Design, fit: IrlsFit) -> GlmModel {
    let names: Vec<String> = d.terms.iter().map(Term::name).collect();
    let k = d.p() + 1;
    GlmModel {
        link: "logit".into(),
        classes: d.classes.clone(),
        intercept: fit.intercept,
        coefficients: names.iter().cloned().zip(fit.beta.iter().copied()).collect(),
        lambda: 0.0,
        penalty_weights: BTreeMap::new(),
        std_errors: Some(names.into_iter().zip(fit.std_errors).collect()),
        log_likelihood: fit.log_likelihood,
        aic: 2.0 * k as f64 - 2.0 * fit.log_likelihood,
        iterations: fit.iterations,
        converged: fit.converged,
        terms: d.terms.clone(),
        dropped: Vec::new(),
    }
}

pub(crate) fn fit_design(d: &Design) -> Result<GlmModel> {
    Ok(model_from_irls(d, irls(d)?))
}

/// Unpenalized logistic regression by iteratively reweighted least squares.
/// The larger of the two target labels (numerically if both are numbers) is
/// the modeled outcome.
pub fn fit_logistic<S: AsRef<str>>(table: &Table, y: &str, features: &[S]) -> Result<GlmModel> {
    fit_design(&Design::build(table, y, features)?)
}

/// Backward elimination: repeatedly drops the feature whose removal lowers
/// `AIC = 2k - 2 loglik` the most, until no removal lowers it.
pub fn aic_backward_select<S: AsRef<str>>(table: &Table, y: &str, features: &[S]) -> Result<GlmModel> {
    let full = Design::build(table, y, features)?;
    let mut current: Vec<&str> = features.iter().map(AsRef::as_ref).collect();
    let mut model = fit_design(&full)?;
    let mut dropped = Vec::new();
    while !current.is_empty() {
        let mut best: Option<(usize, GlmModel)> = None;
        for (idx, _) in current.iter().enumerate() {
            let remaining: Vec<&str> = current
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .map(|(_, f)| *f)
                .collect();
            let candidate = fit_design(&full.subset(&remaining))?;
            if best.as_ref().is_none_or(|(_, b)| candidate.aic < b.aic) {
                best = Some((idx, candidate));
            }
        }
        let (idx, candidate) = best.expect("at least one candidate");
        if candidate.aic >= model.aic {
            break;
        }
        dropped.push(current.remove(idx).to_string());
        model = candidate;
    }
    model.dropped = dropped;
    Ok(model)
}

/// Two-column class probabilities `[negative, positive]`.
pub fn predict_glm(model: &GlmModel, table: &Table) -> Result<ProbMatrix> {
    let x = encode_terms(table, &model.terms)?;
    let p = model.terms.len();
    let beta: Vec<f64> = model.terms.iter().map(|t| model.coefficients[&t.name()]).collect();
    let mut probs = Vec::with_capacity(2 * table.n_rows());
    for i in 0..table.n_rows() {
        let eta = model.intercept + (0..p).map(|j| x[i * p + j] * beta[j]).sum::<f64>();
        let mu = sigmoid(eta);
        probs.push(1.0 - mu);
        probs.push(mu);
    }
    Ok(ProbMatrix {
        classes: model.classes.clone(),
        n_rows: table.n_rows(),
        probs,
    })
}
