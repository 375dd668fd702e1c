//! Request bodies, validation and the computations run as jobs.

use admissible_core::fairness::{alfa_test, AlfaReport};
use admissible_core::fine::{
    aic_backward_select, fit_fine_lasso, fit_logistic, fit_tree, fit_weighted_lasso, predict_glm, predict_tree,
    TreeParams,
};
use admissible_core::infogram::{infogram, InfogramConfig};
use admissible_core::infotheory::{CmiConfig, MIN_REPLICATES};
use admissible_core::table::train_test_split;
use admissible_core::{Column, ColumnKind, Error, Table, TaskSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Seed used when a request does not carry one.
pub const DEFAULT_SEED: u64 = 1;
/// Fraction of rows held out to evaluate a trained model.
pub const TEST_FRACTION: f64 = 0.2;

fn default_alfa_replicates() -> usize {
    200
}

fn default_model_replicates() -> usize {
    99
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfogramRequest {
    pub dataset: String,
    pub target: String,
    #[serde(default)]
    pub protected: Vec<String>,
    /// Defaults to every column except the target and protected ones.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default)]
    pub config: InfogramConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlfaRequest {
    pub dataset: String,
    pub target: String,
    pub protected: Vec<String>,
    #[serde(default)]
    pub admissible: Vec<String>,
    #[serde(rename = "B", default = "default_alfa_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub config: CmiConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Glm,
    Lasso,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GlmParams {
    aic: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LassoParams {
    lambda: f64,
    #[serde(default)]
    config: CmiConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRequest {
    pub dataset: String,
    pub target: String,
    pub kind: ModelKind,
    pub features: Vec<String>,
    /// Protected attributes for the ALFA audit of the predictions and, for
    /// lasso, the safety-index penalty weights.
    #[serde(default)]
    pub protected: Vec<String>,
    /// Conditioning set of the ALFA audit. Empty gives the marginal
    /// dependence between predictions and the protected block.
    #[serde(default)]
    pub admissible: Vec<String>,
    /// Kind-specific: tree `{max_depth, min_leaf}`, glm `{aic}`, lasso
    /// `{lambda, config}`.
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(rename = "B", default = "default_model_replicates")]
    pub replicates: usize,
}

#[derive(Debug, Serialize)]
pub struct ModelResult {
    pub kind: ModelKind,
    pub seed: u64,
    pub features: Vec<String>,
    pub protected: Vec<String>,
    pub admissible: Vec<String>,
    pub model: Value,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub alfa: Option<AlfaReport>,
}

#[derive(Debug, Serialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    pub missing: usize,
}

#[derive(Debug, Serialize)]
pub struct DatasetSummary {
    pub id: String,
    pub name: String,
    pub n_rows: usize,
    pub columns: Vec<ColumnSchema>,
}

pub fn summarize(id: &str, table: &Table) -> DatasetSummary {
    DatasetSummary {
        id: id.to_string(),
        name: table.name().to_string(),
        n_rows: table.n_rows(),
        columns: table
            .columns()
            .iter()
            .map(|c| ColumnSchema {
                name: c.name().to_string(),
                kind: c.kind(),
                categories: c.categories().map(<[String]>::to_vec),
                missing: c.missing_rows().len(),
            })
            .collect(),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn check_replicates(replicates: usize) -> Result<(), Error> {
    if replicates < MIN_REPLICATES {
        return Err(invalid(format!(
            "B must be at least {MIN_REPLICATES}, got {replicates}"
        )));
    }
    Ok(())
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("results serialize to JSON")
}

/// A validated job, ready to run on the worker pool.
pub enum Task {
    Infogram { spec: TaskSpec, config: InfogramConfig },
    Alfa(AlfaRequest),
    Model(ModelTask),
}

pub struct ModelTask {
    request: ModelRequest,
    seed: u64,
    params: ModelParams,
}

enum ModelParams {
    Tree(TreeParams),
    Glm(GlmParams),
    Lasso(LassoParams),
}

fn params<T: for<'de> Deserialize<'de> + Default>(value: &Value) -> Result<T, Error> {
    if value.is_null() {
        return Ok(T::default());
    }
    Ok(serde_json::from_value(value.clone())?)
}

impl InfogramRequest {
    pub fn validate(self, table: &Table) -> Result<Task, Error> {
        let spec = match self.features {
            Some(features) => TaskSpec::new(self.target, features).with_protected(self.protected),
            None => TaskSpec::all_features(table, &self.target, &self.protected),
        };
        spec.validate(table)?;
        if spec.features.is_empty() {
            return Err(invalid("no candidate features"));
        }
        self.config.validate()?;
        Ok(Task::Infogram {
            spec,
            config: self.config,
        })
    }
}

impl AlfaRequest {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(self, table: &Table) -> Result<Task, Error> {
        if self.protected.is_empty() {
            return Err(invalid("the ALFA test needs at least one protected attribute"));
        }
        TaskSpec::new(self.target.clone(), self.admissible.clone())
            .with_protected(self.protected.clone())
            .validate(table)?;
        check_replicates(self.replicates)?;
        self.config.validate()?;
        Ok(Task::Alfa(self))
    }
}

impl ModelRequest {
    pub fn validate(self, table: &Table) -> Result<Task, Error> {
        if self.features.is_empty() {
            return Err(invalid("a model needs at least one feature"));
        }
        TaskSpec::new(self.target.clone(), self.features.clone())
            .with_protected(self.protected.clone())
            .validate(table)?;
        if !self.admissible.is_empty() {
            if self.protected.is_empty() {
                return Err(invalid("admissible features are only used by the ALFA audit, which needs protected attributes"));
            }
            TaskSpec::new(self.target.clone(), self.admissible.clone())
                .with_protected(self.protected.clone())
                .validate(table)?;
        }
        if !self.protected.is_empty() {
            check_replicates(self.replicates)?;
        }
        let params = match self.kind {
            ModelKind::Tree => {
                let p: TreeParams = params(&self.params)?;
                p.validate()?;
                ModelParams::Tree(p)
            }
            ModelKind::Glm => ModelParams::Glm(params(&self.params)?),
            ModelKind::Lasso => {
                if self.params.is_null() {
                    return Err(invalid("lasso models need params.lambda"));
                }
                let p: LassoParams = serde_json::from_value(self.params.clone())?;
                if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
                    return Err(invalid(format!("lambda must be finite and non-negative, got {}", p.lambda)));
                }
                p.config.validate()?;
                ModelParams::Lasso(p)
            }
        };
        Ok(Task::Model(ModelTask {
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            request: self,
            params,
        }))
    }
}

impl Task {
    pub fn seed(&self) -> u64 {
        match self {
            Task::Infogram { config, .. } => config.cmi_cfg.learner_params.seed,
            Task::Alfa(req) => req.seed(),
            Task::Model(task) => task.seed,
        }
    }

    pub fn run(self, table: &Table) -> Result<Value, Error> {
        match self {
            Task::Infogram { spec, config } => Ok(to_value(&infogram(table, &spec, &config)?)),
            Task::Alfa(req) => {
                let seed = req.seed();
                let report = alfa_test(
                    table,
                    &req.target,
                    &req.protected,
                    &req.admissible,
                    &req.config,
                    req.replicates,
                    seed,
                )?;
                Ok(to_value(&report))
            }
            Task::Model(task) => Ok(to_value(&task.run(table)?)),
        }
    }
}

fn unused_name(table: &Table, base: &str) -> String {
    let mut name = base.to_string();
    while table.has_column(&name) {
        name.push('_');
    }
    name
}

impl ModelTask {
    fn run(self, table: &Table) -> Result<ModelResult, Error> {
        let req = &self.request;
        let (train, test) = train_test_split(table, TEST_FRACTION, self.seed)?;
        let (model, probs) = match &self.params {
            ModelParams::Tree(p) => {
                let tree = fit_tree(&train, &req.target, &req.features, p)?;
                let probs = predict_tree(&tree, &test)?;
                (to_value(&tree), probs)
            }
            ModelParams::Glm(p) => {
                let glm = if p.aic {
                    aic_backward_select(&train, &req.target, &req.features)?
                } else {
                    fit_logistic(&train, &req.target, &req.features)?
                };
                let probs = predict_glm(&glm, &test)?;
                (to_value(&glm), probs)
            }
            ModelParams::Lasso(p) => {
                let glm = if req.protected.is_empty() {
                    let weights = req.features.iter().map(|f| (f.clone(), 1.0)).collect();
                    fit_weighted_lasso(&train, &req.target, &req.features, &weights, p.lambda)?
                } else {
                    fit_fine_lasso(&train, &req.target, &req.features, &req.protected, p.lambda, &p.config)?
                };
                let probs = predict_glm(&glm, &test)?;
                (to_value(&glm), probs)
            }
        };
        let predicted = probs.predicted_labels();
        let truth = test.column(&req.target)?;
        let (hits, total) = (0..test.n_rows())
            .filter_map(|i| truth.label(i).map(|label| label == predicted[i]))
            .fold((0usize, 0usize), |(h, t), hit| (h + hit as usize, t + 1));
        if total == 0 {
            return Err(invalid("the held-out split has no labelled rows"));
        }

        // ALFA on the predictions: does the protected block still inform the
        // model output once the admissible features are known?
        let alfa = if req.protected.is_empty() {
            None
        } else {
            let name = unused_name(&test, "prediction");
            let labels: Vec<Option<&str>> = predicted.iter().map(|l| Some(l.as_str())).collect();
            let audited = test.with_column(Column::from_labels(name.clone(), &labels))?;
            let cfg = match &self.params {
                ModelParams::Lasso(p) => p.config,
                _ => CmiConfig::default(),
            };
            let distinct = predicted.iter().any(|l| *l != predicted[0]);
            if distinct {
                Some(alfa_test(&audited, &name, &req.protected, &req.admissible, &cfg, req.replicates, self.seed)?)
            } else {
                // A constant prediction carries no information about anything.
                Some(AlfaReport {
                    alpha_bits: 0.0,
                    pvalue: 1.0,
                    replicates: req.replicates,
                    admissible_used: req.admissible.clone(),
                    protected_used: req.protected.clone(),
                    marginal: req.admissible.is_empty(),
                })
            }
        };
        Ok(ModelResult {
            kind: req.kind,
            seed: self.seed,
            features: req.features.clone(),
            protected: req.protected.clone(),
            admissible: req.admissible.clone(),
            model,
            accuracy: hits as f64 / total as f64,
            n_train: train.n_rows(),
            n_test: test.n_rows(),
            alfa,
        })
    }
}
