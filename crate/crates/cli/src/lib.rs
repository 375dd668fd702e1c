//! The `admissible` command line: infograms, CMI tests, ALFA audits, group
//! metrics and model training over CSV files. Every command prints JSON.

mod svg;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use admissible_core::fairness::{alfa_test, group_metrics};
use admissible_core::fine::{
    aic_backward_select, fit_fine_lasso, fit_logistic, fit_tree, fit_weighted_lasso, TreeParams,
};
use admissible_core::infogram::{infogram, InfogramConfig};
use admissible_core::infotheory::{cmi_pvalue, estimate_cmi, CmiConfig};
use admissible_core::learner::BoostParams;
use admissible_core::table::{load_csv, save_csv, train_test_split, Schema};
use admissible_core::{ColumnKind, Table, TaskSpec};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Seed used when `--seed` is not given, so unseeded runs are reproducible.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] admissible_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(admissible_core::Error::InvalidParameter(_)) => 1,
            CliError::Core(_) | CliError::Io { .. } => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "admissible", version, about = "Audit features and train admissible models from CSV data")]
pub struct Cli {
    /// Write JSON output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for model fitting (defaults to all cores).
    #[arg(long, global = true, env = "ADMISSIBLE_ML_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relevance and net information of each feature; fairness mode when
    /// protected attributes are given.
    Infogram(InfogramArgs),
    /// Conditional mutual information I(Y; X | S) with an optional bootstrap p-value.
    Cmi(CmiArgs),
    /// ALFA test of residual protected-attribute influence given admissible features.
    Alfa(AlfaArgs),
    /// Adverse impact ratios and, with --stratum, the conditional ratio.
    Metrics(MetricsArgs),
    /// Fit a CART classification tree.
    TrainTree(TreeArgs),
    /// Fit a logistic regression, optionally with AIC backward selection.
    TrainGlm(GlmArgs),
    /// Fit a lasso logistic regression; with --protected, penalties follow safety indices.
    TrainLasso(LassoArgs),
    /// Split a CSV into train and test files.
    Split(SplitArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Target column.
    #[arg(long)]
    target: String,
    /// Columns to read as categorical even if their values are numeric.
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
}

#[derive(Debug, Args)]
struct LearnerArgs {
    /// Boosting rounds of the plug-in learner.
    #[arg(long, default_value_t = BoostParams::default().n_rounds)]
    rounds: usize,
    /// Shrinkage applied to each boosting round.
    #[arg(long, default_value_t = BoostParams::default().learning_rate)]
    learning_rate: f64,
    /// Depth of each boosted tree.
    #[arg(long, default_value_t = BoostParams::default().max_depth)]
    max_depth: usize,
    /// Minimum rows per leaf of each boosted tree.
    #[arg(long, default_value_t = BoostParams::default().min_leaf)]
    min_leaf: usize,
    /// Row subsampling fraction per boosting round.
    #[arg(long, default_value_t = BoostParams::default().subsample)]
    subsample: f64,
    /// Cross-fitting folds for the estimator (0 evaluates in-sample).
    #[arg(long, default_value_t = 0)]
    folds: usize,
    /// Random seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl LearnerArgs {
    fn cmi_config(&self) -> CmiConfig {
        CmiConfig {
            learner_params: BoostParams {
                n_rounds: self.rounds,
                learning_rate: self.learning_rate,
                max_depth: self.max_depth,
                min_leaf: self.min_leaf,
                subsample: self.subsample,
                seed: self.seed,
            },
            cross_fit_folds: self.folds,
            ..CmiConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct InfogramArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Protected attributes; switches to fairness mode.
    #[arg(long, value_delimiter = ',')]
    protected: Vec<String>,
    /// Candidate features (default: every other column).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    /// Relevance threshold of the L-zone.
    #[arg(long, default_value_t = 0.1)]
    threshold_x: f64,
    /// Net-information threshold of the L-zone.
    #[arg(long, default_value_t = 0.1)]
    threshold_y: f64,
    /// Features kept by the relevance prescreen.
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    /// Also write an SVG scatter of the infogram.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct CmiArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Tested variables X.
    #[arg(long, value_delimiter = ',', required = true)]
    x: Vec<String>,
    /// Conditioning variables S (empty gives mutual information).
    #[arg(long, value_delimiter = ',')]
    given: Vec<String>,
    /// Bootstrap replicates for a p-value (0 skips the test).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct AlfaArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Protected attributes to test.
    #[arg(long, value_delimiter = ',', required = true)]
    protected: Vec<String>,
    /// Admissible features to condition on.
    #[arg(long, value_delimiter = ',')]
    admissible: Vec<String>,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 200)]
    bootstrap: usize,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Favorable outcome label.
    #[arg(long)]
    favorable: String,
    /// Group column.
    #[arg(long)]
    group: String,
    /// Reference group (default: the group with the highest rate).
    #[arg(long)]
    reference: Option<String>,
    /// Stratum column for the conditional ratio.
    #[arg(long)]
    stratum: Option<String>,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model features (default: every column except the target and protected ones).
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
}

#[derive(Debug, Args)]
struct TreeArgs {
    #[command(flatten)]
    features: FeatureArgs,
    /// Maximum tree depth.
    #[arg(long, default_value_t = TreeParams::default().max_depth)]
    max_depth: usize,
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = TreeParams::default().min_leaf)]
    min_leaf: usize,
}

#[derive(Debug, Args)]
struct GlmArgs {
    #[command(flatten)]
    features: FeatureArgs,
    /// Drop features by backward elimination on AIC.
    #[arg(long)]
    aic: bool,
}

#[derive(Debug, Args)]
struct LassoArgs {
    #[command(flatten)]
    features: FeatureArgs,
    /// Penalty strength.
    #[arg(long)]
    lambda: f64,
    /// Protected attributes; penalty weights become inverse safety indices.
    #[arg(long, value_delimiter = ',')]
    protected: Vec<String>,
    #[command(flatten)]
    learner: LearnerArgs,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Fraction of rows in the test file.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    /// Random seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output CSV for the training rows.
    #[arg(long)]
    train_out: PathBuf,
    /// Output CSV for the test rows.
    #[arg(long)]
    test_out: PathBuf,
}

fn load(args: &DataArgs) -> Result<Table, CliError> {
    let schema: Schema = args
        .categorical
        .iter()
        .map(|c| (c.clone(), ColumnKind::Categorical))
        .collect();
    Ok(load_csv(&args.data, &schema)?)
}

fn default_features(table: &Table, target: &str, exclude: &[String], given: &[String]) -> Vec<String> {
    if !given.is_empty() {
        return given.to_vec();
    }
    TaskSpec::all_features(table, target, exclude).features
}

#[derive(Serialize)]
struct SplitSummary<'a> {
    train: &'a Path,
    test: &'a Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("results serialize to JSON")
}

fn execute(command: Command) -> Result<serde_json::Value, CliError> {
    Ok(match command {
        Command::Infogram(args) => {
            let table = load(&args.data)?;
            let features = default_features(&table, &args.data.target, &args.protected, &args.features);
            let spec = TaskSpec::new(args.data.target.clone(), features).with_protected(args.protected.clone());
            let cfg = InfogramConfig {
                threshold_x: args.threshold_x,
                threshold_y: args.threshold_y,
                top_k_prescreen: args.top_k,
                cmi_cfg: args.learner.cmi_config(),
            };
            let ig = infogram(&table, &spec, &cfg)?;
            if let Some(path) = &args.svg {
                std::fs::write(path, svg::render(&ig)).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
            }
            json(&ig)
        }
        Command::Cmi(args) => {
            let table = load(&args.data)?;
            let cfg = args.learner.cmi_config();
            let target = &args.data.target;
            if args.bootstrap == 0 {
                json(&estimate_cmi(&table, target, &args.x, &args.given, &cfg)?)
            } else {
                json(&cmi_pvalue(&table, target, &args.x, &args.given, &cfg, args.bootstrap, args.learner.seed)?)
            }
        }
        Command::Alfa(args) => {
            let table = load(&args.data)?;
            json(&alfa_test(
                &table,
                &args.data.target,
                &args.protected,
                &args.admissible,
                &args.learner.cmi_config(),
                args.bootstrap,
                args.learner.seed,
            )?)
        }
        Command::Metrics(args) => {
            let table = load(&args.data)?;
            json(&group_metrics(
                &table,
                &args.data.target,
                &args.favorable,
                &args.group,
                args.reference.as_deref(),
                args.stratum.as_deref(),
            )?)
        }
        Command::TrainTree(args) => {
            let table = load(&args.features.data)?;
            let target = &args.features.data.target;
            let features = default_features(&table, target, &[], &args.features.features);
            let params = TreeParams {
                max_depth: args.max_depth,
                min_leaf: args.min_leaf,
            };
            json(&fit_tree(&table, target, &features, &params)?)
        }
        Command::TrainGlm(args) => {
            let table = load(&args.features.data)?;
            let target = &args.features.data.target;
            let features = default_features(&table, target, &[], &args.features.features);
            if args.aic {
                json(&aic_backward_select(&table, target, &features)?)
            } else {
                json(&fit_logistic(&table, target, &features)?)
            }
        }
        Command::TrainLasso(args) => {
            let table = load(&args.features.data)?;
            let target = &args.features.data.target;
            let features = default_features(&table, target, &args.protected, &args.features.features);
            if args.protected.is_empty() {
                let weights = features.iter().map(|f| (f.clone(), 1.0)).collect();
                json(&fit_weighted_lasso(&table, target, &features, &weights, args.lambda)?)
            } else {
                let cfg = args.learner.cmi_config();
                json(&fit_fine_lasso(&table, target, &features, &args.protected, args.lambda, &cfg)?)
            }
        }
        Command::Split(args) => {
            let table = load_csv(&args.data, &Schema::new())?;
            let (train, test) = train_test_split(&table, args.test_fraction, args.seed)?;
            save_csv(&train, &args.train_out)?;
            save_csv(&test, &args.test_out)?;
            json(&SplitSummary {
                train: &args.train_out,
                test: &args.test_out,
                n_train: train.n_rows(),
                n_test: test.n_rows(),
                seed: args.seed,
            })
        }
    })
}

fn emit(value: &serde_json::Value, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    match out {
        Some(path) => {
            let io_err = |source| CliError::Io {
                path: path.to_path_buf(),
                source,
            };
            let mut file = BufWriter::new(File::create(path).map_err(io_err)?);
            file.write_all(text.as_bytes()).map_err(io_err)?;
            file.flush().map_err(io_err)
        }
        None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 1 on usage errors, 2 on data errors.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = (|| {
        if let Some(threads) = cli.threads {
            if threads == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            // Fails only if the pool already exists, as in repeated in-process runs.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        let value = execute(cli.command)?;
        emit(&value, cli.out.as_deref(), stdout)
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
