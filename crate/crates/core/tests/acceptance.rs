//! Acceptance run: one PASS/FAIL/SKIP line per criterion, nonzero exit if a
//! gating criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use admissible_core::fairness::{air, alfa_test, cair, rank_models_alfa};
use admissible_core::fine::{
    fit_tree, fit_weighted_lasso, fit_fine_lasso, fit_logistic, predict_tree, safety_indices, GlmModel,
    TreeParams,
};
use admissible_core::infogram::{core_infogram, select_admissible, InfogramConfig};
use admissible_core::infotheory::{
    cmi_pvalue, entropy_difference_cmi, estimate_cmi, exact_cmi, CmiConfig, DiscreteJoint,
};
use admissible_core::learner::{fit_boosted, predict_proba, BoostParams};
use admissible_core::synth::{
    berkeley_admissions, gen_correlated, gen_xor, gen_xor_null, read_monk, PlantedBias,
};
use admissible_core::table::{load_csv, train_test_split, Column, Schema, Table, TaskSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

struct Criterion {
    name: &'static str,
    gating: bool,
    budget: Option<Duration>,
    run: Check,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn labels_of(table: &Table, col: &str) -> Vec<String> {
    let c = table.column(col).expect("column exists");
    (0..table.n_rows()).map(|i| c.label(i).expect("no missing labels")).collect()
}

fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

fn random_joint(dims: (usize, usize, usize), rng: &mut ChaCha8Rng) -> DiscreteJoint {
    let cells = dims.0 * dims.1 * dims.2;
    let weights = (0..cells)
        .map(|c| {
            if c > 0 && rng.random::<f64>() < 0.1 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    DiscreteJoint::from_weights(dims, weights).expect("positive total weight")
}

fn oracle_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dims = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3));
        let j = random_joint(dims, &mut rng);
        worst = worst.max((exact_cmi(&j) - entropy_difference_cmi(&j)).abs());
    }
    verdict(worst <= 1e-12, format!("max |diff| = {worst:.2e} over 100 joints"))
}

fn xor_experiment() -> Outcome {
    let cfg = CmiConfig::default();
    let run = |t: &Table| {
        let est = estimate_cmi(t, "Y", &["X"], &["S"], &cfg).expect("estimate");
        let test = cmi_pvalue(t, "Y", &["X"], &["S"], &cfg, 200, 7).expect("bootstrap");
        (est.value_bits, test.pvalue.expect("p-value"))
    };
    let (signal, p_signal) = run(&gen_xor(500, 1).expect("xor"));
    let (null, p_null) = run(&gen_xor_null(500, 1).expect("xor null"));
    let ok = (0.90..=1.05).contains(&signal) && p_signal < 0.01 && null.abs() <= 0.05 && p_null > 0.1;
    verdict(
        ok,
        format!("xor {signal:.4} bits (p={p_signal:.4}); independent {null:.4} bits (p={p_null:.3})"),
    )
}

fn estimator_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = CmiConfig::default();
    let mut total = 0.0;
    for draw in 0..20 {
        let dims = (rng.random_range(2..=3), rng.random_range(2..=3), rng.random_range(1..=3));
        let j = random_joint(dims, &mut rng);
        let t = j.sample(5000, draw).expect("sample");
        let est = estimate_cmi(&t, "Y", &["X"], &["S"], &cfg).expect("estimate");
        total += (est.value_bits - exact_cmi(&j)).abs();
    }
    let mean = total / 20.0;
    verdict(mean <= 0.05, format!("mean |error| = {mean:.4} bits over 20 draws"))
}

fn correlated_infogram() -> Outcome {
    let t = gen_correlated(500, 50, 2023).expect("design");
    let features: Vec<String> = (1..=50).map(|j| format!("X{j}")).collect();
    let ig = core_infogram(&t, &TaskSpec::new("Y", features), &InfogramConfig::default()).expect("infogram");
    let mut ranked: Vec<_> = ig.points.iter().collect();
    ranked.sort_by(|a, b| b.relevance.total_cmp(&a.relevance));
    let mut top: Vec<&str> = ranked[..3].iter().map(|p| p.feature.as_str()).collect();
    top.sort_unstable();
    let point = |f: &str| ig.point(f).expect("feature present");
    let proxy = point("X50");
    let ok = top == ["X1", "X2", "X50"] && point("X1").admissible && point("X2").admissible && !proxy.admissible
        && proxy.net_info < 0.1;
    verdict(
        ok,
        format!(
            "top-3 {top:?}; X50 net {:.3}; admissible {:?}",
            proxy.net_info,
            select_admissible(&ig)
        ),
    )
}

fn berkeley() -> Outcome {
    let t = berkeley_admissions();
    let marginal = air(&t, "admitted", "1", "gender", None).expect("air");
    let female = marginal.get("female").expect("group").air;
    let conditional = cair(&t, "admitted", "1", "gender", "dept").expect("cair");
    let stratum = |d: &str| conditional.strata.iter().find(|s| s.stratum == d).expect("stratum").air;
    let report = alfa_test(&t, "admitted", &["gender"], &["dept"], &CmiConfig::default(), 200, 1).expect("alfa");
    let within = |v: f64, target: f64| (v - target).abs() <= 0.01;
    let ok = within(female, 0.74)
        && within(stratum("I"), 0.92)
        && within(stratum("II"), 0.94)
        && within(conditional.cair, 0.93)
        && report.alpha_bits <= 0.01
        && report.pvalue > 0.5;
    verdict(
        ok,
        format!(
            "AIR {female:.4}; strata {:.4}/{:.4}; CAIR {:.4}; alpha {:.2e} bits (p={:.3})",
            stratum("I"),
            stratum("II"),
            conditional.cair,
            report.alpha_bits,
            report.pvalue
        ),
    )
}

fn alfa_ranking() -> Outcome {
    let t = PlantedBias::default().sample(4000, 7).expect("sample");
    let (train, test) = train_test_split(&t, 0.5, 7).expect("split");
    let truth = labels_of(&test, "Y");
    let mut predictions = Vec::new();
    let mut accuracies = Vec::new();
    for (name, features) in [("admissible", vec!["A1", "A2"]), ("with_proxy", vec!["A1", "A2", "R"])] {
        let model = fit_boosted(&train, "Y", &features, &BoostParams::default()).expect("fit");
        let predicted = predict_proba(&model, &test).expect("predict").predicted_labels();
        accuracies.push(accuracy(&predicted, &truth));
        predictions.push((name.to_string(), predicted));
    }
    let cfg = CmiConfig::default();
    let ranked = rank_models_alfa(&predictions, &test, &["S"], &["A1", "A2"], &cfg, 19, 1).expect("rank");
    let alpha = |name: &str| ranked.iter().find(|r| r.name == name).expect("ranked").alpha_bits;

    let shield_table = PlantedBias::default().sample(5000, 5).expect("sample");
    let plain = estimate_cmi(&shield_table, "Y", &["S"], &["A1", "A2"], &cfg).expect("cmi").value_bits;
    let shielded = estimate_cmi(&shield_table, "Y", &["S"], &["A1", "A2", "R"], &cfg).expect("cmi").value_bits;
    let drop = 1.0 - shielded / plain;

    let ok = alpha("admissible") < alpha("with_proxy") && (accuracies[0] - accuracies[1]).abs() <= 0.03 && drop >= 0.2;
    verdict(
        ok,
        format!(
            "alpha {:.4} vs {:.4} bits; accuracy {:.3} vs {:.3}; shielding drop {:.0}%",
            alpha("admissible"),
            alpha("with_proxy"),
            accuracies[0],
            accuracies[1],
            100.0 * drop
        ),
    )
}

fn nll_gradient(t: &Table, y: &str, m: &GlmModel, features: &[&str]) -> Vec<f64> {
    let truth = labels_of(t, y);
    let positive = &m.classes[1];
    let cols: Vec<&[Option<f64>]> = features
        .iter()
        .map(|f| t.column(f).expect("column").as_numeric().expect("numeric"))
        .collect();
    let mut grad = vec![0.0; features.len()];
    for i in 0..t.n_rows() {
        let eta = m.intercept
            + features
                .iter()
                .zip(&cols)
                .map(|(f, c)| m.coefficients[*f] * c[i].expect("dense"))
                .sum::<f64>();
        let resid = 1.0 / (1.0 + (-eta).exp()) - if &truth[i] == positive { 1.0 } else { 0.0 };
        for (g, c) in grad.iter_mut().zip(&cols) {
            *g += resid * c[i].expect("dense");
        }
    }
    grad
}

fn lasso_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 600;
    let xs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let y: Vec<Option<&str>> = (0..n)
        .map(|i| {
            let eta = -0.2 + 0.9 * xs[0][i] - 0.7 * xs[1][i] + 0.2 * xs[2][i];
            Some(if rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()) { "1" } else { "0" })
        })
        .collect();
    let mut columns: Vec<Column> = xs
        .iter()
        .enumerate()
        .map(|(j, v)| Column::dense(format!("x{}", j + 1), v.clone()))
        .collect();
    columns.push(Column::from_labels("y", &y));
    let t = Table::new("lasso", columns).expect("table");
    let features = ["x1", "x2", "x3", "x4"];

    let mle = fit_logistic(&t, "y", &features).expect("mle");
    let ones: BTreeMap<String, f64> = features.iter().map(|f| (f.to_string(), 1.0)).collect();
    let zero = fit_weighted_lasso(&t, "y", &features, &ones, 0.0).expect("lasso");
    let mle_gap = features
        .iter()
        .map(|f| (zero.coefficients[*f] - mle.coefficients[*f]).abs())
        .fold((zero.intercept - mle.intercept).abs(), f64::max);

    let weights: BTreeMap<String, f64> = features.iter().zip([1.0, 0.5, 2.0, 1.5]).map(|(f, w)| (f.to_string(), w)).collect();
    let mut kkt = 0.0f64;
    for lambda in [0.5, 5.0, 20.0] {
        let m = fit_weighted_lasso(&t, "y", &features, &weights, lambda).expect("lasso");
        for (f, g) in features.iter().zip(nll_gradient(&t, "y", &m, &features)) {
            let bound = lambda * weights[*f];
            let b = m.coefficients[*f];
            let violation = if b == 0.0 { (g.abs() - bound).max(0.0) } else { (g + bound * b.signum()).abs() };
            kkt = kkt.max(violation);
        }
    }

    // Copy of the protected attribute: zero safety index, infinite weight.
    let pb = PlantedBias::default().sample(1000, 8).expect("sample");
    let s = pb.column("S").expect("S");
    let copy: Vec<f64> = (0..pb.n_rows()).map(|i| s.label(i).expect("label").parse().expect("0/1")).collect();
    let pb = pb.with_column(Column::dense("S_copy", copy)).expect("column");
    let cfg = CmiConfig::default();
    let safety = safety_indices(&pb, "Y", &["A1", "A2", "S_copy"], &["S"], &cfg).expect("safety");
    let mut proxy_zero = true;
    for lambda in [1e-3, 0.1, 1.0, 10.0] {
        let m = fit_fine_lasso(&pb, "Y", &["A1", "A2", "S_copy"], &["S"], lambda, &cfg).expect("fine lasso");
        proxy_zero &= m.coefficients["S_copy"] == 0.0;
    }

    let ok = mle_gap <= 1e-4 && kkt <= 1e-6 && proxy_zero;
    verdict(
        ok,
        format!(
            "lambda=0 gap {mle_gap:.1e}; max KKT violation {kkt:.1e}; F(copy)={:.1e}, coefficient zero at all lambda: {proxy_zero}",
            safety["S_copy"]
        ),
    )
}

/// `Y` and `X` both depend on `S` but `Y` is independent of `X` given `S`.
fn conditional_null_joint() -> DiscreteJoint {
    let p_s = [0.3, 0.45, 0.25];
    let p_y_given_s = [[0.8, 0.2], [0.4, 0.6], [0.15, 0.85]];
    let p_x_given_s = [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.2, 0.7]];
    let mut pmf = vec![0.0; 2 * 3 * 3];
    for y in 0..2 {
        for x in 0..3 {
            for s in 0..3 {
                pmf[(y * 3 + x) * 3 + s] = p_s[s] * p_y_given_s[s][y] * p_x_given_s[s][x];
            }
        }
    }
    DiscreteJoint::new((2, 3, 3), pmf).expect("normalized")
}

fn bootstrap_calibration() -> Outcome {
    let joint = conditional_null_joint();
    let cfg = CmiConfig::default();
    let mut rejections = 0;
    for sim in 0..100u64 {
        let t = joint.sample(500, 1000 + sim).expect("sample");
        let est = cmi_pvalue(&t, "Y", &["X"], &["S"], &cfg, 99, sim).expect("bootstrap");
        rejections += (est.pvalue.expect("p-value") < 0.05) as usize;
    }
    let rate = rejections as f64 / 100.0;
    verdict(rate <= 0.12, format!("{rejections}/100 null simulations with p < 0.05"))
}

fn monk_dir() -> Option<PathBuf> {
    std::env::var_os("MONK_DATA_DIR")
        .map(PathBuf::from)
        .or_else(|| Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/monk")))
        .filter(|p| p.join("monks-1.train").is_file())
}

fn monk() -> Outcome {
    let Some(dir) = monk_dir() else {
        return Outcome::Skip("MONK files not found (set MONK_DATA_DIR to a directory with monks-N.train)".into());
    };
    let features: Vec<String> = (1..=6).map(|j| format!("X{j}")).collect();
    let mut details = Vec::new();
    let mut ok = true;
    for problem in 1..=3 {
        let path = dir.join(format!("monks-{problem}.train"));
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) => return Outcome::Fail(format!("{}: {e}", path.display())),
        };
        let t = match read_monk(&text) {
            Ok(t) => t,
            Err(e) => return Outcome::Fail(format!("{}: {e}", path.display())),
        };
        let ig = core_infogram(&t, &TaskSpec::new("y", features.clone()), &InfogramConfig::default())
            .expect("infogram");
        let selected = select_admissible(&ig);
        ok &= match problem {
            1 => selected == ["X1", "X2", "X5"],
            2 => selected.len() >= 5,
            _ => selected == ["X2", "X5"],
        };
        details.push(format!("MONK-{problem} {selected:?}"));
    }
    verdict(ok, details.join("; "))
}

/// Optional demos on user-supplied CSVs (`<name>.csv` with target column
/// `y`): a tree on the selected core set must beat the majority class.
fn real_data_demos() -> Outcome {
    let Some(dir) = std::env::var_os("ADMISSIBLE_DEMO_DIR").map(PathBuf::from) else {
        return Outcome::Skip("set ADMISSIBLE_DEMO_DIR to run real-data demos".into());
    };
    let Ok(entries) = std::fs::read_dir(&dir) else {
        return Outcome::Fail(format!("cannot read {}", dir.display()));
    };
    let mut paths: Vec<PathBuf> = entries
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut details = Vec::new();
    let mut ok = true;
    for path in paths {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let result = (|| -> admissible_core::Result<(f64, f64)> {
            let t = load_csv(&path, &Schema::new())?;
            let features: Vec<String> = t.column_names().into_iter().filter(|c| *c != "y").map(String::from).collect();
            let (train, test) = train_test_split(&t, 0.2, 1)?;
            let ig = core_infogram(&train, &TaskSpec::new("y", features), &InfogramConfig::default())?;
            let selected = select_admissible(&ig);
            let truth = labels_of(&test, "y");
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for l in labels_of(&train, "y") {
                *counts.entry(l).or_default() += 1;
            }
            let majority = counts.into_iter().max_by_key(|(_, c)| *c).map(|(l, _)| l).unwrap_or_default();
            let baseline = truth.iter().filter(|l| **l == majority).count() as f64 / truth.len() as f64;
            if selected.is_empty() {
                return Ok((baseline, baseline));
            }
            let tree = fit_tree(&train, "y", &selected, &TreeParams::default())?;
            let predicted = predict_tree(&tree, &test)?.predicted_labels();
            Ok((accuracy(&predicted, &truth), baseline))
        })();
        match result {
            Ok((acc, baseline)) => {
                ok &= acc >= baseline;
                details.push(format!("{name} {acc:.3} vs baseline {baseline:.3}"));
            }
            Err(e) => {
                ok = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    if details.is_empty() {
        return Outcome::Skip(format!("no CSV files in {}", dir.display()));
    }
    verdict(ok, details.join("; "))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "oracle identity", gating: true, budget: Some(Duration::from_secs(5)), run: oracle_identity },
        Criterion { name: "xor experiment", gating: true, budget: Some(Duration::from_secs(60)), run: xor_experiment },
        Criterion { name: "estimator consistency", gating: true, budget: None, run: estimator_consistency },
        Criterion { name: "correlated-proxy infogram", gating: true, budget: Some(Duration::from_secs(300)), run: correlated_infogram },
        Criterion { name: "berkeley admissions", gating: true, budget: None, run: berkeley },
        Criterion { name: "alfa ranking and shielding", gating: true, budget: None, run: alfa_ranking },
        Criterion { name: "fine lasso properties", gating: true, budget: None, run: lasso_properties },
        Criterion { name: "bootstrap calibration", gating: true, budget: None, run: bootstrap_calibration },
        Criterion { name: "monk reproduction", gating: true, budget: None, run: monk },
        Criterion { name: "real-data demos (non-gating)", gating: false, budget: None, run: real_data_demos },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Outcome::Pass(detail), Some(budget)) = (&outcome, c.budget) {
            if elapsed > budget {
                outcome = Outcome::Fail(format!("{detail}; over the {}s budget", budget.as_secs()));
            }
        }
        let (tag, detail) = match &outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if matches!(outcome, Outcome::Fail(_)) && c.gating {
            failed += 1;
        }
        println!("{tag} {:<30} {detail} [{:.1}s]", c.name, elapsed.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all gating criteria passed");
        ExitCode::SUCCESS
    }
}
