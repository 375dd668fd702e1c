//! Synthetic datasets with known information structure.
//!
//! All generators are deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::infotheory::DiscreteJoint;
use crate::table::{Column, Table};

fn binary_labels() -> Vec<String> {
    vec!["0".to_string(), "1".to_string()]
}

fn binary_column(name: &str, bits: &[bool]) -> Column {
    Column::categorical(
        name,
        bits.iter().map(|&b| Some(b as u32)).collect(),
        binary_labels(),
    )
}

fn check_n(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::param("sample size must be at least 1"));
    }
    Ok(())
}

/// `X, S ~ Bernoulli(0.5)` and `Y = X xor S`, so `I(Y; X | S) = 1` bit.
pub fn gen_xor(n: usize, seed: u64) -> Result<Table> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: bool = rng.random();
        let si: bool = rng.random();
        x.push(xi);
        s.push(si);
        y.push(xi ^ si);
    }
    Table::new(
        "xor",
        vec![
            binary_column("X", &x),
            binary_column("S", &s),
            binary_column("Y", &y),
        ],
    )
}

/// Same marginals as [`gen_xor`] but `Y ~ Bernoulli(0.5)` independent of
/// both inputs, so `I(Y; X | S) = 0`.
pub fn gen_xor_null(n: usize, seed: u64) -> Result<Table> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for _ in 0..n {
        for c in cols.iter_mut() {
            c.push(rng.random::<bool>());
        }
    }
    let [x, s, y] = cols;
    Table::new(
        "xor-null",
        vec![
            binary_column("X", &x),
            binary_column("S", &s),
            binary_column("Y", &y),
        ],
    )
}

/// Logit of the correlated-features model, `3 sin(x1) - 2 x2`.
pub fn correlated_logit(x1: f64, x2: f64) -> f64 {
    3.0 * x1.sin() - 2.0 * x2
}

/// Standard deviation of the noise added to the imitator feature.
pub const IMITATOR_NOISE_SD: f64 = 2.0;

/// Correlated-features design: `X1..X{p-1}` i.i.d. standard normal, the
/// imitator `Xp = 2 X1 - X2 + eps` and binary `Y` with success probability
/// `1 / (1 + exp(-(3 sin X1 - 2 X2)))`. `Xp` is redundant given `{X1, X2}`.
pub fn gen_correlated(n: usize, p: usize, seed: u64) -> Result<Table> {
    check_n(n)?;
    if p < 3 {
        return Err(Error::param("the correlated design needs at least 3 features"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = vec![Vec::with_capacity(n); p];
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        for f in features.iter_mut().take(p - 1) {
            f.push(StandardNormal.sample(&mut rng));
        }
        let x1 = features[0].last().copied().unwrap();
        let x2 = features[1].last().copied().unwrap();
        let eps: f64 = StandardNormal.sample(&mut rng);
        features[p - 1].push(2.0 * x1 - x2 + IMITATOR_NOISE_SD * eps);
        let prob = 1.0 / (1.0 + (-correlated_logit(x1, x2)).exp());
        y.push(rng.random::<f64>() < prob);
    }
    let mut columns: Vec<Column> = features
        .into_iter()
        .enumerate()
        .map(|(j, v)| Column::dense(format!("X{}", j + 1), v))
        .collect();
    columns.push(binary_column("Y", &y));
    Table::new("correlated", columns)
}

/// Admissions for two departments, cross-classified by gender: `(dept,
/// gender, admitted, rejected)`.
pub const BERKELEY_COUNTS: [(&str, &str, usize, usize); 4] = [
    ("I", "male", 353, 207),
    ("I", "female", 17, 8),
    ("II", "male", 138, 279),
    ("II", "female", 131, 244),
];

/// One row per applicant with columns `dept`, `gender` and `admitted`
/// (numeric 0/1).
pub fn berkeley_admissions() -> Table {
    let mut dept = Vec::new();
    let mut gender = Vec::new();
    let mut admitted = Vec::new();
    for (d, g, yes, no) in BERKELEY_COUNTS {
        for (count, y) in [(yes, 1.0), (no, 0.0)] {
            for _ in 0..count {
                dept.push(Some(d));
                gender.push(Some(g));
                admitted.push(y);
            }
        }
    }
    Table::new(
        "berkeley",
        vec![
            Column::from_labels("dept", &dept),
            Column::from_labels("gender", &gender),
            Column::dense("admitted", admitted),
        ],
    )
    .expect("static table is well formed")
}

/// Discrete credit-style population with a planted direct effect of the
/// protected attribute on the outcome.
///
/// `S` is protected, `A1`, `A2` (levels 0..=2) are admissible and
/// independent of `S`, and `R` is a proxy equal to `S` except for a
/// `proxy_flip` fraction of rows. The outcome follows
/// `logit P(Y=1) = b0 + b1 A1 + b2 A2 + gamma S`. `Y` is conditionally
/// independent of `R` given `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedBias {
    pub intercept: f64,
    pub coef_a1: f64,
    pub coef_a2: f64,
    pub gamma: f64,
    pub proxy_flip: f64,
}

impl Default for PlantedBias {
    fn default() -> Self {
        PlantedBias {
            intercept: -2.2,
            coef_a1: 1.2,
            coef_a2: 0.9,
            gamma: 1.2,
            proxy_flip: 0.1,
        }
    }
}

impl PlantedBias {
    fn prob_y(&self, a1: usize, a2: usize, s: usize) -> f64 {
        let z = self.intercept + self.coef_a1 * a1 as f64 + self.coef_a2 * a2 as f64 + self.gamma * s as f64;
        1.0 / (1.0 + (-z).exp())
    }

    /// Rows with numeric `A1`, `A2`, `R` and categorical `S`, `Y`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a1, mut a2, mut s, mut r, mut y) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let ai = rng.random_range(0..3usize);
            let aj = rng.random_range(0..3usize);
            let si: bool = rng.random();
            let ri = if rng.random::<f64>() < self.proxy_flip { !si } else { si };
            let yi = rng.random::<f64>() < self.prob_y(ai, aj, si as usize);
            a1.push(ai as f64);
            a2.push(aj as f64);
            s.push(si);
            r.push(if ri { 1.0 } else { 0.0 });
            y.push(yi);
        }
        Table::new(
            "planted-bias",
            vec![
                Column::dense("A1", a1),
                Column::dense("A2", a2),
                Column::dense("R", r),
                binary_column("S", &s),
                binary_column("Y", &y),
            ],
        )
    }

    /// Population joint of `(Y, S, A)` where `A = 3 A1 + A2` indexes the
    /// admissible cell, arranged so that `I(Y; S | A)` is the exact ALFA
    /// statistic.
    pub fn alfa_joint(&self) -> DiscreteJoint {
        let mut pmf = vec![0.0; 2 * 2 * 9];
        for a1 in 0..3 {
            for a2 in 0..3 {
                for s in 0..2 {
                    let base = 0.5 / 9.0;
                    let py = self.prob_y(a1, a2, s);
                    for y in 0..2 {
                        let p = if y == 1 { py } else { 1.0 - py };
                        pmf[(y * 2 + s) * 9 + a1 * 3 + a2] += base * p;
                    }
                }
            }
        }
        DiscreteJoint::new((2, 2, 9), pmf).expect("population joint is normalized")
    }
}

/// Reads a UCI MONK file (`class a1 .. a6 id` per line) into a table with
/// categorical columns `X1..X6` and `y`.
pub fn read_monk(text: &str) -> Result<Table> {
    let mut cols: Vec<Vec<Option<String>>> = vec![Vec::new(); 7];
    for (lineno, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 7 {
            return Err(Error::Csv(format!(
                "MONK line {}: expected at least 7 fields",
                lineno + 1
            )));
        }
        for (c, f) in cols.iter_mut().zip(&fields[..7]) {
            c.push(Some(f.to_string()));
        }
    }
    let mut columns: Vec<Column> = cols[1..]
        .iter()
        .enumerate()
        .map(|(j, v)| Column::from_labels(format!("X{}", j + 1), v))
        .collect();
    columns.push(Column::from_labels("y", &cols[0]));
    Table::new("monk", columns)
}
