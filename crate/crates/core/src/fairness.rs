//! ALFA tests, model ranking by residual protected-attribute influence, and
//! adverse impact ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{cmi_pvalue, CmiConfig};
use crate::table::{Column, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlfaReport {
    pub alpha_bits: f64,
    pub pvalue: f64,
    #[serde(rename = "B")]
    pub replicates: usize,
    pub admissible_used: Vec<String>,
    pub protected_used: Vec<String>,
    /// Set when no admissible features were given, so the statistic is the
    /// plain mutual information between target and protected attributes.
    #[serde(default)]
    pub marginal: bool,
}

/// `I(Y; S | X_A)` with a model-based bootstrap p-value. The protected block
/// takes the role of the tested variable and the admissible features are the
/// conditioning set.
pub fn alfa_test<P: AsRef<str>, A: AsRef<str>>(
    table: &Table,
    y: &str,
    protected: &[P],
    admissible: &[A],
    cfg: &CmiConfig,
    replicates: usize,
    seed: u64,
) -> Result<AlfaReport> {
    if protected.is_empty() {
        return Err(Error::param("the ALFA test needs at least one protected attribute"));
    }
    let est = cmi_pvalue(table, y, protected, admissible, cfg, replicates, seed)?;
    Ok(AlfaReport {
        alpha_bits: est.value_bits,
        pvalue: est.pvalue.expect("bootstrap sets a p-value"),
        replicates,
        admissible_used: admissible.iter().map(|a| a.as_ref().to_string()).collect(),
        protected_used: protected.iter().map(|p| p.as_ref().to_string()).collect(),
        marginal: admissible.is_empty(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub name: String,
    pub alpha_bits: f64,
    pub pvalue: f64,
}

/// Ranks models by the ALFA statistic of their predictions, smallest (least
/// protected-attribute influence) first; ties go to the lexically smaller name.
pub fn rank_models_alfa<P: AsRef<str>, A: AsRef<str>>(
    predictions: &[(String, Vec<String>)],
    table: &Table,
    protected: &[P],
    admissible: &[A],
    cfg: &CmiConfig,
    replicates: usize,
    seed: u64,
) -> Result<Vec<RankedModel>> {
    let mut column = String::from("prediction");
    while table.has_column(&column) {
        column.push('_');
    }
    let mut ranked = predictions
        .iter()
        .map(|(name, labels)| {
            if labels.len() != table.n_rows() {
                return Err(Error::LengthMismatch {
                    column: name.clone(),
                    expected: table.n_rows(),
                    found: labels.len(),
                });
            }
            let values: Vec<Option<&str>> = labels.iter().map(|l| Some(l.as_str())).collect();
            let t = table.with_column(Column::from_labels(column.as_str(), &values))?;
            let report = alfa_test(&t, &column, protected, admissible, cfg, replicates, seed)?;
            Ok(RankedModel {
                name: name.clone(),
                alpha_bits: report.alpha_bits,
                pvalue: report.pvalue,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.alpha_bits.total_cmp(&b.alpha_bits).then(a.name.cmp(&b.name)));
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRate {
    pub label: String,
    pub rate: f64,
    pub n: usize,
    pub favorable: usize,
    pub air: f64,
    pub below_80: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub reference: String,
    pub groups: Vec<GroupRate>,
}

impl GroupRates {
    pub fn get(&self, label: &str) -> Option<&GroupRate> {
        self.groups.iter().find(|g| g.label == label)
    }

    /// Smallest ratio across groups.
    pub fn min_air(&self) -> f64 {
        self.groups.iter().map(|g| g.air).fold(f64::INFINITY, f64::min)
    }
}

/// Threshold of the four-fifths rule.
pub const FOUR_FIFTHS: f64 = 0.8;

fn favorable_counts(
    table: &Table,
    y: &str,
    favorable: &str,
    group: &str,
    rows: &[usize],
) -> Result<Vec<(String, usize, usize)>> {
    let target = table.column(y)?;
    let groups = table.column(group)?;
    let categories = groups
        .categories()
        .ok_or_else(|| Error::invalid_column(group, "group column must be categorical"))?;
    let observed: Vec<String> = (0..table.n_rows()).filter_map(|i| target.label(i)).collect();
    if !observed.iter().any(|l| l == favorable) {
        return Err(Error::invalid_column(
            y,
            format!("favorable label {favorable:?} never occurs"),
        ));
    }
    let mut counts: Vec<(String, usize, usize)> =
        categories.iter().map(|c| (c.clone(), 0, 0)).collect();
    for &i in rows {
        let (Some(outcome), Some(g)) = (target.label(i), groups.label(i)) else {
            continue;
        };
        let slot = categories.iter().position(|c| *c == g).expect("label is a category");
        counts[slot].1 += 1;
        counts[slot].2 += (outcome == favorable) as usize;
    }
    Ok(counts)
}

fn rates_from_counts(
    counts: Vec<(String, usize, usize)>,
    reference: Option<&str>,
) -> Result<GroupRates> {
    let present: Vec<(String, usize, usize)> = counts.into_iter().filter(|c| c.1 > 0).collect();
    if present.is_empty() {
        return Err(Error::param("no rows with both an outcome and a group"));
    }
    let rate = |c: &(String, usize, usize)| c.2 as f64 / c.1 as f64;
    let reference = match reference {
        Some(r) => present
            .iter()
            .find(|c| c.0 == r)
            .ok_or_else(|| Error::param(format!("reference group {r:?} has no rows")))?,
        None => present
            .iter()
            .fold(&present[0], |best, c| if rate(c) > rate(best) { c } else { best }),
    };
    let ref_rate = rate(reference);
    if ref_rate == 0.0 {
        return Err(Error::UndefinedRatio(format!(
            "reference group {:?} has no favorable outcomes",
            reference.0
        )));
    }
    let groups = present
        .iter()
        .map(|c| {
            let air = rate(c) / ref_rate;
            GroupRate {
                label: c.0.clone(),
                rate: rate(c),
                n: c.1,
                favorable: c.2,
                air,
                below_80: air < FOUR_FIFTHS,
            }
        })
        .collect();
    Ok(GroupRates {
        reference: reference.0.clone(),
        groups,
    })
}

/// Adverse impact ratio of each group's favorable-outcome rate to the
/// reference group's rate. The reference defaults to the group with the
/// highest rate, so every ratio is at most 1.
pub fn air(
    table: &Table,
    y: &str,
    favorable: &str,
    group: &str,
    reference: Option<&str>,
) -> Result<GroupRates> {
    let rows: Vec<usize> = (0..table.n_rows()).collect();
    rates_from_counts(favorable_counts(table, y, favorable, group, &rows)?, reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumAir {
    pub stratum: String,
    pub weight: f64,
    /// Smallest group ratio within the stratum.
    pub air: f64,
    pub rates: GroupRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CairReport {
    pub cair: f64,
    pub strata: Vec<StratumAir>,
}

/// Conditional adverse impact ratio: per-stratum ratios averaged with the
/// empirical stratum frequencies as weights. Within a stratum the ratio is
/// that of the least favored group to the most favored one.
pub fn cair(table: &Table, y: &str, favorable: &str, group: &str, stratum: &str) -> Result<CairReport> {
    let strata = table.column(stratum)?;
    let levels = strata
        .categories()
        .ok_or_else(|| Error::invalid_column(stratum, "stratum column must be categorical"))?;
    let all: Vec<usize> = (0..table.n_rows()).collect();
    let overall = favorable_counts(table, y, favorable, group, &all)?;
    let groups: Vec<&String> = overall.iter().filter(|c| c.1 > 0).map(|c| &c.0).collect();
    let mut rows_by_level: Vec<Vec<usize>> = vec![Vec::new(); levels.len()];
    for i in 0..table.n_rows() {
        if let Some(l) = strata.label(i) {
            let slot = levels.iter().position(|c| *c == l).expect("label is a category");
            rows_by_level[slot].push(i);
        }
    }
    let mut out = Vec::new();
    for (level, rows) in levels.iter().zip(&rows_by_level) {
        if rows.is_empty() {
            continue;
        }
        let counts = favorable_counts(table, y, favorable, group, rows)?;
        for g in &groups {
            if counts.iter().all(|c| c.0 != **g || c.1 == 0) {
                return Err(Error::MissingGroupInStratum {
                    stratum: level.clone(),
                    group: (*g).clone(),
                });
            }
        }
        let rates = rates_from_counts(counts, None)?;
        out.push((level.clone(), rates.groups.iter().map(|g| g.n).sum::<usize>(), rates));
    }
    let total: usize = out.iter().map(|s| s.1).sum();
    let strata: Vec<StratumAir> = out
        .into_iter()
        .map(|(level, n, rates)| StratumAir {
            stratum: level,
            weight: n as f64 / total as f64,
            air: rates.min_air(),
            rates,
        })
        .collect();
    let cair = strata.iter().map(|s| s.weight * s.air).sum();
    Ok(CairReport { cair, strata })
}

/// Marginal group rates plus, when a stratum column is given, the
/// conditional ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub reference: String,
    pub groups: Vec<GroupRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cair: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<Vec<StratumAir>>,
}

pub fn group_metrics(
    table: &Table,
    y: &str,
    favorable: &str,
    group: &str,
    reference: Option<&str>,
    stratum: Option<&str>,
) -> Result<GroupMetrics> {
    let marginal = air(table, y, favorable, group, reference)?;
    let conditional = stratum
        .map(|s| cair(table, y, favorable, group, s))
        .transpose()?;
    Ok(GroupMetrics {
        reference: marginal.reference,
        groups: marginal.groups,
        cair: conditional.as_ref().map(|c| c.cair),
        strata: conditional.map(|c| c.strata),
    })
}
