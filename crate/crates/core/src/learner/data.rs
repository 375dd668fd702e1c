//! Binned feature storage and histogram split search shared by the boosted
//! ensemble and the CART trees.

use std::ops::{AddAssign, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ColumnData, ColumnKind, Table};

pub const DEFAULT_MAX_BINS: usize = 255;

/// Name, kind and category table of a training feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

impl FeatureSchema {
    /// Encodes a table column against this schema: numeric values as-is,
    /// categories as training codes, missing and unseen levels as NaN.
    pub fn encode(&self, table: &Table) -> Result<Vec<f64>> {
        let col = table.column(&self.name)?;
        if col.kind() != self.kind {
            return Err(Error::SchemaMismatch(format!(
                "column {:?} is {:?}, model expects {:?}",
                self.name,
                col.kind(),
                self.kind
            )));
        }
        Ok(match col.data() {
            ColumnData::Numeric(v) => v.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
            ColumnData::Categorical { codes, categories } => {
                let trained = self.categories.as_deref().unwrap_or(&[]);
                let remap: Vec<f64> = categories
                    .iter()
                    .map(|c| {
                        trained
                            .iter()
                            .position(|t| t == c)
                            .map_or(f64::NAN, |i| i as f64)
                    })
                    .collect();
                codes
                    .iter()
                    .map(|c| c.map_or(f64::NAN, |c| remap[c as usize]))
                    .collect()
            }
        })
    }
}

/// A split test. Rows whose value satisfies the rule go left; missing values
/// follow the node's default direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    Threshold(f64),
    /// Training category codes (sorted) that go left.
    LeftCategories(Vec<u32>),
}

impl SplitRule {
    /// `None` when the value is missing.
    #[inline]
    pub fn goes_left(&self, value: f64) -> Option<bool> {
        if value.is_nan() {
            return None;
        }
        Some(match self {
            SplitRule::Threshold(t) => value <= *t,
            SplitRule::LeftCategories(set) => set.binary_search(&(value as u32)).is_ok(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BinnedFeature {
    pub schema: FeatureSchema,
    /// Numeric cut points; bin `b` holds `cuts[b-1] < x <= cuts[b]`.
    pub cuts: Vec<f64>,
    pub n_bins: usize,
    /// Bin per row; `n_bins` marks a missing value.
    pub bins: Vec<u16>,
    /// Encoded raw values (see [`FeatureSchema::encode`]).
    pub values: Vec<f64>,
}

impl BinnedFeature {
    pub fn missing_bin(&self) -> usize {
        self.n_bins
    }

    pub fn is_categorical(&self) -> bool {
        self.schema.kind == ColumnKind::Categorical
    }

    fn from_column(table: &Table, name: &str, max_bins: usize) -> Result<Self> {
        let col = table.column(name)?;
        match col.data() {
            ColumnData::Numeric(values) => {
                let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
                sorted.sort_by(f64::total_cmp);
                let cuts = numeric_cuts(&sorted, max_bins);
                let n_bins = cuts.len() + 1;
                let bins = values
                    .iter()
                    .map(|v| match v {
                        Some(x) => cuts.partition_point(|c| c < x) as u16,
                        None => n_bins as u16,
                    })
                    .collect();
                Ok(BinnedFeature {
                    schema: FeatureSchema {
                        name: name.to_string(),
                        kind: ColumnKind::Numeric,
                        categories: None,
                    },
                    cuts,
                    n_bins,
                    bins,
                    values: values.iter().map(|x| x.unwrap_or(f64::NAN)).collect(),
                })
            }
            ColumnData::Categorical { codes, categories } => {
                if categories.len() >= u16::MAX as usize {
                    return Err(Error::invalid_column(name, "too many categories"));
                }
                let n_bins = categories.len();
                Ok(BinnedFeature {
                    schema: FeatureSchema {
                        name: name.to_string(),
                        kind: ColumnKind::Categorical,
                        categories: Some(categories.clone()),
                    },
                    cuts: Vec::new(),
                    n_bins,
                    bins: codes
                        .iter()
                        .map(|c| c.map_or(n_bins as u16, |c| c as u16))
                        .collect(),
                    values: codes.iter().map(|c| c.map_or(f64::NAN, f64::from)).collect(),
                })
            }
        }
    }
}

fn numeric_cuts(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let mut distinct = sorted.to_vec();
    distinct.dedup();
    let mid = |a: f64, b: f64| a + (b - a) / 2.0;
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| mid(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(max_bins);
    for b in 1..max_bins {
        let q = sorted[b * n / max_bins];
        let j = distinct.partition_point(|d| *d < q);
        if j > 0 {
            let c = mid(distinct[j - 1], distinct[j]);
            if cuts.last().is_none_or(|last| *last < c) {
                cuts.push(c);
            }
        }
    }
    cuts
}

/// Pre-binned columns of a table, built once and reused across fits.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub features: Vec<BinnedFeature>,
}

impl FeatureMatrix {
    pub fn from_table<S: AsRef<str>>(table: &Table, names: &[S], max_bins: usize) -> Result<Self> {
        let features = names
            .iter()
            .map(|n| BinnedFeature::from_column(table, n.as_ref(), max_bins))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            n_rows: table.n_rows(),
            features,
        })
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.schema.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn indices_of<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.index_of(n.as_ref())).collect()
    }
}

/// Per-bin sufficient statistics for a split criterion.
///
/// A split's gain is `score(left) + score(right) - score(parent)`.
pub trait SplitStats: Clone + AddAssign + for<'a> SubAssign<&'a Self> {
    fn count(&self) -> usize;
    fn score(&self) -> f64;
    /// Sort key used to order categorical levels.
    fn order_key(&self, parent: &Self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitChoice {
    /// Last bin (inclusive) that goes left.
    Bin(usize),
    /// Category bins that go left, sorted.
    Levels(Vec<u32>),
}

#[derive(Debug, Clone)]
pub struct SplitCandidate {
    pub feature: usize,
    pub gain: f64,
    pub choice: SplitChoice,
    pub missing_left: bool,
}

impl SplitCandidate {
    pub fn rule(&self, feature: &BinnedFeature) -> SplitRule {
        match &self.choice {
            SplitChoice::Bin(b) => SplitRule::Threshold(feature.cuts[*b]),
            SplitChoice::Levels(levels) => SplitRule::LeftCategories(levels.clone()),
        }
    }

    /// Routing of a training row by its bin.
    pub fn left_mask(&self, feature: &BinnedFeature) -> Vec<bool> {
        let mut mask = vec![false; feature.n_bins + 1];
        match &self.choice {
            SplitChoice::Bin(b) => mask[..=*b].iter_mut().for_each(|m| *m = true),
            SplitChoice::Levels(levels) => {
                for &l in levels {
                    mask[l as usize] = true;
                }
            }
        }
        mask[feature.n_bins] = self.missing_left;
        mask
    }
}

/// Best split of one feature given its histogram (`hist[n_bins]` holds the
/// missing rows). Ties keep the lowest threshold.
pub fn best_split<S: SplitStats>(
    feature_idx: usize,
    feature: &BinnedFeature,
    hist: &[S],
    parent: &S,
    min_leaf: usize,
) -> Option<SplitCandidate> {
    let missing = &hist[feature.n_bins];
    let mut present = parent.clone();
    present -= missing;
    let parent_score = parent.score();
    let mut best: Option<SplitCandidate> = None;

    let mut consider = |left_present: &S, choice: &dyn Fn() -> SplitChoice| {
        let mut right_present = present.clone();
        right_present -= left_present;
        if left_present.count() == 0 || right_present.count() == 0 {
            return;
        }
        let options: &[bool] = if missing.count() == 0 {
            &[left_present.count() >= right_present.count()]
        } else {
            &[true, false]
        };
        for &missing_left in options {
            let (mut left, mut right) = (left_present.clone(), right_present.clone());
            if missing.count() > 0 {
                if missing_left {
                    left += missing.clone();
                } else {
                    right += missing.clone();
                }
            }
            if left.count() < min_leaf || right.count() < min_leaf {
                continue;
            }
            let gain = left.score() + right.score() - parent_score;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature: feature_idx,
                    gain,
                    choice: choice(),
                    missing_left,
                });
            }
        }
    };

    if feature.is_categorical() {
        let mut levels: Vec<usize> = (0..feature.n_bins)
            .filter(|&b| hist[b].count() > 0)
            .collect();
        levels.sort_by(|&a, &b| {
            hist[a]
                .order_key(parent)
                .total_cmp(&hist[b].order_key(parent))
                .then(a.cmp(&b))
        });
        let mut left = hist[levels.first().copied()?].clone();
        for m in 1..levels.len() {
            let chosen = &levels[..m];
            consider(&left, &|| {
                let mut set: Vec<u32> = chosen.iter().map(|&b| b as u32).collect();
                set.sort_unstable();
                SplitChoice::Levels(set)
            });
            left += hist[levels[m]].clone();
        }
    } else {
        let mut left = hist[0].clone();
        for b in 0..feature.n_bins.saturating_sub(1) {
            if b > 0 {
                left += hist[b].clone();
            }
            if hist[b].count() == 0 && b > 0 {
                continue;
            }
            consider(&left, &|| SplitChoice::Bin(b));
        }
    }
    best.map(|mut b| {
        b.gain = b.gain.max(0.0);
        b
    })
}

/// Picks the better of two candidates: higher gain, then lower feature index.
pub fn better(current: Option<SplitCandidate>, next: Option<SplitCandidate>) -> Option<SplitCandidate> {
    match (current, next) {
        (None, n) => n,
        (c, None) => c,
        (Some(c), Some(n)) => {
            if n.gain > c.gain || (n.gain == c.gain && n.feature < c.feature) {
                Some(n)
            } else {
                Some(c)
            }
        }
    }
}

/// In-place partition of `rows` by a bin mask; returns the size of the left part.
pub fn partition_rows(rows: &mut [usize], bins: &[u16], left_mask: &[bool]) -> usize {
    let mut i = 0;
    let mut j = rows.len();
    while i < j {
        if left_mask[bins[rows[i]] as usize] {
            i += 1;
        } else {
            j -= 1;
            rows.swap(i, j);
        }
    }
    // keep each side in ascending row order for reproducible accumulation
    rows[..i].sort_unstable();
    rows[i..].sort_unstable();
    i
}
