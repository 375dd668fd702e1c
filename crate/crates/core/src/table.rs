//! Columnar mixed-type tables.
//!
//! A [`Table`] holds numeric and categorical columns of equal length. Missing
//! entries are stored as `None`, never as sentinel values. Tables are
//! immutable once built; every transformation returns a new table.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical {
        codes: Vec<Option<u32>>,
        categories: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    /// Numeric column without missing entries.
    pub fn dense(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self::numeric(name, values.into_iter().map(Some).collect())
    }

    pub fn categorical(
        name: impl Into<String>,
        codes: Vec<Option<u32>>,
        categories: Vec<String>,
    ) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical { codes, categories },
        }
    }

    /// Categorical column from string labels; categories are ordered by first
    /// appearance.
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, labels: &[Option<S>]) -> Self {
        let mut categories: Vec<String> = Vec::new();
        let mut index: HashMap<String, u32> = HashMap::new();
        let codes = labels
            .iter()
            .map(|l| {
                l.as_ref().map(|l| {
                    let l = l.as_ref();
                    *index.entry(l.to_string()).or_insert_with(|| {
                        categories.push(l.to_string());
                        (categories.len() - 1) as u32
                    })
                })
            })
            .collect();
        Self::categorical(name, codes, categories)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical { .. } => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn missing_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_missing(i)).collect()
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.data {
            ColumnData::Categorical { categories, .. } => Some(categories),
            ColumnData::Numeric(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical { .. } => None,
        }
    }

    /// Text form of a cell as written to CSV; `None` when missing.
    pub fn label(&self, row: usize) -> Option<String> {
        match &self.data {
            ColumnData::Numeric(v) => v[row].map(format_number),
            ColumnData::Categorical { codes, categories } => {
                codes[row].map(|c| categories[c as usize].clone())
            }
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn take(&self, rows: &[usize]) -> Column {
        let data = match &self.data {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { codes, categories } => ColumnData::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                categories: categories.clone(),
            },
        };
        Column {
            name: self.name.clone(),
            data,
        }
    }

    fn validate(&self) -> Result<()> {
        if let ColumnData::Categorical { codes, categories } = &self.data {
            let k = categories.len() as u32;
            if let Some(bad) = codes.iter().flatten().find(|&&c| c >= k) {
                return Err(Error::invalid_column(
                    &self.name,
                    format!("category code {bad} out of range for {k} categories"),
                ));
            }
            let mut seen = HashSet::new();
            if let Some(dup) = categories.iter().find(|c| !seen.insert(c.as_str())) {
                return Err(Error::invalid_column(
                    &self.name,
                    format!("duplicate category label {dup:?}"),
                ));
            }
        }
        if let ColumnData::Numeric(v) = &self.data {
            if v.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::invalid_column(&self.name, "non-finite value"));
            }
        }
        Ok(())
    }
}

/// Shortest round-trip decimal form, integers without a fractional part.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Observed class labels of a target column, with per-row codes into them.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLabels {
    pub labels: Vec<String>,
    pub codes: Vec<u32>,
}

impl ClassLabels {
    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    name: String,
    n_rows: usize,
    columns: Vec<Column>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for (i, c) in columns.iter().enumerate() {
            if c.name.is_empty() {
                return Err(Error::EmptyColumnName(i));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.len() != n_rows {
                return Err(Error::LengthMismatch {
                    column: c.name.clone(),
                    expected: n_rows,
                    found: c.len(),
                });
            }
            c.validate()?;
        }
        Ok(Table {
            name: name.into(),
            n_rows,
            columns,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c.name == name)
    }

    /// Rows in the given order, duplicates allowed.
    pub fn take_rows(&self, rows: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            n_rows: rows.len(),
            columns: self.columns.iter().map(|c| c.take(rows)).collect(),
        }
    }

    pub fn select(&self, names: &[&str]) -> Result<Table> {
        let columns = names
            .iter()
            .map(|n| self.column(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        Table::new(self.name.clone(), columns)
    }

    /// Returns a copy with `column` appended, or replacing a column of the
    /// same name in place.
    pub fn with_column(&self, column: Column) -> Result<Table> {
        let mut columns = self.columns.clone();
        match columns.iter().position(|c| c.name == column.name) {
            Some(i) => columns[i] = column,
            None => columns.push(column),
        }
        Table::new(self.name.clone(), columns)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Class labels of a target column.
    ///
    /// Categorical targets keep their category order, dropping unobserved
    /// levels. Numeric targets are treated as discrete: classes are the
    /// distinct values in ascending order. Missing targets are rejected.
    pub fn class_labels(&self, name: &str) -> Result<ClassLabels> {
        let col = self.column(name)?;
        if !col.missing_rows().is_empty() {
            return Err(Error::invalid_column(name, "target has missing values"));
        }
        match col.data() {
            ColumnData::Categorical { codes, categories } => {
                let mut used = vec![false; categories.len()];
                for c in codes.iter().flatten() {
                    used[*c as usize] = true;
                }
                let mut remap = vec![u32::MAX; categories.len()];
                let mut labels = Vec::new();
                for (i, cat) in categories.iter().enumerate() {
                    if used[i] {
                        remap[i] = labels.len() as u32;
                        labels.push(cat.clone());
                    }
                }
                let codes = codes.iter().map(|c| remap[c.unwrap() as usize]).collect();
                Ok(ClassLabels { labels, codes })
            }
            ColumnData::Numeric(values) => {
                let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let codes = values
                    .iter()
                    .map(|v| {
                        distinct
                            .binary_search_by(|d| d.total_cmp(&v.unwrap()))
                            .unwrap() as u32
                    })
                    .collect();
                Ok(ClassLabels {
                    labels: distinct.into_iter().map(format_number).collect(),
                    codes,
                })
            }
        }
    }
}

/// Per-column kind overrides applied while reading CSV.
pub type Schema = HashMap<String, ColumnKind>;

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, schema)
}

/// Reads RFC-4180 CSV with a header row. Empty cells are missing.
pub fn read_csv<R: Read>(reader: R, name: &str, schema: &Schema) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut seen = HashSet::new();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(Error::EmptyColumnName(i));
        }
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    if let Some(unknown) = schema.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(Error::UnknownColumn(unknown.clone()));
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line: record.position().map_or(0, |p| p.line()),
                expected: header.len(),
                found: record.len(),
            });
        }
        for (col, field) in cells.iter_mut().zip(record.iter()) {
            col.push((!field.is_empty()).then(|| field.to_string()));
        }
    }

    let columns = header
        .into_iter()
        .zip(cells)
        .map(|(name, raw)| build_column(name, raw, schema))
        .collect::<Result<Vec<_>>>()?;
    Table::new(name, columns)
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn build_column(name: String, raw: Vec<Option<String>>, schema: &Schema) -> Result<Column> {
    let all_numeric = raw.iter().flatten().all(|s| parse_number(s).is_some());
    let kind = schema.get(&name).copied().unwrap_or(if all_numeric {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    });
    match kind {
        ColumnKind::Numeric => {
            let values = raw
                .iter()
                .map(|cell| match cell {
                    None => Ok(None),
                    Some(s) => parse_number(s).map(Some).ok_or_else(|| {
                        Error::invalid_column(&name, format!("{s:?} is not a number"))
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Column::numeric(name, values))
        }
        ColumnKind::Categorical => Ok(Column::from_labels(name, &raw)),
    }
}

pub fn write_csv<W: Write>(table: &Table, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    wtr.write_record(table.column_names()).map_err(csv_err)?;
    for row in 0..table.n_rows {
        let record: Vec<String> = table
            .columns
            .iter()
            .map(|c| c.label(row).unwrap_or_default())
            .collect();
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn save_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(table, std::io::BufWriter::new(file))
}

/// Replaces each named column by its empirical CDF, `#{x_k <= x_i} / n`.
pub fn rank_transform(table: &Table, cols: &[&str]) -> Result<Table> {
    let mut out = table.clone();
    for &name in cols {
        let col = table.column(name)?;
        let values = col
            .as_numeric()
            .ok_or_else(|| Error::invalid_column(name, "rank transform needs a numeric column"))?;
        let dense: Vec<f64> = values
            .iter()
            .map(|v| v.ok_or_else(|| Error::invalid_column(name, "column has missing values")))
            .collect::<Result<_>>()?;
        out = out.with_column(Column::dense(name, ecdf(&dense)))?;
    }
    Ok(out)
}

fn ecdf(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let u = end as f64 / n as f64;
        for &i in &order[start..end] {
            out[i] = u;
        }
        start = end;
    }
    out
}

/// Seeded random partition into (train, test); each part keeps the original
/// row order.
pub fn train_test_split(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let (train, test) = split_indices(table.n_rows, test_fraction, seed)?;
    Ok((table.take_rows(&train), table.take_rows(&test)))
}

pub(crate) fn split_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::param("splitting needs at least two rows"));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Roles of the columns in a learning or audit task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target: String,
    #[serde(default)]
    pub protected: Vec<String>,
    pub features: Vec<String>,
    #[serde(default)]
    pub positive_label: Option<String>,
}

impl TaskSpec {
    pub fn new(target: impl Into<String>, features: Vec<String>) -> Self {
        TaskSpec {
            target: target.into(),
            protected: Vec::new(),
            features,
            positive_label: None,
        }
    }

    pub fn with_protected(mut self, protected: Vec<String>) -> Self {
        self.protected = protected;
        self
    }

    /// All non-target, non-protected columns of `table` as features.
    pub fn all_features(table: &Table, target: &str, protected: &[String]) -> Self {
        let features = table
            .column_names()
            .into_iter()
            .filter(|c| *c != target && !protected.iter().any(|p| p == c))
            .map(str::to_string)
            .collect();
        TaskSpec::new(target, features).with_protected(protected.to_vec())
    }

    pub fn validate(&self, table: &Table) -> Result<()> {
        for name in std::iter::once(&self.target)
            .chain(&self.protected)
            .chain(&self.features)
        {
            table.column(name)?;
        }
        if self.features.contains(&self.target) || self.protected.contains(&self.target) {
            return Err(Error::RoleConflict(format!(
                "target {:?} is also a feature or protected attribute",
                self.target
            )));
        }
        if let Some(p) = self.protected.iter().find(|p| self.features.contains(p)) {
            return Err(Error::RoleConflict(format!(
                "{p:?} is both protected and a feature"
            )));
        }
        if table.class_labels(&self.target)?.n_classes() < 2 {
            return Err(Error::DegenerateTarget(self.target.clone()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnWire {
    name: String,
    kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
    values: Vec<serde_json::Value>,
    missing: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct TableWire {
    name: String,
    n_rows: usize,
    columns: Vec<ColumnWire>,
}

impl Serialize for Table {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let (categories, values) = match &c.data {
                    ColumnData::Numeric(v) => (
                        None,
                        v.iter()
                            .map(|x| x.map_or(serde_json::Value::Null, serde_json::Value::from))
                            .collect(),
                    ),
                    ColumnData::Categorical { codes, categories } => (
                        Some(categories.clone()),
                        codes
                            .iter()
                            .map(|x| x.map_or(serde_json::Value::Null, serde_json::Value::from))
                            .collect(),
                    ),
                };
                ColumnWire {
                    name: c.name.clone(),
                    kind: c.kind(),
                    categories,
                    values,
                    missing: c.missing_rows(),
                }
            })
            .collect();
        TableWire {
            name: self.name.clone(),
            n_rows: self.n_rows,
            columns,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = TableWire::deserialize(d)?;
        let mut columns = Vec::with_capacity(wire.columns.len());
        for c in wire.columns {
            let missing: std::collections::HashSet<usize> = c.missing.into_iter().collect();
            let present = |i: usize, v: &serde_json::Value| !missing.contains(&i) && !v.is_null();
            let column = match c.kind {
                ColumnKind::Numeric => {
                    let values = c
                        .values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            present(i, v)
                                .then_some(v)
                                .map(|v| v.as_f64().ok_or_else(|| D::Error::custom("expected number")))
                                .transpose()
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    Column::numeric(c.name, values)
                }
                ColumnKind::Categorical => {
                    let codes = c
                        .values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| {
                            present(i, v)
                                .then_some(v)
                                .map(|v| {
                                    v.as_u64()
                                        .map(|x| x as u32)
                                        .ok_or_else(|| D::Error::custom("expected category code"))
                                })
                                .transpose()
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()?;
                    Column::categorical(c.name, codes, c.categories.unwrap_or_default())
                }
            };
            columns.push(column);
        }
        let table = Table::new(wire.name, columns).map_err(D::Error::custom)?;
        if table.n_rows != wire.n_rows && !table.columns.is_empty() {
            return Err(D::Error::custom(format!(
                "n_rows is {} but columns have {} entries",
                wire.n_rows, table.n_rows
            )));
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Table> {
        read_csv(text.as_bytes(), "t", &Schema::new())
    }

    #[test]
    fn infers_kinds_by_parseability() {
        let t = csv("a,b\n1,x\n2,y\n").unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.column("a").unwrap().kind(), ColumnKind::Numeric);
        assert_eq!(t.column("b").unwrap().kind(), ColumnKind::Categorical);
        assert_eq!(t.column("b").unwrap().categories().unwrap(), ["x", "y"]);
    }

    #[test]
    fn empty_cell_is_missing() {
        let t = csv("a,b,c\n1,,z\n2,y,z\n").unwrap();
        assert!(t.column("b").unwrap().is_missing(0));
        assert!(!t.column("b").unwrap().is_missing(1));
        let t = csv("a,b\n1,\n2,3\n").unwrap();
        assert_eq!(t.column("b").unwrap().as_numeric().unwrap(), [None, Some(3.0)]);
    }

    #[test]
    fn ragged_row_names_the_line() {
        match csv("a,b\n1,x\n2\n") {
            Err(Error::RaggedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected ragged row error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_header_is_rejected() {
        assert!(matches!(csv("a,a\n1,2\n"), Err(Error::DuplicateColumn(_))));
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_csv("/nonexistent/file.csv", &Schema::new()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn schema_override_forces_categorical() {
        let mut schema = Schema::new();
        schema.insert("a".into(), ColumnKind::Categorical);
        let t = read_csv("a,b\n1,2\n0,3\n".as_bytes(), "t", &schema).unwrap();
        assert_eq!(t.column("a").unwrap().categories().unwrap(), ["1", "0"]);
        assert_eq!(t.column("b").unwrap().kind(), ColumnKind::Numeric);
    }

    #[test]
    fn binary_numeric_column_stays_numeric() {
        let t = csv("flag\n0\n1\n1\n").unwrap();
        assert_eq!(t.column("flag").unwrap().kind(), ColumnKind::Numeric);
    }

    #[test]
    fn rank_transform_examples() {
        let t = Table::new(
            "t",
            vec![
                Column::dense("a", vec![1.0, 5.0, 3.0]),
                Column::dense("b", vec![2.0, 2.0, 7.0]),
            ],
        )
        .unwrap();
        let r = rank_transform(&t, &["a", "b"]).unwrap();
        let a = r.column("a").unwrap().as_numeric().unwrap();
        assert_eq!(a, [Some(1.0 / 3.0), Some(1.0), Some(2.0 / 3.0)]);
        let b = r.column("b").unwrap().as_numeric().unwrap();
        assert_eq!(b, [Some(2.0 / 3.0), Some(2.0 / 3.0), Some(1.0)]);

        let c = Table::new("c", vec![Column::dense("x", vec![4.0, 4.0])]).unwrap();
        let r = rank_transform(&c, &["x"]).unwrap();
        assert_eq!(r.column("x").unwrap().as_numeric().unwrap(), [Some(1.0), Some(1.0)]);
    }

    #[test]
    fn rank_transform_rejects_bad_columns() {
        let t = csv("a,b,c\n1,x,\n2,y,3\n").unwrap();
        assert!(rank_transform(&t, &["b"]).is_err());
        assert!(rank_transform(&t, &["c"]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let t = Table::new("t", vec![Column::dense("a", (0..10).map(f64::from).collect())]).unwrap();
        let (train, test) = train_test_split(&t, 0.2, 7).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (8, 2));
        let mut all: Vec<f64> = train
            .column("a")
            .unwrap()
            .as_numeric()
            .unwrap()
            .iter()
            .chain(test.column("a").unwrap().as_numeric().unwrap())
            .map(|v| v.unwrap())
            .collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(f64::from).collect::<Vec<_>>());
        let again = train_test_split(&t, 0.2, 7).unwrap();
        assert_eq!(again, (train, test));
        assert!(train_test_split(&t, 1.0, 7).is_err());
        assert!(train_test_split(&t, 0.0, 7).is_err());
    }

    #[test]
    fn class_labels_for_numeric_and_categorical_targets() {
        let t = csv("y,z\n1,b\n0,a\n1,b\n").unwrap();
        let y = t.class_labels("y").unwrap();
        assert_eq!(y.labels, ["0", "1"]);
        assert_eq!(y.codes, [1, 0, 1]);
        let z = t.class_labels("z").unwrap();
        assert_eq!(z.labels, ["b", "a"]);
        assert_eq!(z.codes, [0, 1, 0]);
    }

    #[test]
    fn task_spec_role_conflicts() {
        let t = csv("y,a,b\n1,1,2\n0,2,3\n").unwrap();
        let spec = TaskSpec::new("y", vec!["a".into()]).with_protected(vec!["a".into()]);
        assert!(matches!(spec.validate(&t), Err(Error::RoleConflict(_))));
        let spec = TaskSpec::new("y", vec!["y".into()]);
        assert!(matches!(spec.validate(&t), Err(Error::RoleConflict(_))));
        assert!(TaskSpec::new("y", vec!["a".into(), "b".into()]).validate(&t).is_ok());
        let constant = csv("y,a\n1,1\n1,2\n").unwrap();
        assert!(matches!(
            TaskSpec::new("y", vec!["a".into()]).validate(&constant),
            Err(Error::DegenerateTarget(_))
        ));
    }

    #[test]
    fn json_form_round_trips() {
        let t = csv("a,b\n1.5,x\n,y\n-2,\n").unwrap();
        let json = serde_json::to_value(&t).unwrap();
        assert_eq!(json["columns"][0]["missing"], serde_json::json!([1]));
        assert_eq!(json["columns"][1]["categories"], serde_json::json!(["x", "y"]));
        let back: Table = serde_json::from_value(json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let bad = Table::new(
            "t",
            vec![Column::dense("a", vec![1.0]), Column::dense("b", vec![1.0, 2.0])],
        );
        assert!(matches!(bad, Err(Error::LengthMismatch { .. })));
        let bad = Table::new("t", vec![Column::categorical("c", vec![Some(3)], vec!["x".into()])]);
        assert!(bad.is_err());
    }
}
