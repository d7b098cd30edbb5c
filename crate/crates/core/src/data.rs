//! CSV loading, preprocessing and stratified train/test/fold splitting.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng;
use crate::{Error, Result};

/// Category used for empty cells in categorical columns.
pub const MISSING_CATEGORY: &str = "__missing__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Column holding the class label, by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for LabelColumn {
    fn from(name: &str) -> Self {
        LabelColumn::Name(name.to_string())
    }
}

/// Per-column type overrides applied before inference.
pub type SchemaHints = HashMap<String, ColumnKind>;

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

impl RawColumn {
    pub fn kind(&self) -> ColumnKind {
        match self.values {
            RawValues::Numeric(_) => ColumnKind::Numeric,
            RawValues::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn missing_count(&self) -> usize {
        match &self.values {
            RawValues::Numeric(v) => v.iter().filter(|x| x.is_none()).count(),
            RawValues::Categorical(v) => v.iter().filter(|x| x.is_none()).count(),
        }
    }
}

/// A parsed CSV before imputation and encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub label_name: String,
    pub labels: Vec<String>,
    pub source_name: String,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

/// Reads a CSV file with a header row. Empty cells are recorded as missing.
pub fn load_csv(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    hints: &SchemaHints,
) -> Result<RawTable> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    let source = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(file, &source, label, hints)
}

/// Same as [`load_csv`] over any reader.
pub fn parse_csv<R: Read>(
    reader: R,
    source_name: &str,
    label: &LabelColumn,
    hints: &SchemaHints,
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = match label {
        LabelColumn::Name(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::LabelColumnMissing(name.clone()))?,
        LabelColumn::Index(i) if *i < header.len() => *i,
        LabelColumn::Index(i) => return Err(Error::LabelColumnMissing(format!("#{i}"))),
    };

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); header.len()];
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                if field.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "missing label".into(),
                    });
                }
                labels.push(field.to_string());
            } else {
                cells[col].push((!field.is_empty()).then(|| field.to_string()));
            }
        }
    }
    if labels.len() < 2 {
        return Err(Error::TooFewRows {
            needed: 2,
            found: labels.len(),
        });
    }
    let distinct: std::collections::BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    if distinct.len() != 2 {
        return Err(Error::NotBinary(distinct.len()));
    }

    let columns = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(i, name)| {
            let raw = std::mem::take(&mut cells[i]);
            let kind = hints.get(name).copied().unwrap_or_else(|| infer_kind(&raw));
            let values = match kind {
                ColumnKind::Categorical => RawValues::Categorical(raw),
                ColumnKind::Numeric => {
                    let mut parsed = Vec::with_capacity(raw.len());
                    for (row, cell) in raw.into_iter().enumerate() {
                        parsed.push(match cell {
                            None => None,
                            Some(s) => Some(parse_number(&s).ok_or_else(|| Error::Parse {
                                // header is line 1
                                line: row as u64 + 2,
                                message: format!("`{s}` in numeric column `{name}`"),
                            })?),
                        });
                    }
                    RawValues::Numeric(parsed)
                }
            };
            Ok(RawColumn {
                name: name.clone(),
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RawTable {
        columns,
        label_name: header[label_idx].clone(),
        labels,
        source_name: source_name.to_string(),
    })
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_kind(cells: &[Option<String>]) -> ColumnKind {
    let numeric = cells.iter().flatten().all(|s| parse_number(s).is_some());
    if numeric {
        ColumnKind::Numeric
    } else {
        ColumnKind::Categorical
    }
}

/// Feature matrix with binary labels. Rows are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    source_name: String,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        source_name: impl Into<String>,
    ) -> Result<Self> {
        let n_features = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: n_features,
            });
        }
        let n_rows = rows.len();
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(
            features,
            n_rows,
            n_features,
            labels,
            feature_names,
            source_name,
        )
    }

    pub fn from_flat(
        features: Vec<f64>,
        n_rows: usize,
        n_features: usize,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        source_name: impl Into<String>,
    ) -> Result<Self> {
        if n_rows != labels.len() {
            return Err(Error::LengthMismatch {
                left: n_rows,
                right: labels.len(),
            });
        }
        if n_features == 0 {
            return Err(Error::NoFeatures);
        }
        if features.len() != n_rows * n_features {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: n_rows * n_features,
            });
        }
        if n_rows < 2 {
            return Err(Error::TooFewRows {
                needed: 2,
                found: n_rows,
            });
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
        }
        let ones = labels.iter().filter(|&&y| y == 1).count();
        if ones == 0 || ones == n_rows {
            return Err(Error::InvalidDataset("both classes must be present".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        let feature_names = if feature_names.is_empty() {
            (0..n_features).map(|j| format!("x{j}")).collect()
        } else if feature_names.len() == n_features {
            feature_names
        } else {
            return Err(Error::LengthMismatch {
                left: feature_names.len(),
                right: n_features,
            });
        };
        Ok(Self {
            features,
            n_rows,
            n_features,
            labels,
            feature_names,
            source_name: source_name.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.features[row * self.n_features + feature]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    /// `[class-0 count, class-1 count]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&y| y == 1).count();
        [self.n_rows - ones, ones]
    }

    /// Returns a copy with row `i` replaced.
    pub fn with_row(&self, i: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_features {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.n_features,
            });
        }
        let mut out = self.clone();
        out.features[i * self.n_features..(i + 1) * self.n_features].copy_from_slice(values);
        Ok(out)
    }

    /// Numeric raw table whose labels are `"0"`/`"1"`; preprocessing it is a no-op.
    pub fn to_raw_table(&self) -> RawTable {
        let columns = (0..self.n_features)
            .map(|j| RawColumn {
                name: self.feature_names[j].clone(),
                values: RawValues::Numeric(
                    (0..self.n_rows).map(|i| Some(self.value(i, j))).collect(),
                ),
            })
            .collect();
        RawTable {
            columns,
            label_name: "label".into(),
            labels: self.labels.iter().map(|y| y.to_string()).collect(),
            source_name: self.source_name.clone(),
        }
    }

    /// Writes the dataset as CSV with a trailing `label` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.labels[i].to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Imputes missing values, one-hot encodes categoricals and maps labels to `{0, 1}`.
///
/// Numeric gaps take the median of the observed values. Categorical gaps become
/// their own category, [`MISSING_CATEGORY`]. Labels that are not already `0`/`1`
/// are mapped majority → 1; on equal counts the lexicographically smaller value
/// gets 1.
pub fn preprocess(raw: &RawTable) -> Result<Dataset> {
    let n = raw.n_rows();
    let mut names = Vec::new();
    let mut encoded: Vec<Vec<f64>> = Vec::new();

    for col in &raw.columns {
        match &col.values {
            RawValues::Numeric(values) => {
                let mut observed: Vec<f64> = values.iter().flatten().copied().collect();
                if observed.is_empty() {
                    return Err(Error::EmptyColumn(col.name.clone()));
                }
                let fill = median(&mut observed);
                encoded.push(values.iter().map(|v| v.unwrap_or(fill)).collect());
                names.push(col.name.clone());
            }
            RawValues::Categorical(values) => {
                if values.iter().all(Option::is_none) {
                    return Err(Error::EmptyColumn(col.name.clone()));
                }
                // first-appearance order
                let mut categories: Vec<&str> = Vec::new();
                for v in values {
                    let cat = v.as_deref().unwrap_or(MISSING_CATEGORY);
                    if !categories.contains(&cat) {
                        categories.push(cat);
                    }
                }
                for cat in categories {
                    encoded.push(
                        values
                            .iter()
                            .map(|v| {
                                f64::from(u8::from(v.as_deref().unwrap_or(MISSING_CATEGORY) == cat))
                            })
                            .collect(),
                    );
                    names.push(format!("{}={}", col.name, cat));
                }
            }
        }
    }
    if encoded.is_empty() {
        return Err(Error::NoFeatures);
    }

    let labels = map_labels(&raw.labels)?;
    let p = encoded.len();
    let mut flat = Vec::with_capacity(n * p);
    for i in 0..n {
        flat.extend(encoded.iter().map(|c| c[i]));
    }
    Dataset::from_flat(flat, n, p, labels, names, raw.source_name.clone())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn map_labels(raw: &[String]) -> Result<Vec<u8>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in raw {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    if counts.len() != 2 {
        return Err(Error::NotBinary(counts.len()));
    }
    let numeric: Vec<Option<f64>> = counts.keys().map(|k| k.parse::<f64>().ok()).collect();
    if numeric == [Some(0.0), Some(1.0)] {
        return Ok(raw
            .iter()
            .map(|l| u8::from(l.parse::<f64>().ok() == Some(1.0)))
            .collect());
    }
    // Lexicographic iteration; keeping the first maximum sends count ties to
    // the smaller string.
    let positive = counts
        .iter()
        .fold(None::<(&str, usize)>, |best, (&k, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .map(|(k, _)| k)
        .expect("two labels");
    Ok(raw.iter().map(|l| u8::from(l == positive)).collect())
}

/// Train/test partition of a dataset plus fold ids for the training rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Ascending row indices.
    pub train_indices: Vec<usize>,
    /// Ascending row indices.
    pub test_indices: Vec<usize>,
    /// Fold id of `train_indices[i]`.
    pub train_folds: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn fold_of(&self, row: usize) -> Option<usize> {
        self.train_indices
            .binary_search(&row)
            .ok()
            .map(|pos| self.train_folds[pos])
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.train_folds {
            sizes[f] += 1;
        }
        sizes
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified holdout plus stratified fold assignment of the training rows.
pub fn make_split(
    dataset: &Dataset,
    test_fraction: f64,
    folds: usize,
    seed: u64,
) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "folds must be >= 2, got {folds}"
        )));
    }
    let n = dataset.n_rows();
    let n_test = round_half_up(test_fraction * n as f64);
    let [n0, n1] = dataset.class_counts();
    let test1 = round_half_up(n_test as f64 * n1 as f64 / n as f64).min(n1);
    let test0 = (n_test - test1).min(n0);
    let test_per_class = [test0, test1];

    let mut r = rng(seed);
    let mut test = Vec::with_capacity(n_test);
    let mut train_by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for class in 0..2u8 {
        let mut rows: Vec<usize> = (0..n).filter(|&i| dataset.label(i) == class).collect();
        rows.shuffle(&mut r);
        let (t, rest) = rows.split_at(test_per_class[class as usize]);
        test.extend_from_slice(t);
        if rest.len() < folds {
            return Err(Error::Stratification {
                class,
                found: rest.len(),
                needed: folds,
            });
        }
        train_by_class[class as usize] = rest.to_vec();
    }

    // Dealing class 0 then class 1 round-robin keeps both fold sizes and
    // per-fold class counts within one of each other.
    let mut assigned: Vec<(usize, usize)> = train_by_class
        .iter()
        .flatten()
        .enumerate()
        .map(|(pos, &row)| (row, pos % folds))
        .collect();
    assigned.sort_unstable();
    test.sort_unstable();

    Ok(SplitPlan {
        train_indices: assigned.iter().map(|&(row, _)| row).collect(),
        train_folds: assigned.iter().map(|&(_, f)| f).collect(),
        test_indices: test,
        n_folds: folds,
        seed,
    })
}
