//! Effort datasets with mixed continuous and categorical features.
//!
//! A dataset is an RFC-4180 CSV file with a header row plus a schema
//! sidecar that declares one `name,kind,role` line per CSV column.
//! Blank lines and lines starting with `#` in the sidecar are skipped.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema line {line}: {message}")]
    SchemaSyntax { line: usize, message: String },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("schema must declare exactly one effort column, found {0}")]
    EffortCount(usize),
    #[error("effort column `{0}` must be continuous")]
    EffortNotContinuous(String),
    #[error("CSV header does not match schema (missing from CSV: {missing:?}; not in schema: {extra:?})")]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    FieldCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: non-numeric continuous value `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: continuous value must be finite")]
    NonFinite { row: usize, column: String },
    #[error("row {row}, column `{column}`: missing predictor value")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: missing effort in a training row")]
    MissingEffort { row: usize },
    #[error("row {row}: negative effort {value}")]
    NegativeEffort { row: usize, value: f64 },
    #[error("record `{id}` has {found} values, schema has {expected} columns")]
    RecordShape {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("record `{id}`, column `{column}`: value does not match the declared kind")]
    KindMismatch { id: String, column: String },
    #[error(
        "invalid project id `{0}` (ids must be non-empty and free of commas, tabs and newlines)"
    )]
    InvalidId(String),
    #[error("duplicate project id `{0}`")]
    DuplicateId(String),
    #[error("dataset is empty")]
    Empty,
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    Predictor,
    Effort,
    Ignored,
}

impl FromStr for FeatureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "continuous" => Ok(FeatureKind::Continuous),
            "categorical" => Ok(FeatureKind::Categorical),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

impl FromStr for FeatureRole {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "predictor" => Ok(FeatureRole::Predictor),
            "effort" => Ok(FeatureRole::Effort),
            "ignored" => Ok(FeatureRole::Ignored),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Categorical => "categorical",
        })
    }
}

impl fmt::Display for FeatureRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureRole::Predictor => "predictor",
            FeatureRole::Effort => "effort",
            FeatureRole::Ignored => "ignored",
        })
    }
}

/// One column of the dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    pub role: FeatureRole,
}

impl FeatureSchema {
    pub fn new(name: impl Into<String>, kind: FeatureKind, role: FeatureRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }
}

/// Validated list of columns: unique names, exactly one continuous effort column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    features: Vec<FeatureSchema>,
    effort: usize,
    id: Option<usize>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSchema>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(DatasetError::DuplicateFeature(f.name.clone()));
            }
        }
        let efforts: Vec<usize> = features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FeatureRole::Effort)
            .map(|(i, _)| i)
            .collect();
        if efforts.len() != 1 {
            return Err(DatasetError::EffortCount(efforts.len()));
        }
        let effort = efforts[0];
        if features[effort].kind != FeatureKind::Continuous {
            return Err(DatasetError::EffortNotContinuous(
                features[effort].name.clone(),
            ));
        }
        // An ignored column literally named `id` supplies record ids.
        let id = features
            .iter()
            .position(|f| f.role == FeatureRole::Ignored && f.name.eq_ignore_ascii_case("id"));
        Ok(Self {
            features,
            effort,
            id,
        })
    }

    /// Parse the `name,kind,role` sidecar format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut features = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| DatasetError::SchemaSyntax {
                line: lineno + 1,
                message,
            };
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 3 {
                return Err(syntax(format!(
                    "expected `name,kind,role`, found {} fields",
                    parts.len()
                )));
            }
            let name = parts[0].trim();
            if name.is_empty() {
                return Err(syntax("empty column name".into()));
            }
            let kind = parts[1].trim().parse().map_err(syntax)?;
            let role = parts[2].trim().parse().map_err(syntax)?;
            features.push(FeatureSchema::new(name, kind, role));
        }
        Self::new(features)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Render back into the sidecar format.
    pub fn to_sidecar(&self) -> String {
        self.features
            .iter()
            .map(|f| format!("{},{},{}\n", f.name, f.kind, f.role))
            .collect()
    }

    pub fn features(&self) -> &[FeatureSchema] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn effort_index(&self) -> usize {
        self.effort
    }

    pub fn id_index(&self) -> Option<usize> {
        self.id
    }

    pub fn predictor_indices(&self) -> Vec<usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| f.role == FeatureRole::Predictor)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

/// A single cell. Ignored columns keep their raw text as `Cat`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Num(f64),
    Cat(Arc<str>),
    Missing,
}

impl FeatureValue {
    pub fn cat(token: &str) -> Self {
        FeatureValue::Cat(Arc::from(token))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Num(v) => write!(f, "{v}"),
            FeatureValue::Cat(s) => f.write_str(s),
            FeatureValue::Missing => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectRecord {
    pub id: String,
    /// One value per schema column, in schema order.
    pub values: Vec<FeatureValue>,
    /// `None` only for query projects.
    pub effort: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl FeatureStats {
    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    fn from_values(values: impl Iterator<Item = f64>) -> Option<Self> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        (n > 0).then(|| FeatureStats {
            min,
            max,
            mean: sum / n as f64,
        })
    }
}

/// A nonempty training set: every record has a known, nonnegative effort.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct ProjectSet {
    schema: Arc<Schema>,
    records: Vec<ProjectRecord>,
    stats: Vec<Option<FeatureStats>>,
}

impl ProjectSet {
    pub fn new(schema: Arc<Schema>, records: Vec<ProjectRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut ids = HashSet::new();
        for (row, r) in records.iter().enumerate() {
            check_record(&schema, r)?;
            match r.effort {
                None => return Err(DatasetError::MissingEffort { row }),
                Some(e) if e < 0.0 => return Err(DatasetError::NegativeEffort { row, value: e }),
                Some(_) => {}
            }
            if !ids.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
        }
        let stats = compute_stats(&schema, &records);
        Ok(Self {
            schema,
            records,
            stats,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn records(&self) -> &[ProjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Stats per schema column; `Some` for every continuous, non-ignored column.
    pub fn stats(&self) -> &[Option<FeatureStats>] {
        &self.stats
    }

    pub fn effort_stats(&self) -> FeatureStats {
        self.stats[self.schema.effort_index()].expect("effort column always has stats")
    }

    pub fn effort(&self, index: usize) -> f64 {
        self.records[index]
            .effort
            .expect("training records carry effort")
    }

    pub fn efforts(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.effort.unwrap_or(f64::NAN))
    }

    /// New set holding the given rows, in the given order, with stats
    /// recomputed over those rows only.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Self::new(Arc::clone(&self.schema), records)
    }

    /// Training fold for leave-one-out: every row except `held_out`.
    pub fn without(&self, held_out: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| i != held_out).collect();
        self.subset(&keep)
    }

    /// Recompute stats from the records and compare with the stored ones.
    pub fn stats_consistent(&self) -> bool {
        compute_stats(&self.schema, &self.records) == self.stats
    }
}

fn check_record(schema: &Schema, r: &ProjectRecord) -> Result<()> {
    if r.values.len() != schema.len() {
        return Err(DatasetError::RecordShape {
            id: r.id.clone(),
            expected: schema.len(),
            found: r.values.len(),
        });
    }
    validate_id(&r.id)?;
    for (f, v) in schema.features().iter().zip(&r.values) {
        let ok = match (f.role, f.kind, v) {
            (FeatureRole::Ignored, _, _) => true,
            (FeatureRole::Effort, _, FeatureValue::Missing) => r.effort.is_none(),
            (FeatureRole::Effort, _, FeatureValue::Num(x)) => x.is_finite() && r.effort == Some(*x),
            (FeatureRole::Predictor, FeatureKind::Continuous, FeatureValue::Num(x)) => {
                x.is_finite()
            }
            (FeatureRole::Predictor, FeatureKind::Categorical, FeatureValue::Cat(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(DatasetError::KindMismatch {
                id: r.id.clone(),
                column: f.name.clone(),
            });
        }
    }
    Ok(())
}

fn validate_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains([',', '\t', '\n', '\r']) {
        return Err(DatasetError::InvalidId(id.to_string()));
    }
    Ok(())
}

fn compute_stats(schema: &Schema, records: &[ProjectRecord]) -> Vec<Option<FeatureStats>> {
    schema
        .features()
        .iter()
        .enumerate()
        .map(|(col, f)| {
            if f.kind != FeatureKind::Continuous || f.role == FeatureRole::Ignored {
                return None;
            }
            FeatureStats::from_values(records.iter().filter_map(|r| r.values[col].as_num()))
        })
        .collect()
}

fn is_missing(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t == "?"
}

/// Parse CSV text into records in schema order. Effort may be missing;
/// callers decide whether that is acceptable.
fn parse_records(schema: &Schema, csv_text: &str) -> Result<Vec<ProjectRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    // Map every schema column onto its CSV position.
    let mut missing = Vec::new();
    let mut positions = Vec::with_capacity(schema.len());
    for f in schema.features() {
        match headers.iter().position(|h| *h == f.name) {
            Some(p) => positions.push(p),
            None => missing.push(f.name.clone()),
        }
    }
    let mut seen = HashSet::new();
    let extra: Vec<String> = headers
        .iter()
        .filter(|h| schema.position(h).is_none() || !seen.insert(h.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(DatasetError::ColumnMismatch { missing, extra });
    }

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        if rec.len() != headers.len() {
            return Err(DatasetError::FieldCount {
                row,
                expected: headers.len(),
                found: rec.len(),
            });
        }
        let mut values = Vec::with_capacity(schema.len());
        let mut effort = None;
        for (f, &p) in schema.features().iter().zip(&positions) {
            let raw = &rec[p];
            let value = match f.role {
                FeatureRole::Ignored => {
                    if raw.is_empty() {
                        FeatureValue::Missing
                    } else {
                        FeatureValue::cat(raw)
                    }
                }
                FeatureRole::Effort => {
                    if is_missing(raw) {
                        FeatureValue::Missing
                    } else {
                        let v = parse_number(raw, row, &f.name)?;
                        if v < 0.0 {
                            return Err(DatasetError::NegativeEffort { row, value: v });
                        }
                        effort = Some(v);
                        FeatureValue::Num(v)
                    }
                }
                FeatureRole::Predictor => {
                    if is_missing(raw) {
                        return Err(DatasetError::MissingValue {
                            row,
                            column: f.name.clone(),
                        });
                    }
                    match f.kind {
                        FeatureKind::Continuous => {
                            FeatureValue::Num(parse_number(raw, row, &f.name)?)
                        }
                        FeatureKind::Categorical => FeatureValue::cat(raw),
                    }
                }
            };
            values.push(value);
        }
        let id = match schema.id_index() {
            Some(col) => values[col].to_string().trim().to_string(),
            None => row.to_string(),
        };
        validate_id(&id)?;
        records.push(ProjectRecord { id, values, effort });
    }
    Ok(records)
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| DatasetError::NonNumeric {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::NonFinite {
            row,
            column: column.to_string(),
        });
    }
    Ok(v)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Build a training set from in-memory CSV text and a parsed schema.
pub fn parse_dataset(csv_text: &str, schema: Schema) -> Result<ProjectSet> {
    let records = parse_records(&schema, csv_text)?;
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    if let Some(row) = records.iter().position(|r| r.effort.is_none()) {
        return Err(DatasetError::MissingEffort { row });
    }
    ProjectSet::new(Arc::new(schema), records)
}

/// Load a training dataset from a CSV file and its schema sidecar.
pub fn load_dataset(
    csv_path: impl AsRef<Path>,
    schema_path: impl AsRef<Path>,
) -> Result<ProjectSet> {
    let schema = Schema::from_path(schema_path)?;
    let text = read_text(csv_path.as_ref())?;
    parse_dataset(&text, schema)
}

/// Load query projects; the effort column may be blank or `?`.
pub fn load_queries(csv_path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<ProjectRecord>> {
    let text = read_text(csv_path.as_ref())?;
    let records = parse_records(schema, &text)?;
    for r in &records {
        check_record(schema, r)?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub cases: usize,
    pub effort_min: f64,
    pub effort_max: f64,
    pub effort_mean: f64,
    pub features: Vec<FeatureSchema>,
}

pub fn describe(ps: &ProjectSet) -> DatasetSummary {
    let e = ps.effort_stats();
    DatasetSummary {
        cases: ps.len(),
        effort_min: e.min,
        effort_max: e.max,
        effort_mean: e.mean,
        features: ps.schema().features().to_vec(),
    }
}
