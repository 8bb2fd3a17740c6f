//! Canonical records shared across the pipeline and their JSONL persistence.
//!
//! A dataset file is line-delimited JSON: the first line is a [`DatasetHeader`],
//! every following non-blank line is one [`CodePairRecord`]. Variant files use
//! the same header followed by [`VariantRecord`] lines.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mutation::OperatorCode;
use crate::optimizer::Strategy;

/// Schema tag written into every header line.
pub const SCHEMA: &str = "semdiff/1";

/// Sentinel df_score meaning every repetition timed out.
pub const ALL_TIMED_OUT: f64 = -1.0;

/// Tolerance between df_score and the mean of its repetition scores.
pub const MEAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl ModelError {
    fn io(path: &Path, source: io::Error) -> Self {
        ModelError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn schema(path: &Path, line: usize, message: impl Into<String>) -> Self {
        ModelError::Schema {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    /// Line number of a schema error, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            ModelError::Schema { line, .. } => Some(*line),
            ModelError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Function,
    Program,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Function => "function",
            Level::Program => "program",
        }
    }
}

/// One benchmark problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub source_benchmark: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nl_description: Option<String>,
    pub reference_code: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_point: Option<String>,
    /// Input-construction code written against the provider API.
    pub binding_program: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_input: Option<String>,
}

impl TaskSpec {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.task_id.is_empty() {
            out.push(Violation::new("task_id", "must be non-empty"));
        }
        match (self.level, &self.entry_point) {
            (Level::Function, None) => {
                out.push(Violation::new("entry_point", "required when level is function"))
            }
            (Level::Program, Some(_)) => {
                out.push(Violation::new("entry_point", "must be absent when level is program"))
            }
            _ => {}
        }
        if self.binding_program.trim().is_empty() {
            out.push(Violation::new("binding_program", "must be non-empty"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantKind {
    Optimized,
    Mutated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Provenance {
    Optimized {
        strategies: Vec<Strategy>,
    },
    /// The rewritten byte span of the original and what replaced it.
    Mutated {
        operator: OperatorCode,
        start: usize,
        end: usize,
        replacement: String,
    },
}

/// A generated variant of a task's reference implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantRecord {
    pub variant_id: String,
    pub task_id: String,
    pub variant_code: String,
    pub variant_kind: VariantKind,
    pub provenance: Provenance,
    pub parses_ok: bool,
}

impl VariantRecord {
    /// Whether the record may enter a dataset built from `reference_code`.
    pub fn admissible(&self, reference_code: &str) -> bool {
        self.parses_ok && self.variant_code != reference_code
    }
}

/// A scored `(code_ori, code_var)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodePairRecord {
    pub pair_id: String,
    pub task_id: String,
    pub code_ori: String,
    pub code_var: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_sim: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub df_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rep_scores: Option<Vec<f64>>,
    #[serde(default)]
    pub metric_scores: BTreeMap<String, f64>,
}

impl CodePairRecord {
    pub fn new(
        pair_id: impl Into<String>,
        task_id: impl Into<String>,
        code_ori: impl Into<String>,
        code_var: impl Into<String>,
        level: Level,
    ) -> Self {
        CodePairRecord {
            pair_id: pair_id.into(),
            task_id: task_id.into(),
            code_ori: code_ori.into(),
            code_var: code_var.into(),
            level,
            surface_sim: None,
            df_score: None,
            rep_scores: None,
            metric_scores: BTreeMap::new(),
        }
    }

    /// df_score when it is a real score (not absent, not the timeout sentinel).
    pub fn scored(&self) -> Option<f64> {
        self.df_score.filter(|d| (0.0..=1.0).contains(d))
    }
}

/// A single broken invariant: which field, which rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl Violation {
    fn new(field: &'static str, rule: impl Into<String>) -> Self {
        Violation {
            field,
            rule: rule.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Checks every [`CodePairRecord`] invariant. An empty list means the record is valid.
pub fn validate_record(r: &CodePairRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if r.pair_id.is_empty() {
        out.push(Violation::new("pair_id", "must be non-empty"));
    }
    if let Some(s) = r.surface_sim {
        if !in_unit(s) {
            out.push(Violation::new("surface_sim", format!("{s} is outside [0, 1]")));
        }
    }
    if let Some(d) = r.df_score {
        if !(in_unit(d) || d == ALL_TIMED_OUT) {
            out.push(Violation::new("df_score", format!("{d} is outside [0, 1] and not -1")));
        }
    }
    if let Some(reps) = &r.rep_scores {
        if let Some(bad) = reps.iter().find(|s| !in_unit(**s)) {
            out.push(Violation::new("rep_scores", format!("{bad} is outside [0, 1]")));
        }
        if reps.is_empty() {
            if let Some(d) = r.df_score.filter(|d| *d != ALL_TIMED_OUT) {
                out.push(Violation::new(
                    "df_score",
                    format!("{d} given but no repetition survived (expected -1)"),
                ));
            }
        } else {
            let mean = reps.iter().sum::<f64>() / reps.len() as f64;
            match r.df_score {
                Some(d) if (d - mean).abs() <= MEAN_TOLERANCE => {}
                Some(d) => out.push(Violation::new(
                    "df_score",
                    format!("{d} differs from the mean of rep_scores ({mean})"),
                )),
                None => out.push(Violation::new(
                    "df_score",
                    "missing although rep_scores are present",
                )),
            }
        }
    }
    for (name, v) in &r.metric_scores {
        if !v.is_finite() || *v < 0.0 {
            out.push(Violation::new(
                "metric_scores",
                format!("{name} = {v} is not a finite non-negative real"),
            ));
        }
    }
    out
}

/// Axis-aligned lines bounding the SFD and DFS corners of the
/// surface-similarity × df_score square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionThresholds {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl RegionThresholds {
    /// Returns `None` unless all values lie in [0, 1], `x_lo < x_hi` and `y_lo < y_hi`.
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Option<Self> {
        let t = RegionThresholds { x_lo, x_hi, y_lo, y_hi };
        t.is_valid().then_some(t)
    }

    pub fn is_valid(&self) -> bool {
        [self.x_lo, self.x_hi, self.y_lo, self.y_hi].iter().all(|v| in_unit(*v))
            && self.x_lo < self.x_hi
            && self.y_lo < self.y_hi
    }

    pub fn as_tuple(&self) -> (f64, f64, f64, f64) {
        (self.x_lo, self.x_hi, self.y_lo, self.y_hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub schema: String,
    pub tool_version: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
}

impl Default for DatasetHeader {
    fn default() -> Self {
        DatasetHeader {
            schema: SCHEMA.to_string(),
            tool_version: crate::TOOL_VERSION.to_string(),
            config_digest: String::new(),
            created_at: None,
        }
    }
}

impl DatasetHeader {
    pub fn with_digest(config_digest: impl Into<String>) -> Self {
        DatasetHeader {
            config_digest: config_digest.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<CodePairRecord>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, records: Vec<CodePairRecord>) -> Self {
        Dataset { header, records }
    }

    /// Validates every record and pair_id uniqueness; the first problem wins.
    /// Line numbers assume the file layout (header on line 1).
    pub fn validate(&self) -> Result<(), (usize, String)> {
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if let Some(v) = validate_record(r).first() {
                return Err((line, v.to_string()));
            }
            if !seen.insert(r.pair_id.as_str()) {
                return Err((line, format!("duplicate pair_id {:?}", r.pair_id)));
            }
        }
        Ok(())
    }
}

/// Reads a header-prefixed JSONL file, returning the header and raw records with
/// their line numbers. An empty file yields the default header.
fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(DatasetHeader, Vec<(usize, T)>), ModelError> {
    let file = File::open(path).map_err(|e| ModelError::io(path, e))?;
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| ModelError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: DatasetHeader = serde_json::from_str(&line)
                .map_err(|e| ModelError::schema(path, lineno, format!("invalid header: {e}")))?;
            if h.schema != SCHEMA {
                return Err(ModelError::schema(
                    path,
                    lineno,
                    format!("unsupported schema {:?} (expected {SCHEMA:?})", h.schema),
                ));
            }
            header = Some(h);
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| ModelError::schema(path, lineno, e.to_string()))?;
        records.push((lineno, rec));
    }
    Ok((header.unwrap_or_default(), records))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, ModelError> {
    let path = path.as_ref();
    let (header, raw) = read_jsonl::<CodePairRecord>(path)?;
    let mut seen = HashSet::new();
    let mut records = Vec::with_capacity(raw.len());
    for (line, r) in raw {
        if let Some(v) = validate_record(&r).first() {
            return Err(ModelError::schema(path, line, v.to_string()));
        }
        if !seen.insert(r.pair_id.clone()) {
            return Err(ModelError::schema(path, line, format!("duplicate pair_id {:?}", r.pair_id)));
        }
        records.push(r);
    }
    Ok(Dataset { header, records })
}

fn write_jsonl<T: Serialize>(path: &Path, header: &DatasetHeader, records: &[T]) -> Result<(), ModelError> {
    let file = File::create(path).map_err(|e| ModelError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: io::Error| ModelError::io(path, e);
    serde_json::to_writer(&mut w, header).map_err(|e| io_err(e.into()))?;
    w.write_all(b"\n").map_err(io_err)?;
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(e.into()))?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    if let Err((line, msg)) = ds.validate() {
        return Err(ModelError::schema(path, line, msg));
    }
    write_jsonl(path, &ds.header, &ds.records)
}

/// Single-writer appender used for checkpointing long runs.
pub struct DatasetAppender {
    path: PathBuf,
    out: BufWriter<File>,
}

impl DatasetAppender {
    /// Opens `path` for appending, writing `header` first if the file is new or empty.
    pub fn open(path: impl AsRef<Path>, header: &DatasetHeader) -> Result<Self, ModelError> {
        let path = path.as_ref().to_path_buf();
        let fresh = std::fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| ModelError::io(&path, e))?;
        let mut app = DatasetAppender {
            out: BufWriter::new(file),
            path,
        };
        if fresh {
            app.write_line(header)?;
        }
        Ok(app)
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<(), ModelError> {
        let path = self.path.clone();
        serde_json::to_writer(&mut self.out, value).map_err(|e| ModelError::io(&path, e.into()))?;
        self.out.write_all(b"\n").map_err(|e| ModelError::io(&path, e))?;
        self.out.flush().map_err(|e| ModelError::io(&path, e))
    }

    pub fn append(&mut self, record: &CodePairRecord) -> Result<(), ModelError> {
        if let Some(v) = validate_record(record).first() {
            return Err(ModelError::schema(&self.path, 0, format!("{}: {v}", record.pair_id)));
        }
        self.write_line(record)
    }
}

pub fn load_variants(path: impl AsRef<Path>) -> Result<(DatasetHeader, Vec<VariantRecord>), ModelError> {
    let path = path.as_ref();
    let (header, raw) = read_jsonl::<VariantRecord>(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(raw.len());
    for (line, v) in raw {
        if !seen.insert(v.variant_id.clone()) {
            return Err(ModelError::schema(path, line, format!("duplicate variant_id {:?}", v.variant_id)));
        }
        out.push(v);
    }
    Ok((header, out))
}

pub fn save_variants(
    header: &DatasetHeader,
    variants: &[VariantRecord],
    path: impl AsRef<Path>,
) -> Result<(), ModelError> {
    write_jsonl(path.as_ref(), header, variants)
}

/// Loads a task corpus: one [`TaskSpec`] per line, optionally preceded by a header.
pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<TaskSpec>, ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| ModelError::io(path, e))?;
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| ModelError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if tasks.is_empty() && serde_json::from_str::<DatasetHeader>(&line).is_ok() {
            continue;
        }
        let t: TaskSpec = serde_json::from_str(&line).map_err(|e| ModelError::schema(path, lineno, e.to_string()))?;
        if let Some(v) = t.validate().first() {
            return Err(ModelError::schema(path, lineno, v.to_string()));
        }
        if !seen.insert(t.task_id.clone()) {
            return Err(ModelError::schema(path, lineno, format!("duplicate task_id {:?}", t.task_id)));
        }
        tasks.push(t);
    }
    Ok(tasks)
}

/// The JSONL line for `header`.
pub fn header_line(header: &DatasetHeader) -> String {
    serde_json::to_string(header).expect("header serializes")
}
