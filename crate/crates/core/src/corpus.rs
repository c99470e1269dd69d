//! Corpus ingestion: JSONL dataset-visualization pairs and raw CSV tables.
//!
//! A corpus line looks like
//!
//! ```text
//! {"id": "t1", "columns": [{"name": "date", "values": ["2020-01-01", null]}],
//!  "labels": [{"column": 0, "vis_type": "line", "axis": "x"}]}
//! ```
//!
//! Cells are JSON strings, numbers or `null` (missing). Column types are
//! inferred from the cell text with [`infer_column_types`].

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// One typed cell. Datetimes are stored as milliseconds since the Unix epoch (UTC).
#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    Integer(i64),
    Decimal(f64),
    Text(String),
    DateTime(i64),
    Missing,
}

impl CellValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    /// Numeric view used by value statistics. Datetimes map to epoch seconds.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            CellValue::Integer(v) => Some(*v as f64),
            CellValue::Decimal(v) => Some(*v),
            CellValue::DateTime(ms) => Some(*ms as f64 / 1000.0),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CellValue::Integer(v) => Value::from(*v),
            CellValue::Decimal(v) => serde_json::Number::from_f64(*v)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            CellValue::Text(s) => Value::String(s.clone()),
            CellValue::DateTime(ms) => Value::String(format_datetime(*ms)),
            CellValue::Missing => Value::Null,
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Integer(v) => write!(f, "{v}"),
            CellValue::Decimal(v) => write!(f, "{v}"),
            CellValue::Text(s) => f.write_str(s),
            CellValue::DateTime(ms) => f.write_str(&format_datetime(*ms)),
            CellValue::Missing => Ok(()),
        }
    }
}

fn format_datetime(ms: i64) -> String {
    match DateTime::from_timestamp_millis(ms) {
        Some(dt) if ms % 1000 == 0 => dt.to_rfc3339_opts(SecondsFormat::Secs, true),
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ms.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneralType {
    Categorical,
    Quantitative,
    Temporal,
}

impl GeneralType {
    pub const ALL: [GeneralType; 3] = [Self::Categorical, Self::Quantitative, Self::Temporal];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecificType {
    String,
    Integer,
    Decimal,
    DateTime,
}

impl SpecificType {
    pub const ALL: [SpecificType; 4] = [Self::String, Self::Integer, Self::Decimal, Self::DateTime];

    pub fn general(self) -> GeneralType {
        match self {
            SpecificType::String => GeneralType::Categorical,
            SpecificType::Integer | SpecificType::Decimal => GeneralType::Quantitative,
            SpecificType::DateTime => GeneralType::Temporal,
        }
    }
}

/// The six supported chart types, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisType {
    Bar,
    Box,
    Heatmap,
    Histogram,
    Line,
    Scatter,
}

impl VisType {
    pub const ALL: [VisType; 6] = [
        Self::Bar,
        Self::Box,
        Self::Heatmap,
        Self::Histogram,
        Self::Line,
        Self::Scatter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VisType::Bar => "bar",
            VisType::Box => "box",
            VisType::Heatmap => "heatmap",
            VisType::Histogram => "histogram",
            VisType::Line => "line",
            VisType::Scatter => "scatter",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Box plots and histograms are specified on a single axis.
    pub fn is_single_axis(self) -> bool {
        matches!(self, VisType::Box | VisType::Histogram)
    }
}

impl fmt::Display for VisType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VisType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VisType::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown vis_type \"{s}\"")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub const ALL: [Axis; 2] = [Axis::X, Axis::Y];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn flipped(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            _ => Err(Error::InvalidInput(format!("unknown axis \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisLabel {
    pub vis_type: VisType,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataColumn {
    pub name: String,
    pub values: Vec<CellValue>,
    pub general_type: GeneralType,
    pub specific_type: SpecificType,
}

impl DataColumn {
    pub fn non_missing(&self) -> impl Iterator<Item = &CellValue> {
        self.values.iter().filter(|v| !v.is_missing())
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_missing()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub id: String,
    pub columns: Vec<DataColumn>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.iter().map(|c| c.values.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub table: Table,
    pub labels: BTreeMap<usize, VisLabel>,
}

impl CorpusRecord {
    /// Shared chart type of the record, if any column is labeled.
    pub fn vis_type(&self) -> Option<VisType> {
        self.labels.values().next().map(|l| l.vis_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// 1-based line number in the source file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    fn push(&mut self, line: usize, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line,
            message: message.into(),
        });
    }
}

// ---------------------------------------------------------------------------
// Type inference

const MISSING_TOKENS: [&str; 4] = ["na", "n/a", "nan", "null"];

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || MISSING_TOKENS.iter().any(|m| t.eq_ignore_ascii_case(m))
}

/// Parses a cell under the recognised datetime formats and returns epoch milliseconds.
///
/// Recognised: `YYYY-MM-DD`, `YYYY/MM/DD`, ISO-8601 datetimes (`T` or space
/// separator, optional fractional seconds, optional `Z`/offset) and epoch
/// seconds written as `@<seconds>`.
pub fn parse_datetime(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Some(epoch) = s.strip_prefix('@') {
        return epoch.parse::<i64>().ok().and_then(|v| v.checked_mul(1000));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp_millis());
        }
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return d.and_hms_opt(0, 0, 0).map(|dt| dt.and_utc().timestamp_millis());
        }
    }
    None
}

/// Types a raw column. `None` and the missing tokens (`""`, `NA`, `N/A`,
/// `NaN`, `null`) are missing cells.
///
/// Precedence is integer, decimal, datetime, string. Non-finite numbers in a
/// numeric column become missing.
pub fn infer_column_types(raw: &[Option<&str>], name: &str) -> Result<DataColumn> {
    if raw.is_empty() {
        return Err(Error::EmptyColumn(name.to_string()));
    }
    let cells: Vec<Option<&str>> = raw
        .iter()
        .map(|c| c.filter(|s| !is_missing_token(s)).map(str::trim))
        .collect();
    if cells.iter().all(Option::is_none) {
        return Err(Error::EmptyColumn(name.to_string()));
    }

    let present = || cells.iter().flatten();
    let all_int = present().all(|s| s.parse::<i64>().is_ok());
    let all_numeric = present().all(|s| s.parse::<f64>().is_ok());

    let (specific_type, values): (SpecificType, Vec<CellValue>) = if all_int {
        let values = cells
            .iter()
            .map(|c| c.map_or(CellValue::Missing, |s| CellValue::Integer(s.parse().unwrap())))
            .collect();
        (SpecificType::Integer, values)
    } else if all_numeric {
        let values: Vec<CellValue> = cells
            .iter()
            .map(|c| match c.map(|s| s.parse::<f64>().unwrap()) {
                Some(v) if v.is_finite() => CellValue::Decimal(v),
                _ => CellValue::Missing,
            })
            .collect();
        if values.iter().all(CellValue::is_missing) {
            return Err(Error::EmptyColumn(name.to_string()));
        }
        (SpecificType::Decimal, values)
    } else if present().all(|s| parse_datetime(s).is_some()) {
        let values = cells
            .iter()
            .map(|c| c.map_or(CellValue::Missing, |s| CellValue::DateTime(parse_datetime(s).unwrap())))
            .collect();
        (SpecificType::DateTime, values)
    } else {
        let values = cells
            .iter()
            .map(|c| c.map_or(CellValue::Missing, |s| CellValue::Text(s.to_string())))
            .collect();
        (SpecificType::String, values)
    };

    Ok(DataColumn {
        name: name.to_string(),
        values,
        general_type: specific_type.general(),
        specific_type,
    })
}

// ---------------------------------------------------------------------------
// JSONL corpus

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    columns: Vec<RawColumn>,
    #[serde(default)]
    labels: Vec<RawLabel>,
}

#[derive(Deserialize)]
struct RawColumn {
    name: String,
    values: Vec<Value>,
}

#[derive(Deserialize)]
struct RawLabel {
    column: usize,
    vis_type: String,
    axis: String,
}

fn cell_text(v: &Value) -> std::result::Result<Option<String>, String> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        other => Err(format!("cell must be a string, number or null, got {other}")),
    }
}

fn build_columns(raw: Vec<RawColumn>) -> std::result::Result<(Vec<DataColumn>, Vec<Option<usize>>), String> {
    // remap[i] = new index of raw column i, None when the column was dropped
    let mut columns = Vec::with_capacity(raw.len());
    let mut remap = Vec::with_capacity(raw.len());
    for col in raw {
        let texts = col
            .values
            .iter()
            .map(cell_text)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let borrowed: Vec<Option<&str>> = texts.iter().map(|t| t.as_deref()).collect();
        match infer_column_types(&borrowed, &col.name) {
            Ok(c) => {
                remap.push(Some(columns.len()));
                columns.push(c);
            }
            Err(Error::EmptyColumn(_)) => remap.push(None),
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok((columns, remap))
}

fn parse_record_line(line: &str) -> std::result::Result<(CorpusRecord, Vec<String>), String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| format!("invalid record: {e}"))?;
    if raw.columns.is_empty() {
        return Err("record has no columns".into());
    }
    let n_raw = raw.columns.len();
    let mut notes = Vec::new();
    let mut raw_labels = BTreeMap::new();
    for l in &raw.labels {
        let vis_type = VisType::from_str(&l.vis_type).map_err(|e| e.to_string())?;
        let axis = Axis::from_str(&l.axis).map_err(|e| e.to_string())?;
        if l.column >= n_raw {
            return Err(format!("label references column {} but the table has {n_raw}", l.column));
        }
        if raw_labels.insert(l.column, VisLabel { vis_type, axis }).is_some() {
            return Err(format!("column {} is labeled twice", l.column));
        }
    }
    let mut types = raw_labels.values().map(|l| l.vis_type);
    if let Some(first) = types.next() {
        if types.any(|t| t != first) {
            return Err("labels of one record must share a vis_type".into());
        }
    }

    let (columns, remap) = build_columns(raw.columns)?;
    if columns.is_empty() {
        return Err("every column is empty".into());
    }
    let mut labels = BTreeMap::new();
    for (i, new) in remap.iter().enumerate() {
        match new {
            Some(j) => {
                if let Some(l) = raw_labels.get(&i) {
                    labels.insert(*j, *l);
                }
            }
            None => notes.push(format!("column {i} is empty and was removed")),
        }
    }
    Ok((
        CorpusRecord {
            table: Table { id: raw.id, columns },
            labels,
        },
        notes,
    ))
}

/// Reads JSONL records; bad lines are skipped and reported with their line number.
pub fn parse_corpus_reader<R: Read>(reader: R) -> Result<(Vec<CorpusRecord>, ParseReport)> {
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record_line(&line) {
            Ok((record, notes)) => {
                for n in notes {
                    report.push(lineno, n);
                }
                records.push(record);
            }
            Err(msg) => report.push(lineno, msg),
        }
    }
    Ok((records, report))
}

pub fn parse_corpus(path: &Path) -> Result<(Vec<CorpusRecord>, ParseReport)> {
    let file = std::fs::File::open(path)?;
    parse_corpus_reader(file)
}

fn columns_json(table: &Table) -> Vec<Value> {
    table
        .columns
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "values": c.values.iter().map(CellValue::to_json).collect::<Vec<_>>(),
            })
        })
        .collect()
}

/// Serializes one record as a single JSONL line (no trailing newline).
pub fn record_to_json_line(record: &CorpusRecord) -> String {
    let labels: Vec<Value> = record
        .labels
        .iter()
        .map(|(col, l)| serde_json::json!({"column": col, "vis_type": l.vis_type, "axis": l.axis}))
        .collect();
    serde_json::json!({
        "id": record.table.id,
        "columns": columns_json(&record.table),
        "labels": labels,
    })
    .to_string()
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&record_to_json_line(r));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Drops unlabeled columns, then records left without any labeled column.
pub fn clean_records(records: Vec<CorpusRecord>) -> Vec<CorpusRecord> {
    records
        .into_iter()
        .filter_map(|record| {
            let CorpusRecord { table, labels } = record;
            let mut kept_labels = BTreeMap::new();
            let mut columns = Vec::new();
            for (i, col) in table.columns.into_iter().enumerate() {
                if let Some(l) = labels.get(&i) {
                    kept_labels.insert(columns.len(), *l);
                    columns.push(col);
                }
            }
            (!columns.is_empty()).then(|| CorpusRecord {
                table: Table { id: table.id, columns },
                labels: kept_labels,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Plain tables (CSV and table JSON)

/// Parses a CSV table whose first row is the header. Empty columns are dropped.
pub fn parse_csv_table<R: Read>(reader: R, id: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() {
        return Err(Error::InvalidInput("csv has no header".into()));
    }
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for row in rdr.records() {
        let row = row?;
        for (i, col) in raw.iter_mut().enumerate() {
            col.push(row.get(i).map(str::to_string));
        }
    }
    let mut columns = Vec::new();
    for (name, cells) in headers.iter().zip(&raw) {
        let borrowed: Vec<Option<&str>> = cells.iter().map(|c| c.as_deref()).collect();
        match infer_column_types(&borrowed, name) {
            Ok(c) => columns.push(c),
            Err(Error::EmptyColumn(_)) => log::warn!("dropping empty column \"{name}\""),
            Err(e) => return Err(e),
        }
    }
    if columns.is_empty() {
        return Err(Error::InvalidInput("table has no non-empty column".into()));
    }
    Ok(Table {
        id: id.to_string(),
        columns,
    })
}

/// Parses `{"id"?: str, "columns": [{"name": str, "values": [cell]}]}`.
pub fn parse_table_json(text: &str, default_id: &str) -> Result<Table> {
    #[derive(Deserialize)]
    struct RawTable {
        id: Option<String>,
        columns: Vec<RawColumn>,
    }
    let raw: RawTable = serde_json::from_str(text)?;
    let (columns, _) = build_columns(raw.columns).map_err(Error::InvalidInput)?;
    if columns.is_empty() {
        return Err(Error::InvalidInput("table has no non-empty column".into()));
    }
    Ok(Table {
        id: raw.id.unwrap_or_else(|| default_id.to_string()),
        columns,
    })
}

pub fn table_to_json(table: &Table) -> Value {
    serde_json::json!({"id": table.id, "columns": columns_json(table)})
}
