//! Self-describing numeric tables in CSV and JSON.
//!
//! A CSV file starts with `# key: value` metadata lines (multi-line values
//! repeat the key on each line), the first being `# schema_version: N`,
//! followed by a header row and numeric rows printed with 17 significant
//! digits so every value reads back bit for bit. The JSON form carries the
//! same metadata, column names and rows; non-finite numbers are written as
//! the strings `"inf"`, `"-inf"` and `"nan"`.

use crate::error::{Error, Result};
use crate::sim::Trace;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

/// Version written into every output file.
pub const SCHEMA_VERSION: u32 = 1;

const SCHEMA_KEY: &str = "schema_version";
const STDERR_SUFFIX: &str = "_stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown format '{s}' (expected csv or json)"))),
        }
    }
}

/// Named numeric columns of equal length plus string metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    /// Row-major values, each row as long as `columns`.
    pub rows: Vec<Vec<f64>>,
    pub metadata: BTreeMap<String, String>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// A table from named columns of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.1.len());
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::Invalid("columns differ in length".into()));
        }
        let rows = (0..n).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        Ok(Self {
            columns: columns.into_iter().map(|c| c.0).collect(),
            rows,
            metadata: BTreeMap::new(),
        })
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Invalid(format!(
                "row has {} values but the table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Columns `axis, ch, ch_stderr, ...`, with the trace's metadata.
    pub fn from_trace(trace: &Trace) -> Self {
        let mut columns = vec![(trace.axis.clone(), trace.x.clone())];
        for c in &trace.channels {
            columns.push((c.name.clone(), c.mean.clone()));
            columns.push((format!("{}{STDERR_SUFFIX}", c.name), c.stderr.clone()));
        }
        let mut t = Self::from_columns(columns).expect("trace channels share the axis length");
        t.metadata = trace.metadata.clone();
        t
    }

    /// Inverse of [`Table::from_trace`].
    pub fn to_trace(&self) -> Result<Trace> {
        let Some(axis) = self.columns.first() else {
            return Err(Error::Parse("table has no columns".into()));
        };
        if self.columns.len() % 2 != 1 {
            return Err(Error::Parse("trace tables need an axis and (value, stderr) column pairs".into()));
        }
        let mut trace = Trace::new(axis.clone(), self.column(axis).unwrap_or_default());
        for pair in self.columns[1..].chunks(2) {
            let (name, err) = (&pair[0], &pair[1]);
            if *err != format!("{name}{STDERR_SUFFIX}") {
                return Err(Error::Parse(format!("column '{err}' should be '{name}{STDERR_SUFFIX}'")));
            }
            trace.push_channel(
                name.clone(),
                self.column(name).unwrap_or_default(),
                self.column(err).unwrap_or_default(),
            )?;
        }
        trace.metadata = self.metadata.clone();
        Ok(trace)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        write_metadata(&mut out, &self.metadata)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).map_err(csv_error)?;
            for row in &self.rows {
                w.write_record(row.iter().map(|v| format!("{v:.16e}"))).map_err(csv_error)?;
            }
            w.flush()?;
        }
        String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut metadata: BTreeMap<String, String> = BTreeMap::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix('#') else {
                break;
            };
            body_start += line.len();
            let rest = rest.trim_end_matches(['\n', '\r']);
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            let (key, value) = rest
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("metadata line without ':' : '{rest}'")))?;
            let value = value.strip_prefix(' ').unwrap_or(value);
            metadata
                .entry(key.to_string())
                .and_modify(|v| {
                    v.push('\n');
                    v.push_str(value);
                })
                .or_insert_with(|| value.to_string());
        }
        check_schema(metadata.remove(SCHEMA_KEY).as_deref())?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text[body_start..].as_bytes());
        let columns: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
        let mut table = Self::new(columns);
        table.metadata = metadata;
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let row = record
                .iter()
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{v}'"))))
                .collect::<Result<Vec<_>>>()?;
            table.push_row(row)?;
        }
        Ok(table)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let body = JsonTable {
            schema_version: SCHEMA_VERSION,
            metadata: self.metadata.clone(),
            columns: self.columns.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|&v| JsonNum(v)).collect()).collect(),
        };
        Ok(serde_json::to_string_pretty(&body)? + "\n")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let body: JsonTable = serde_json::from_str(text)?;
        check_schema(Some(&body.schema_version.to_string()))?;
        let mut table = Self::new(body.columns);
        table.metadata = body.metadata;
        for row in body.rows {
            table.push_row(row.into_iter().map(|v| v.0).collect())?;
        }
        Ok(table)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv_string(),
            Format::Json => self.to_json_string(),
        }
    }

    /// Parses either format, choosing JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json_str(text)
        } else {
            Self::from_csv_str(text)
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn check_schema(found: Option<&str>) -> Result<()> {
    match found {
        Some(v) if v.trim() == SCHEMA_VERSION.to_string() => Ok(()),
        Some(v) => Err(Error::Parse(format!("unsupported schema version '{v}'"))),
        None => Err(Error::Parse("missing schema version".into())),
    }
}

fn write_metadata(out: &mut Vec<u8>, metadata: &BTreeMap<String, String>) -> Result<()> {
    writeln!(out, "# {SCHEMA_KEY}: {SCHEMA_VERSION}")?;
    for (k, v) in metadata {
        if k == SCHEMA_KEY || k.contains([':', '\n']) {
            return Err(Error::Invalid(format!("metadata key '{k}' is reserved or malformed")));
        }
        for line in v.split('\n') {
            writeln!(out, "# {k}: {line}")?;
        }
    }
    Ok(())
}

/// A number that survives JSON even when infinite or NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
struct JsonNum(f64);

impl Serialize for JsonNum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for JsonNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(JsonNum(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(JsonNum(f64::INFINITY)),
                "-inf" => Ok(JsonNum(f64::NEG_INFINITY)),
                "nan" => Ok(JsonNum(f64::NAN)),
                _ => Err(de::Error::custom(format!("not a number: '{t}'"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    schema_version: u32,
    metadata: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<JsonNum>>,
}

#[derive(Serialize)]
struct Envelope<'a, R> {
    schema_version: u32,
    metadata: &'a BTreeMap<String, String>,
    #[serde(flatten)]
    body: &'a R,
}

/// A serializable report as a JSON object whose fields sit beside
/// `schema_version` and `metadata`.
pub fn report_json<R: Serialize>(report: &R, metadata: &BTreeMap<String, String>) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        metadata,
        body: report,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

/// Writes `contents` to a temporary file beside `path`, then renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_table(table: &Table, path: &Path, format: Format) -> Result<()> {
    write_atomic(path, &table.render(format)?)
}

pub fn read_table(path: &Path) -> Result<Table> {
    Table::parse(&std::fs::read_to_string(path)?)
}

pub fn write_trace(trace: &Trace, path: &Path, format: Format) -> Result<()> {
    write_table(&Table::from_trace(trace), path, format)
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    read_table(path)?.to_trace()
}

/// Writes a report as JSON, or as CSV through its one-row table form.
pub fn write_report<R: Serialize>(report: &R, table: &Table, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Json => write_atomic(path, &report_json(report, &table.metadata)?),
        Format::Csv => write_table(table, path, format),
    }
}
