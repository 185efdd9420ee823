//! Versioned file schemas and the checker for emitted files.
//!
//! Tables are tab-separated with a comment preamble:
//!
//! ```text
//! # schema: modes v1
//! # <description>
//! # s [1]: similarity time -ln(T - t)
//! s	n	theta	...
//! ```
//!
//! TOML files carry `schema` and `schema_version` keys. The eigensystem dump
//! is recognised by its own header line.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::spectral::tables::TABLES_HEADER;

const SOURCES: [&str; 16] = [
    include_str!("../../schemas/modes.toml"),
    include_str!("../../schemas/norms.toml"),
    include_str!("../../schemas/snapshot.toml"),
    include_str!("../../schemas/stages.toml"),
    include_str!("../../schemas/search_log.toml"),
    include_str!("../../schemas/spectral_checks.toml"),
    include_str!("../../schemas/physical.toml"),
    include_str!("../../schemas/region_rows.toml"),
    include_str!("../../schemas/final_state.toml"),
    include_str!("../../schemas/plot_s_theta2.toml"),
    include_str!("../../schemas/plot_deviation.toml"),
    include_str!("../../schemas/plot_final_profile.toml"),
    include_str!("../../schemas/sweep.toml"),
    include_str!("../../schemas/manifest.toml"),
    include_str!("../../schemas/summary.toml"),
    include_str!("../../schemas/error.toml"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Float,
    Int,
    Bool,
    Text,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    #[serde(default)]
    pub optional: bool,
    #[serde(default)]
    pub unit: String,
    pub doc: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Toml,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub name: String,
    pub version: u32,
    pub format: Format,
    pub description: String,
    #[serde(default)]
    pub columns: Vec<Column>,
    #[serde(default)]
    pub required: Vec<String>,
}

pub fn schemas() -> &'static [Schema] {
    static ALL: OnceLock<Vec<Schema>> = OnceLock::new();
    ALL.get_or_init(|| SOURCES.iter().map(|s| toml::from_str(s).expect("bundled schema parses")).collect())
}

pub fn schema(name: &str) -> Result<&'static Schema> {
    schemas().iter().find(|s| s.name == name).ok_or_else(|| Error::Config(format!("no schema named '{name}'")))
}

/// One table cell; `None` writes an empty field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    B(bool),
    T(String),
    None,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::T(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::T(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::None, Into::into)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // shortest round-trip form, so tables are lossless
            Cell::F(v) => format!("{v:e}"),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::T(v) => v.clone(),
            Cell::None => String::new(),
        }
    }

    fn fits(&self, col: &Column) -> bool {
        match (self, col.kind) {
            (Cell::None, _) => col.optional,
            (Cell::F(v), ColumnType::Float) => v.is_finite(),
            (Cell::I(_), ColumnType::Int) | (Cell::B(_), ColumnType::Bool) => true,
            (Cell::T(t), ColumnType::Text) => !t.is_empty() && !t.contains(['\t', '\n']),
            _ => false,
        }
    }
}

/// Renders rows under the schema's preamble, checking every cell.
pub fn render_table(name: &str, rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<String> {
    let sc = schema(name)?;
    let mut out = format!("# schema: {} v{}\n# {}\n", sc.name, sc.version, sc.description);
    for c in &sc.columns {
        let unit = if c.unit.is_empty() { String::new() } else { format!(" [{}]", c.unit) };
        out.push_str(&format!("# {}{}: {}\n", c.name, unit, c.doc));
    }
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    let names: Vec<&str> = sc.columns.iter().map(|c| c.name.as_str()).collect();
    w.write_record(&names).map_err(csv_err)?;
    for (k, row) in rows.into_iter().enumerate() {
        if row.len() != sc.columns.len() {
            return Err(Error::Io(format!("{name}: row {k} has {} cells, schema has {}", row.len(), names.len())));
        }
        for (cell, col) in row.iter().zip(&sc.columns) {
            if !cell.fits(col) {
                return Err(Error::Io(format!("{name}: row {k}, column {}: {cell:?} does not fit", col.name)));
            }
        }
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out.push_str(std::str::from_utf8(&body).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_table(path: &Path, name: &str, rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    std::fs::write(path, render_table(name, rows)?)?;
    Ok(())
}

/// Column-name -> parsed-row access for reading tables back.
pub struct Rows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Rows {
    pub fn col(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| Error::Io(format!("no column '{name}'")))
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.col(name)?;
        self.rows.iter().map(|r| r[j].parse::<f64>().map_err(|e| Error::Io(format!("{name}: {e}")))).collect()
    }
}

fn preamble_schema(text: &str) -> Result<&'static Schema> {
    let first = text.lines().next().unwrap_or("");
    let tag = first.strip_prefix("# schema: ").ok_or_else(|| Error::Io("missing '# schema:' line".into()))?;
    let (name, ver) = tag.rsplit_once(" v").ok_or_else(|| Error::Io(format!("bad schema tag '{tag}'")))?;
    let sc = schema(name)?;
    if ver != sc.version.to_string() || sc.format != Format::Tsv {
        return Err(Error::Io(format!("schema '{name}' v{ver} is not a known table version")));
    }
    Ok(sc)
}

/// Parses and validates a table against the schema named in its preamble.
pub fn read_table(text: &str) -> Result<(&'static Schema, Rows)> {
    let sc = preamble_schema(text)?;
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let want: Vec<&str> = sc.columns.iter().map(|c| c.name.as_str()).collect();
    if header != want {
        return Err(Error::Io(format!("{}: header {header:?} != {want:?}", sc.name)));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row: Vec<String> = rec.iter().map(String::from).collect();
        for (v, c) in row.iter().zip(&sc.columns) {
            let ok = if v.is_empty() {
                c.optional
            } else {
                match c.kind {
                    ColumnType::Float => v.parse::<f64>().is_ok_and(f64::is_finite),
                    ColumnType::Int => v.parse::<i64>().is_ok(),
                    ColumnType::Bool => v == "true" || v == "false",
                    ColumnType::Text => true,
                }
            };
            if !ok {
                return Err(Error::Io(format!("{}: row {k}, column {}: bad value '{v}'", sc.name, c.name)));
            }
        }
        rows.push(row);
    }
    Ok((sc, Rows { columns: header, rows }))
}

fn check_toml(text: &str) -> Result<&'static Schema> {
    let t: toml::Table = toml::from_str(text).map_err(|e| Error::Io(e.to_string()))?;
    let name = t.get("schema").and_then(|v| v.as_str()).ok_or_else(|| Error::Io("missing 'schema' key".into()))?;
    let sc = schema(name)?;
    let ver = t.get("schema_version").and_then(|v| v.as_integer());
    if sc.format != Format::Toml || ver != Some(sc.version as i64) {
        return Err(Error::Io(format!("schema '{name}' version {ver:?} is not a known TOML version")));
    }
    for key in &sc.required {
        if !t.contains_key(key) {
            return Err(Error::Io(format!("{name}: missing key '{key}'")));
        }
    }
    Ok(sc)
}

fn check_tables_dump(text: &str) -> Result<()> {
    let mut lines = text.lines();
    if lines.next() != Some(TABLES_HEADER) {
        return Err(Error::Io("missing eigensystem tables header".into()));
    }
    for (k, l) in lines.enumerate() {
        let n = l.split_whitespace().count();
        if !(n == 2 || n == 4) {
            return Err(Error::Io(format!("tables line {}: '{l}'", k + 2)));
        }
    }
    Ok(())
}

/// Checks one file by extension: `.tsv`, `.toml` or the `.txt` tables dump.
/// Returns the schema name.
pub fn check_file(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let at = |e: Error| Error::Io(format!("{}: {e}", path.display()));
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => read_table(&text).map(|(s, _)| s.name.clone()).map_err(at),
        Some("toml") => check_toml(&text).map(|s| s.name.clone()).map_err(at),
        Some("txt") => check_tables_dump(&text).map(|_| "eigensystem-tables".to_string()).map_err(at),
        _ => Err(at(Error::Io("no schema for this extension".into()))),
    }
}

/// Every `.tsv`, `.toml` and `.txt` file under `dir`, sorted, with its check result.
pub fn check_dir(dir: &Path) -> Result<Vec<(PathBuf, Result<String>)>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.to_string()))?;
        let p = entry.path();
        if entry.file_type().is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("tsv" | "toml" | "txt"))
        {
            out.push((p.to_path_buf(), check_file(p)));
        }
    }
    Ok(out)
}
