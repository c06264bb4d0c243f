//! Long-format CSV ingestion and emission.
//!
//! A long panel has one `(unit, time, value)` record per row. Reading pivots
//! it into a balanced [`Panel`]: units keep their order of first appearance,
//! periods are sorted ascending. Row numbers in errors count data records,
//! the first record after the header being row 1.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use hetpanel_core::{Panel, TimeId};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub unit: String,
    pub time: String,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { unit: "unit".into(), time: "time".into(), value: "value".into() }
    }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: cannot parse {column} value `{value}` as a finite number")]
    ParseError { row: usize, column: String, value: String },
    #[error("row {row}: duplicate record for unit `{unit}` at time `{time}`")]
    DuplicateKey { row: usize, unit: String, time: String },
    #[error("unbalanced panel: {} unit(s) lack some of the {expected} periods: {}", units.len(), units.join(", "))]
    UnbalancedPanel { units: Vec<String>, expected: usize },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Panel(#[from] hetpanel_core::Error),
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, ReadError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| ReadError::MissingColumn(name.to_string()))
}

/// Integer periods when every time field parses as an integer, labels otherwise.
fn time_ids(raw: &[String]) -> Vec<TimeId> {
    let ints: Option<Vec<i64>> = raw.iter().map(|s| s.parse().ok()).collect();
    match ints {
        Some(v) => v.into_iter().map(TimeId::Int).collect(),
        None => raw.iter().cloned().map(TimeId::Label).collect(),
    }
}

pub fn read_long_csv(path: &Path, columns: &ColumnMap) -> Result<Panel, ReadError> {
    let file = File::open(path).map_err(|source| ReadError::Open { path: path.to_path_buf(), source })?;
    read_long(file, columns)
}

pub fn read_long<R: std::io::Read>(reader: R, columns: &ColumnMap) -> Result<Panel, ReadError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (ui, ti, vi) = (
        column_index(&headers, &columns.unit)?,
        column_index(&headers, &columns.time)?,
        column_index(&headers, &columns.value)?,
    );

    let mut unit_index: HashMap<String, usize> = HashMap::new();
    let mut unit_names: Vec<String> = Vec::new();
    let mut time_index: HashMap<String, usize> = HashMap::new();
    let mut time_raw: Vec<String> = Vec::new();
    // (unit, time, value, row)
    let mut cells: Vec<(usize, usize, f64, usize)> = Vec::new();

    let mut record = csv::StringRecord::new();
    let mut row = 0;
    while rdr.read_record(&mut record)? {
        row += 1;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let (unit, time, raw_value) = (field(ui), field(ti), field(vi));
        let value = raw_value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ReadError::ParseError { row, column: columns.value.clone(), value: raw_value.to_string() })?;
        let u = *unit_index.entry(unit.to_string()).or_insert_with(|| {
            unit_names.push(unit.to_string());
            unit_names.len() - 1
        });
        let t = *time_index.entry(time.to_string()).or_insert_with(|| {
            time_raw.push(time.to_string());
            time_raw.len() - 1
        });
        cells.push((u, t, value, row));
    }
    if cells.is_empty() {
        return Err(ReadError::Empty);
    }

    let ids = time_ids(&time_raw);
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut position = vec![0; ids.len()];
    for (p, &t) in order.iter().enumerate() {
        position[t] = p;
    }

    let n_t = ids.len();
    let mut rows = vec![vec![f64::NAN; n_t]; unit_names.len()];
    let mut seen = vec![vec![false; n_t]; unit_names.len()];
    for &(u, t, v, row) in &cells {
        let p = position[t];
        if seen[u][p] {
            return Err(ReadError::DuplicateKey { row, unit: unit_names[u].clone(), time: time_raw[t].clone() });
        }
        seen[u][p] = true;
        rows[u][p] = v;
    }
    let missing: Vec<String> = seen
        .iter()
        .zip(&unit_names)
        .filter(|(s, _)| s.iter().any(|x| !x))
        .map(|(_, name)| name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ReadError::UnbalancedPanel { units: missing, expected: n_t });
    }

    let sorted_ids: Vec<TimeId> = order.iter().map(|&t| ids[t].clone()).collect();
    Ok(Panel::new(unit_names, sorted_ids, rows)?)
}

/// Writes `panel` in long format. Values use the shortest representation
/// that reads back to the same `f64`.
pub fn write_long<W: Write>(panel: &Panel, writer: W, columns: &ColumnMap) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([&columns.unit, &columns.time, &columns.value])?;
    let times: Vec<String> = panel.time_ids().iter().map(time_label).collect();
    for (id, series) in panel.unit_ids().iter().zip(panel.units()) {
        for (t, v) in times.iter().zip(series) {
            w.write_record([id.as_str(), t.as_str(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_long_csv(panel: &Panel, path: &Path, columns: &ColumnMap) -> csv::Result<()> {
    let file = File::create(path)?;
    write_long(panel, std::io::BufWriter::new(file), columns)
}

pub fn time_label(t: &TimeId) -> String {
    match t {
        TimeId::Int(i) => i.to_string(),
        TimeId::Label(s) => s.clone(),
    }
}
