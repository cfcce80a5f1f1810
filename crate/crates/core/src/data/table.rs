use std::collections::HashMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Columns of the daily Bitcoin dataset, in canonical order: seven
/// transaction attributes, three macro indicators and search attention.
pub const BTC_COLUMNS: [&str; 11] = [
    "open",
    "high",
    "low",
    "close",
    "weighted_price",
    "volume_btc",
    "volume_currency",
    "sp500",
    "gvz",
    "vix",
    "google_trends",
];

pub const DATE_COLUMN: &str = "date";
pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Which numeric columns to read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvSchema {
    /// Exactly these columns, in this order; each must be present.
    Columns(Vec<String>),
    /// Every column after `date`, in file order.
    AllNumeric,
}

impl CsvSchema {
    pub fn bitcoin() -> Self {
        CsvSchema::Columns(BTC_COLUMNS.iter().map(|s| s.to_string()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    /// One slot per date; `None` marks a missing observation.
    pub values: Vec<Option<f64>>,
}

/// Date-indexed numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
}

impl SeriesTable {
    /// Validates strictly increasing dates and one slot per date per column.
    pub fn new(dates: Vec<NaiveDate>, columns: Vec<Column>) -> Result<Self> {
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!(
                "dates must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.values.len() != dates.len()) {
            return Err(Error::Data(format!(
                "column {:?} has {} values for {} dates",
                c.name,
                c.values.len(),
                dates.len()
            )));
        }
        Ok(SeriesTable { dates, columns })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn feature_order(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    }

    /// Values of a fully observed column.
    pub fn dense_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = &self.columns[self.column_index(name)?];
        col.values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::Data(format!(
                        "column {name:?} is missing a value on {}",
                        self.dates[i]
                    ))
                })
            })
            .collect()
    }

    pub fn has_missing(&self) -> bool {
        self.columns
            .iter()
            .any(|c| c.values.iter().any(Option::is_none))
    }

    /// Rows `range`, all columns.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SeriesTable {
        SeriesTable {
            dates: self.dates[range.clone()].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    values: c.values[range.clone()].to_vec(),
                })
                .collect(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec![DATE_COLUMN.to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format(DATE_FORMAT).to_string()];
            rec.extend(
                self.columns
                    .iter()
                    .map(|c| c.values[i].map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Data(format!("{}: {e}", path.display()))
    }
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Data(format!(
            "line {line}, column {column:?}: cannot parse {s:?} as a finite number"
        ))),
    }
}

/// Reads a `date,<numeric columns...>` CSV file. Rows are sorted by date;
/// a repeated date is an error.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SeriesTable> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let index: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let date_idx = *index
        .get(DATE_COLUMN)
        .ok_or_else(|| Error::Schema(format!("missing column {DATE_COLUMN:?}")))?;
    let wanted: Vec<String> = match schema {
        CsvSchema::Columns(cols) => cols.clone(),
        CsvSchema::AllNumeric => headers
            .iter()
            .filter(|h| h.as_str() != DATE_COLUMN)
            .cloned()
            .collect(),
    };
    if wanted.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }
    let mut col_idx = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let i = index
            .get(name.as_str())
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))?;
        col_idx.push(*i);
    }

    let mut rows: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let raw_date = rec.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| {
            Error::Data(format!(
                "line {line}, column \"date\": cannot parse {raw_date:?} as YYYY-MM-DD"
            ))
        })?;
        let values = col_idx
            .iter()
            .zip(&wanted)
            .map(|(&i, name)| parse_cell(rec.get(i).unwrap_or(""), line, name))
            .collect::<Result<Vec<_>>>()?;
        rows.push((date, values));
    }
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("duplicate date {}", w[0].0)));
    }
    let dates = rows.iter().map(|(d, _)| *d).collect();
    let columns = wanted
        .into_iter()
        .enumerate()
        .map(|(j, name)| Column {
            name,
            values: rows.iter().map(|(_, v)| v[j]).collect(),
        })
        .collect();
    SeriesTable::new(dates, columns)
}
