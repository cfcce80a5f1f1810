use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::table::{Column, SeriesTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * (self.max - self.min) + self.min
    }
}

/// Per-column min-max statistics fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub columns: Vec<ColumnRange>,
    pub target: ColumnRange,
}

/// Fits min/max for every column over `rows` only. Values outside the
/// training rows never influence the statistics.
pub fn fit_scaler(table: &SeriesTable, rows: Range<usize>, target: &str) -> Result<Scaler> {
    if rows.is_empty() || rows.end > table.len() {
        return Err(Error::Data(format!(
            "training range {rows:?} is empty or exceeds {} rows",
            table.len()
        )));
    }
    let train = table.slice(rows);
    let mut columns = Vec::with_capacity(train.columns().len());
    for c in train.columns() {
        let values = train.dense_column(&c.name)?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            return Err(Error::Data(format!(
                "degenerate column {:?}: constant value {min} over the training range",
                c.name
            )));
        }
        columns.push(ColumnRange {
            name: c.name.clone(),
            min,
            max,
        });
    }
    let target = columns
        .iter()
        .find(|c| c.name == target)
        .cloned()
        .ok_or_else(|| Error::Schema(format!("missing target column {target:?}")))?;
    Ok(Scaler { columns, target })
}

impl Scaler {
    pub fn range(&self, name: &str) -> Result<&ColumnRange> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Schema(format!("scaler has no column {name:?}")))
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// `(x − min) / (max − min)` per column. Values outside the fitted range
    /// map outside `[0, 1]` and are not clamped.
    pub fn scale(&self, table: &SeriesTable) -> Result<SeriesTable> {
        let columns = table
            .columns()
            .iter()
            .map(|c| {
                let r = self.range(&c.name)?;
                Ok(Column {
                    name: c.name.clone(),
                    values: c.values.iter().map(|v| v.map(|x| r.normalize(x))).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SeriesTable::new(table.dates().to_vec(), columns)
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        self.target.normalize(y)
    }

    /// `y_norm · (y_max − y_min) + y_min`.
    pub fn descale_target(&self, y_norm: f64) -> f64 {
        self.target.denormalize(y_norm)
    }
}
