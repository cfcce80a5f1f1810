use chrono::NaiveDate;

use super::table::SeriesTable;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One supervised example: `window` days of features predicting the target
/// on the following day.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    /// `F × window`, column `j` is day `t − window + j`.
    pub input: Tensor,
    /// Normalized target on `target_date`.
    pub target: f64,
    pub target_date: NaiveDate,
    /// Row of the target day in the source table.
    pub target_row: usize,
}

/// One sample per target row `t ∈ [window, N)`, giving `N − window` samples.
pub fn make_windows(table: &SeriesTable, target: &str, window: usize) -> Result<Vec<WindowSample>> {
    if window < 1 {
        return Err(Error::Config("window must be at least 1".into()));
    }
    let n = table.len();
    if n <= window {
        return Err(Error::Data(format!(
            "need more than {window} rows to build windows, have {n}"
        )));
    }
    let target_values = table.dense_column(target)?;
    let features: Vec<Vec<f64>> = table
        .columns()
        .iter()
        .map(|c| table.dense_column(&c.name))
        .collect::<Result<_>>()?;
    let f = features.len();
    (window..n)
        .map(|t| {
            let mut data = Vec::with_capacity(f * window);
            for col in &features {
                data.extend_from_slice(&col[t - window..t]);
            }
            Ok(WindowSample {
                input: Tensor::from_vec(&[f, window], data)?,
                target: target_values[t],
                target_date: table.dates()[t],
                target_row: t,
            })
        })
        .collect()
}

/// The final `window` rows as a model input, for forecasting the day after
/// the table ends.
pub fn last_window(table: &SeriesTable, window: usize) -> Result<Tensor> {
    let n = table.len();
    if window < 1 || n < window {
        return Err(Error::Data(format!(
            "need at least {window} rows for a forecast window, have {n}"
        )));
    }
    let mut data = Vec::new();
    for c in table.columns() {
        data.extend_from_slice(&table.dense_column(&c.name)?[n - window..]);
    }
    Tensor::from_vec(&[table.columns().len(), window], data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSet {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

fn floor_frac(frac: f64, n: usize) -> usize {
    // The small offset keeps products like 0.2 · 5 = 1.0000000000000002 or
    // 0.9999999999999999 on the intended side of the floor.
    (frac * n as f64 + 1e-9).floor() as usize
}

/// Last `⌊test_frac·M⌋` samples are test; of the remaining `R`, the last
/// `⌊val_frac·R⌋` are validation.
pub fn split_counts(m: usize, test_frac: f64, val_frac: f64) -> Result<SplitCounts> {
    if !(0.0..1.0).contains(&test_frac) || !(0.0..1.0).contains(&val_frac) {
        return Err(Error::Config(format!(
            "split fractions must lie in [0, 1): test {test_frac}, val {val_frac}"
        )));
    }
    let test = floor_frac(test_frac, m);
    let rest = m - test;
    let val = floor_frac(val_frac, rest);
    let train = rest - val;
    if train == 0 || val == 0 || test == 0 {
        return Err(Error::Data(format!(
            "{m} samples give an empty split (train {train}, val {val}, test {test})"
        )));
    }
    Ok(SplitCounts { train, val, test })
}

/// Chronological train / validation / test partition without shuffling.
pub fn split(samples: Vec<WindowSample>, test_frac: f64, val_frac: f64) -> Result<SplitSet> {
    let counts = split_counts(samples.len(), test_frac, val_frac)?;
    let mut train = samples;
    let test = train.split_off(counts.train + counts.val);
    let val = train.split_off(counts.train);
    Ok(SplitSet { train, val, test })
}
