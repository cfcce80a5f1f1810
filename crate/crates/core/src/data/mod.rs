//! From CSV rows to normalized, windowed, chronologically split samples.
//!
//! The usual path is [`prepare`]: load → [`align_and_fill`] → count the
//! split → [`fit_scaler`] on the rows the training samples touch → scale →
//! [`make_windows`] → [`split`].

pub mod fill;
pub mod scaler;
pub mod synthetic;
pub mod table;
pub mod window;

pub use fill::{align_and_fill, Filled};
pub use scaler::{fit_scaler, ColumnRange, Scaler};
pub use table::{load_csv, Column, CsvSchema, SeriesTable, BTC_COLUMNS};
pub use window::{
    last_window, make_windows, split, split_counts, SplitCounts, SplitSet, WindowSample,
};

use crate::error::{Error, Result};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_VAL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub target: String,
    pub window: usize,
    pub test_fraction: f64,
    pub val_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            target: "close".into(),
            window: crate::model::DEFAULT_WINDOW,
            test_fraction: DEFAULT_TEST_FRACTION,
            val_fraction: DEFAULT_VAL_FRACTION,
        }
    }
}

/// Output of the data pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Filled table on the original scale.
    pub table: SeriesTable,
    pub dropped_leading: usize,
    pub scaler: Scaler,
    pub splits: SplitSet,
}

impl Prepared {
    pub fn num_features(&self) -> usize {
        self.table.columns().len()
    }
}

/// Runs the full pipeline, fitting the scaler on the rows used by the
/// training samples (their inputs and targets) and nothing later.
pub fn prepare(table: &SeriesTable, cfg: &PipelineConfig) -> Result<Prepared> {
    let filled = align_and_fill(table, &cfg.target)?;
    let n = filled.table.len();
    if n <= cfg.window {
        return Err(Error::Data(format!(
            "need more than {} rows after filling, have {n}",
            cfg.window
        )));
    }
    let counts = split_counts(n - cfg.window, cfg.test_fraction, cfg.val_fraction)?;
    let scaler = fit_scaler(&filled.table, 0..cfg.window + counts.train, &cfg.target)?;
    finish(filled, scaler, cfg)
}

/// Same as [`prepare`] but with a previously fitted scaler, whose columns
/// must match the table's.
pub fn prepare_with_scaler(
    table: &SeriesTable,
    cfg: &PipelineConfig,
    scaler: &Scaler,
) -> Result<Prepared> {
    let filled = align_and_fill(table, &cfg.target)?;
    check_columns(&filled.table, scaler)?;
    finish(filled, scaler.clone(), cfg)
}

/// The table's columns must equal the scaler's, by name and order.
pub fn check_columns(table: &SeriesTable, scaler: &Scaler) -> Result<()> {
    let have = table.feature_order();
    let want = scaler.feature_names();
    if have != want {
        return Err(Error::Schema(format!(
            "data has {} feature columns {have:?}, model expects {} {want:?}",
            have.len(),
            want.len()
        )));
    }
    Ok(())
}

fn finish(filled: Filled, scaler: Scaler, cfg: &PipelineConfig) -> Result<Prepared> {
    let normalized = scaler.scale(&filled.table)?;
    let samples = make_windows(&normalized, &cfg.target, cfg.window)?;
    let splits = split(samples, cfg.test_fraction, cfg.val_fraction)?;
    Ok(Prepared {
        table: filled.table,
        dropped_leading: filled.dropped_leading,
        scaler,
        splits,
    })
}
