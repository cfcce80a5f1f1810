// From a daily CSV to normalized, windowed train / validation / test sets.
//
// `cargo run --example data_pipeline`

use mrc_lstm::data::synthetic::{btc_like, default_start};
use mrc_lstm::data::{load_csv, prepare, CsvSchema, PipelineConfig};

pub fn run_example() -> mrc_lstm::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let path = dir.path().join("btc.csv");

    // 1820 calendar days; macro columns are missing on weekends.
    btc_like(default_start(), 1820, 42)?.write_csv(&path)?;
    let table = load_csv(&path, &CsvSchema::bitcoin())?;
    println!(
        "loaded {} rows, gaps present: {}",
        table.len(),
        table.has_missing()
    );

    let data = prepare(&table, &PipelineConfig::default())?;
    let s = &data.splits;
    println!(
        "windows: train {} / val {} / test {}",
        s.train.len(),
        s.val.len(),
        s.test.len()
    );
    println!(
        "close scaled with min {:.2} and max {:.2} from the training rows",
        data.scaler.target.min, data.scaler.target.max
    );
    let first = &s.train[0];
    println!(
        "first sample: input {:?}, target {:.4} on {}",
        first.input.shape(),
        first.target,
        first.target_date
    );
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
