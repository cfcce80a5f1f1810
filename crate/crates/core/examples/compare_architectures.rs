// MRC-LSTM against the MLP, CNN, LSTM and CNN-LSTM baselines on one split.
//
// `cargo run --release --example compare_architectures`

use mrc_lstm::cli::{compare_prepared, load_prepared, RunConfig};
use mrc_lstm::data::synthetic::{btc_like, default_start};

pub fn run_example() -> mrc_lstm::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let data_path = dir.path().join("btc.csv");
    btc_like(default_start(), 200, 8)?.write_csv(&data_path)?;

    let mut cfg = RunConfig {
        data_path: Some(data_path),
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    cfg.train.epochs = 15;
    cfg.train.seed = 4;

    let data = load_prepared(&cfg)?;
    println!("{:<9} {:>9} {:>9} {:>7}", "model", "MAE", "RMSE", "MAPE%");
    for row in compare_prepared(&cfg, &data) {
        match row.error {
            Some(e) => println!("{:<9} failed: {e}", row.architecture),
            None => println!(
                "{:<9} {:>9.2} {:>9.2} {:>7.2}",
                row.architecture,
                row.mae.unwrap_or_default(),
                row.rmse.unwrap_or_default(),
                row.mape.unwrap_or_default()
            ),
        }
    }
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
