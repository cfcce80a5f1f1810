// Train MRC-LSTM, evaluate it on the test split, reload the checkpoint
// and forecast the next day. The same steps the `train`, `eval` and
// `predict` commands perform.
//
// `cargo run --release --example train_and_evaluate`

use mrc_lstm::cli::{cmd_eval, cmd_predict, cmd_train, RunConfig, CHECKPOINT_FILE};
use mrc_lstm::data::synthetic::{btc_like, default_start};
use mrc_lstm::train::Checkpoint;

pub fn run_example() -> mrc_lstm::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let data_path = dir.path().join("btc.csv");
    btc_like(default_start(), 240, 3)?.write_csv(&data_path)?;

    let mut cfg = RunConfig {
        data_path: Some(data_path),
        output_dir: dir.path().join("run"),
        ..RunConfig::default()
    };
    // A short run; the full recipe is 2000 epochs.
    cfg.train.epochs = 40;
    cfg.train.decay_every = 15;
    cfg.train.seed = 1;

    let run = cmd_train(&cfg)?;
    for r in run.outcome.history.records.iter().step_by(10) {
        println!(
            "epoch {:>3}  lr {:.2e}  train {:.5}  val {:.5}",
            r.epoch,
            r.lr,
            r.train_loss,
            r.val_loss.unwrap_or(f64::NAN)
        );
    }
    println!("best validation epoch: {}", run.outcome.best_epoch);

    let ckpt_path = cfg.output_dir.join(CHECKPOINT_FILE);
    let (report, predictions) = cmd_eval(&ckpt_path, &cfg)?;
    println!(
        "test: n {}  MAE {:.2}  RMSE {:.2}  MAPE {:.2}%  R2 {:.3}",
        report.n, report.mae, report.rmse, report.mape_percent, report.r2_standard
    );
    let last = predictions.last().expect("non-empty test split");
    println!(
        "{}: actual {:.2}, predicted {:.2}",
        last.date, last.actual, last.predicted
    );

    let reloaded = Checkpoint::load(&ckpt_path)?;
    assert_eq!(reloaded, run.checkpoint);
    println!("next-day forecast: {:.2}", cmd_predict(&ckpt_path, &cfg)?);
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
