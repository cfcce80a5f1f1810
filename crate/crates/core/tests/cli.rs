use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrc_lstm::checks::{LayerCheck, GRADCHECK_EPS};
use mrc_lstm::cli::{check_outcome, cmd_gradcheck_with};
use mrc_lstm::data::synthetic::{btc_like, default_start};
use mrc_lstm::nn::{
    conv1d_backward, conv1d_forward, gradcheck, projection_loss, ConvKernel, WithInput,
};
use mrc_lstm::Prng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mrc-lstm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path, days: usize) -> PathBuf {
    let path = dir.join("btc.csv");
    btc_like(default_start(), days, 17)
        .unwrap()
        .write_csv(&path)
        .unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train(data: &Path, out: &Path, seed: &str) -> Output {
    run(&[
        "train",
        "--data",
        s(data),
        "--out",
        s(out),
        "--seed",
        seed,
        "--epochs",
        "3",
    ])
}

#[test]
fn train_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 160);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = train(&data, &a, "7");
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(train(&data, &b, "7").status.code(), Some(0));
    for f in ["checkpoint.json", "history.csv", "config.json"] {
        let x = fs::read(a.join(f)).unwrap();
        let y = fs::read(b.join(f)).unwrap();
        if f == "config.json" {
            // Differs only in output_dir.
            continue;
        }
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let history = fs::read_to_string(a.join("history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,lr,train_loss,val_loss"));
    assert_eq!(lines.count(), 3);
    let config: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["seed"], 7);
    assert_eq!(config["epochs"], 3);
    assert_eq!(config["architecture"], "mrc-lstm");

    let c = dir.path().join("c");
    train(&data, &c, "8");
    assert_ne!(
        fs::read(a.join("checkpoint.json")).unwrap(),
        fs::read(c.join("checkpoint.json")).unwrap()
    );
}

#[test]
fn missing_data_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = train(&missing, &dir.path().join("out"), "1");
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("nope.csv"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["train", "--arch", "rnn"]).status.code(), Some(1));
    assert_eq!(run(&["train"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn eval_and_predict_agree() {
    let dir = tempfile::tempdir().unwrap();
    let full = fixture(dir.path(), 200);
    let out = dir.path().join("run");
    let o = run(&[
        "train",
        "--data",
        s(&full),
        "--out",
        s(&out),
        "--seed",
        "2",
        "--epochs",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let o = run(&["eval", "--data", s(&full), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    for k in ["mae", "rmse", "mape_percent", "r2_standard", "r2_explained"] {
        assert!(metrics[k].as_f64().unwrap().is_finite(), "{k}");
    }
    // 200 rows give 195 samples, of which the last 39 are test.
    assert_eq!(metrics["n"], 39);

    let mut rdr = csv::Reader::from_path(out.join("predictions.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["date", "actual", "predicted"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 39);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    let last_pred: f64 = rows.last().unwrap()[2].parse().unwrap();

    // Dropping the final row makes the last test window predict-able.
    let text = fs::read_to_string(&full).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let short = dir.path().join("short.csv");
    fs::write(&short, lines[..lines.len() - 1].join("\n") + "\n").unwrap();
    let ckpt = out.join("checkpoint.json");
    let o = run(&["predict", "--data", s(&short), "--checkpoint", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let printed = stdout(&o);
    assert_eq!(printed.lines().count(), 1);
    let y: f64 = printed.trim().parse().unwrap();
    assert!(y.is_finite());
    assert_eq!(y, last_pred);

    let tiny = dir.path().join("tiny.csv");
    fs::write(&tiny, lines[..5].join("\n") + "\n").unwrap();
    let o = run(&["predict", "--data", s(&tiny), "--checkpoint", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("data error"), "{}", stderr(&o));
}

#[test]
fn tampered_checkpoint_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 160);
    let out = dir.path().join("run");
    assert_eq!(train(&data, &out, "1").status.code(), Some(0));
    let ckpt = out.join("checkpoint.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&ckpt).unwrap()).unwrap();
    v["tensors"][3]["shape"] = serde_json::json!([1, 2, 3]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let o = run(&[
        "eval",
        "--data",
        s(&data),
        "--checkpoint",
        s(&bad),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn feature_count_mismatch_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 160);
    let out = dir.path().join("run");
    assert_eq!(train(&data, &out, "1").status.code(), Some(0));
    let text = fs::read_to_string(&data).unwrap();
    let trimmed: String = text
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    let fewer = dir.path().join("fewer.csv");
    fs::write(&fewer, trimmed).unwrap();
    let config = dir.path().join("cfg.json");
    let cols: Vec<&str> = mrc_lstm::data::BTC_COLUMNS[..10].to_vec();
    fs::write(
        &config,
        serde_json::json!({ "feature_columns": cols }).to_string(),
    )
    .unwrap();
    let o = run(&[
        "eval",
        "--data",
        s(&fewer),
        "--config",
        s(&config),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("schema"));
}

#[test]
fn gradcheck_command_covers_every_layer() {
    let o = run(&["gradcheck", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    for layer in [
        "conv1d-k1",
        "conv1d-k2",
        "conv1d-k3",
        "fusion-1x1",
        "dense",
        "lstm",
        "mrc-block",
        "mrc-lstm",
    ] {
        assert!(
            table.lines().any(|l| l.starts_with(layer)),
            "{layer} missing"
        );
    }
}

#[test]
fn corrupted_backward_fails_gradcheck() {
    // conv backward with the weight gradient scaled by 1.01.
    let broken = LayerCheck::new("conv1d-broken", |seed| {
        let mut prng = Prng::new(seed);
        let kernel = ConvKernel::init(3, 2, 2, &mut prng)?;
        let x = prng.uniform(-1.0, 1.0, &[2, 5])?;
        let r = prng.uniform(-1.0, 1.0, &[3, 5])?;
        let (mut g, dx) = conv1d_backward(&x, &kernel, &r)?;
        g.weights = g.weights.scale(1.01);
        gradcheck(
            &WithInput {
                params: kernel,
                input: x,
            },
            &WithInput {
                params: g,
                input: dx,
            },
            GRADCHECK_EPS,
            |q| Ok(projection_loss(&conv1d_forward(&q.input, &q.params)?, &r)),
        )
    });
    let rows = cmd_gradcheck_with(&[broken], 3).unwrap();
    assert!(!rows[0].passed);
    let err = check_outcome(&rows).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("conv1d-broken"));
}

#[test]
fn compare_writes_five_reproducible_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture(dir.path(), 140);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&[
            "compare",
            "--data",
            s(&data),
            "--out",
            s(out),
            "--seed",
            "3",
            "--epochs",
            "2",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let x = fs::read_to_string(a.join("comparison.csv")).unwrap();
    assert_eq!(x, fs::read_to_string(b.join("comparison.csv")).unwrap());
    let mut lines = x.lines();
    assert_eq!(
        lines.next(),
        Some("architecture,mae,rmse,mape,r2_standard,error")
    );
    let archs: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(archs, ["mrc-lstm", "mlp", "cnn", "lstm", "cnn-lstm"]);
}
