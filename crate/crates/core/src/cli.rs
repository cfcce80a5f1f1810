//! Command implementations behind the `mrc-lstm` binary.
//!
//! Each `cmd_*` function is a plain library call returning a typed result;
//! [`run`] parses arguments, dispatches, prints a one-line diagnostic on
//! failure and maps the error to an exit code.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checks::{run_checks, standard_checks, CheckRow, LayerCheck, GRADCHECK_SEEDS};
use crate::data::{
    align_and_fill, check_columns, last_window, load_csv, prepare, prepare_with_scaler, CsvSchema,
    PipelineConfig, Prepared, SeriesTable,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, PredictionRecord};
use crate::model::{Architecture, Model, DEFAULT_WINDOW};
use crate::tensor::Prng;
use crate::train::{csv_error, train, Checkpoint, TrainConfig, TrainOutcome};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

/// Resolved settings for a run. Serialized as `config.json`; a config file
/// uses the same field names, with the training fields at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub target_column: String,
    /// CSV feature columns in order; `None` means the Bitcoin schema.
    pub feature_columns: Option<Vec<String>>,
    pub window: usize,
    pub architecture: Architecture,
    pub test_fraction: f64,
    pub val_fraction: f64,
    #[serde(flatten)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        RunConfig {
            data_path: None,
            target_column: p.target,
            feature_columns: None,
            window: DEFAULT_WINDOW,
            architecture: Architecture::MrcLstm,
            test_fraction: p.test_fraction,
            val_fraction: p.val_fraction,
            train: TrainConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config file; absent fields keep their defaults and
    /// unknown fields are rejected.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let serde_json::Value::Object(map) = &value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let known: BTreeSet<String> = match serde_json::to_value(RunConfig::default()) {
            Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
            _ => BTreeSet::new(),
        };
        if let Some(k) = map.keys().find(|k| !known.contains(*k)) {
            return Err(Error::Config(format!("unknown config field {k:?}")));
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        self.train.validate()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            target: self.target_column.clone(),
            window: self.window,
            test_fraction: self.test_fraction,
            val_fraction: self.val_fraction,
        }
    }

    pub fn schema(&self) -> CsvSchema {
        match &self.feature_columns {
            Some(cols) => CsvSchema::Columns(cols.clone()),
            None => CsvSchema::bitcoin(),
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data_path
            .as_deref()
            .ok_or_else(|| Error::Config("no data file given (use --data)".into()))
    }
}

/// Flags shared by the commands. Any flag given overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// Input CSV with a `date` column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// mrc-lstm, mlp, cnn, lstm or cnn-lstm.
    #[arg(long)]
    pub arch: Option<Architecture>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

impl CommonFlags {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            cfg.data_path = Some(d.clone());
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(a) = self.arch {
            cfg.architecture = a;
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn checkpoint_path(&self, cfg: &RunConfig) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mrc-lstm",
    version,
    about = "Multi-scale residual CNN + LSTM forecaster"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one architecture; writes checkpoint, history and config.
    Train(CommonFlags),
    /// Evaluate a checkpoint on the test split; writes metrics and predictions.
    Eval(CommonFlags),
    /// Print the forecast for the day after the data ends.
    Predict(CommonFlags),
    /// Finite-difference check of every layer's backward pass.
    Gradcheck {
        #[arg(long, default_value_t = GRADCHECK_SEEDS)]
        seeds: u64,
    },
    /// Train all five architectures on the same split; writes comparison.csv.
    Compare {
        #[command(flatten)]
        flags: CommonFlags,
        /// Add the explained-variance R² column.
        #[arg(long)]
        explained_r2: bool,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads and prepares the configured data file.
pub fn load_prepared(cfg: &RunConfig) -> Result<Prepared> {
    let table = load_csv(cfg.data_path()?, &cfg.schema())?;
    prepare(&table, &cfg.pipeline())
}

/// Builds an untrained model; weights come from `Prng::new(seed)`.
pub fn init_model(
    arch: Architecture,
    num_features: usize,
    window: usize,
    seed: u64,
) -> Result<Model> {
    Model::build(arch, num_features, window, &mut Prng::new(seed))
}

pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub checkpoint: Checkpoint,
}

/// Trains on already prepared data without touching the filesystem.
pub fn train_prepared(cfg: &RunConfig, data: &Prepared) -> Result<TrainRun> {
    let model = init_model(
        cfg.architecture,
        data.num_features(),
        cfg.window,
        cfg.train.seed,
    )?;
    let outcome = train(model, &data.splits.train, &data.splits.val, &cfg.train)?;
    let checkpoint = Checkpoint::new(
        &outcome.model,
        &outcome.best_model,
        data.scaler.clone(),
        &cfg.pipeline(),
        cfg.train.clone(),
        cfg.train.epochs - 1,
        outcome.best_epoch,
    )?;
    Ok(TrainRun {
        outcome,
        checkpoint,
    })
}

/// Writes `checkpoint.json`, `history.csv` and `config.json` to the output
/// directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainRun> {
    let data = load_prepared(cfg)?;
    let run = train_prepared(cfg, &data)?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    run.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    run.outcome.history.write_csv(&dir.join(HISTORY_FILE))?;
    write_json(&dir.join(CONFIG_FILE), cfg)?;
    Ok(run)
}

fn load_for_checkpoint(ckpt: &Checkpoint, data: &Path, schema: &CsvSchema) -> Result<SeriesTable> {
    let table = load_csv(data, schema)?;
    if table.columns().len() != ckpt.num_features {
        return Err(Error::Schema(format!(
            "{} has {} feature columns, checkpoint expects {}",
            data.display(),
            table.columns().len(),
            ckpt.num_features
        )));
    }
    Ok(table)
}

/// Evaluates the best-validation weights on the test split and writes
/// `metrics.json` and `predictions.csv`.
pub fn cmd_eval(checkpoint: &Path, cfg: &RunConfig) -> Result<(EvalReport, Vec<PredictionRecord>)> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let table = load_for_checkpoint(&ckpt, cfg.data_path()?, &cfg.schema())?;
    let data = prepare_with_scaler(&table, &ckpt.pipeline(), &ckpt.scaler)?;
    let model = ckpt.best_model()?;
    let (report, records) = evaluate(&model, &data.splits.test, &data.scaler)?;
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join(METRICS_FILE), &report)?;
    write_csv_rows(&cfg.output_dir.join(PREDICTIONS_FILE), &records)?;
    Ok((report, records))
}

/// Forecast for the day after the last row, on the original scale.
pub fn cmd_predict(checkpoint: &Path, cfg: &RunConfig) -> Result<f64> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let table = load_for_checkpoint(&ckpt, cfg.data_path()?, &cfg.schema())?;
    let filled = align_and_fill(&table, &ckpt.target_column)?;
    check_columns(&filled.table, &ckpt.scaler)?;
    let scaled = ckpt.scaler.scale(&filled.table)?;
    let input = last_window(&scaled, ckpt.window)?;
    let y = ckpt.best_model()?.forward(&input)?;
    Ok(ckpt.scaler.descale_target(y))
}

/// Runs `checks` over seeds `0..seeds`.
pub fn cmd_gradcheck_with(checks: &[LayerCheck], seeds: u64) -> Result<Vec<CheckRow>> {
    run_checks(checks, 0..seeds)
}

pub fn cmd_gradcheck(seeds: u64) -> Result<Vec<CheckRow>> {
    cmd_gradcheck_with(&standard_checks(), seeds)
}

pub fn format_check_table(rows: &[CheckRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>12}  status\n", "layer", "max rel err");
    for r in rows {
        let status = if r.passed { "ok" } else { "FAIL" };
        out += &format!(
            "{:<width$}  {:>12.3e}  {status}\n",
            r.name, r.max_relative_error
        );
    }
    out
}

/// Numeric error naming every failing layer, if any.
pub fn check_outcome(rows: &[CheckRow]) -> Result<()> {
    let failing: Vec<&str> = rows
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.name.as_str())
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "gradient check failed for: {}",
            failing.join(", ")
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub architecture: Architecture,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
    pub r2_standard: Option<f64>,
    pub r2_explained: Option<f64>,
    /// Set when this architecture failed; the metric cells are then empty.
    pub error: Option<String>,
}

/// Trains every architecture on the same prepared data. Architecture `i`
/// (in [`Architecture::ALL`] order) uses seed `seed + i`.
pub fn compare_prepared(cfg: &RunConfig, data: &Prepared) -> Vec<CompareRow> {
    Architecture::ALL
        .iter()
        .enumerate()
        .map(|(i, &arch)| {
            let mut c = cfg.clone();
            c.architecture = arch;
            c.train.seed = cfg.train.seed.wrapping_add(i as u64);
            let result = train_prepared(&c, data).and_then(|run| {
                let model = run.outcome.best_model;
                evaluate(&model, &data.splits.test, &data.scaler).map(|(r, _)| r)
            });
            match result {
                Ok(r) => CompareRow {
                    architecture: arch,
                    mae: Some(r.mae),
                    rmse: Some(r.rmse),
                    mape: Some(r.mape_percent),
                    r2_standard: Some(r.r2_standard),
                    r2_explained: Some(r.r2_explained),
                    error: None,
                },
                Err(e) => CompareRow {
                    architecture: arch,
                    mae: None,
                    rmse: None,
                    mape: None,
                    r2_standard: None,
                    r2_explained: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Writes `comparison.csv`; the `r2_explained` column is included only when
/// asked for.
pub fn cmd_compare(cfg: &RunConfig, explained_r2: bool) -> Result<Vec<CompareRow>> {
    let data = load_prepared(cfg)?;
    let rows = compare_prepared(cfg, &data);
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(COMPARISON_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    let mut header = vec!["architecture", "mae", "rmse", "mape", "r2_standard"];
    if explained_r2 {
        header.push("r2_explained");
    }
    header.push("error");
    w.write_record(&header).map_err(|e| csv_error(&path, e))?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &rows {
        let mut rec = vec![
            r.architecture.to_string(),
            cell(r.mae),
            cell(r.rmse),
            cell(r.mape),
            cell(r.r2_standard),
        ];
        if explained_r2 {
            rec.push(cell(r.r2_explained));
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Results go to `stdout`, diagnostics to
/// `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    let print = |out: &mut dyn Write, s: String| {
        out.write_all(s.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e))
    };
    match command {
        Command::Train(flags) => {
            let cfg = flags.resolve()?;
            let run = cmd_train(&cfg)?;
            let last = run.outcome.history.last().expect("at least one epoch");
            let val = last
                .val_loss
                .map(|v| format!("{v:.6e}"))
                .unwrap_or("-".into());
            print(
                out,
                format!(
                    "{}: {} epochs, train mse {:.6e}, val mse {val}, best epoch {}\nwrote {}\n",
                    cfg.architecture,
                    run.outcome.history.len(),
                    last.train_loss,
                    run.outcome.best_epoch,
                    cfg.output_dir.display()
                ),
            )?;
        }
        Command::Eval(flags) => {
            let cfg = flags.resolve()?;
            let (r, _) = cmd_eval(&flags.checkpoint_path(&cfg), &cfg)?;
            print(
                out,
                format!(
                    "n {}  mae {:.4}  rmse {:.4}  mape {:.4}%  r2 {:.4}\n",
                    r.n, r.mae, r.rmse, r.mape_percent, r.r2_standard
                ),
            )?;
        }
        Command::Predict(flags) => {
            let cfg = flags.resolve()?;
            let y = cmd_predict(&flags.checkpoint_path(&cfg), &cfg)?;
            print(out, format!("{y}\n"))?;
        }
        Command::Gradcheck { seeds } => {
            let rows = cmd_gradcheck(seeds)?;
            print(out, format_check_table(&rows))?;
            check_outcome(&rows)?;
        }
        Command::Compare {
            flags,
            explained_r2,
        } => {
            let cfg = flags.resolve()?;
            let rows = cmd_compare(&cfg, explained_r2)?;
            for r in &rows {
                let line = match (&r.error, r.mape) {
                    (Some(e), _) => format!("{:<9} failed: {e}\n", r.architecture),
                    (None, Some(m)) => format!(
                        "{:<9} mae {:.4}  rmse {:.4}  mape {m:.4}%\n",
                        r.architecture,
                        r.mae.unwrap_or(f64::NAN),
                        r.rmse.unwrap_or(f64::NAN)
                    ),
                    (None, None) => String::new(),
                };
                print(out, line)?;
            }
            if rows.iter().any(|r| r.error.is_some()) {
                return Ok(3);
            }
        }
    }
    Ok(0)
}
