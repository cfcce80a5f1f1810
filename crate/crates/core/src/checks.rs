//! Randomized gradient-check suite covering every layer type and the full
//! MRC-LSTM network. Backs the `gradcheck` command.

use crate::error::Result;
use crate::model::mrc::{mrc_block_backward, mrc_block_forward, MrcBlockParams};
use crate::model::{BaselineKind, Model, MrcLstmDims};
use crate::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, fusion_conv1x1_forward,
    gradcheck, lstm_backward, lstm_sequence, projection_loss, sigmoid, sigmoid_backward, tanh_act,
    tanh_backward, ConvKernel, DenseParams, LstmParams, LstmState, WithInput,
};
use crate::tensor::{Prng, Tensor};

/// Largest relative error accepted for any layer.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Finite-difference step.
pub const GRADCHECK_EPS: f64 = 1e-5;
/// Number of random seeds per layer in the standard suite.
pub const GRADCHECK_SEEDS: u64 = 20;

type CheckFn = Box<dyn Fn(u64) -> Result<f64> + Send + Sync>;

/// One named randomized check returning the worst relative error for a seed.
pub struct LayerCheck {
    pub name: String,
    run: CheckFn,
}

impl LayerCheck {
    pub fn new(
        name: impl Into<String>,
        run: impl Fn(u64) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        LayerCheck {
            name: name.into(),
            run: Box::new(run),
        }
    }

    pub fn run(&self, seed: u64) -> Result<f64> {
        (self.run)(seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Runs each check over `seeds` and keeps the worst error per layer.
pub fn run_checks(
    checks: &[LayerCheck],
    seeds: impl IntoIterator<Item = u64> + Clone,
) -> Result<Vec<CheckRow>> {
    checks
        .iter()
        .map(|c| {
            let mut worst: f64 = 0.0;
            for seed in seeds.clone() {
                worst = worst.max(c.run(seed)?);
            }
            Ok(CheckRow {
                name: c.name.clone(),
                max_relative_error: worst,
                passed: worst < GRADCHECK_TOLERANCE,
            })
        })
        .collect()
}

/// Small random geometry: channels ≤ 4, T ≤ 6, hidden ≤ 4.
struct Dims {
    c_in: usize,
    c_out: usize,
    len: usize,
    hidden: usize,
}

fn dims(prng: &mut Prng) -> Dims {
    let mut pick = |n: usize| 1 + (prng.next_uniform(0.0, n as f64) as usize).min(n - 1);
    Dims {
        c_in: pick(4),
        c_out: pick(4),
        len: pick(6),
        hidden: pick(4),
    }
}

fn randomize<P: crate::nn::Parameters>(p: &mut P, prng: &mut Prng) -> Result<()> {
    for t in p.tensors_mut() {
        let r = prng.uniform(-0.8, 0.8, t.shape())?;
        *t = r;
    }
    Ok(())
}

fn conv_check(k: usize, seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(100 + k as u64);
    let d = dims(&mut prng);
    let mut kernel = ConvKernel::zeros(d.c_out, d.c_in, k)?;
    randomize(&mut kernel, &mut prng)?;
    let x = prng.uniform(-1.0, 1.0, &[d.c_in, d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.c_out, d.len])?;
    let (g, dx) = conv1d_backward(&x, &kernel, &r)?;
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
}

fn fusion_check(seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(200);
    let d = dims(&mut prng);
    let mut kernel = ConvKernel::zeros(d.c_out, 4 * d.c_in, 1)?;
    randomize(&mut kernel, &mut prng)?;
    let x = prng.uniform(-1.0, 1.0, &[4 * d.c_in, d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.c_out, d.len])?;
    let (g, dx) = conv1d_backward(&x, &kernel, &r)?;
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
        |q| {
            Ok(projection_loss(
                &fusion_conv1x1_forward(&q.input, &q.params)?,
                &r,
            ))
        },
    )
}

fn dense_check(seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(300);
    let d = dims(&mut prng);
    let mut p = DenseParams::init(d.c_out, d.c_in * d.len, &mut prng)?;
    randomize(&mut p, &mut prng)?;
    let x = prng.uniform(-1.0, 1.0, &[d.c_in * d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.c_out])?;
    let (g, dx) = dense_backward(&x, &p, &r)?;
    gradcheck(
        &WithInput {
            params: p,
            input: x,
        },
        &WithInput {
            params: g,
            input: dx,
        },
        GRADCHECK_EPS,
        |q| Ok(projection_loss(&dense_forward(&q.input, &q.params)?, &r)),
    )
}

fn activation_check(
    seed: u64,
    stream: u64,
    f: fn(&Tensor) -> Tensor,
    df: fn(&Tensor, &Tensor) -> Result<Tensor>,
) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(stream);
    let d = dims(&mut prng);
    let x = prng.uniform(-3.0, 3.0, &[d.c_in, d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.c_in, d.len])?;
    let dx = df(&x, &r)?;
    gradcheck(&x, &dx, GRADCHECK_EPS, |q| Ok(projection_loss(&f(q), &r)))
}

fn lstm_check(seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(400);
    let d = dims(&mut prng);
    let mut p = LstmParams::zeros(d.c_in, d.hidden)?;
    randomize(&mut p, &mut prng)?;
    let init = LstmState {
        h: prng.uniform(-0.5, 0.5, &[d.hidden])?,
        c: prng.uniform(-0.5, 0.5, &[d.hidden])?,
    };
    let xs = prng.uniform(-1.0, 1.0, &[d.c_in, d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.hidden, d.len])?;
    let (g, dx) = lstm_backward(&xs, &init, &p, &r)?;
    gradcheck(
        &WithInput {
            params: p,
            input: xs,
        },
        &WithInput {
            params: g,
            input: dx,
        },
        GRADCHECK_EPS,
        |q| {
            Ok(projection_loss(
                &lstm_sequence(&q.input, &init, &q.params)?.0,
                &r,
            ))
        },
    )
}

fn mrc_block_check(seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(500);
    let d = dims(&mut prng);
    let mut p = MrcBlockParams::zeros(d.c_in)?;
    randomize(&mut p, &mut prng)?;
    let x = prng.uniform(-1.0, 1.0, &[d.c_in, d.len])?;
    let r = prng.uniform(-1.0, 1.0, &[d.c_in, d.len])?;
    let (g, dx) = mrc_block_backward(&x, &p, &r)?;
    gradcheck(
        &WithInput {
            params: p,
            input: x,
        },
        &WithInput {
            params: g,
            input: dx,
        },
        GRADCHECK_EPS,
        |q| {
            Ok(projection_loss(
                &mrc_block_forward(&q.input, &q.params)?,
                &r,
            ))
        },
    )
}

/// Gradient of `L = r · model(x)` against finite differences over all
/// parameters and the input window.
pub fn model_check(model: &Model, prng: &mut Prng) -> Result<f64> {
    let x = prng.uniform(0.0, 1.0, &[model.num_features(), model.window()])?;
    let r = prng.next_uniform(0.5, 1.5);
    let (_, g, dx) = model.gradient_with_input(&x, r)?;
    gradcheck(
        &WithInput {
            params: model.clone(),
            input: x,
        },
        &WithInput {
            params: g,
            input: dx,
        },
        GRADCHECK_EPS,
        |q| Ok(r * q.params.forward(&q.input)?),
    )
}

fn mrc_lstm_check(seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(600);
    let d = dims(&mut prng);
    let dims = MrcLstmDims {
        channels: d.c_out,
        hidden: d.hidden,
    };
    let mut model = Model::mrc_lstm(d.c_in, d.len, dims, &mut prng)?;
    // Random biases keep ReLUs away from the all-zero-bias symmetric point.
    randomize(&mut model, &mut prng)?;
    model_check(&model, &mut prng)
}

fn baseline_check(kind: BaselineKind, seed: u64) -> Result<f64> {
    let mut prng = Prng::new(seed).derive(700 + kind as u64);
    let d = dims(&mut prng);
    let model = Model::baseline(kind, d.c_in, d.len, &mut prng)?;
    model_check(&model, &mut prng)
}

/// Every layer primitive plus the assembled networks.
pub fn standard_checks() -> Vec<LayerCheck> {
    vec![
        LayerCheck::new("conv1d-k1", |s| conv_check(1, s)),
        LayerCheck::new("conv1d-k2", |s| conv_check(2, s)),
        LayerCheck::new("conv1d-k3", |s| conv_check(3, s)),
        LayerCheck::new("fusion-1x1", fusion_check),
        LayerCheck::new("dense", dense_check),
        LayerCheck::new("sigmoid", |s| {
            activation_check(s, 800, sigmoid, sigmoid_backward)
        }),
        LayerCheck::new("tanh", |s| {
            activation_check(s, 801, tanh_act, tanh_backward)
        }),
        LayerCheck::new("lstm", lstm_check),
        LayerCheck::new("mrc-block", mrc_block_check),
        LayerCheck::new("mrc-lstm", mrc_lstm_check),
        LayerCheck::new("baseline-mlp", |s| baseline_check(BaselineKind::Mlp, s)),
        LayerCheck::new("baseline-cnn", |s| baseline_check(BaselineKind::Cnn, s)),
        LayerCheck::new("baseline-lstm", |s| baseline_check(BaselineKind::Lstm, s)),
        LayerCheck::new("baseline-cnn-lstm", |s| {
            baseline_check(BaselineKind::CnnLstm, s)
        }),
    ]
}
