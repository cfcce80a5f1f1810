//! Network assemblies: the MRC-LSTM forecaster and the four comparison
//! baselines. All of them map an `F × window` input to one scalar.

pub mod mrc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use mrc::{mrc_block_backward, mrc_block_forward, MrcBlockParams, MRC_CHANNELS};

use crate::error::{Error, Result};
use crate::nn::lstm::{lstm_backward_trace, lstm_forward_trace};
use crate::nn::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, prefixed, relu, relu_backward,
    ConvKernel, DenseParams, LstmParams, LstmState, Parameters,
};
use crate::tensor::{Prng, Tensor};
use mrc::{mrc_block_backward_trace, mrc_block_forward_trace};

/// Days of history per input window.
pub const DEFAULT_WINDOW: usize = 5;
/// LSTM hidden units.
pub const LSTM_HIDDEN: usize = 50;
/// Hidden widths of the MLP baseline.
pub const MLP_HIDDEN: [usize; 2] = [64, 32];
/// Filters per convolution in the CNN and CNN-LSTM baselines.
pub const BASELINE_FILTERS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "mrc-lstm")]
    MrcLstm,
    #[serde(rename = "mlp")]
    Mlp,
    #[serde(rename = "cnn")]
    Cnn,
    #[serde(rename = "lstm")]
    Lstm,
    #[serde(rename = "cnn-lstm")]
    CnnLstm,
}

impl Architecture {
    /// Every architecture, in the row order used by comparison reports.
    pub const ALL: [Architecture; 5] = [
        Architecture::MrcLstm,
        Architecture::Mlp,
        Architecture::Cnn,
        Architecture::Lstm,
        Architecture::CnnLstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::MrcLstm => "mrc-lstm",
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
            Architecture::Lstm => "lstm",
            Architecture::CnnLstm => "cnn-lstm",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown architecture {s:?} (expected one of mrc-lstm, mlp, cnn, lstm, cnn-lstm)"
                ))
            })
    }
}

/// The comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    Mlp,
    Cnn,
    Lstm,
    CnnLstm,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] = [
        BaselineKind::Mlp,
        BaselineKind::Cnn,
        BaselineKind::Lstm,
        BaselineKind::CnnLstm,
    ];

    pub fn architecture(self) -> Architecture {
        match self {
            BaselineKind::Mlp => Architecture::Mlp,
            BaselineKind::Cnn => Architecture::Cnn,
            BaselineKind::Lstm => Architecture::Lstm,
            BaselineKind::CnnLstm => Architecture::CnnLstm,
        }
    }
}

impl TryFrom<Architecture> for BaselineKind {
    type Error = Error;

    fn try_from(a: Architecture) -> Result<Self> {
        match a {
            Architecture::Mlp => Ok(BaselineKind::Mlp),
            Architecture::Cnn => Ok(BaselineKind::Cnn),
            Architecture::Lstm => Ok(BaselineKind::Lstm),
            Architecture::CnnLstm => Ok(BaselineKind::CnnLstm),
            Architecture::MrcLstm => Err(Error::Config("mrc-lstm is not a baseline".into())),
        }
    }
}

/// Widths of the MRC-LSTM. The defaults are 16 filters and
/// 50 LSTM units; smaller values are used for cheap gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MrcLstmDims {
    pub channels: usize,
    pub hidden: usize,
}

impl Default for MrcLstmDims {
    fn default() -> Self {
        MrcLstmDims {
            channels: MRC_CHANNELS,
            hidden: LSTM_HIDDEN,
        }
    }
}

/// Stem conv (k=1) → ReLU → multi-scale block → LSTM → dense on `h_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcLstmParams {
    pub stem: ConvKernel,
    pub block: MrcBlockParams,
    pub lstm: LstmParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden1: DenseParams,
    pub hidden2: DenseParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub conv1: ConvKernel,
    pub conv2: ConvKernel,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetParams {
    pub lstm: LstmParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnLstmParams {
    pub conv: ConvKernel,
    pub lstm: LstmParams,
    pub head: DenseParams,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum ModelParams {
    MrcLstm(MrcLstmParams),
    Mlp(MlpParams),
    Cnn(CnnParams),
    Lstm(LstmNetParams),
    CnnLstm(CnnLstmParams),
}

impl Parameters for ModelParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        match self {
            ModelParams::MrcLstm(p) => prefixed("stem", p.stem.named_tensors())
                .chain(prefixed("block", p.block.named_tensors()))
                .chain(prefixed("lstm", p.lstm.named_tensors()))
                .chain(prefixed("head", p.head.named_tensors()))
                .collect(),
            ModelParams::Mlp(p) => prefixed("hidden1", p.hidden1.named_tensors())
                .chain(prefixed("hidden2", p.hidden2.named_tensors()))
                .chain(prefixed("head", p.head.named_tensors()))
                .collect(),
            ModelParams::Cnn(p) => prefixed("conv1", p.conv1.named_tensors())
                .chain(prefixed("conv2", p.conv2.named_tensors()))
                .chain(prefixed("head", p.head.named_tensors()))
                .collect(),
            ModelParams::Lstm(p) => prefixed("lstm", p.lstm.named_tensors())
                .chain(prefixed("head", p.head.named_tensors()))
                .collect(),
            ModelParams::CnnLstm(p) => prefixed("conv", p.conv.named_tensors())
                .chain(prefixed("lstm", p.lstm.named_tensors()))
                .chain(prefixed("head", p.head.named_tensors()))
                .collect(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        match self {
            ModelParams::MrcLstm(p) => {
                v.extend(p.stem.tensors_mut());
                v.extend(p.block.tensors_mut());
                v.extend(p.lstm.tensors_mut());
                v.extend(p.head.tensors_mut());
            }
            ModelParams::Mlp(p) => {
                v.extend(p.hidden1.tensors_mut());
                v.extend(p.hidden2.tensors_mut());
                v.extend(p.head.tensors_mut());
            }
            ModelParams::Cnn(p) => {
                v.extend(p.conv1.tensors_mut());
                v.extend(p.conv2.tensors_mut());
                v.extend(p.head.tensors_mut());
            }
            ModelParams::Lstm(p) => {
                v.extend(p.lstm.tensors_mut());
                v.extend(p.head.tensors_mut());
            }
            ModelParams::CnnLstm(p) => {
                v.extend(p.conv.tensors_mut());
                v.extend(p.lstm.tensors_mut());
                v.extend(p.head.tensors_mut());
            }
        }
        v
    }
}

/// A network together with the input geometry it was built for.
///
/// The gradient of a model is another `Model` of the same architecture
/// whose tensors hold `dL/dθ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    num_features: usize,
    window: usize,
    params: ModelParams,
}

impl Parameters for Model {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.params.named_tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.tensors_mut()
    }
}

fn check_features(num_features: usize, window: usize) -> Result<()> {
    if num_features < 1 {
        return Err(Error::Config(
            "model needs at least one input feature".into(),
        ));
    }
    if window < 1 {
        return Err(Error::Config("model window must be at least 1".into()));
    }
    Ok(())
}

/// MRC-LSTM with the default widths and a 5-day window.
pub fn build_mrc_lstm(num_features: usize, prng: &mut Prng) -> Result<Model> {
    Model::mrc_lstm(num_features, DEFAULT_WINDOW, MrcLstmDims::default(), prng)
}

/// One of the comparison networks with a 5-day window.
pub fn build_baseline(kind: BaselineKind, num_features: usize, prng: &mut Prng) -> Result<Model> {
    Model::baseline(kind, num_features, DEFAULT_WINDOW, prng)
}

impl Model {
    pub fn mrc_lstm(
        num_features: usize,
        window: usize,
        dims: MrcLstmDims,
        prng: &mut Prng,
    ) -> Result<Model> {
        check_features(num_features, window)?;
        let c = dims.channels;
        let params = MrcLstmParams {
            stem: ConvKernel::init(c, num_features, 1, prng)?,
            block: MrcBlockParams::init(c, prng)?,
            lstm: LstmParams::init(c, dims.hidden, prng)?,
            head: DenseParams::init(1, dims.hidden, prng)?,
        };
        Ok(Model {
            num_features,
            window,
            params: ModelParams::MrcLstm(params),
        })
    }

    pub fn baseline(
        kind: BaselineKind,
        num_features: usize,
        window: usize,
        prng: &mut Prng,
    ) -> Result<Model> {
        check_features(num_features, window)?;
        let f = num_features;
        let params = match kind {
            BaselineKind::Mlp => {
                let [h1, h2] = MLP_HIDDEN;
                ModelParams::Mlp(MlpParams {
                    hidden1: DenseParams::init(h1, f * window, prng)?,
                    hidden2: DenseParams::init(h2, h1, prng)?,
                    head: DenseParams::init(1, h2, prng)?,
                })
            }
            BaselineKind::Cnn => ModelParams::Cnn(CnnParams {
                conv1: ConvKernel::init(BASELINE_FILTERS, f, 2, prng)?,
                conv2: ConvKernel::init(BASELINE_FILTERS, BASELINE_FILTERS, 2, prng)?,
                head: DenseParams::init(1, BASELINE_FILTERS * window, prng)?,
            }),
            BaselineKind::Lstm => ModelParams::Lstm(LstmNetParams {
                lstm: LstmParams::init(f, LSTM_HIDDEN, prng)?,
                head: DenseParams::init(1, LSTM_HIDDEN, prng)?,
            }),
            BaselineKind::CnnLstm => ModelParams::CnnLstm(CnnLstmParams {
                conv: ConvKernel::init(BASELINE_FILTERS, f, 2, prng)?,
                lstm: LstmParams::init(BASELINE_FILTERS, LSTM_HIDDEN, prng)?,
                head: DenseParams::init(1, LSTM_HIDDEN, prng)?,
            }),
        };
        Ok(Model {
            num_features,
            window,
            params,
        })
    }

    /// Builds any architecture with its default widths.
    pub fn build(
        arch: Architecture,
        num_features: usize,
        window: usize,
        prng: &mut Prng,
    ) -> Result<Model> {
        match arch {
            Architecture::MrcLstm => {
                Model::mrc_lstm(num_features, window, MrcLstmDims::default(), prng)
            }
            other => Model::baseline(other.try_into()?, num_features, window, prng),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self.params {
            ModelParams::MrcLstm(_) => Architecture::MrcLstm,
            ModelParams::Mlp(_) => Architecture::Mlp,
            ModelParams::Cnn(_) => Architecture::Cnn,
            ModelParams::Lstm(_) => Architecture::Lstm,
            ModelParams::CnnLstm(_) => Architecture::CnnLstm,
        }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    fn check_window(&self, input: &Tensor) -> Result<()> {
        if input.shape() != [self.num_features, self.window] {
            return Err(Error::shape(format!(
                "{} expects a [{}, {}] window, got {:?}",
                self.architecture(),
                self.num_features,
                self.window,
                input.shape()
            )));
        }
        Ok(())
    }

    /// Normalized-scale prediction for one `F × window` input.
    pub fn forward(&self, input: &Tensor) -> Result<f64> {
        self.forward_backward(input, None).map(|(y, _)| y)
    }

    /// Prediction and `dL/dθ` given `dL/dprediction`.
    pub fn gradient(&self, input: &Tensor, d_pred: f64) -> Result<(f64, Model)> {
        let (y, g) = self.forward_backward(input, Some(d_pred))?;
        let (params, _) = g.expect("backward requested");
        Ok((
            y,
            Model {
                num_features: self.num_features,
                window: self.window,
                params,
            },
        ))
    }

    /// Like [`Model::gradient`] but also returns `dL/dinput`.
    pub fn gradient_with_input(&self, input: &Tensor, d_pred: f64) -> Result<(f64, Model, Tensor)> {
        let (y, g) = self.forward_backward(input, Some(d_pred))?;
        let (params, dx) = g.expect("backward requested");
        Ok((
            y,
            Model {
                num_features: self.num_features,
                window: self.window,
                params,
            },
            dx,
        ))
    }

    fn forward_backward(
        &self,
        x: &Tensor,
        d_pred: Option<f64>,
    ) -> Result<(f64, Option<(ModelParams, Tensor)>)> {
        self.check_window(x)?;
        match &self.params {
            ModelParams::MrcLstm(p) => mrc_lstm_pass(p, x, d_pred),
            ModelParams::Mlp(p) => mlp_pass(p, x, d_pred),
            ModelParams::Cnn(p) => cnn_pass(p, x, d_pred),
            ModelParams::Lstm(p) => lstm_net_pass(p, x, d_pred),
            ModelParams::CnnLstm(p) => cnn_lstm_pass(p, x, d_pred),
        }
    }
}

type Pass<P> = Result<(f64, Option<(P, Tensor)>)>;

fn d_scalar(d: f64) -> Tensor {
    Tensor::zeros(&[1]).map(|_| d)
}

/// Dense head on the final LSTM state; returns the prediction and, when
/// requested, the head gradient plus `dL/dhs` (non-zero only at the last step).
fn lstm_head(
    hs: &Tensor,
    last_h: &Tensor,
    head: &DenseParams,
    d_pred: Option<f64>,
) -> Result<(f64, Option<(DenseParams, Tensor)>)> {
    let y = dense_forward(last_h, head)?.data()[0];
    let Some(d) = d_pred else {
        return Ok((y, None));
    };
    let (g_head, d_h) = dense_backward(last_h, head, &d_scalar(d))?;
    let mut d_hs = hs.zeros_like();
    d_hs.set_column(hs.cols() - 1, d_h.data());
    Ok((y, Some((g_head, d_hs))))
}

fn mrc_lstm_pass(p: &MrcLstmParams, x: &Tensor, d_pred: Option<f64>) -> Pass<ModelParams> {
    let stem_pre = conv1d_forward(x, &p.stem)?;
    let stem_out = relu(&stem_pre);
    let (block_out, block_trace) = mrc_block_forward_trace(&stem_out, &p.block)?;
    let init = LstmState::zeros(p.lstm.hidden_size())?;
    let (hs, last, lstm_trace) = lstm_forward_trace(&block_out, &init, &p.lstm)?;
    let (y, head) = lstm_head(&hs, &last.h, &p.head, d_pred)?;
    let Some((g_head, d_hs)) = head else {
        return Ok((y, None));
    };
    let (g_lstm, d_block_out) = lstm_backward_trace(&lstm_trace, &p.lstm, &d_hs)?;
    let (g_block, d_stem_out) = mrc_block_backward_trace(&block_trace, &p.block, &d_block_out)?;
    let d_stem_pre = relu_backward(&stem_pre, &d_stem_out)?;
    let (g_stem, dx) = conv1d_backward(x, &p.stem, &d_stem_pre)?;
    let grads = MrcLstmParams {
        stem: g_stem,
        block: g_block,
        lstm: g_lstm,
        head: g_head,
    };
    Ok((y, Some((ModelParams::MrcLstm(grads), dx))))
}

fn mlp_pass(p: &MlpParams, x: &Tensor, d_pred: Option<f64>) -> Pass<ModelParams> {
    let z1 = dense_forward(x, &p.hidden1)?;
    let a1 = relu(&z1);
    let z2 = dense_forward(&a1, &p.hidden2)?;
    let a2 = relu(&z2);
    let y = dense_forward(&a2, &p.head)?.data()[0];
    let Some(d) = d_pred else {
        return Ok((y, None));
    };
    let (g_head, d_a2) = dense_backward(&a2, &p.head, &d_scalar(d))?;
    let d_z2 = relu_backward(&z2, &d_a2)?;
    let (g2, d_a1) = dense_backward(&a1, &p.hidden2, &d_z2)?;
    let d_z1 = relu_backward(&z1, &d_a1)?;
    let (g1, dx) = dense_backward(x, &p.hidden1, &d_z1)?;
    let grads = MlpParams {
        hidden1: g1,
        hidden2: g2,
        head: g_head,
    };
    Ok((y, Some((ModelParams::Mlp(grads), dx))))
}

fn cnn_pass(p: &CnnParams, x: &Tensor, d_pred: Option<f64>) -> Pass<ModelParams> {
    let z1 = conv1d_forward(x, &p.conv1)?;
    let a1 = relu(&z1);
    let z2 = conv1d_forward(&a1, &p.conv2)?;
    let a2 = relu(&z2);
    let y = dense_forward(&a2, &p.head)?.data()[0];
    let Some(d) = d_pred else {
        return Ok((y, None));
    };
    let (g_head, d_a2) = dense_backward(&a2, &p.head, &d_scalar(d))?;
    let d_z2 = relu_backward(&z2, &d_a2)?;
    let (g2, d_a1) = conv1d_backward(&a1, &p.conv2, &d_z2)?;
    let d_z1 = relu_backward(&z1, &d_a1)?;
    let (g1, dx) = conv1d_backward(x, &p.conv1, &d_z1)?;
    let grads = CnnParams {
        conv1: g1,
        conv2: g2,
        head: g_head,
    };
    Ok((y, Some((ModelParams::Cnn(grads), dx))))
}

fn lstm_net_pass(p: &LstmNetParams, x: &Tensor, d_pred: Option<f64>) -> Pass<ModelParams> {
    let init = LstmState::zeros(p.lstm.hidden_size())?;
    let (hs, last, trace) = lstm_forward_trace(x, &init, &p.lstm)?;
    let (y, head) = lstm_head(&hs, &last.h, &p.head, d_pred)?;
    let Some((g_head, d_hs)) = head else {
        return Ok((y, None));
    };
    let (g_lstm, dx) = lstm_backward_trace(&trace, &p.lstm, &d_hs)?;
    let grads = LstmNetParams {
        lstm: g_lstm,
        head: g_head,
    };
    Ok((y, Some((ModelParams::Lstm(grads), dx))))
}

fn cnn_lstm_pass(p: &CnnLstmParams, x: &Tensor, d_pred: Option<f64>) -> Pass<ModelParams> {
    let z = conv1d_forward(x, &p.conv)?;
    let a = relu(&z);
    let init = LstmState::zeros(p.lstm.hidden_size())?;
    let (hs, last, trace) = lstm_forward_trace(&a, &init, &p.lstm)?;
    let (y, head) = lstm_head(&hs, &last.h, &p.head, d_pred)?;
    let Some((g_head, d_hs)) = head else {
        return Ok((y, None));
    };
    let (g_lstm, d_a) = lstm_backward_trace(&trace, &p.lstm, &d_hs)?;
    let d_z = relu_backward(&z, &d_a)?;
    let (g_conv, dx) = conv1d_backward(x, &p.conv, &d_z)?;
    let grads = CnnLstmParams {
        conv: g_conv,
        lstm: g_lstm,
        head: g_head,
    };
    Ok((y, Some((ModelParams::CnnLstm(grads), dx))))
}
