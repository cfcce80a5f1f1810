//! The multi-scale residual convolution block.
//!
//! Three causal bypass convolutions with kernel sizes 1, 2 and 3 (each
//! followed by ReLU) run alongside an identity path. The identity map and the
//! three bypass outputs are concatenated along channels, `[x, b1, b2, b3]`,
//! and a 1×1 fusion convolution followed by ReLU maps the `4C` channels back
//! to `C`, so the block preserves its input shape.

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, conv1d_backward, conv1d_forward, fusion_conv1x1_forward, prefixed, relu,
    relu_backward, split_channels, ConvKernel, Parameters,
};
use crate::tensor::{Prng, Tensor};

/// Channel width the block is built with by default.
pub const MRC_CHANNELS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct MrcBlockParams {
    pub bypass1: ConvKernel,
    pub bypass2: ConvKernel,
    pub bypass3: ConvKernel,
    pub fusion: ConvKernel,
}

impl MrcBlockParams {
    pub fn zeros(channels: usize) -> Result<Self> {
        Ok(MrcBlockParams {
            bypass1: ConvKernel::zeros(channels, channels, 1)?,
            bypass2: ConvKernel::zeros(channels, channels, 2)?,
            bypass3: ConvKernel::zeros(channels, channels, 3)?,
            fusion: ConvKernel::zeros(channels, 4 * channels, 1)?,
        })
    }

    pub fn init(channels: usize, prng: &mut Prng) -> Result<Self> {
        Ok(MrcBlockParams {
            bypass1: ConvKernel::init(channels, channels, 1, prng)?,
            bypass2: ConvKernel::init(channels, channels, 2, prng)?,
            bypass3: ConvKernel::init(channels, channels, 3, prng)?,
            fusion: ConvKernel::init(channels, 4 * channels, 1, prng)?,
        })
    }

    pub fn channels(&self) -> usize {
        self.bypass1.in_channels()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        let bypass_ok = [(&self.bypass1, 1), (&self.bypass2, 2), (&self.bypass3, 3)]
            .iter()
            .all(|(k, size)| {
                k.in_channels() == c && k.out_channels() == c && k.kernel_size() == *size
            });
        let fusion_ok = self.fusion.in_channels() == 4 * c
            && self.fusion.out_channels() == c
            && self.fusion.kernel_size() == 1;
        if bypass_ok && fusion_ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "multi-scale block kernels are inconsistent with {c} channels"
            )))
        }
    }

    fn bypasses(&self) -> [&ConvKernel; 3] {
        [&self.bypass1, &self.bypass2, &self.bypass3]
    }
}

impl Parameters for MrcBlockParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        prefixed("bypass1", self.bypass1.named_tensors())
            .chain(prefixed("bypass2", self.bypass2.named_tensors()))
            .chain(prefixed("bypass3", self.bypass3.named_tensors()))
            .chain(prefixed("fusion", self.fusion.named_tensors()))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.bypass1.tensors_mut();
        v.extend(self.bypass2.tensors_mut());
        v.extend(self.bypass3.tensors_mut());
        v.extend(self.fusion.tensors_mut());
        v
    }
}

/// Intermediate values of one block evaluation.
#[derive(Debug, Clone)]
pub struct MrcTrace {
    input: Tensor,
    bypass_pre: [Tensor; 3],
    concat: Tensor,
    fused_pre: Tensor,
}

pub(crate) fn mrc_block_forward_trace(
    input: &Tensor,
    params: &MrcBlockParams,
) -> Result<(Tensor, MrcTrace)> {
    params.validate()?;
    let c = params.channels();
    if input.ndim() != 2 || input.rows() != c {
        return Err(Error::shape(format!(
            "multi-scale block expects [{c}, T] input, got {:?}",
            input.shape()
        )));
    }
    let [k1, k2, k3] = params.bypasses();
    let bypass_pre = [
        conv1d_forward(input, k1)?,
        conv1d_forward(input, k2)?,
        conv1d_forward(input, k3)?,
    ];
    let activated: Vec<Tensor> = bypass_pre.iter().map(relu).collect();
    let concat = concat_channels(&[input, &activated[0], &activated[1], &activated[2]])?;
    let fused_pre = fusion_conv1x1_forward(&concat, &params.fusion)?;
    let out = relu(&fused_pre);
    Ok((
        out,
        MrcTrace {
            input: input.clone(),
            bypass_pre,
            concat,
            fused_pre,
        },
    ))
}

pub(crate) fn mrc_block_backward_trace(
    trace: &MrcTrace,
    params: &MrcBlockParams,
    upstream: &Tensor,
) -> Result<(MrcBlockParams, Tensor)> {
    let c = params.channels();
    let d_fused = relu_backward(&trace.fused_pre, upstream)?;
    let (g_fusion, d_concat) = conv1d_backward(&trace.concat, &params.fusion, &d_fused)?;
    let mut parts = split_channels(&d_concat, &[c, c, c, c])?.into_iter();
    // The identity slice flows straight back to the input.
    let mut d_input = parts.next().expect("four channel groups");
    let mut grads = Vec::with_capacity(3);
    for ((kernel, pre), d_act) in params
        .bypasses()
        .into_iter()
        .zip(&trace.bypass_pre)
        .zip(parts)
    {
        let d_pre = relu_backward(pre, &d_act)?;
        let (g, dx) = conv1d_backward(&trace.input, kernel, &d_pre)?;
        d_input.add_scaled(&dx, 1.0)?;
        grads.push(g);
    }
    let mut grads = grads.into_iter();
    Ok((
        MrcBlockParams {
            bypass1: grads.next().expect("bypass1"),
            bypass2: grads.next().expect("bypass2"),
            bypass3: grads.next().expect("bypass3"),
            fusion: g_fusion,
        },
        d_input,
    ))
}

/// `C × T → C × T` block evaluation.
pub fn mrc_block_forward(input: &Tensor, params: &MrcBlockParams) -> Result<Tensor> {
    mrc_block_forward_trace(input, params).map(|(out, _)| out)
}

/// Exact gradient of [`mrc_block_forward`] for the given upstream gradient.
pub fn mrc_block_backward(
    input: &Tensor,
    params: &MrcBlockParams,
    upstream: &Tensor,
) -> Result<(MrcBlockParams, Tensor)> {
    let (out, trace) = mrc_block_forward_trace(input, params)?;
    if upstream.shape() != out.shape() {
        return Err(Error::shape(format!(
            "block upstream gradient {:?}, expected {:?}",
            upstream.shape(),
            out.shape()
        )));
    }
    mrc_block_backward_trace(&trace, params, upstream)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fusion weights that copy identity channel `i` to output `i`.
    fn passthrough(channels: usize) -> MrcBlockParams {
        let mut p = MrcBlockParams::zeros(channels).unwrap();
        let w = p.fusion.weights.data_mut();
        for i in 0..channels {
            w[i * 4 * channels + i] = 1.0;
        }
        p
    }

    #[test]
    fn preserves_shape() {
        let mut prng = Prng::new(1);
        let p = MrcBlockParams::init(MRC_CHANNELS, &mut prng).unwrap();
        for len in [1, 2, 5, 9] {
            let x = prng.uniform(-1.0, 1.0, &[16, len]).unwrap();
            assert_eq!(mrc_block_forward(&x, &p).unwrap().shape(), &[16, len]);
        }
    }

    #[test]
    fn identity_only_acts_as_relu() {
        let p = passthrough(16);
        let x = Prng::new(2).uniform(-1.0, 1.0, &[16, 5]).unwrap();
        assert_eq!(mrc_block_forward(&x, &p).unwrap(), relu(&x));
    }

    #[test]
    fn zero_input_zero_bias_zero_output() {
        let p = MrcBlockParams::init(16, &mut Prng::new(3)).unwrap();
        let x = Tensor::new(&[16, 5], 0.0).unwrap();
        assert!(mrc_block_forward(&x, &p)
            .unwrap()
            .data()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn wrong_channel_count() {
        let p = MrcBlockParams::zeros(16).unwrap();
        let x = Tensor::new(&[15, 5], 0.0).unwrap();
        assert!(matches!(mrc_block_forward(&x, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut prng = Prng::new(4);
        let p = MrcBlockParams::init(4, &mut prng).unwrap();
        let x = prng.uniform(-1.0, 1.0, &[4, 5]).unwrap();
        let (g, dx) = mrc_block_backward(&x, &p, &Tensor::new(&[4, 5], 0.0).unwrap()).unwrap();
        assert!(g
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|v| *v == 0.0)));
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_bypasses_route_gradient_through_identity() {
        // With bypass weights zero, d_input = W_fusion[:, identity]ᵀ · (relu'(z) ⊙ up).
        let mut prng = Prng::new(5);
        let c = 3;
        let mut p = MrcBlockParams::zeros(c).unwrap();
        p.fusion = ConvKernel::init(c, 4 * c, 1, &mut prng).unwrap();
        let x = prng.uniform(-1.0, 1.0, &[c, 4]).unwrap();
        let up = prng.uniform(-1.0, 1.0, &[c, 4]).unwrap();
        let (_, dx) = mrc_block_backward(&x, &p, &up).unwrap();

        let w = p.fusion.weights.data();
        for t in 0..4 {
            let z: Vec<f64> = (0..c)
                .map(|o| (0..c).map(|i| w[o * 4 * c + i] * x.at2(i, t)).sum())
                .collect();
            for i in 0..c {
                let expected: f64 = (0..c)
                    .filter(|&o| z[o] > 0.0)
                    .map(|o| w[o * 4 * c + i] * up.at2(o, t))
                    .sum();
                assert!((dx.at2(i, t) - expected).abs() < 1e-14);
            }
        }
    }
}
