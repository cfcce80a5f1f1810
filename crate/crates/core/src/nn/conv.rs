//! Temporal 1D convolution over `C × T` feature maps with causal
//! (left-only) zero padding.

use super::{glorot_uniform, Parameters};
use crate::error::{Error, Result};
use crate::tensor::{Prng, Tensor};

/// Convolution weights `[out, in, k]` and per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl ConvKernel {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.ndim() != 3 {
            return Err(Error::shape(format!(
                "conv weights must be [out, in, k], got {:?}",
                weights.shape()
            )));
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(Error::shape(format!(
                "conv bias {:?} does not match {} output channels",
                bias.shape(),
                weights.shape()[0]
            )));
        }
        Ok(ConvKernel { weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Result<Self> {
        ConvKernel::new(
            Tensor::new(&[out_channels, in_channels, k], 0.0)?,
            Tensor::new(&[out_channels], 0.0)?,
        )
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(
        out_channels: usize,
        in_channels: usize,
        k: usize,
        prng: &mut Prng,
    ) -> Result<Self> {
        let weights = glorot_uniform(
            prng,
            &[out_channels, in_channels, k],
            in_channels * k,
            out_channels * k,
        )?;
        ConvKernel::new(weights, Tensor::new(&[out_channels], 0.0)?)
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.shape()[2]
    }

    #[inline]
    fn w(&self, o: usize, c: usize, j: usize) -> f64 {
        let s = self.weights.shape();
        self.weights.data()[(o * s[1] + c) * s[2] + j]
    }
}

impl Parameters for ConvKernel {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("weight".to_string(), &self.weights),
            ("bias".to_string(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }
}

fn check_input(input: &Tensor, kernel: &ConvKernel) -> Result<(usize, usize)> {
    if input.ndim() != 2 {
        return Err(Error::shape(format!(
            "conv input must be [channels, time], got {:?}",
            input.shape()
        )));
    }
    if input.rows() != kernel.in_channels() {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {}",
            kernel.in_channels(),
            input.rows()
        )));
    }
    Ok((input.rows(), input.cols()))
}

/// `out[o][t] = b[o] + Σ_c Σ_j w[o][c][j] · x[c][t − (k−1) + j]`, where
/// indices before the start of the sequence read as zero. Output length
/// equals input length and output at `t` depends only on inputs at `≤ t`.
pub fn conv1d_forward(input: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    let (c_in, len) = check_input(input, kernel)?;
    let c_out = kernel.out_channels();
    let k = kernel.kernel_size();
    let x = input.data();
    let mut out = vec![0.0; c_out * len];
    for o in 0..c_out {
        for t in 0..len {
            let mut acc = kernel.bias.data()[o];
            for c in 0..c_in {
                for j in 0..k {
                    // Source time index is t + j - (k - 1); skip the zero pad.
                    if t + j + 1 < k {
                        continue;
                    }
                    let src = t + j + 1 - k;
                    acc += kernel.w(o, c, j) * x[c * len + src];
                }
            }
            out[o * len + t] = acc;
        }
    }
    Tensor::from_vec(&[c_out, len], out)
}

/// Gradients of [`conv1d_forward`] with respect to the kernel and the input.
pub fn conv1d_backward(
    input: &Tensor,
    kernel: &ConvKernel,
    upstream: &Tensor,
) -> Result<(ConvKernel, Tensor)> {
    let (c_in, len) = check_input(input, kernel)?;
    let c_out = kernel.out_channels();
    let k = kernel.kernel_size();
    if upstream.shape() != [c_out, len] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?}, expected [{c_out}, {len}]",
            upstream.shape()
        )));
    }
    let x = input.data();
    let g = upstream.data();
    let mut grad = kernel.zeroed();
    let mut dx = vec![0.0; c_in * len];
    {
        let db = grad.bias.data_mut();
        for o in 0..c_out {
            db[o] = g[o * len..(o + 1) * len].iter().sum();
        }
    }
    let dw = grad.weights.data_mut();
    let w = kernel.weights.data();
    for o in 0..c_out {
        for c in 0..c_in {
            for j in 0..k {
                let widx = (o * c_in + c) * k + j;
                let mut acc = 0.0;
                for t in (k - 1 - j)..len {
                    let src = t + j + 1 - k;
                    let up = g[o * len + t];
                    acc += up * x[c * len + src];
                    dx[c * len + src] += w[widx] * up;
                }
                dw[widx] = acc;
            }
        }
    }
    Ok((grad, Tensor::from_vec(&[c_in, len], dx)?))
}

/// Cross-channel fusion: a 1-tap convolution applying the same `C_out × C_in`
/// linear map at every time step.
pub fn fusion_conv1x1_forward(input: &Tensor, kernel: &ConvKernel) -> Result<Tensor> {
    if kernel.kernel_size() != 1 {
        return Err(Error::Config(format!(
            "fusion convolution needs kernel size 1, got {}",
            kernel.kernel_size()
        )));
    }
    conv1d_forward(input, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(w: Vec<f64>, shape: [usize; 3], b: Vec<f64>) -> ConvKernel {
        let bshape = [b.len()];
        ConvKernel::new(
            Tensor::from_vec(&shape, w).unwrap(),
            Tensor::from_vec(&bshape, b).unwrap(),
        )
        .unwrap()
    }

    fn row(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn k1_scales_each_step() {
        let k = kernel(vec![2.0], [1, 1, 1], vec![0.0]);
        let y = conv1d_forward(&row(&[1.0, 2.0, 3.0]), &k).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn k2_causal_pad() {
        let k = kernel(vec![1.0, 1.0], [1, 1, 2], vec![0.0]);
        let y = conv1d_forward(&row(&[1.0, 2.0, 3.0]), &k).unwrap();
        assert_eq!(y.data(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let k = kernel(vec![0.0; 12], [2, 2, 3], vec![0.5, -1.5]);
        let x = Prng::new(1).uniform(-1.0, 1.0, &[2, 4]).unwrap();
        let y = conv1d_forward(&x, &k).unwrap();
        assert_eq!(y.row(0), &[0.5; 4]);
        assert_eq!(y.row(1), &[-1.5; 4]);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let k = ConvKernel::zeros(1, 2, 1).unwrap();
        assert!(matches!(
            conv1d_forward(&row(&[1.0]), &k),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut p = Prng::new(2);
        let k = ConvKernel::init(3, 2, 3, &mut p).unwrap();
        let x = p.uniform(-1.0, 1.0, &[2, 5]).unwrap();
        let (g, dx) = conv1d_backward(&x, &k, &Tensor::new(&[3, 5], 0.0).unwrap()).unwrap();
        assert!(g
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|v| *v == 0.0)));
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn k1_weight_grad_is_dot_product() {
        let k = kernel(vec![0.7], [1, 1, 1], vec![0.1]);
        let x = row(&[1.0, -2.0, 3.0, 0.5]);
        let up = row(&[0.3, 0.2, -1.0, 4.0]);
        let (g, _) = conv1d_backward(&x, &k, &up).unwrap();
        let expected: f64 = x.data().iter().zip(up.data()).map(|(a, b)| a * b).sum();
        assert!((g.weights.data()[0] - expected).abs() < 1e-15);
        assert!((g.bias.data()[0] - 3.5).abs() < 1e-15);
    }

    #[test]
    fn fusion_identity() {
        let mut w = Tensor::new(&[3, 3, 1], 0.0).unwrap();
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let k = ConvKernel::new(w, Tensor::new(&[3], 0.0).unwrap()).unwrap();
        let x = Prng::new(5).uniform(-1.0, 1.0, &[3, 4]).unwrap();
        assert_eq!(fusion_conv1x1_forward(&x, &k).unwrap(), x);
    }

    #[test]
    fn fusion_sums_channels() {
        let k = kernel(vec![1.0, 1.0], [1, 2, 1], vec![0.0]);
        let x = Tensor::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(fusion_conv1x1_forward(&x, &k).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn fusion_zero_input_broadcasts_bias() {
        let k = kernel(vec![0.3, -0.2], [1, 2, 1], vec![0.25]);
        let x = Tensor::new(&[2, 6], 0.0).unwrap();
        assert_eq!(fusion_conv1x1_forward(&x, &k).unwrap().data(), &[0.25; 6]);
    }

    #[test]
    fn fusion_rejects_wide_kernel() {
        let k = ConvKernel::zeros(1, 1, 2).unwrap();
        assert!(matches!(
            fusion_conv1x1_forward(&row(&[1.0]), &k),
            Err(Error::Config(_))
        ));
    }
}
