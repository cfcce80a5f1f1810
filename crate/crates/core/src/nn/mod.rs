//! Layer primitives with hand-derived backward passes.
//!
//! Every parameter bundle doubles as its own gradient container: the
//! gradient of a [`ConvKernel`] is another `ConvKernel` with identical
//! shapes, and so on up to whole models.

pub mod activation;
pub mod concat;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod lstm;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, tanh_act, tanh_backward};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv1d_backward, conv1d_forward, fusion_conv1x1_forward, ConvKernel};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use gradcheck::{gradcheck, projection_loss, relative_error, WithInput};
pub use lstm::{lstm_backward, lstm_sequence, lstm_step, LstmParams, LstmState};

use crate::error::Result;
use crate::tensor::{Prng, Tensor};

/// A named collection of tensors that can be visited in a fixed order.
///
/// The visiting order defines the layout used by the optimizer state and
/// by checkpoints, so implementations must never reorder their fields.
pub trait Parameters: Clone {
    /// Tensors paired with dotted names, in canonical order.
    fn named_tensors(&self) -> Vec<(String, &Tensor)>;

    /// Mutable tensors in the same order as [`Parameters::named_tensors`].
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    /// Same structure with every element set to zero.
    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += s * other` tensor by tensor.
    fn add_scaled(&mut self, other: &Self, s: f64) -> Result<()> {
        let others = other.tensors();
        for (dst, src) in self.tensors_mut().into_iter().zip(others) {
            dst.add_scaled(src, s)?;
        }
        Ok(())
    }
}

impl Parameters for Tensor {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![(String::new(), self)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![self]
    }
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    inner: Vec<(String, &'a Tensor)>,
) -> impl Iterator<Item = (String, &'a Tensor)> {
    let prefix = prefix.to_string();
    inner.into_iter().map(move |(n, t)| {
        if n.is_empty() {
            (prefix.clone(), t)
        } else {
            (format!("{prefix}.{n}"), t)
        }
    })
}

/// Uniform `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_uniform(
    prng: &mut Prng,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Result<Tensor> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    prng.uniform(-a, a, shape)
}
