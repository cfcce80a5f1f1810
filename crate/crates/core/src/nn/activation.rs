//! Pointwise activations and their derivatives.
//!
//! Backward functions take the forward *input* and the upstream gradient.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes upstream where `x > 0`; the derivative at exactly zero is 0.
pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    gate(x, upstream, |v| if v > 0.0 { 1.0 } else { 0.0 })
}

#[inline]
pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn sigmoid_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    gate(x, upstream, |v| {
        let s = sigmoid_scalar(v);
        s * (1.0 - s)
    })
}

pub fn tanh_act(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

pub fn tanh_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    gate(x, upstream, |v| {
        let t = v.tanh();
        1.0 - t * t
    })
}

fn gate(x: &Tensor, upstream: &Tensor, deriv: impl Fn(f64) -> f64) -> Result<Tensor> {
    if x.shape() != upstream.shape() {
        return Err(Error::shape(format!(
            "activation input {:?} vs upstream {:?}",
            x.shape(),
            upstream.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(v, g)| deriv(*v) * g)
        .collect();
    Tensor::from_vec(x.shape(), data)
}
