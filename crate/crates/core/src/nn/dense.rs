use super::{glorot_uniform, Parameters};
use crate::error::{Error, Result};
use crate::tensor::{Prng, Tensor};

/// Fully connected layer `y = W·x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.ndim() != 2 || bias.shape() != [weights.rows()] {
            return Err(Error::shape(format!(
                "dense weights {:?} and bias {:?} are inconsistent",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(DenseParams { weights, bias })
    }

    pub fn init(out: usize, inp: usize, prng: &mut Prng) -> Result<Self> {
        let weights = glorot_uniform(prng, &[out, inp], inp, out)?;
        DenseParams::new(weights, Tensor::new(&[out], 0.0)?)
    }

    pub fn in_features(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_features(&self) -> usize {
        self.weights.rows()
    }
}

impl Parameters for DenseParams {
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

fn check_len(what: &str, got: &Tensor, want: usize) -> Result<()> {
    if got.len() != want {
        return Err(Error::shape(format!(
            "dense {what} has {} values, expected {want}",
            got.len()
        )));
    }
    Ok(())
}

/// `W·x + b`. Any input shape with the right element count is accepted,
/// so a `C × T` map can be fed directly as its row-major flattening.
pub fn dense_forward(input: &Tensor, params: &DenseParams) -> Result<Tensor> {
    check_len("input", input, params.in_features())?;
    let mut out = params.bias.data().to_vec();
    params.weights.matvec_acc(input.data(), &mut out);
    Tensor::from_vec(&[out.len()], out)
}

/// Returns `(param_grads, input_grad)`; `input_grad` has the input's shape.
pub fn dense_backward(
    input: &Tensor,
    params: &DenseParams,
    upstream: &Tensor,
) -> Result<(DenseParams, Tensor)> {
    check_len("input", input, params.in_features())?;
    check_len("upstream gradient", upstream, params.out_features())?;
    let mut grad = params.zeroed();
    grad.weights.outer_acc(upstream.data(), input.data());
    grad.bias.data_mut().copy_from_slice(upstream.data());
    let mut dx = input.zeros_like();
    params.weights.matvec_t_acc(upstream.data(), dx.data_mut());
    Ok((grad, dx))
}
