use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::tensor::Tensor;

use super::TrainConfig;

/// First and second moment estimates, one tensor per parameter tensor in
/// canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| t.zeros_like()).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
pub fn adam_step<P: Parameters>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let named = grads.named_tensors();
    if named.len() != state.m.len() {
        return Err(Error::shape(format!(
            "optimizer tracks {} tensors, gradient has {}",
            state.m.len(),
            named.len()
        )));
    }
    for ((name, g), m) in named.iter().zip(&state.m) {
        if g.shape() != m.shape() {
            return Err(Error::shape(format!(
                "gradient {name} has shape {:?}, optimizer expects {:?}",
                g.shape(),
                m.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient in {name}")));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, (_, g)), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(named)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let it = p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((theta, &g), (m, v)) in it {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + cfg.eps_adam);
        }
    }
    Ok(())
}
