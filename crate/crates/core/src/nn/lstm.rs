//! Single-layer LSTM: cell step, sequence unroll, and backpropagation
//! through time.
//!
//! Gates per step:
//!
//! ```text
//! f  = σ(W_f x + U_f h' + b_f)
//! i  = σ(W_i x + U_i h' + b_i)
//! c̃  = tanh(W_c x + U_c h' + b_c)
//! C  = f ⊙ C' + i ⊙ c̃
//! o  = σ(W_o x + U_o h' + b_o)
//! h  = o ⊙ tanh(C)
//! ```

use super::activation::sigmoid_scalar;
use super::{glorot_uniform, Parameters};
use crate::error::{Error, Result};
use crate::tensor::{Prng, Tensor};

/// Input-to-gate (`W_*`, hidden × input), recurrent (`U_*`, hidden × hidden)
/// and bias (`b_*`) tensors for the forget, input, candidate and output gates.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_f: Tensor,
    pub u_f: Tensor,
    pub b_f: Tensor,
    pub w_i: Tensor,
    pub u_i: Tensor,
    pub b_i: Tensor,
    pub w_c: Tensor,
    pub u_c: Tensor,
    pub b_c: Tensor,
    pub w_o: Tensor,
    pub u_o: Tensor,
    pub b_o: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Result<Self> {
        Ok(LstmState {
            h: Tensor::new(&[hidden], 0.0)?,
            c: Tensor::new(&[hidden], 0.0)?,
        })
    }
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Result<Self> {
        let w = Tensor::new(&[hidden, input], 0.0)?;
        let u = Tensor::new(&[hidden, hidden], 0.0)?;
        let b = Tensor::new(&[hidden], 0.0)?;
        Ok(LstmParams {
            w_f: w.clone(),
            u_f: u.clone(),
            b_f: b.clone(),
            w_i: w.clone(),
            u_i: u.clone(),
            b_i: b.clone(),
            w_c: w.clone(),
            u_c: u.clone(),
            b_c: b.clone(),
            w_o: w,
            u_o: u,
            b_o: b,
        })
    }

    /// Glorot-uniform matrices, zero biases except `b_f = 1`.
    pub fn init(input: usize, hidden: usize, prng: &mut Prng) -> Result<Self> {
        let mut p = LstmParams::zeros(input, hidden)?;
        for gate in [
            (&mut p.w_f, &mut p.u_f),
            (&mut p.w_i, &mut p.u_i),
            (&mut p.w_c, &mut p.u_c),
            (&mut p.w_o, &mut p.u_o),
        ] {
            *gate.0 = glorot_uniform(prng, &[hidden, input], input, hidden)?;
            *gate.1 = glorot_uniform(prng, &[hidden, hidden], hidden, hidden)?;
        }
        p.b_f.fill(1.0);
        Ok(p)
    }

    pub fn input_size(&self) -> usize {
        self.w_f.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_f.rows()
    }

    /// Checks all twelve tensors agree on one `(input, hidden)` pair.
    pub fn validate(&self) -> Result<()> {
        let (h, i) = (self.hidden_size(), self.input_size());
        let ok = [&self.w_f, &self.w_i, &self.w_c, &self.w_o]
            .iter()
            .all(|w| w.shape() == [h, i])
            && [&self.u_f, &self.u_i, &self.u_c, &self.u_o]
                .iter()
                .all(|u| u.shape() == [h, h])
            && [&self.b_f, &self.b_i, &self.b_c, &self.b_o]
                .iter()
                .all(|b| b.shape() == [h]);
        if ok {
            Ok(())
        } else {
            Err(Error::shape("LSTM parameter shapes are inconsistent"))
        }
    }

    fn gates(&self) -> [(&Tensor, &Tensor, &Tensor); 4] {
        [
            (&self.w_f, &self.u_f, &self.b_f),
            (&self.w_i, &self.u_i, &self.b_i),
            (&self.w_c, &self.u_c, &self.b_c),
            (&self.w_o, &self.u_o, &self.b_o),
        ]
    }

    fn gates_mut(&mut self) -> [(&mut Tensor, &mut Tensor, &mut Tensor); 4] {
        [
            (&mut self.w_f, &mut self.u_f, &mut self.b_f),
            (&mut self.w_i, &mut self.u_i, &mut self.b_i),
            (&mut self.w_c, &mut self.u_c, &mut self.b_c),
            (&mut self.w_o, &mut self.u_o, &mut self.b_o),
        ]
    }
}

impl Parameters for LstmParams {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("w_f".into(), &self.w_f),
            ("u_f".into(), &self.u_f),
            ("b_f".into(), &self.b_f),
            ("w_i".into(), &self.w_i),
            ("u_i".into(), &self.u_i),
            ("b_i".into(), &self.b_i),
            ("w_c".into(), &self.w_c),
            ("u_c".into(), &self.u_c),
            ("b_c".into(), &self.b_c),
            ("w_o".into(), &self.w_o),
            ("u_o".into(), &self.u_o),
            ("b_o".into(), &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_f,
            &mut self.u_f,
            &mut self.b_f,
            &mut self.w_i,
            &mut self.u_i,
            &mut self.b_i,
            &mut self.w_c,
            &mut self.u_c,
            &mut self.b_c,
            &mut self.w_o,
            &mut self.u_o,
            &mut self.b_o,
        ]
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Forward record of an unrolled sequence.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    input_size: usize,
}

fn step_raw(x: &[f64], h_prev: &[f64], c_prev: &[f64], params: &LstmParams) -> StepCache {
    let hidden = params.hidden_size();
    let mut pre: [Vec<f64>; 4] = Default::default();
    for (slot, (w, u, b)) in pre.iter_mut().zip(params.gates()) {
        let mut a = b.data().to_vec();
        w.matvec_acc(x, &mut a);
        u.matvec_acc(h_prev, &mut a);
        *slot = a;
    }
    let [af, ai, ac, ao] = pre;
    let f: Vec<f64> = af.into_iter().map(sigmoid_scalar).collect();
    let i: Vec<f64> = ai.into_iter().map(sigmoid_scalar).collect();
    let g: Vec<f64> = ac.into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = ao.into_iter().map(sigmoid_scalar).collect();
    let mut tanh_c = vec![0.0; hidden];
    for k in 0..hidden {
        tanh_c[k] = (f[k] * c_prev[k] + i[k] * g[k]).tanh();
    }
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        f,
        i,
        g,
        o,
        tanh_c,
    }
}

impl StepCache {
    fn c(&self) -> Vec<f64> {
        (0..self.f.len())
            .map(|k| self.f[k] * self.c_prev[k] + self.i[k] * self.g[k])
            .collect()
    }

    fn h(&self) -> Vec<f64> {
        self.o
            .iter()
            .zip(&self.tanh_c)
            .map(|(o, t)| o * t)
            .collect()
    }
}

fn check_state(state: &LstmState, hidden: usize) -> Result<()> {
    if state.h.len() != hidden || state.c.len() != hidden {
        return Err(Error::shape(format!(
            "LSTM state lengths h={} c={} for hidden size {hidden}",
            state.h.len(),
            state.c.len()
        )));
    }
    Ok(())
}

/// One cell update.
pub fn lstm_step(x: &Tensor, prev: &LstmState, params: &LstmParams) -> Result<LstmState> {
    params.validate()?;
    let hidden = params.hidden_size();
    if x.len() != params.input_size() {
        return Err(Error::shape(format!(
            "LSTM input has {} values, expected {}",
            x.len(),
            params.input_size()
        )));
    }
    check_state(prev, hidden)?;
    let s = step_raw(x.data(), prev.h.data(), prev.c.data(), params);
    Ok(LstmState {
        h: Tensor::from_vec(&[hidden], s.h())?,
        c: Tensor::from_vec(&[hidden], s.c())?,
    })
}

/// Unrolls the cell over the columns of `xs` (`input × T`) and records the
/// activations needed by [`lstm_backward_trace`].
pub fn lstm_forward_trace(
    xs: &Tensor,
    initial: &LstmState,
    params: &LstmParams,
) -> Result<(Tensor, LstmState, LstmTrace)> {
    params.validate()?;
    let hidden = params.hidden_size();
    let input = params.input_size();
    if xs.ndim() != 2 || xs.rows() != input {
        return Err(Error::shape(format!(
            "LSTM sequence must be [{input}, T], got {:?}",
            xs.shape()
        )));
    }
    check_state(initial, hidden)?;
    let len = xs.cols();
    let mut hs = Tensor::zeros(&[hidden, len]);
    let mut h = initial.h.data().to_vec();
    let mut c = initial.c.data().to_vec();
    let mut steps = Vec::with_capacity(len);
    for t in 0..len {
        let s = step_raw(&xs.column(t), &h, &c, params);
        h = s.h();
        c = s.c();
        hs.set_column(t, &h);
        steps.push(s);
    }
    let last = LstmState {
        h: Tensor::from_vec(&[hidden], h)?,
        c: Tensor::from_vec(&[hidden], c)?,
    };
    Ok((
        hs,
        last,
        LstmTrace {
            steps,
            input_size: input,
        },
    ))
}

/// Runs the cell over every column of `xs`; column `t` of the returned
/// `hidden × T` tensor is `h_t`.
pub fn lstm_sequence(
    xs: &Tensor,
    initial: &LstmState,
    params: &LstmParams,
) -> Result<(Tensor, LstmState)> {
    let (hs, last, _) = lstm_forward_trace(xs, initial, params)?;
    Ok((hs, last))
}

/// Backpropagation through time given `dL/dh_t` for every step
/// (`upstream`: `hidden × T`). Returns parameter gradients and `dL/dxs`.
pub fn lstm_backward_trace(
    trace: &LstmTrace,
    params: &LstmParams,
    upstream: &Tensor,
) -> Result<(LstmParams, Tensor)> {
    let hidden = params.hidden_size();
    let len = trace.steps.len();
    if upstream.shape() != [hidden, len] {
        return Err(Error::shape(format!(
            "LSTM upstream gradient {:?}, expected [{hidden}, {len}]",
            upstream.shape()
        )));
    }
    let mut grads = params.zeroed();
    let mut dxs = Tensor::zeros(&[trace.input_size, len]);
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    for t in (0..len).rev() {
        let s = &trace.steps[t];
        let up = upstream.column(t);
        let mut da: [Vec<f64>; 4] = [
            vec![0.0; hidden],
            vec![0.0; hidden],
            vec![0.0; hidden],
            vec![0.0; hidden],
        ];
        for k in 0..hidden {
            let dh = up[k] + dh_next[k];
            let dc = dh * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
            da[0][k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            da[1][k] = dc * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            da[2][k] = dc * s.i[k] * (1.0 - s.g[k] * s.g[k]);
            da[3][k] = dh * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
            dc_next[k] = dc * s.f[k];
        }
        let mut dx = vec![0.0; trace.input_size];
        let mut dh_prev = vec![0.0; hidden];
        for ((gw, gu, gb), ((w, u, _), a)) in grads
            .gates_mut()
            .into_iter()
            .zip(params.gates().into_iter().zip(&da))
        {
            gw.outer_acc(a, &s.x);
            gu.outer_acc(a, &s.h_prev);
            for (b, v) in gb.data_mut().iter_mut().zip(a) {
                *b += v;
            }
            w.matvec_t_acc(a, &mut dx);
            u.matvec_t_acc(a, &mut dh_prev);
        }
        dxs.set_column(t, &dx);
        dh_next = dh_prev;
    }
    Ok((grads, dxs))
}

/// Exact gradients of [`lstm_sequence`]'s hidden outputs.
pub fn lstm_backward(
    xs: &Tensor,
    initial: &LstmState,
    params: &LstmParams,
    upstream: &Tensor,
) -> Result<(LstmParams, Tensor)> {
    let (_, _, trace) = lstm_forward_trace(xs, initial, params)?;
    lstm_backward_trace(&trace, params, upstream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_zero_state() {
        let p = LstmParams::zeros(3, 2).unwrap();
        let s = lstm_step(
            &Tensor::new(&[3], 0.7).unwrap(),
            &LstmState::zeros(2).unwrap(),
            &p,
        )
        .unwrap();
        assert_eq!(s.h.data(), &[0.0, 0.0]);
        assert_eq!(s.c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_params_carry_half_the_cell() {
        let p = LstmParams::zeros(1, 1).unwrap();
        let prev = LstmState {
            h: Tensor::new(&[1], 0.0).unwrap(),
            c: Tensor::new(&[1], 2.0).unwrap(),
        };
        let s = lstm_step(&Tensor::new(&[1], 0.3).unwrap(), &prev, &p).unwrap();
        assert_eq!(s.c.data(), &[1.0]);
        assert!((s.h.data()[0] - 0.5 * 1f64.tanh()).abs() < 1e-15);
        assert!((s.h.data()[0] - 0.380797).abs() < 1e-6);
    }

    #[test]
    fn empty_sequence_is_rejected_by_tensor_shape() {
        assert!(Tensor::new(&[2, 0], 0.0).is_err());
    }

    #[test]
    fn single_step_sequence_matches_step() {
        let mut prng = Prng::new(4);
        let p = LstmParams::init(3, 4, &mut prng).unwrap();
        let x = prng.uniform(-1.0, 1.0, &[3, 1]).unwrap();
        let init = LstmState {
            h: prng.uniform(-1.0, 1.0, &[4]).unwrap(),
            c: prng.uniform(-1.0, 1.0, &[4]).unwrap(),
        };
        let (hs, last) = lstm_sequence(&x, &init, &p).unwrap();
        let s = lstm_step(&x.clone().reshape(&[3]).unwrap(), &init, &p).unwrap();
        assert_eq!(hs.data(), s.h.data());
        assert_eq!(last, s);
    }

    #[test]
    fn zero_params_zero_initial_give_zero_outputs() {
        let p = LstmParams::zeros(2, 3).unwrap();
        let xs = Prng::new(1).uniform(-5.0, 5.0, &[2, 6]).unwrap();
        let (hs, _) = lstm_sequence(&xs, &LstmState::zeros(3).unwrap(), &p).unwrap();
        assert!(hs.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let mut prng = Prng::new(8);
        let p = LstmParams::init(2, 3, &mut prng).unwrap();
        let xs = prng.uniform(-1.0, 1.0, &[2, 4]).unwrap();
        let (g, dx) = lstm_backward(
            &xs,
            &LstmState::zeros(3).unwrap(),
            &p,
            &Tensor::new(&[3, 4], 0.0).unwrap(),
        )
        .unwrap();
        assert!(g
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|v| *v == 0.0)));
        assert!(dx.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn last_input_gradient_ignores_earlier_upstream() {
        let mut prng = Prng::new(12);
        let p = LstmParams::init(2, 3, &mut prng).unwrap();
        let xs = prng.uniform(-1.0, 1.0, &[2, 4]).unwrap();
        let init = LstmState::zeros(3).unwrap();
        let mut up_a = prng.uniform(-1.0, 1.0, &[3, 4]).unwrap();
        let (_, dx_a) = lstm_backward(&xs, &init, &p, &up_a).unwrap();
        for t in 0..3 {
            up_a.set_column(t, &[9.0, -4.0, 2.5]);
        }
        let (_, dx_b) = lstm_backward(&xs, &init, &p, &up_a).unwrap();
        assert_eq!(dx_a.column(3), dx_b.column(3));
        assert_ne!(dx_a.column(0), dx_b.column(0));
    }

    #[test]
    fn init_sets_forget_bias() {
        let p = LstmParams::init(16, 50, &mut Prng::new(0)).unwrap();
        assert!(p.b_f.data().iter().all(|v| *v == 1.0));
        assert!(p.b_i.data().iter().all(|v| *v == 0.0));
        let a = (6.0f64 / 66.0).sqrt();
        assert!(p.w_o.data().iter().all(|v| v.abs() < a));
        assert_eq!(p.num_params(), 4 * (50 * 16 + 50 * 50 + 50));
    }
}
