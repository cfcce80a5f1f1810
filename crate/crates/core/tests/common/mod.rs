//! Independent reference implementations shared by the property and
//! acceptance tests.

use mrc_lstm::nn::{ConvKernel, LstmParams};
use mrc_lstm::Tensor;

/// Reference convolution over an explicitly zero-padded copy of the input.
pub fn naive_conv(x: &Tensor, k: &ConvKernel) -> Vec<f64> {
    let (c_in, len) = (x.rows(), x.cols());
    let ks = k.kernel_size();
    let padded: Vec<Vec<f64>> = (0..c_in)
        .map(|c| {
            let mut row = vec![0.0; ks - 1];
            row.extend_from_slice(x.row(c));
            row
        })
        .collect();
    let w = k.weights.data();
    let mut out = Vec::new();
    for o in 0..k.out_channels() {
        for t in 0..len {
            let mut acc = k.bias.data()[o];
            for (c, row) in padded.iter().enumerate() {
                for j in 0..ks {
                    if t + j >= ks - 1 {
                        acc += w[(o * c_in + c) * ks + j] * row[t + j];
                    }
                }
            }
            out.push(acc);
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gate-by-gate scalar evaluation of the LSTM recurrence.
pub fn scalar_lstm(xs: &Tensor, p: &LstmParams) -> Vec<Vec<f64>> {
    let n = p.hidden_size();
    let m = p.input_size();
    let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
    let mut out = Vec::new();
    for t in 0..xs.cols() {
        let x = xs.column(t);
        let gate = |w: &Tensor, u: &Tensor, b: &Tensor, k: usize, h: &[f64]| {
            let mut z = b.data()[k];
            for (j, xj) in x.iter().enumerate().take(m) {
                z += w.at2(k, j) * xj;
            }
            for (j, hj) in h.iter().enumerate() {
                z += u.at2(k, j) * hj;
            }
            z
        };
        let mut h_new = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        for k in 0..n {
            let f = sigmoid(gate(&p.w_f, &p.u_f, &p.b_f, k, &h));
            let i = sigmoid(gate(&p.w_i, &p.u_i, &p.b_i, k, &h));
            let g = gate(&p.w_c, &p.u_c, &p.b_c, k, &h).tanh();
            let o = sigmoid(gate(&p.w_o, &p.u_o, &p.b_o, k, &h));
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        h = h_new;
        c = c_new;
        out.push(h.clone());
    }
    out
}
