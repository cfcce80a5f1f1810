// Running an LSTM over a short sequence and backpropagating through time.
//
// `cargo run --example lstm_cell`

use mrc_lstm::nn::{lstm_backward, lstm_sequence, LstmParams, LstmState};
use mrc_lstm::Prng;

pub fn run_example() -> mrc_lstm::Result<()> {
    let mut prng = Prng::new(7);
    let params = LstmParams::init(3, 4, &mut prng)?;
    let xs = prng.uniform(-1.0, 1.0, &[3, 6])?;
    let init = LstmState::zeros(4)?;

    let (hs, last) = lstm_sequence(&xs, &init, &params)?;
    println!("hidden states (4 x 6):");
    for i in 0..hs.rows() {
        println!(
            "  {:?}",
            hs.row(i)
                .iter()
                .map(|v| format!("{v:+.4}"))
                .collect::<Vec<_>>()
        );
    }
    println!("final cell state: {:?}", last.c.data());

    // Changing the last input leaves every earlier hidden state untouched.
    let mut later = xs.clone();
    later.set_column(5, &[9.0, -9.0, 9.0]);
    let (hs2, _) = lstm_sequence(&later, &init, &params)?;
    for t in 0..5 {
        assert_eq!(hs.column(t), hs2.column(t));
    }

    // Gradient of sum(h_T) with respect to the inputs.
    let mut upstream = hs.zeros_like();
    upstream.set_column(5, &[1.0; 4]);
    let (grads, dx) = lstm_backward(&xs, &init, &params, &upstream)?;
    println!("dL/dx column norms:");
    for t in 0..6 {
        let n = dx.column(t).iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("  t={t}: {n:.5}");
    }
    println!("dL/db_f = {:?}", grads.b_f.data());
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
