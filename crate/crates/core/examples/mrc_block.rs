// The multi-scale residual block and the full MRC-LSTM network.
//
// `cargo run --example mrc_block`

use mrc_lstm::data::BTC_COLUMNS;
use mrc_lstm::model::{build_mrc_lstm, mrc_block_backward, mrc_block_forward, MrcBlockParams};
use mrc_lstm::nn::Parameters;
use mrc_lstm::Prng;

pub fn run_example() -> mrc_lstm::Result<()> {
    let mut prng = Prng::new(11);
    let block = MrcBlockParams::init(16, &mut prng)?;
    let x = prng.uniform(0.0, 1.0, &[16, 5])?;
    let y = mrc_block_forward(&x, &block)?;
    println!("block: {:?} -> {:?}", x.shape(), y.shape());

    let upstream = y.map(|_| 1.0);
    let (grads, dx) = mrc_block_backward(&x, &block, &upstream)?;
    println!(
        "block parameters: {}, |dL/dx|max = {:.4}",
        grads.num_params(),
        dx.data().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );

    let model = build_mrc_lstm(BTC_COLUMNS.len(), &mut prng)?;
    println!(
        "MRC-LSTM with {} features: {} parameters",
        BTC_COLUMNS.len(),
        model.num_params()
    );
    for (name, t) in model.named_tensors() {
        println!("  {name:<22} {:?}", t.shape());
    }
    let window = prng.uniform(0.0, 1.0, &[BTC_COLUMNS.len(), 5])?;
    println!(
        "prediction for a random window: {:.6}",
        model.forward(&window)?
    );
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
