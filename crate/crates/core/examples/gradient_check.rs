// Finite-difference check of every backward pass in the library.
//
// `cargo run --example gradient_check`

use mrc_lstm::checks::{run_checks, standard_checks, GRADCHECK_TOLERANCE};
use mrc_lstm::cli::format_check_table;

pub fn run_example() -> mrc_lstm::Result<()> {
    let rows = run_checks(&standard_checks(), 0..3)?;
    print!("{}", format_check_table(&rows));
    if let Some(bad) = rows.iter().find(|r| !r.passed) {
        return Err(mrc_lstm::Error::Numeric(format!(
            "{} exceeds {GRADCHECK_TOLERANCE:e}",
            bad.name
        )));
    }
    Ok(())
}

fn main() -> mrc_lstm::Result<()> {
    run_example()
}
