//! Synthetic daily market data in the Bitcoin CSV schema, for fixtures,
//! examples and tests.
//!
//! Close prices follow a geometric random walk with a slowly varying drift;
//! the macro columns are only observed on weekdays (weekend cells are left
//! missing, as in exchange-calendar data) and search attention is observed
//! once a week. The first row is always fully observed.

use chrono::{Datelike, Days, NaiveDate, Weekday};

use super::table::{Column, SeriesTable, BTC_COLUMNS};
use super::window::WindowSample;
use crate::error::Result;
use crate::tensor::Prng;

/// Approximately standard normal draw (Irwin–Hall with 12 uniforms).
fn normal(prng: &mut Prng) -> f64 {
    (0..12).map(|_| prng.next_uniform(0.0, 1.0)).sum::<f64>() - 6.0
}

/// `days` consecutive calendar days starting at `start`.
pub fn btc_like(start: NaiveDate, days: usize, seed: u64) -> Result<SeriesTable> {
    let mut prng = Prng::new(seed);
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(days); BTC_COLUMNS.len()];
    let mut dates = Vec::with_capacity(days);

    let mut close: f64 = 300.0;
    let mut drift = 0.002;
    let mut sp500: f64 = 2000.0;
    let mut gvz: f64 = 15.0;
    let mut vix: f64 = 15.0;
    let mut trends: f64 = 10.0;

    for i in 0..days {
        let date = start + Days::new(i as u64);
        dates.push(date);
        let open = close;
        drift = 0.98 * drift + 0.02 * 0.002 + 0.0005 * normal(&mut prng);
        close = open * (drift + 0.03 * normal(&mut prng)).exp();
        let spread = 0.01 + 0.02 * prng.next_uniform(0.0, 1.0);
        let high = open.max(close) * (1.0 + spread);
        let low = open.min(close) * (1.0 - spread);
        let weighted = (open + close + high + low) / 4.0;
        let volume_btc = 5_000.0 * (1.0 + 0.3 * normal(&mut prng)).max(0.2);
        let volume_currency = volume_btc * weighted;

        sp500 *= (0.0003 + 0.01 * normal(&mut prng)).exp();
        gvz = (gvz + 0.1 * (15.0 - gvz) + 0.8 * normal(&mut prng)).max(5.0);
        vix = (vix + 0.1 * (16.0 - vix) + 1.0 * normal(&mut prng)).max(8.0);
        trends = (trends * (0.01 * (close / open - 1.0) * 50.0 + 1.0) + 0.5 * normal(&mut prng))
            .clamp(1.0, 100.0);

        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let macro_seen = i == 0 || !weekend;
        let trends_seen = i == 0 || date.weekday() == Weekday::Sun;

        let row = [
            Some(open),
            Some(high),
            Some(low),
            Some(close),
            Some(weighted),
            Some(volume_btc),
            Some(volume_currency),
            macro_seen.then_some(sp500),
            macro_seen.then_some(gvz),
            macro_seen.then_some(vix),
            trends_seen.then_some(trends.round()),
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let columns = BTC_COLUMNS
        .iter()
        .zip(cols)
        .map(|(name, values)| Column {
            name: name.to_string(),
            values,
        })
        .collect();
    SeriesTable::new(dates, columns)
}

/// `n` samples whose target is a fixed linear function of the window,
/// `y = 0.5 + Σ w_ij x_ij` with `x ~ U(0, 1)` and small random `w`.
/// Any model with enough capacity can fit it exactly.
pub fn linear_task(
    n: usize,
    num_features: usize,
    window: usize,
    seed: u64,
) -> Result<Vec<WindowSample>> {
    let mut prng = Prng::new(seed);
    let size = (num_features * window) as f64;
    let weights = prng.uniform(-1.0 / size, 1.0 / size, &[num_features, window])?;
    (0..n)
        .map(|i| {
            let input = prng.uniform(0.0, 1.0, &[num_features, window])?;
            let target = 0.5
                + input
                    .data()
                    .iter()
                    .zip(weights.data())
                    .map(|(x, w)| x * w)
                    .sum::<f64>();
            Ok(WindowSample {
                input,
                target,
                target_date: default_start() + Days::new((i + window) as u64),
                target_row: i + window,
            })
        })
        .collect()
}

/// The default fixture span start, a Sunday.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 10, 25).expect("valid date")
}
