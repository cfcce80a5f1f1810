use chrono::{Days, NaiveDate};
use proptest::prelude::*;

use mrc_lstm::data::{align_and_fill, fit_scaler, make_windows, split, Column, SeriesTable};
use mrc_lstm::metrics::{mae, mape, r2, rmse, R2Variant};
use mrc_lstm::model::{Architecture, Model};
use mrc_lstm::nn::{conv1d_forward, lstm_sequence, relu, ConvKernel, LstmParams, LstmState};
use mrc_lstm::{Prng, Tensor};

mod common;
use common::{naive_conv, scalar_lstm};

fn table(values: &[Option<f64>], close: &[f64]) -> SeriesTable {
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    SeriesTable::new(
        (0..close.len())
            .map(|i| start + Days::new(i as u64))
            .collect(),
        vec![
            Column {
                name: "x".into(),
                values: values.to_vec(),
            },
            Column {
                name: "close".into(),
                values: close.iter().map(|v| Some(*v)).collect(),
            },
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn conv_matches_naive_reference(
        seed in any::<u64>(),
        c_in in 1usize..5,
        c_out in 1usize..5,
        k in 1usize..4,
        len in 1usize..9,
    ) {
        let mut prng = Prng::new(seed);
        let kernel = ConvKernel::new(
            prng.uniform(-1.0, 1.0, &[c_out, c_in, k]).unwrap(),
            prng.uniform(-1.0, 1.0, &[c_out]).unwrap(),
        ).unwrap();
        let x = prng.uniform(-2.0, 2.0, &[c_in, len]).unwrap();
        let y = conv1d_forward(&x, &kernel).unwrap();
        prop_assert_eq!(y.data(), &naive_conv(&x, &kernel)[..]);
    }

    #[test]
    fn conv_is_causal(seed in any::<u64>(), k in 1usize..4, len in 2usize..8, at in 0usize..8) {
        let at = at % len;
        let mut prng = Prng::new(seed);
        let kernel = ConvKernel::init(3, 2, k, &mut prng).unwrap();
        let x = prng.uniform(-1.0, 1.0, &[2, len]).unwrap();
        let mut x2 = x.clone();
        x2.set_column(at, &[5.0, -5.0]);
        let (a, b) = (conv1d_forward(&x, &kernel).unwrap(), conv1d_forward(&x2, &kernel).unwrap());
        for t in 0..at {
            prop_assert_eq!(a.column(t), b.column(t));
        }
    }

    #[test]
    fn lstm_matches_scalar_oracle(
        seed in any::<u64>(),
        input in 1usize..5,
        hidden in 1usize..6,
        len in 1usize..7,
    ) {
        let mut prng = Prng::new(seed);
        let mut p = LstmParams::init(input, hidden, &mut prng).unwrap();
        p.b_i = prng.uniform(-0.5, 0.5, &[hidden]).unwrap();
        let xs = prng.uniform(-1.0, 1.0, &[input, len]).unwrap();
        let (hs, _) = lstm_sequence(&xs, &LstmState::zeros(hidden).unwrap(), &p).unwrap();
        for (t, h) in scalar_lstm(&xs, &p).iter().enumerate() {
            for (a, b) in hs.column(t).iter().zip(h) {
                prop_assert!((a - b).abs() <= 1e-12, "t={} {} vs {}", t, a, b);
            }
        }
    }

    #[test]
    fn model_forward_is_deterministic(seed in any::<u64>(), arch in 0usize..5) {
        let arch = Architecture::ALL[arch];
        let m1 = Model::build(arch, 3, 5, &mut Prng::new(seed)).unwrap();
        let m2 = Model::build(arch, 3, 5, &mut Prng::new(seed)).unwrap();
        let x = Prng::new(seed ^ 1).uniform(0.0, 1.0, &[3, 5]).unwrap();
        let y = m1.forward(&x).unwrap();
        prop_assert!(y.is_finite());
        prop_assert_eq!(y.to_bits(), m2.forward(&x).unwrap().to_bits());
    }

    #[test]
    fn matmul_is_associative(seed in any::<u64>(), a in 1usize..5, b in 1usize..5, c in 1usize..5, d in 1usize..5) {
        let mut prng = Prng::new(seed);
        let x = prng.uniform(-1.0, 1.0, &[a, b]).unwrap();
        let y = prng.uniform(-1.0, 1.0, &[b, c]).unwrap();
        let z = prng.uniform(-1.0, 1.0, &[c, d]).unwrap();
        let left = x.matmul(&y).unwrap().matmul(&z).unwrap();
        let right = x.matmul(&y.matmul(&z).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn relu_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..30)) {
        let t = Tensor::from_vec(&[v.len()], v).unwrap();
        let once = relu(&t);
        prop_assert_eq!(relu(&once), once.clone());
        prop_assert!(once.data().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn error_metric_properties(
        pairs in prop::collection::vec((1.0f64..1000.0, -1000.0f64..1000.0), 2..50),
        c in 0.01f64..100.0,
    ) {
        let (y, f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (m, r, p) = (mae(&y, &f).unwrap(), rmse(&y, &f).unwrap(), mape(&y, &f).unwrap());
        prop_assert!(m >= 0.0 && p >= 0.0);
        prop_assert!(r + 1e-12 >= m);
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let fs: Vec<f64> = f.iter().map(|v| v * c).collect();
        prop_assert!((mape(&ys, &fs).unwrap() - p).abs() <= 1e-9 * p.max(1.0));
        prop_assert_eq!(mae(&y, &y).unwrap(), 0.0);
        prop_assert_eq!(mape(&y, &y).unwrap(), 0.0);
        prop_assert_eq!(rmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn mean_predictor_r2_is_zero(y in prop::collection::vec(-50.0f64..50.0, 2..40)) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(y.iter().any(|v| (v - mean).abs() > 1e-6));
        let f = vec![mean; y.len()];
        prop_assert!(r2(&y, &f, R2Variant::Standard).unwrap().abs() < 1e-12);
        prop_assert_eq!(r2(&y, &y, R2Variant::Standard).unwrap(), 1.0);
    }

    #[test]
    fn fill_is_idempotent_and_gap_free(
        mask in prop::collection::vec(any::<bool>(), 3..40),
        seed in any::<u64>(),
    ) {
        let mut prng = Prng::new(seed);
        let n = mask.len();
        let x: Vec<Option<f64>> = mask
            .iter()
            .map(|keep| keep.then(|| prng.next_uniform(0.0, 1.0)))
            .collect();
        prop_assume!(x.iter().any(Option::is_some));
        let close: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let once = align_and_fill(&table(&x, &close), "close").unwrap();
        prop_assert!(!once.table.has_missing());
        let twice = align_and_fill(&once.table, "close").unwrap();
        prop_assert_eq!(twice.dropped_leading, 0);
        prop_assert_eq!(&twice.table, &once.table);
        // Every filled value equals the latest observation at or before it.
        let filled = once.table.dense_column("x").unwrap();
        for (i, v) in filled.iter().enumerate() {
            let src = (0..=i + once.dropped_leading).rev().find_map(|j| x[j]).unwrap();
            prop_assert_eq!(*v, src);
        }
    }

    #[test]
    fn split_partitions_chronologically(n in 12usize..300, window in 1usize..8) {
        let close: Vec<f64> = (0..n).map(|i| (i as f64).sin() + i as f64).collect();
        let x: Vec<Option<f64>> = (0..n).map(|i| Some(i as f64)).collect();
        let t = table(&x, &close);
        let samples = make_windows(&t, "close", window).unwrap();
        prop_assert_eq!(samples.len(), n - window);
        let Ok(s) = split(samples.clone(), 0.2, 0.2) else { return Ok(()); };
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), samples.len());
        let joined: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
        prop_assert_eq!(joined, samples);
        prop_assert!(s.train.last().unwrap().target_date < s.val[0].target_date);
        prop_assert!(s.val.last().unwrap().target_date < s.test[0].target_date);
    }

    #[test]
    fn scaler_round_trip(v in prop::collection::vec(-1e6f64..1e6, 2..60)) {
        let close = v.clone();
        let x: Vec<Option<f64>> = (0..v.len()).map(|i| Some(i as f64)).collect();
        let t = table(&x, &close);
        let Ok(s) = fit_scaler(&t, 0..v.len(), "close") else { return Ok(()); };
        for y in &v {
            prop_assert!((s.descale_target(s.scale_target(*y)) - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }
}
