//! Forecast error measures, computed on the original (denormalized) scale.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{Scaler, WindowSample};
use crate::error::{Error, Result};
use crate::model::Model;

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::Data("metric over an empty series".into()));
    }
    if actual.len() != predicted.len() {
        return Err(Error::Data(format!(
            "actual has {} values, predicted has {}",
            actual.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// `(1/N) Σ |y − f|`
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, f)| (y - f).abs())
        .sum();
    Ok(sum / actual.len() as f64)
}

/// `sqrt((1/N) Σ (y − f)²)`
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// `(100/N) Σ |(y − f) / y|`, in percent.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    if let Some(i) = actual.iter().position(|y| *y == 0.0) {
        return Err(Error::Domain(format!(
            "MAPE undefined: actual value at index {i} is zero"
        )));
    }
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, f)| ((y - f) / y).abs())
        .sum();
    Ok(100.0 * sum / actual.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R2Variant {
    /// `1 − Σ(y − ŷ)² / Σ(y − ȳ)²`
    Standard,
    /// `Σ(ŷ − ȳ)² / Σ(y − ȳ)²`, the explained-sum-of-squares ratio. Equals
    /// the standard form only for least-squares fits and can exceed 1.
    ExplainedRatio,
}

/// Coefficient of determination; `ȳ` is the mean of the actual values.
pub fn r2(actual: &[f64], predicted: &[f64], variant: R2Variant) -> Result<f64> {
    check_pair(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Data("R² needs at least two samples".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let total: f64 = actual.iter().map(|y| (y - mean).powi(2)).sum();
    if total == 0.0 {
        return Err(Error::Domain(
            "R² undefined: actual values have zero variance".into(),
        ));
    }
    let num: f64 = match variant {
        R2Variant::Standard => actual
            .iter()
            .zip(predicted)
            .map(|(y, f)| (y - f).powi(2))
            .sum(),
        R2Variant::ExplainedRatio => predicted.iter().map(|f| (f - mean).powi(2)).sum(),
    };
    Ok(match variant {
        R2Variant::Standard => 1.0 - num / total,
        R2Variant::ExplainedRatio => num / total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    pub mape_percent: f64,
    pub r2_standard: f64,
    pub r2_explained: f64,
    pub n: usize,
}

impl EvalReport {
    pub fn from_series(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        Ok(EvalReport {
            mae: mae(actual, predicted)?,
            rmse: rmse(actual, predicted)?,
            mape_percent: mape(actual, predicted)?,
            r2_standard: r2(actual, predicted, R2Variant::Standard)?,
            r2_explained: r2(actual, predicted, R2Variant::ExplainedRatio)?,
            n: actual.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

/// One-step-ahead predictions for every sample (each from its true history,
/// never from earlier predictions), mapped back to the original scale.
pub fn predict_samples(
    model: &Model,
    samples: &[WindowSample],
    scaler: &Scaler,
) -> Result<Vec<PredictionRecord>> {
    samples
        .iter()
        .map(|s| {
            Ok(PredictionRecord {
                date: s.target_date,
                actual: scaler.descale_target(s.target),
                predicted: scaler.descale_target(model.forward(&s.input)?),
            })
        })
        .collect()
}

pub fn evaluate(
    model: &Model,
    samples: &[WindowSample],
    scaler: &Scaler,
) -> Result<(EvalReport, Vec<PredictionRecord>)> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    let records = predict_samples(model, samples, scaler)?;
    let actual: Vec<f64> = records.iter().map(|r| r.actual).collect();
    let predicted: Vec<f64> = records.iter().map(|r| r.predicted).collect();
    Ok((EvalReport::from_series(&actual, &predicted)?, records))
}
