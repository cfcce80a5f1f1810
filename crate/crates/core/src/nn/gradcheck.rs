//! Central finite-difference verification of analytic gradients.

use super::Parameters;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Denominator floor for [`relative_error`]. Central differences carry an
/// absolute round-off error of roughly `ulp(loss) / eps`, so components much
/// smaller than this are compared on an absolute scale instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against `(L(θ+eps) − L(θ−eps)) / (2·eps)` for every
/// scalar in `point` and returns the worst relative error.
pub fn gradcheck<P: Parameters>(
    point: &P,
    analytic: &P,
    eps: f64,
    mut loss: impl FnMut(&P) -> Result<f64>,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "gradcheck eps {eps} outside [1e-7, 1e-3]"
        )));
    }
    let shapes_match = point.tensors().len() == analytic.tensors().len()
        && point
            .tensors()
            .iter()
            .zip(analytic.tensors())
            .all(|(a, b)| a.shape() == b.shape());
    if !shapes_match {
        return Err(Error::shape("analytic gradient does not mirror parameters"));
    }
    let names: Vec<String> = point.named_tensors().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Vec<f64>> = analytic
        .tensors()
        .iter()
        .map(|t| t.data().to_vec())
        .collect();
    let mut work = point.clone();
    let mut worst: f64 = 0.0;
    for (ti, g) in grads.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let orig = work.tensors()[ti].data()[j];
            work.tensors_mut()[ti].data_mut()[j] = orig + eps;
            let up = loss(&work)?;
            work.tensors_mut()[ti].data_mut()[j] = orig - eps;
            let down = loss(&work)?;
            work.tensors_mut()[ti].data_mut()[j] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing {}[{j}]",
                    names[ti]
                )));
            }
            let numeric = (up - down) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    Ok(worst)
}

/// Layer parameters bundled with the layer input so one finite-difference
/// sweep covers both parameter and input gradients.
#[derive(Debug, Clone)]
pub struct WithInput<P> {
    pub params: P,
    pub input: Tensor,
}

impl<P: Parameters> Parameters for WithInput<P> {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut v: Vec<_> = super::prefixed("params", self.params.named_tensors()).collect();
        v.push(("input".to_string(), &self.input));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.params.tensors_mut();
        v.push(&mut self.input);
        v
    }
}

/// `Σ r ⊙ y`, the scalar probe used to turn a tensor-valued map into a loss;
/// its gradient with respect to `y` is exactly `r`.
pub fn projection_loss(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}
