//! Kriging point predictions `y(x*) = mu_hat + r(x*)' alpha` and SSPE.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::correlation::corr_vector;
use crate::error::{GpError, Result};
use crate::likelihood::{GpModel, ModelFactor};
use crate::real::{dot_seq, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub test_inputs: Array2<f64>,
    pub predictions: Vec<f64>,
    pub sspe: Option<f64>,
}

fn point<T: Real>(model: &GpModel, x: &[f64], alpha: &[T]) -> Result<f64> {
    let r = corr_vector::<T>(x, model.inputs(), model.params())?;
    let mu = T::from_f64(model.mu_hat());
    Ok((mu + dot_seq(&r, alpha)).to_f64())
}

/// Predictions at each row of `xtest`, computed in the model's precision.
/// Uses the cached `alpha`; no factorization or solve is performed.
pub fn predict(model: &GpModel, xtest: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if xtest.ncols() != model.dataset().d() {
        return Err(GpError::DimensionMismatch(format!(
            "test inputs have {} columns, model has {}",
            xtest.ncols(),
            model.dataset().d()
        )));
    }
    let rows: Vec<Vec<f64>> = xtest.rows().into_iter().map(|r| r.to_vec()).collect();
    match model.factor() {
        ModelFactor::Double(_) => {
            let alpha = model.alpha();
            rows.par_iter().map(|x| point::<f64>(model, x, alpha)).collect()
        }
        ModelFactor::Single(_) => {
            let alpha: Vec<f32> = model.alpha().iter().map(|&a| a as f32).collect();
            rows.par_iter().map(|x| point::<f32>(model, x, &alpha)).collect()
        }
    }
}

/// Sum of squared prediction errors.
pub fn sspe(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(GpError::LengthMismatch { expected: truth.len(), actual: predictions.len() });
    }
    Ok(predictions.iter().zip(truth).map(|(p, t)| (t - p) * (t - p)).sum())
}

/// Predicts at `xtest` and scores against `truth` when given.
pub fn predict_set(
    model: &GpModel,
    xtest: ArrayView2<'_, f64>,
    truth: Option<&[f64]>,
) -> Result<PredictionSet> {
    let predictions = predict(model, xtest)?;
    let sspe = truth.map(|t| sspe(&predictions, t)).transpose()?;
    Ok(PredictionSet { test_inputs: xtest.to_owned(), predictions, sspe })
}
