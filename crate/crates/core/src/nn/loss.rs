use crate::nn::tensor::Tensor;
use crate::{Error, Result};

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-12;

/// Mean binary cross-entropy and its gradient with respect to `prediction`.
pub fn bce_loss(prediction: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let count = prediction.len() as f64;
    let mut grad = Tensor::zeros(prediction.shape());
    let mut total = 0.0;
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(prediction.data()).zip(target.data()) {
        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        *g = (p - t) / (p * (1.0 - p)) / count;
    }
    Ok((total / count, grad))
}

/// Loss only, without allocating a gradient.
pub fn bce_value(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    if prediction.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let total: f64 = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / prediction.len() as f64)
}
