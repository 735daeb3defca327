//! Central finite-difference check of the analytic gradients.

use crate::nn::loss::{bce_loss, bce_value};
use crate::nn::network::NetworkSpec;
use crate::nn::ops::Activation;
use crate::nn::tensor::Tensor;
use crate::nn::LayerSpec;
use crate::Result;

pub const FD_STEP: f64 = 1e-5;

/// Magnitudes below this count as absolute rather than relative error.
pub const MAGNITUDE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(parameter array, index)` of the worst entry.
    pub worst: (usize, usize),
    pub parameters: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares backprop against central differences of the BCE loss for every
/// parameter of `net`.
pub fn grad_check(net: &NetworkSpec, input: &Tensor, target: &Tensor) -> Result<GradCheckReport> {
    let (prediction, cache) = net.forward(input)?;
    let (_, loss_grad) = bce_loss(&prediction, target)?;
    let analytic = net.backward(&cache, &loss_grad)?;

    let mut probe = net.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst: (0, 0), parameters: 0 };
    for (array, grads) in analytic.tensors.iter().enumerate() {
        for (index, &a) in grads.iter().enumerate() {
            let original = probe.parameters()[array][index];
            probe.parameters_mut()[array][index] = original + FD_STEP;
            let up = bce_value(&probe.predict(input)?, target)?;
            probe.parameters_mut()[array][index] = original - FD_STEP;
            let down = bce_value(&probe.predict(input)?, target)?;
            probe.parameters_mut()[array][index] = original;

            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = relative_error(a, numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (array, index);
            }
            report.parameters += 1;
        }
    }
    Ok(report)
}

/// Smallest `|pre-activation|` feeding any ReLU, used to keep finite
/// differences away from the kink.
pub fn min_relu_margin(net: &NetworkSpec, input: &Tensor) -> Result<f64> {
    let (_, cache) = net.forward(input)?;
    let mut margin = f64::INFINITY;
    for (layer, pre) in net.layers().iter().zip(cache.activations()) {
        if matches!(layer, LayerSpec::Activation(Activation::ReLU)) {
            margin = pre.data().iter().fold(margin, |m, v| m.min(v.abs()));
        }
    }
    Ok(margin)
}
