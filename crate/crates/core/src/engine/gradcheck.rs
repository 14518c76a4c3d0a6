use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kernels::pool_argmax;
use super::layer::LayerKind;
use super::{GradTarget, Network, PropagationRule, ScoreKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Minimum number of sampled coordinates.
pub const MIN_COORDINATES: usize = 200;
const SUBSAMPLE_SEED: u64 = 0x6772_6164;

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    /// max |a - n| / max(|a|, |n|, 1e-6) over the checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose difference stencil crosses a ReLU or max-pool
    /// switch; central differences are not a valid oracle there.
    pub skipped_kinks: usize,
}

/// Compares the analytic input gradient of the target logit against central
/// finite differences evaluated in `f64`.
pub fn gradient_check(net: &Network, input: &Tensor, target: usize, epsilon: f64) -> Result<GradientCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon must be positive"));
    }
    let analytic = net.backward(input, target, &GradTarget::Input, PropagationRule::Standard, ScoreKind::Logit)?;
    let x: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
    let n = x.len();
    let coords: Vec<usize> = if n <= MIN_COORDINATES.max(256) {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        let mut c = sample(&mut rng, n, MIN_COORDINATES.max(256)).into_vec();
        c.sort_unstable();
        c
    };

    let eval = |x: &[f64]| -> Result<(f64, Vec<usize>)> {
        let trace = net.run(x, net.logit_layer())?;
        Ok((trace.values.last().unwrap()[target], switch_pattern(net, &trace.values)))
    };
    let (_, base_pattern) = eval(&x)?;

    let mut report = GradientCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let mut probe = x.clone();
    for &i in &coords {
        probe[i] = x[i] + epsilon;
        let (plus, p_plus) = eval(&probe)?;
        probe[i] = x[i] - epsilon;
        let (minus, p_minus) = eval(&probe)?;
        probe[i] = x[i];
        if p_plus != base_pattern || p_minus != base_pattern {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic.data()[i] as f64;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// Which side of each piecewise-linear switch the forward pass landed on.
fn switch_pattern(net: &Network, values: &[Vec<f64>]) -> Vec<usize> {
    let shapes = net.shapes();
    let mut pattern = Vec::new();
    for (i, layer) in net.layers().iter().enumerate().take(values.len() - 1) {
        let x = &values[i];
        match &layer.kind {
            LayerKind::Relu => pattern.extend(x.iter().map(|&v| (v > 0.0) as usize)),
            LayerKind::MaxPool2d { size, stride } => {
                pattern.extend(pool_argmax(*size, *stride, &shapes[i], &shapes[i + 1], x))
            }
            _ => {}
        }
    }
    pattern
}
