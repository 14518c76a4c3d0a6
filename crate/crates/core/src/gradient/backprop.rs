use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collapse_channels, GradientTrace, Saliency};
use crate::engine::{GradTarget, Network, PropagationRule, ScoreKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn input_gradient(net: &Network, input: &Tensor, target: usize, rule: PropagationRule) -> Result<Tensor> {
    net.backward(input, target, &GradTarget::Input, rule, ScoreKind::Logit)
}

fn from_raw(target: usize, raw: Tensor) -> Result<Saliency> {
    Ok(Saliency {
        target,
        map: collapse_channels(&raw)?,
        trace: GradientTrace {
            raw: Some(raw),
            ..Default::default()
        },
    })
}

/// |d logit / d input|, max over channels.
pub fn vanilla_bp(net: &Network, input: &Tensor, target: usize) -> Result<Saliency> {
    from_raw(target, input_gradient(net, input, target, PropagationRule::Standard)?)
}

/// As [`vanilla_bp`] with the guided ReLU rule.
pub fn guided_bp(net: &Network, input: &Tensor, target: usize) -> Result<Saliency> {
    from_raw(target, input_gradient(net, input, target, PropagationRule::Guided)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothGradConfig {
    pub samples: usize,
    /// Noise standard deviation as a fraction of the input's value range.
    pub sigma: f32,
    pub seed: u64,
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        SmoothGradConfig {
            samples: 50,
            sigma: 0.15,
            seed: 0,
        }
    }
}

/// Mean vanilla gradient over noisy copies of the input. Sample `i` draws
/// its noise from stream `i` of the seeded generator and gradients are
/// summed in index order, so the result does not depend on scheduling.
pub fn smooth_grad(net: &Network, input: &Tensor, target: usize, cfg: &SmoothGradConfig) -> Result<Saliency> {
    if cfg.samples == 0 {
        return Err(Error::param("smoothgrad needs at least one sample"));
    }
    if !(cfg.sigma >= 0.0) {
        return Err(Error::param("smoothgrad sigma must be >= 0"));
    }
    let std = cfg.sigma as f64 * (input.max() - input.min()) as f64;
    let grads: Vec<Tensor> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let noisy = if std > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(i as u64);
                let normal = Normal::new(0.0, std).map_err(|e| Error::param(e.to_string()))?;
                let noise: Vec<f32> = (0..input.numel()).map(|_| normal.sample(&mut rng) as f32).collect();
                Tensor::new(
                    input.shape().to_vec(),
                    input.data().iter().zip(&noise).map(|(v, n)| v + n).collect(),
                )?
            } else {
                input.clone()
            };
            input_gradient(net, &noisy, target, PropagationRule::Standard)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0f64; input.numel()];
    for g in &grads {
        for (a, &v) in acc.iter_mut().zip(g.data()) {
            *a += v as f64;
        }
    }
    let n = cfg.samples as f64;
    let mean = Tensor::new(input.shape().to_vec(), acc.into_iter().map(|a| (a / n) as f32).collect())?;
    from_raw(target, mean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgConfig {
    pub steps: usize,
    /// Defaults to the all-zero input.
    pub baseline: Option<Tensor>,
}

impl Default for IgConfig {
    fn default() -> Self {
        IgConfig {
            steps: 64,
            baseline: None,
        }
    }
}

/// Midpoint-rule integrated gradients along the straight path from the
/// baseline to the input.
pub fn integrated_gradients(net: &Network, input: &Tensor, target: usize, cfg: &IgConfig) -> Result<Saliency> {
    if cfg.steps == 0 {
        return Err(Error::param("integrated gradients needs at least one step"));
    }
    let baseline = cfg.baseline.clone().unwrap_or_else(|| Tensor::zeros(input.shape()));
    if baseline.shape() != input.shape() {
        return Err(Error::ShapeMismatch {
            expected: input.shape().to_vec(),
            actual: baseline.shape().to_vec(),
        });
    }
    let delta: Vec<f64> = input
        .data()
        .iter()
        .zip(baseline.data())
        .map(|(&x, &b)| x as f64 - b as f64)
        .collect();
    let m = cfg.steps;
    let grads: Vec<Tensor> = (1..=m)
        .into_par_iter()
        .map(|t| {
            let frac = (t as f64 - 0.5) / m as f64;
            let point: Vec<f32> = baseline
                .data()
                .iter()
                .zip(&delta)
                .map(|(&b, &d)| (b as f64 + frac * d) as f32)
                .collect();
            input_gradient(net, &Tensor::new(input.shape().to_vec(), point)?, target, PropagationRule::Standard)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0f64; input.numel()];
    let mut partial = Vec::with_capacity(m);
    let mut running = 0.0f64;
    for g in &grads {
        for ((a, &v), &d) in acc.iter_mut().zip(g.data()).zip(&delta) {
            *a += v as f64;
            running += v as f64 * d / m as f64;
        }
        partial.push(running);
    }
    let attr: Vec<f32> = acc
        .iter()
        .zip(&delta)
        .map(|(&a, &d)| (d * a / m as f64) as f32)
        .collect();
    let raw = Tensor::new(input.shape().to_vec(), attr)?;
    let mut s = from_raw(target, raw)?;
    s.trace.ig_partial_sums = Some(partial);
    Ok(s)
}
