use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{upsample_bilinear, GradientTrace, Saliency, SaliencyMap};
use crate::engine::{Network, PropagationRule, ScoreKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Grad-CAM++ denominator guard.
const PP_EPSILON: f32 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CamMethod {
    GradCam,
    GradCamPp,
    ScoreCam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamRequest {
    pub method: CamMethod,
    pub target_layer: String,
    /// Defaults to the predicted class.
    pub target_class: Option<usize>,
    /// Score differentiated by Grad-CAM/Grad-CAM++.
    #[serde(default)]
    pub score: ScoreKind,
}

impl CamRequest {
    pub fn new(method: CamMethod, target_layer: impl Into<String>) -> Self {
        CamRequest {
            method,
            target_layer: target_layer.into(),
            target_class: None,
            score: ScoreKind::Logit,
        }
    }

    pub fn with_class(mut self, class: usize) -> Self {
        self.target_class = Some(class);
        self
    }
}

struct LayerView {
    h: usize,
    w: usize,
}

fn spatial_layer(net: &Network, name: &str) -> Result<LayerView> {
    match net.layer_shape(name)? {
        &[_, h, w] => Ok(LayerView { h, w }),
        _ => Err(Error::NonSpatialLayer(name.to_string())),
    }
}

fn resolve_target(net: &Network, input: &Tensor, req: &CamRequest) -> Result<usize> {
    match req.target_class {
        Some(c) if c >= net.class_count() => Err(Error::InvalidTarget {
            target: c,
            classes: net.class_count(),
        }),
        Some(c) => Ok(c),
        None => Ok(net.logits(input)?.argmax()),
    }
}

/// ReLU(sum_k weight_k * A^k), upsampled to the input resolution.
fn combine(net: &Network, act: &Tensor, view: &LayerView, weights: &[f32]) -> Result<SaliencyMap> {
    let area = view.h * view.w;
    let a = act.data();
    let mut raw = vec![0.0f32; area];
    for (k, &wk) in weights.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (r, &v) in raw.iter_mut().zip(&a[k * area..(k + 1) * area]) {
            *r += wk * v;
        }
    }
    raw.iter_mut().for_each(|v| *v = v.max(0.0));
    let [_, h, w] = net.input_shape();
    SaliencyMap::new(h, w, upsample_bilinear(&raw, view.h, view.w, h, w), false)
}

fn activation_and_gradient(net: &Network, input: &Tensor, req: &CamRequest, target: usize) -> Result<(Tensor, Tensor)> {
    let (_, pass) = net.backward_with_tape(
        input,
        target,
        PropagationRule::Standard,
        req.score,
        &[req.target_layer.as_str()],
    )?;
    let mut tape = pass.tape;
    Ok((
        tape.activations.remove(&req.target_layer).unwrap(),
        tape.gradients.remove(&req.target_layer).unwrap(),
    ))
}

/// Channel weights are spatial means of the score gradient at the layer.
pub fn grad_cam(net: &Network, input: &Tensor, req: &CamRequest) -> Result<Saliency> {
    let view = spatial_layer(net, &req.target_layer)?;
    let target = resolve_target(net, input, req)?;
    let (act, grad) = activation_and_gradient(net, input, req, target)?;
    let area = view.h * view.w;
    let alpha: Vec<f32> = grad
        .data()
        .chunks_exact(area)
        .map(|g| (g.iter().map(|&v| v as f64).sum::<f64>() / area as f64) as f32)
        .collect();
    let map = combine(net, &act, &view, &alpha)?;
    Ok(Saliency {
        target,
        map,
        trace: GradientTrace {
            channel_weights: Some(alpha),
            ..Default::default()
        },
    })
}

/// Grad-CAM++ with higher-order terms taken as powers of the first
/// gradient: `a_ij = g^2 / (2 g^2 + S_k g^3)`, `S_k = sum_ab A^k_ab`, and
/// `alpha_k = sum_ij a_ij relu(g_ij)`.
pub fn grad_cam_pp(net: &Network, input: &Tensor, req: &CamRequest) -> Result<Saliency> {
    let view = spatial_layer(net, &req.target_layer)?;
    let target = resolve_target(net, input, req)?;
    let (act, grad) = activation_and_gradient(net, input, req, target)?;
    let area = view.h * view.w;
    let alpha: Vec<f32> = act
        .data()
        .chunks_exact(area)
        .zip(grad.data().chunks_exact(area))
        .map(|(a, g)| {
            let sum_a: f32 = a.iter().sum();
            g.iter()
                .map(|&gij| {
                    let g2 = gij * gij;
                    let denom = 2.0 * g2 + sum_a * g2 * gij;
                    if denom.abs() < PP_EPSILON {
                        0.0
                    } else {
                        g2 / denom * gij.max(0.0)
                    }
                })
                .sum()
        })
        .collect();
    let map = combine(net, &act, &view, &alpha)?;
    Ok(Saliency {
        target,
        map,
        trace: GradientTrace {
            channel_weights: Some(alpha),
            ..Default::default()
        },
    })
}

/// Gradient-free CAM: each channel, min-max normalized and upsampled, masks
/// the input; its weight is the target probability on the masked input minus
/// the probability on an all-zero input.
pub fn score_cam(net: &Network, input: &Tensor, req: &CamRequest) -> Result<Saliency> {
    let view = spatial_layer(net, &req.target_layer)?;
    let target = resolve_target(net, input, req)?;
    let act = net.activation(input, &req.target_layer)?;
    let [c, h, w] = net.input_shape();
    let area = view.h * view.w;
    let baseline = net.probs(&Tensor::zeros(&[c, h, w]))?.data()[target];

    let weights: Vec<f32> = act
        .data()
        .par_chunks_exact(area)
        .map(|a| -> Result<f32> {
            let lo = a.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = a.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            if !(hi > lo) {
                // A constant channel normalizes to zeros, i.e. the zero baseline.
                return Ok(0.0);
            }
            let norm: Vec<f32> = a.iter().map(|&v| (v - lo) / (hi - lo)).collect();
            let mask = upsample_bilinear(&norm, view.h, view.w, h, w);
            let masked: Vec<f32> = input
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| x * mask[i % (h * w)])
                .collect();
            let p = net.probs(&Tensor::new(vec![c, h, w], masked)?)?.data()[target];
            Ok(p - baseline)
        })
        .collect::<Result<_>>()?;
    let map = combine(net, &act, &view, &weights)?;
    Ok(Saliency {
        target,
        map,
        trace: GradientTrace {
            channel_weights: Some(weights),
            ..Default::default()
        },
    })
}
