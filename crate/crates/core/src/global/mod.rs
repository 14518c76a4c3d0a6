//! Global interpretation by input-space optimization: activation
//! maximization, deep dream and feature inversion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{GradTarget, Network, PropagationRule, ScoreKind};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizationTarget {
    /// Mean activation of one channel (or unit, for vector layers).
    Filter { layer: String, index: usize },
    /// Mean of every activation at the layer.
    Layer { layer: String },
    Logit { class: usize },
    /// Reproduce the activation of a reference image at the layer.
    Inverted { layer: String },
}

impl OptimizationTarget {
    pub fn method_name(&self) -> &'static str {
        match self {
            OptimizationTarget::Filter { .. } => "filter",
            OptimizationTarget::Layer { .. } => "layer",
            OptimizationTarget::Logit { .. } => "logit",
            OptimizationTarget::Inverted { .. } => "inverted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub target: OptimizationTarget,
    /// Starting image; seeded noise when absent.
    #[serde(skip)]
    pub init: Option<Tensor>,
    pub num_iter: usize,
    pub learning_rate: f64,
    pub l2_decay: f64,
    pub tv_weight: f64,
    /// Weight of the mean sixth power (inversion only).
    pub alpha_weight: f64,
    /// Maximum roll in pixels (maximization only).
    pub jitter: usize,
    pub seed: u64,
}

pub const NOISE_MEAN: f64 = 0.5;
pub const NOISE_STD: f64 = 0.1;
const TV_EPSILON: f64 = 1e-6;

impl OptimizationConfig {
    fn maximization(target: OptimizationTarget) -> Self {
        OptimizationConfig {
            target,
            init: None,
            num_iter: 50,
            learning_rate: 0.05,
            l2_decay: 1e-4,
            tv_weight: 0.0,
            alpha_weight: 0.0,
            jitter: 2,
            seed: 0,
        }
    }

    pub fn filter(layer: &str, index: usize) -> Self {
        Self::maximization(OptimizationTarget::Filter {
            layer: layer.into(),
            index,
        })
    }

    pub fn layer(layer: &str) -> Self {
        Self::maximization(OptimizationTarget::Layer { layer: layer.into() })
    }

    pub fn logit(class: usize) -> Self {
        Self::maximization(OptimizationTarget::Logit { class })
    }

    pub fn inverted(layer: &str) -> Self {
        OptimizationConfig {
            target: OptimizationTarget::Inverted { layer: layer.into() },
            init: None,
            num_iter: 200,
            learning_rate: 1.0,
            l2_decay: 0.0,
            tv_weight: 1e-2,
            alpha_weight: 1e-4,
            jitter: 0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, num_iter: usize) -> Self {
        self.num_iter = num_iter;
        self
    }

    pub fn with_init(mut self, init: Tensor) -> Self {
        self.init = Some(init);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_iter == 0 {
            return Err(Error::param("num_iter must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be finite and >= 0"));
        }
        for (name, w) in [
            ("l2 decay", self.l2_decay),
            ("tv weight", self.tv_weight),
            ("alpha weight", self.alpha_weight),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub target: OptimizationTarget,
    /// Objective at the starting image.
    pub initial_objective: f64,
    /// Objective after each iteration.
    pub objectives: Vec<f64>,
    pub image: Tensor,
}

impl OptimizationTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objectives.last().expect("trace is never empty")
    }
}

fn initial_image(net: &Network, cfg: &OptimizationConfig) -> Result<Tensor> {
    let [c, h, w] = net.input_shape();
    if let Some(img) = &cfg.init {
        if img.shape() != [c, h, w] {
            return Err(Error::ImageShapeMismatch {
                expected: vec![c, h, w],
                actual: img.shape().to_vec(),
            });
        }
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(NOISE_MEAN, NOISE_STD).expect("valid noise parameters");
    let data = (0..c * h * w)
        .map(|_| (normal.sample(&mut rng) as f32).clamp(0.0, 1.0))
        .collect();
    Tensor::new(vec![c, h, w], data)
}

/// Objective value and its input gradient, before regularization.
fn objective(net: &Network, x: &Tensor, target: &OptimizationTarget) -> Result<(f64, Vec<f32>)> {
    match target {
        OptimizationTarget::Logit { class } => {
            let logits = net.logits(x)?;
            if *class >= logits.numel() {
                return Err(Error::InvalidTarget {
                    target: *class,
                    classes: logits.numel(),
                });
            }
            let g = net.backward(x, *class, &GradTarget::Input, PropagationRule::Standard, ScoreKind::Logit)?;
            Ok((logits.data()[*class] as f64, g.into_data()))
        }
        OptimizationTarget::Layer { layer } => {
            let (v, g) = net.layer_objective_gradient(x, layer, PropagationRule::Standard, |a| {
                let n = a.numel() as f32;
                Ok((a.mean(), Tensor::filled(a.shape(), 1.0 / n)))
            })?;
            Ok((v, g.into_data()))
        }
        OptimizationTarget::Filter { layer, index } => {
            let (v, g) = net.layer_objective_gradient(x, layer, PropagationRule::Standard, |a| {
                let channels = a.shape()[0];
                if *index >= channels {
                    return Err(Error::FilterIndexOutOfRange {
                        layer: layer.clone(),
                        index: *index,
                        channels,
                    });
                }
                let per = a.numel() / channels;
                let slice = &a.data()[index * per..(index + 1) * per];
                let mean = slice.iter().map(|&v| v as f64).sum::<f64>() / per as f64;
                let mut seed = vec![0.0f32; a.numel()];
                seed[index * per..(index + 1) * per].fill(1.0 / per as f32);
                Ok((mean, Tensor::new(a.shape().to_vec(), seed)?))
            })?;
            Ok((v, g.into_data()))
        }
        OptimizationTarget::Inverted { .. } => Err(Error::param("use invert_features for inversion targets")),
    }
}

fn roll(x: &[f32], shape: [usize; 3], dy: isize, dx: isize) -> Vec<f32> {
    let [c, h, w] = shape;
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        for y in 0..h {
            let ty = (y as isize + dy).rem_euclid(h as isize) as usize;
            for xx in 0..w {
                let tx = (xx as isize + dx).rem_euclid(w as isize) as usize;
                out[(ch * h + ty) * w + tx] = x[(ch * h + y) * w + xx];
            }
        }
    }
    out
}

/// Gradient ascent on the input. Each iteration optionally rolls the image
/// by a seeded random offset, takes a step on J(x) - decay * |x|^2, rolls
/// back and clamps to [0, 1].
pub fn maximize_activation(net: &Network, cfg: &OptimizationConfig) -> Result<OptimizationTrace> {
    cfg.validate()?;
    if let OptimizationTarget::Inverted { .. } = cfg.target {
        return Err(Error::param("use invert_features for inversion targets"));
    }
    let shape = net.input_shape();
    let mut x = initial_image(net, cfg)?;
    let (initial_objective, _) = objective(net, &x, &cfg.target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6a69_7474);
    let amp = cfg.jitter as isize;
    let lr = cfg.learning_rate as f32;
    let decay = cfg.l2_decay as f32;
    let mut objectives = Vec::with_capacity(cfg.num_iter);
    for _ in 0..cfg.num_iter {
        let (dy, dx) = if amp > 0 {
            (rng.random_range(-amp as i64..=amp as i64) as isize, rng.random_range(-amp as i64..=amp as i64) as isize)
        } else {
            (0, 0)
        };
        let rolled = Tensor::new(shape.to_vec(), roll(x.data(), shape, dy, dx))?;
        let (_, g) = objective(net, &rolled, &cfg.target)?;
        let stepped: Vec<f32> = rolled
            .data()
            .iter()
            .zip(&g)
            .map(|(&v, &gv)| (v + lr * (gv - 2.0 * decay * v)).clamp(0.0, 1.0))
            .collect();
        x = Tensor::new(shape.to_vec(), roll(&stepped, shape, -dy, -dx))?;
        let (j, _) = objective(net, &x, &cfg.target)?;
        objectives.push(j);
    }
    Ok(OptimizationTrace {
        target: cfg.target.clone(),
        initial_objective,
        objectives,
        image: x,
    })
}

/// Activation maximization of one filter starting from a given image.
pub fn deep_dream(
    net: &Network,
    image: &Tensor,
    layer: &str,
    filter: usize,
    cfg: &OptimizationConfig,
) -> Result<OptimizationTrace> {
    let mut cfg = cfg.clone();
    cfg.target = OptimizationTarget::Filter {
        layer: layer.into(),
        index: filter,
    };
    cfg.init = Some(image.clone());
    maximize_activation(net, &cfg)
}

/// Isotropic total variation with forward differences, smoothed by a small
/// epsilon and averaged over elements, and its gradient.
pub fn total_variation(x: &[f32], shape: [usize; 3]) -> (f64, Vec<f64>) {
    let [c, h, w] = shape;
    let mut value = 0.0;
    let mut grad = vec![0.0; x.len()];
    let at = |ch: usize, y: usize, xx: usize| (ch * h + y) * w + xx;
    for ch in 0..c {
        for y in 0..h {
            for xx in 0..w {
                let i = at(ch, y, xx);
                let dy = if y + 1 < h { (x[at(ch, y + 1, xx)] - x[i]) as f64 } else { 0.0 };
                let dx = if xx + 1 < w { (x[at(ch, y, xx + 1)] - x[i]) as f64 } else { 0.0 };
                let r = (dy * dy + dx * dx + TV_EPSILON).sqrt();
                value += r;
                grad[i] -= (dy + dx) / r;
                if y + 1 < h {
                    grad[at(ch, y + 1, xx)] += dy / r;
                }
                if xx + 1 < w {
                    grad[at(ch, y, xx + 1)] += dx / r;
                }
            }
        }
    }
    let n = x.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    (value / n, grad)
}

struct Inversion<'a> {
    net: &'a Network,
    layer: &'a str,
    target: Tensor,
    norm: f64,
    tv: f64,
    alpha: f64,
}

impl Inversion<'_> {
    fn evaluate(&self, x: &Tensor) -> Result<(f64, Vec<f64>)> {
        let (fit, g) = self.net.layer_objective_gradient(x, self.layer, PropagationRule::Standard, |a| {
            let mut value = 0.0;
            let seed: Vec<f32> = a
                .data()
                .iter()
                .zip(self.target.data())
                .map(|(&v, &t)| {
                    let d = (v - t) as f64;
                    value += d * d;
                    (2.0 * d / self.norm) as f32
                })
                .collect();
            Ok((value / self.norm, Tensor::new(a.shape().to_vec(), seed)?))
        })?;
        let mut total = fit;
        let mut grad: Vec<f64> = g.data().iter().map(|&v| v as f64).collect();
        if self.tv > 0.0 {
            let shape = self.net.input_shape();
            let (tv, tg) = total_variation(x.data(), shape);
            total += self.tv * tv;
            grad.iter_mut().zip(&tg).for_each(|(g, t)| *g += self.tv * t);
        }
        if self.alpha > 0.0 {
            let n = x.numel() as f64;
            for (g, &v) in grad.iter_mut().zip(x.data()) {
                let v = v as f64;
                total += self.alpha * v.powi(6) / n;
                *g += self.alpha * 6.0 * v.powi(5) / n;
            }
        }
        Ok((total, grad))
    }
}

/// Gradient descent on |phi(x) - phi(image)|^2 / |phi(image)|^2
/// + tv * TV(x) + alpha * mean(x^6), where phi is the activation at `layer`
/// and TV is averaged per element.
pub fn invert_features(net: &Network, image: &Tensor, layer: &str, cfg: &OptimizationConfig) -> Result<OptimizationTrace> {
    cfg.validate()?;
    let target = net.activation(image, layer)?;
    let norm = target.squared_norm();
    if norm == 0.0 {
        return Err(Error::ZeroTargetActivation(layer.to_string()));
    }
    let inv = Inversion {
        net,
        layer,
        target,
        norm,
        tv: cfg.tv_weight,
        alpha: cfg.alpha_weight,
    };
    let shape = net.input_shape();
    let mut x = initial_image(net, cfg)?;
    let (initial_objective, mut grad) = inv.evaluate(&x)?;
    let mut objectives = Vec::with_capacity(cfg.num_iter);
    for _ in 0..cfg.num_iter {
        let next: Vec<f32> = x
            .data()
            .iter()
            .zip(&grad)
            .map(|(&v, &g)| ((v as f64 - cfg.learning_rate * g) as f32).clamp(0.0, 1.0))
            .collect();
        x = Tensor::new(shape.to_vec(), next)?;
        let (j, g) = inv.evaluate(&x)?;
        objectives.push(j);
        grad = g;
    }
    Ok(OptimizationTrace {
        target: OptimizationTarget::Inverted { layer: layer.into() },
        initial_objective,
        objectives,
        image: x,
    })
}
