//! Sequential CNN engine: forward evaluation, reverse-mode gradients to the
//! input or any named layer, and activation/gradient taps.

mod gradcheck;
pub(crate) mod kernels;
mod layer;
mod weights;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use gradcheck::{gradient_check, GradientCheck};
pub use layer::{Conv2d, Dense, Layer, LayerKind};
pub use weights::{load_network, read_network, save_network, write_network, FORMAT_VERSION, MAGIC};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use kernels::Real;

/// ReLU backward behaviour. Every other layer backpropagates identically
/// under both rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagationRule {
    #[default]
    Standard,
    Guided,
}

/// Which class score is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    #[default]
    Logit,
    Prob,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GradTarget {
    Input,
    Layer(String),
}

/// Activations and gradients captured at named layers. Both maps hold the
/// layer *output*.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    pub activations: BTreeMap<String, Tensor>,
    pub gradients: BTreeMap<String, Tensor>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: Tensor,
    pub probs: Tensor,
    pub tape: Tape,
}

/// Immutable sequential network over a `[C,H,W]` input.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_shape: [usize; 3],
    /// `shapes[0]` is the input shape, `shapes[i + 1]` the output of layer `i`.
    shapes: Vec<Vec<usize>>,
    logit_layer: usize,
}

/// Raw per-layer values of one forward pass; index 0 is the input.
pub(crate) struct Trace<T> {
    pub values: Vec<Vec<T>>,
}

impl Network {
    pub fn new(input_shape: [usize; 3], layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        if input_shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidNetwork(format!("invalid input shape {input_shape:?}")));
        }
        let mut seen = BTreeSet::new();
        for l in &layers {
            if l.name.is_empty() || !seen.insert(l.name.as_str()) {
                return Err(Error::InvalidNetwork(format!("duplicate or empty layer name '{}'", l.name)));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if matches!(l.kind, LayerKind::Softmax) && i + 1 != layers.len() {
                return Err(Error::InvalidNetwork("softmax is only allowed as the last layer".into()));
            }
        }
        let mut shapes = vec![input_shape.to_vec()];
        for l in &layers {
            let next = l.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        let out = shapes.last().unwrap();
        if out.len() != 1 {
            return Err(Error::InvalidNetwork(format!("network output must be a vector, got {out:?}")));
        }
        let logit_layer = if matches!(layers.last().unwrap().kind, LayerKind::Softmax) {
            if layers.len() < 2 {
                return Err(Error::InvalidNetwork("softmax needs a preceding layer".into()));
            }
            layers.len() - 2
        } else {
            layers.len() - 1
        };
        Ok(Network {
            layers,
            input_shape,
            shapes,
            logit_layer,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.shapes.last().unwrap()[0]
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayerName {
                name: name.to_string(),
                available: self.layer_names(),
            })
    }

    /// Output shape of the named layer.
    pub fn layer_shape(&self, name: &str) -> Result<&[usize]> {
        Ok(&self.shapes[self.layer_index(name)? + 1])
    }

    pub(crate) fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.to_vec(),
                actual: input.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.class_count() {
            return Err(Error::InvalidTarget {
                target,
                classes: self.class_count(),
            });
        }
        Ok(())
    }

    /// Runs layers `0..=upto` and keeps every intermediate value.
    pub(crate) fn run<T: Real>(&self, input: &[T], upto: usize) -> Result<Trace<T>> {
        let mut values = Vec::with_capacity(upto + 2);
        values.push(input.to_vec());
        for (i, layer) in self.layers[..=upto].iter().enumerate() {
            let y = kernels::forward(&layer.kind, &self.shapes[i], &self.shapes[i + 1], &values[i]);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("forward output of layer '{}'", layer.name),
                });
            }
            values.push(y);
        }
        Ok(Trace { values })
    }

    fn record_indices(&self, record: &[&str]) -> Result<Vec<usize>> {
        record.iter().map(|n| self.layer_index(n)).collect()
    }

    /// Forward pass recording the outputs of the named layers.
    pub fn forward(&self, input: &Tensor, record: &[&str]) -> Result<ForwardPass> {
        self.check_input(input)?;
        let recorded = self.record_indices(record)?;
        let trace = self.run(input.data(), self.layers.len() - 1)?;
        Ok(self.package(&trace, &recorded))
    }

    fn package(&self, trace: &Trace<f32>, recorded: &[usize]) -> ForwardPass {
        let logits = trace.values[self.logit_layer + 1].clone();
        let probs = kernels::softmax(&logits);
        let mut tape = Tape::default();
        for &i in recorded {
            if let Some(v) = trace.values.get(i + 1) {
                tape.activations.insert(
                    self.layers[i].name.clone(),
                    Tensor::from_parts(self.shapes[i + 1].clone(), v.clone()),
                );
            }
        }
        ForwardPass {
            logits: Tensor::from_parts(vec![logits.len()], logits),
            probs: Tensor::from_parts(vec![probs.len()], probs),
            tape,
        }
    }

    /// Logits only.
    pub fn logits(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let trace = self.run(input.data(), self.logit_layer)?;
        let v = trace.values.into_iter().last().unwrap();
        Ok(Tensor::from_parts(vec![v.len()], v))
    }

    /// Class probabilities only.
    pub fn probs(&self, input: &Tensor) -> Result<Tensor> {
        let logits = self.logits(input)?;
        let p = kernels::softmax(logits.data());
        Ok(Tensor::from_parts(vec![p.len()], p))
    }

    /// Propagates `seed` (the gradient with respect to the output of layer
    /// `start`) back to the input, capturing gradients at `recorded`.
    pub(crate) fn propagate(
        &self,
        trace: &Trace<f32>,
        start: usize,
        seed: Vec<f32>,
        rule: PropagationRule,
        recorded: &[usize],
        tape: &mut Tape,
    ) -> Result<Tensor> {
        let mut g = seed;
        for i in (0..=start).rev() {
            let layer = &self.layers[i];
            if recorded.contains(&i) {
                tape.gradients.insert(
                    layer.name.clone(),
                    Tensor::from_parts(self.shapes[i + 1].clone(), g.clone()),
                );
            }
            g = kernels::backward(
                &layer.kind,
                &self.shapes[i],
                &self.shapes[i + 1],
                &trace.values[i],
                &trace.values[i + 1],
                &g,
                rule,
            );
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("gradient through layer '{}'", layer.name),
                });
            }
        }
        Ok(Tensor::from_parts(self.input_shape.to_vec(), g))
    }

    fn score_seed(&self, trace: &Trace<f32>, target: usize, from: ScoreKind) -> Vec<f32> {
        let logits = &trace.values[self.logit_layer + 1];
        let mut seed = vec![0.0f32; logits.len()];
        seed[target] = 1.0;
        match from {
            ScoreKind::Logit => seed,
            ScoreKind::Prob => kernels::softmax_backward(&kernels::softmax(logits), &seed),
        }
    }

    /// Forward then backward from the target score, recording activations
    /// and gradients at the named layers. Returns the input gradient.
    pub fn backward_with_tape(
        &self,
        input: &Tensor,
        target: usize,
        rule: PropagationRule,
        from: ScoreKind,
        record: &[&str],
    ) -> Result<(Tensor, ForwardPass)> {
        self.check_input(input)?;
        self.check_target(target)?;
        let recorded = self.record_indices(record)?;
        let trace = self.run(input.data(), self.layers.len() - 1)?;
        let mut pass = self.package(&trace, &recorded);
        let seed = self.score_seed(&trace, target, from);
        let grad = self.propagate(
            &trace,
            self.logit_layer,
            seed,
            rule,
            &recorded,
            &mut pass.tape,
        )?;
        for name in pass.tape.activations.keys() {
            if !pass.tape.gradients.contains_key(name) {
                // Layers after the logits (the final softmax) do not lie on the path.
                let shape = pass.tape.activations[name].shape().to_vec();
                pass.tape.gradients.insert(name.clone(), Tensor::zeros(&shape));
            }
        }
        Ok((grad, pass))
    }

    /// d(score of `target`)/d(requested tensor).
    pub fn backward(
        &self,
        input: &Tensor,
        target: usize,
        to: &GradTarget,
        rule: PropagationRule,
        from: ScoreKind,
    ) -> Result<Tensor> {
        match to {
            GradTarget::Input => Ok(self.backward_with_tape(input, target, rule, from, &[])?.0),
            GradTarget::Layer(name) => {
                let (_, pass) = self.backward_with_tape(input, target, rule, from, &[name])?;
                Ok(pass.tape.gradients[name.as_str()].clone())
            }
        }
    }

    /// Gradient of a scalar objective defined on the output of `layer`.
    ///
    /// `objective` receives the layer activation and returns its value and
    /// gradient with respect to that activation.
    pub fn layer_objective_gradient(
        &self,
        input: &Tensor,
        layer: &str,
        rule: PropagationRule,
        objective: impl FnOnce(&Tensor) -> Result<(f64, Tensor)>,
    ) -> Result<(f64, Tensor)> {
        self.check_input(input)?;
        let idx = self.layer_index(layer)?;
        let trace = self.run(input.data(), idx)?;
        let act = Tensor::from_parts(self.shapes[idx + 1].clone(), trace.values[idx + 1].clone());
        let (value, seed) = objective(&act)?;
        if seed.shape() != act.shape() {
            return Err(Error::ShapeMismatch {
                expected: act.shape().to_vec(),
                actual: seed.shape().to_vec(),
            });
        }
        let mut tape = Tape::default();
        let grad = self.propagate(&trace, idx, seed.into_data(), rule, &[], &mut tape)?;
        Ok((value, grad))
    }

    /// Activation of a single layer.
    pub fn activation(&self, input: &Tensor, layer: &str) -> Result<Tensor> {
        self.check_input(input)?;
        let idx = self.layer_index(layer)?;
        let trace = self.run(input.data(), idx)?;
        let v = trace.values.into_iter().last().unwrap();
        Ok(Tensor::from_parts(self.shapes[idx + 1].clone(), v))
    }

    pub(crate) fn logit_layer(&self) -> usize {
        self.logit_layer
    }

    pub(crate) fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }
}
