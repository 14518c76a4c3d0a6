use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Network;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One row of class probabilities per input.
pub type Probabilities = Vec<Vec<f64>>;

/// Black-box classifier: a batch of inputs in, one probability row out per
/// input. Implementations must be pure.
pub trait Predictor<I>: Send + Sync {
    fn num_classes(&self) -> usize;

    fn predict_proba(&self, batch: &[I]) -> Result<Probabilities>;

    fn class_names(&self) -> Vec<String> {
        (0..self.num_classes()).map(|k| format!("class_{k}")).collect()
    }
}

impl<I, P: Predictor<I> + ?Sized> Predictor<I> for &P {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn predict_proba(&self, batch: &[I]) -> Result<Probabilities> {
        (**self).predict_proba(batch)
    }
    fn class_names(&self) -> Vec<String> {
        (**self).class_names()
    }
}

/// Verifies the output contract: one row per input, `k` entries in [0, 1]
/// summing to 1 within 1e-6.
pub fn check_probabilities(rows: &Probabilities, n: usize, k: usize) -> Result<()> {
    if rows.len() != n {
        return Err(Error::PredictorFailure(format!("expected {n} rows, got {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            return Err(Error::PredictorFailure(format!("row {i} has {} entries, expected {k}", row.len())));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::PredictorFailure(format!("row {i} has entries outside [0, 1]")));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::PredictorFailure(format!("row {i} sums to {total}")));
        }
    }
    Ok(())
}

fn softmax64(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Wraps a [`Network`] as an image predictor.
#[derive(Debug, Clone)]
pub struct NetworkPredictor {
    net: Arc<Network>,
    class_names: Vec<String>,
}

impl NetworkPredictor {
    pub fn new(net: Arc<Network>) -> Self {
        let class_names = (0..net.class_count()).map(|k| format!("class_{k}")).collect();
        NetworkPredictor { net, class_names }
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = names;
        self
    }

    pub fn network(&self) -> &Network {
        &self.net
    }
}

impl Predictor<Tensor> for NetworkPredictor {
    fn num_classes(&self) -> usize {
        self.net.class_count()
    }

    fn predict_proba(&self, batch: &[Tensor]) -> Result<Probabilities> {
        batch
            .par_iter()
            .map(|x| {
                let logits = self.net.logits(x)?;
                let scores: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
                Ok(softmax64(&scores))
            })
            .collect()
    }

    fn class_names(&self) -> Vec<String> {
        self.class_names.clone()
    }
}

/// `softmax(W x + b)` over tabular rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTabular {
    /// `K x D`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default)]
    pub class_names: Vec<String>,
}

impl LinearTabular {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let model = LinearTabular {
            weights,
            bias,
            class_names: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.bias.len();
        let d = self.weights.first().map_or(0, Vec::len);
        if k == 0 || self.weights.len() != k || self.weights.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch {
                expected: vec![k, d],
                actual: vec![self.weights.len(), self.weights.iter().map(Vec::len).max().unwrap_or(0)],
            });
        }
        if !self.class_names.is_empty() && self.class_names.len() != k {
            return Err(Error::param("class_names length differs from class count"));
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.weights[0].len()
    }

    pub fn scores(&self, row: &[f32]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(row).map(|(wi, &xi)| wi * xi as f64).sum::<f64>())
            .collect()
    }
}

impl Predictor<Vec<f32>> for LinearTabular {
    fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn predict_proba(&self, batch: &[Vec<f32>]) -> Result<Probabilities> {
        let d = self.num_features();
        batch
            .iter()
            .map(|row| {
                if row.len() != d {
                    return Err(Error::ShapeMismatch {
                        expected: vec![d],
                        actual: vec![row.len()],
                    });
                }
                Ok(softmax64(&self.scores(row)))
            })
            .collect()
    }

    fn class_names(&self) -> Vec<String> {
        if self.class_names.is_empty() {
            (0..self.bias.len()).map(|k| format!("class_{k}")).collect()
        } else {
            self.class_names.clone()
        }
    }
}

/// Bag-of-words classifier: whitespace tokens, lowercased, each adding its
/// per-class weight; out-of-vocabulary tokens contribute nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowTextClassifier {
    pub class_names: Vec<String>,
    pub bias: Vec<f64>,
    /// token -> one weight per class.
    pub vocab: BTreeMap<String, Vec<f64>>,
}

impl BowTextClassifier {
    pub fn new(class_names: Vec<String>, bias: Vec<f64>, vocab: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let model = BowTextClassifier {
            class_names,
            bias,
            vocab,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.class_names.len();
        if k == 0 || self.bias.len() != k {
            return Err(Error::param("bias length must equal the number of classes"));
        }
        if let Some((tok, w)) = self.vocab.iter().find(|(_, w)| w.len() != k) {
            return Err(Error::param(format!("token '{tok}' has {} weights, expected {k}", w.len())));
        }
        Ok(())
    }

    pub fn scores(&self, text: &str) -> Vec<f64> {
        let mut s = self.bias.clone();
        for tok in text.split_whitespace() {
            if let Some(w) = self.vocab.get(&tok.to_lowercase()) {
                for (acc, wi) in s.iter_mut().zip(w) {
                    *acc += wi;
                }
            }
        }
        s
    }
}

impl Predictor<String> for BowTextClassifier {
    fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn predict_proba(&self, batch: &[String]) -> Result<Probabilities> {
        Ok(batch.iter().map(|t| softmax64(&self.scores(t))).collect())
    }

    fn class_names(&self) -> Vec<String> {
        self.class_names.clone()
    }
}

/// Adapts a closure that maps one input to a probability row.
pub struct FnPredictor<F> {
    classes: usize,
    f: F,
}

impl<F> FnPredictor<F> {
    pub fn new(classes: usize, f: F) -> Self {
        FnPredictor { classes, f }
    }
}

impl<I, F> Predictor<I> for FnPredictor<F>
where
    F: Fn(&I) -> Vec<f64> + Send + Sync,
{
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn predict_proba(&self, batch: &[I]) -> Result<Probabilities> {
        Ok(batch.iter().map(&self.f).collect())
    }
}

/// Records how many times, and with what batch sizes, the inner predictor
/// was called.
pub struct CountingPredictor<P> {
    inner: P,
    calls: AtomicUsize,
    sizes: Mutex<Vec<usize>>,
}

impl<P> CountingPredictor<P> {
    pub fn new(inner: P) -> Self {
        CountingPredictor {
            inner,
            calls: AtomicUsize::new(0),
            sizes: Mutex::new(Vec::new()),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.sizes.lock().unwrap().clone()
    }
}

impl<I, P: Predictor<I>> Predictor<I> for CountingPredictor<P> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn predict_proba(&self, batch: &[I]) -> Result<Probabilities> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.sizes.lock().unwrap().push(batch.len());
        self.inner.predict_proba(batch)
    }

    fn class_names(&self) -> Vec<String> {
        self.inner.class_names()
    }
}
