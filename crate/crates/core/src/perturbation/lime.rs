use serde::{Deserialize, Serialize};

use super::instance::Instance;
use super::surrogate::weighted_ridge;
use super::{rank_features, Explanation, FeatureWeight, PairWeight};
use crate::error::{Error, Result};
use crate::models::{check_probabilities, Predictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeConfig {
    pub samples: usize,
    /// Defaults to the instance's modality default.
    pub kernel_width: Option<f64>,
    pub lambda: f64,
    pub top_k: Option<usize>,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            samples: 1000,
            kernel_width: None,
            lambda: 1.0,
            top_k: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelSelection {
    Labels(Vec<usize>),
    /// The `k` most probable labels for the original instance.
    Top(usize),
}

/// LIME for a single label.
pub fn lime_explain<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    label: usize,
    cfg: &LimeConfig,
) -> Result<Explanation> {
    Ok(fit(predictor, instance, &LabelSelection::Labels(vec![label]), cfg, false)?.remove(0))
}

/// LIME for several labels from one shared neighbourhood and a single
/// predictor call.
pub fn lime_explain_labels<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    labels: &LabelSelection,
    cfg: &LimeConfig,
) -> Result<Vec<Explanation>> {
    fit(predictor, instance, labels, cfg, false)
}

/// LIME with every pairwise product of interpretable features added to the
/// surrogate. `weights` holds the singleton terms and `pairs` the
/// interaction terms.
pub fn cle_explain<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    label: usize,
    cfg: &LimeConfig,
) -> Result<Explanation> {
    Ok(fit(predictor, instance, &LabelSelection::Labels(vec![label]), cfg, true)?.remove(0))
}

fn fit<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    labels: &LabelSelection,
    cfg: &LimeConfig,
    interactions: bool,
) -> Result<Vec<Explanation>> {
    let d = instance.num_features();
    let n = cfg.samples;
    if n < d + 2 {
        return Err(Error::param(format!("need at least d + 2 = {} samples, got {n}", d + 2)));
    }
    if interactions && d * (d + 1) / 2 > n {
        return Err(Error::DesignTooLarge {
            needed: d * (d + 1) / 2,
            samples: n,
        });
    }
    let width = cfg.kernel_width.unwrap_or_else(|| instance.default_kernel_width());
    if !(width > 0.0) {
        return Err(Error::param("kernel width must be positive"));
    }
    if !(cfg.lambda >= 0.0) {
        return Err(Error::param("ridge lambda must be >= 0"));
    }

    let hood = instance.neighbourhood(n, cfg.seed)?;
    let k = predictor.num_classes();
    let probs = predictor.predict_proba(&hood.inputs)?;
    check_probabilities(&probs, hood.inputs.len(), k)?;

    let labels: Vec<usize> = match labels {
        LabelSelection::Labels(l) => l.clone(),
        LabelSelection::Top(top) => {
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| probs[0][b].total_cmp(&probs[0][a]).then(a.cmp(&b)));
            order.truncate(*top);
            order
        }
    };
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidTarget {
            target: bad,
            classes: k,
        });
    }

    let kernel: Vec<f64> = hood.distances.iter().map(|dist| (-(dist * dist) / (width * width)).exp()).collect();
    let pairs: Vec<(usize, usize)> = if interactions {
        (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect()
    } else {
        Vec::new()
    };
    let design: Vec<Vec<f64>> = hood
        .design
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.extend(pairs.iter().map(|&(i, j)| row[i] * row[j]));
            r
        })
        .collect();

    let class_names = predictor.class_names();
    let method = if interactions { "cle" } else { "lime" };
    labels
        .iter()
        .map(|&label| {
            let y: Vec<f64> = probs.iter().map(|row| row[label]).collect();
            let fit = weighted_ridge(&design, &y, &kernel, cfg.lambda)?;
            let singles = (0..d)
                .map(|j| FeatureWeight {
                    feature: j,
                    name: instance.feature_name(j),
                    weight: fit.coef[j],
                })
                .collect();
            let pair_weights = interactions.then(|| {
                let mut pw: Vec<PairWeight> = pairs
                    .iter()
                    .enumerate()
                    .map(|(p, &(i, j))| PairWeight {
                        i,
                        j,
                        weight: fit.coef[d + p],
                    })
                    .collect();
                pw.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then((a.i, a.j).cmp(&(b.i, b.j))));
                if let Some(top) = cfg.top_k {
                    pw.truncate(top);
                }
                pw
            });
            Ok(Explanation {
                method: method.to_string(),
                label,
                class_name: class_names.get(label).cloned().unwrap_or_default(),
                intercept: fit.intercept,
                weights: rank_features(singles, cfg.top_k),
                pairs: pair_weights,
                fit_quality: fit.r2,
                n_samples: n,
                seed: cfg.seed,
            })
        })
        .collect()
}
