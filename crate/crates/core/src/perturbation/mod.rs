//! Perturbation-based local explanations: LIME, Kernel SHAP, Anchors and a
//! pairwise-interaction LIME variant (CLE), over image, text and tabular
//! instances.

mod anchors;
mod instance;
mod lime;
mod sampling;
mod segment;
mod shap;
pub mod surrogate;

use serde::{Deserialize, Serialize};

pub use anchors::{anchor_precision, anchors_explain, AnchorConfig, AnchorResult, Predicate};
pub use instance::{
    perturb_tabular, ConditionalSample, ImageInstance, Instance, Modality, Neighbourhood, TabularInstance,
    TabularPerturbation, TextInstance, MASK_KERNEL_WIDTH, TABULAR_KERNEL_SCALE,
};
pub use lime::{cle_explain, lime_explain, lime_explain_labels, LabelSelection, LimeConfig};
pub use sampling::{cosine_distance_to_ones, sample_masks};
pub use segment::{grid_segment, SegmentMap};
pub use shap::{
    exact_shapley_oracle, kernel_shap_explain, kernel_shap_values, shapley_kernel_weight, ShapConfig, ShapMode,
    ShapleyValues, MAX_EXACT_FEATURES, MAX_ORACLE_FEATURES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeight {
    pub feature: usize,
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWeight {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// A surrogate explanation for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: String,
    pub label: usize,
    pub class_name: String,
    pub intercept: f64,
    pub weights: Vec<FeatureWeight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairWeight>>,
    /// Weighted R^2 of the surrogate.
    pub fit_quality: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Explanation {
    pub fn weight_of(&self, feature: usize) -> Option<f64> {
        self.weights.iter().find(|w| w.feature == feature).map(|w| w.weight)
    }

    pub fn pair_weight(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = (i.min(j), i.max(j));
        self.pairs.as_ref()?.iter().find(|p| p.i == i && p.j == j).map(|p| p.weight)
    }
}

/// Orders by |weight| descending, then feature id ascending, and keeps the
/// first `top_k`.
pub(crate) fn rank_features(mut weights: Vec<FeatureWeight>, top_k: Option<usize>) -> Vec<FeatureWeight> {
    weights.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.feature.cmp(&b.feature)));
    if let Some(k) = top_k {
        weights.truncate(k);
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_breaks_ties_by_feature_id() {
        let w = |feature, weight| FeatureWeight {
            feature,
            name: String::new(),
            weight,
        };
        let ranked = rank_features(vec![w(3, 0.5), w(1, -0.5), w(2, 0.9), w(0, 0.1)], Some(3));
        let ids: Vec<usize> = ranked.iter().map(|f| f.feature).collect();
        assert_eq!(ids, vec![2, 1, 3]);
    }
}
