use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::Instance;
use super::surrogate::{weighted_least_squares, weighted_r2};
use super::{rank_features, Explanation, FeatureWeight};
use crate::error::{Error, Result};
use crate::models::{check_probabilities, Predictor};

pub const MAX_EXACT_FEATURES: usize = 14;
pub const MAX_ORACLE_FEATURES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapMode {
    /// Every one of the 2^d coalitions.
    Exact,
    /// `samples` predictor rows: the empty and full coalitions plus
    /// `samples - 1` coalitions drawn from the Shapley kernel.
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    pub mode: ShapMode,
    pub top_k: Option<usize>,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            mode: ShapMode::Sampled { samples: 2048 },
            top_k: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyValues {
    /// f(empty coalition).
    pub base_value: f64,
    /// f(full coalition).
    pub full_value: f64,
    pub values: Vec<f64>,
    pub fit_quality: f64,
    /// Rows passed to the set function.
    pub evaluations: usize,
}

/// (d-1) / (C(d,s) s (d-s)) for 0 < s < d.
pub fn shapley_kernel_weight(d: usize, s: usize) -> f64 {
    if s == 0 || s >= d {
        return 0.0;
    }
    (d - 1) as f64 / (binomial(d, s) * s as f64 * (d - s) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn mask_of(bits: usize, d: usize) -> Vec<bool> {
    (0..d).map(|j| bits >> j & 1 == 1).collect()
}

/// Kernel SHAP over a set function evaluated in one batch. The batch always
/// begins with the full and then the empty coalition.
pub fn kernel_shap_values(
    d: usize,
    mode: ShapMode,
    seed: u64,
    eval: impl FnOnce(&[Vec<bool>]) -> Result<Vec<f64>>,
) -> Result<ShapleyValues> {
    if d == 0 {
        return Err(Error::param("kernel SHAP needs at least one feature"));
    }
    let mut masks = vec![vec![true; d], vec![false; d]];
    let mut weights = Vec::new();
    match mode {
        ShapMode::Exact => {
            if d > MAX_EXACT_FEATURES {
                return Err(Error::TooManyFeaturesForExact {
                    got: d,
                    max: MAX_EXACT_FEATURES,
                });
            }
            for bits in 1..(1usize << d) - 1 {
                let m = mask_of(bits, d);
                weights.push(shapley_kernel_weight(d, bits.count_ones() as usize));
                masks.push(m);
            }
        }
        ShapMode::Sampled { samples } => {
            if samples < 2 {
                return Err(Error::param("sampled kernel SHAP needs at least 2 samples"));
            }
            if d > 1 {
                let size_weights: Vec<f64> = (1..d).map(|s| (d - 1) as f64 / (s * (d - s)) as f64).collect();
                let total: f64 = size_weights.iter().sum();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..samples - 1 {
                    let mut u = rng.random::<f64>() * total;
                    let mut s = d - 1;
                    for (i, w) in size_weights.iter().enumerate() {
                        if u < *w {
                            s = i + 1;
                            break;
                        }
                        u -= w;
                    }
                    let mut order: Vec<usize> = (0..d).collect();
                    for i in 0..s {
                        let j = rng.random_range(i..d);
                        order.swap(i, j);
                    }
                    let mut m = vec![false; d];
                    for &j in &order[..s] {
                        m[j] = true;
                    }
                    masks.push(m);
                    weights.push(1.0);
                }
            }
        }
    }

    let evaluations = masks.len();
    let v = eval(&masks)?;
    if v.len() != evaluations || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::PredictorFailure(format!(
            "set function returned {} values for {evaluations} coalitions",
            v.len()
        )));
    }
    let (full, empty) = (v[0], v[1]);
    let delta = full - empty;
    if d == 1 {
        return Ok(ShapleyValues {
            base_value: empty,
            full_value: full,
            values: vec![delta],
            fit_quality: 1.0,
            evaluations,
        });
    }

    let coalitions = &masks[2..];
    let last = d - 1;
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    let x: Vec<Vec<f64>> = coalitions
        .iter()
        .map(|m| (0..last).map(|i| on(m[i]) - on(m[last])).collect())
        .collect();
    let y: Vec<f64> = coalitions
        .iter()
        .zip(&v[2..])
        .map(|(m, &f)| f - empty - on(m[last]) * delta)
        .collect();
    let mut values = weighted_least_squares(&x, &y, &weights)?;
    values.push(delta - values.iter().sum::<f64>());

    let design: Vec<Vec<f64>> = coalitions.iter().map(|m| m.iter().map(|&b| on(b)).collect()).collect();
    let fit_quality = weighted_r2(&design, &v[2..], &weights, &values, empty);
    Ok(ShapleyValues {
        base_value: empty,
        full_value: full,
        values,
        fit_quality,
        evaluations,
    })
}

/// Kernel SHAP for one label. An absent feature takes the instance's
/// baseline value; the predictor is called once.
pub fn kernel_shap_explain<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    label: usize,
    cfg: &ShapConfig,
) -> Result<Explanation> {
    let k = predictor.num_classes();
    if label >= k {
        return Err(Error::InvalidTarget { target: label, classes: k });
    }
    let d = instance.num_features();
    let shap = kernel_shap_values(d, cfg.mode, cfg.seed, |masks| {
        let inputs: Vec<I::Input> = masks.iter().map(|m| instance.compose(m)).collect();
        let probs = predictor.predict_proba(&inputs)?;
        check_probabilities(&probs, inputs.len(), k)?;
        Ok(probs.iter().map(|row| row[label]).collect())
    })?;
    let weights = shap
        .values
        .iter()
        .enumerate()
        .map(|(j, &w)| FeatureWeight {
            feature: j,
            name: instance.feature_name(j),
            weight: w,
        })
        .collect();
    Ok(Explanation {
        method: "shap".into(),
        label,
        class_name: predictor.class_names().get(label).cloned().unwrap_or_default(),
        intercept: shap.base_value,
        weights: rank_features(weights, cfg.top_k),
        pairs: None,
        fit_quality: shap.fit_quality,
        n_samples: shap.evaluations,
        seed: cfg.seed,
    })
}

/// Shapley values by averaging marginal contributions over all d!
/// orderings of the players.
pub fn exact_shapley_oracle(d: usize, v: impl Fn(&[bool]) -> f64) -> Result<Vec<f64>> {
    if d > MAX_ORACLE_FEATURES {
        return Err(Error::TooManyFeaturesForExact {
            got: d,
            max: MAX_ORACLE_FEATURES,
        });
    }
    let table: Vec<f64> = (0..1usize << d).map(|bits| v(&mask_of(bits, d))).collect();
    let mut phi = vec![0.0; d];
    let mut perm: Vec<usize> = (0..d).collect();
    let mut visit = |perm: &[usize]| {
        let mut bits = 0usize;
        for &p in perm {
            let next = bits | 1 << p;
            phi[p] += table[next] - table[bits];
            bits = next;
        }
    };
    // Heap's algorithm.
    let mut c = vec![0usize; d];
    let mut count = 1u64;
    visit(&perm);
    let mut i = 0;
    while i < d {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            count += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(phi.into_iter().map(|p| p / count as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CountingPredictor, FnPredictor};
    use crate::perturbation::TextInstance;
    use proptest::prelude::*;

    fn table_game(table: Vec<f64>) -> impl Fn(&[bool]) -> f64 {
        move |m: &[bool]| table[m.iter().enumerate().fold(0usize, |acc, (j, &b)| acc | (b as usize) << j)]
    }

    #[test]
    fn oracle_textbook_games() {
        let c = [0.5, -1.0, 2.0, 0.25];
        let phi = exact_shapley_oracle(4, |m| m.iter().zip(&c).filter(|(b, _)| **b).map(|(_, c)| c).sum()).unwrap();
        for (p, c) in phi.iter().zip(&c) {
            assert!((p - c).abs() < 1e-12);
        }
        let phi = exact_shapley_oracle(4, |m| if m[1] && m[2] { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(phi, vec![0.0, 0.5, 0.5, 0.0]);
        let phi = exact_shapley_oracle(3, |m| (m.iter().filter(|b| **b).count() as f64).powi(2)).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-12 && (phi[1] - phi[2]).abs() < 1e-12);
        assert!(exact_shapley_oracle(11, |_| 0.0).is_err());
    }

    #[test]
    fn single_player_gets_everything() {
        let s = kernel_shap_values(1, ShapMode::Exact, 0, |m| Ok(m.iter().map(|z| if z[0] { 0.9 } else { 0.2 }).collect()))
            .unwrap();
        assert!((s.values[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn linear_game_matches_analytic_values() {
        let w = [0.3, -0.2, 0.5, 0.1, -0.4];
        let x = [1.0, 2.0, -1.0, 0.5, 3.0];
        let b = [0.5, 0.0, 0.0, 1.5, 1.0];
        let s = kernel_shap_values(5, ShapMode::Exact, 0, |masks| {
            Ok(masks
                .iter()
                .map(|m| (0..5).map(|j| w[j] * if m[j] { x[j] } else { b[j] }).sum())
                .collect())
        })
        .unwrap();
        for j in 0..5 {
            assert!((s.values[j] - w[j] * (x[j] - b[j])).abs() < 1e-6);
        }
        assert!((s.fit_quality - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_mode_rejects_large_d() {
        let r = kernel_shap_values(15, ShapMode::Exact, 0, |m| Ok(vec![0.0; m.len()]));
        assert!(matches!(r, Err(Error::TooManyFeaturesForExact { got: 15, max: 14 })));
    }

    #[test]
    fn sampled_mode_on_additive_game_is_exact() {
        let c = [0.1, 0.2, -0.3, 0.05, 0.0, 0.4];
        let s = kernel_shap_values(6, ShapMode::Sampled { samples: 200 }, 3, |masks| {
            Ok(masks
                .iter()
                .map(|m| m.iter().zip(&c).filter(|(b, _)| **b).map(|(_, c)| c).sum())
                .collect())
        })
        .unwrap();
        assert_eq!(s.evaluations, 201);
        for (p, c) in s.values.iter().zip(&c) {
            assert!((p - c).abs() < 1e-9);
        }
    }

    #[test]
    fn explain_uses_one_call() {
        let inst = TextInstance::new("a b c d").unwrap();
        let p = CountingPredictor::new(FnPredictor::new(2, |t: &String| {
            let v = 0.1 + 0.2 * t.split_whitespace().count() as f64;
            vec![v, 1.0 - v]
        }));
        let cfg = ShapConfig {
            mode: ShapMode::Exact,
            ..Default::default()
        };
        let e = kernel_shap_explain(&p, &inst, 0, &cfg).unwrap();
        assert_eq!(p.batch_sizes(), vec![16]);
        assert!(e.weights.iter().all(|w| (w.weight - 0.2).abs() < 1e-9));
        assert!((e.intercept - 0.1).abs() < 1e-12);
        let p = CountingPredictor::new(FnPredictor::new(2, |_: &String| vec![0.5, 0.5]));
        let cfg = ShapConfig {
            mode: ShapMode::Sampled { samples: 64 },
            ..Default::default()
        };
        kernel_shap_explain(&p, &inst, 0, &cfg).unwrap();
        assert_eq!(p.batch_sizes(), vec![65]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn exact_mode_equals_oracle(d in 2usize..=8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let table: Vec<f64> = (0..1usize << d).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
            let game = table_game(table);
            let oracle = exact_shapley_oracle(d, &game).unwrap();
            let s = kernel_shap_values(d, ShapMode::Exact, 0, |m| Ok(m.iter().map(|z| game(z)).collect())).unwrap();
            for (a, b) in s.values.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-6);
            }
            prop_assert!((s.values.iter().sum::<f64>() + s.base_value - s.full_value).abs() < 1e-6);
        }
    }
}
