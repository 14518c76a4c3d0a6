mod common;

use common::fixture;
use percept::models::{ingest_csv, BowTextClassifier, Dataset, FnPredictor, LinearTabular, Predictor, SchemaHints};
use percept::perturbation::{
    anchor_precision, anchors_explain, cle_explain, exact_shapley_oracle, kernel_shap_explain, kernel_shap_values,
    lime_explain, perturb_tabular, AnchorConfig, Instance, LimeConfig, ShapConfig, ShapMode, TabularInstance,
    TextInstance,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn linear_model() -> LinearTabular {
    let m: LinearTabular = serde_json::from_str(&std::fs::read_to_string(fixture("linear_model.json")).unwrap()).unwrap();
    m.validate().unwrap();
    m
}

fn adult() -> Dataset {
    let hints = SchemaHints {
        categorical: vec!["sex".into(), "workclass".into()],
        class_names: vec![],
    };
    ingest_csv(fixture("adult.csv"), &hints).unwrap()
}

fn bow() -> BowTextClassifier {
    let m: BowTextClassifier = serde_json::from_str(&std::fs::read_to_string(fixture("bow_model.json")).unwrap()).unwrap();
    m.validate().unwrap();
    m
}

fn sentences() -> Vec<String> {
    std::fs::read_to_string(fixture("sentiment.txt")).unwrap().lines().map(str::to_string).collect()
}

fn argmax(row: &[f64]) -> usize {
    (0..row.len()).fold(0, |b, i| if row[i] > row[b] { i } else { b })
}

#[test]
fn fixture_corpus_sizes() {
    let data = adult();
    assert!((8..=200).contains(&data.rows().len()));
    assert_eq!(sentences().len(), 20);
    let model = bow();
    for (i, s) in sentences().iter().enumerate() {
        let p = model.predict_proba(&[s.clone()]).unwrap();
        assert_eq!(argmax(&p[0]), if i < 10 { 1 } else { 0 }, "{s}");
    }
}

#[test]
fn lime_tabular_signs_match_true_coefficients() {
    let model = linear_model();
    let data = adult();
    let truth: Vec<f64> = (0..6).map(|j| model.weights[1][j] - model.weights[0][j]).collect();
    for row in [0usize, 5, 17] {
        let inst = TabularInstance::new(data.rows()[row].clone(), &data, false).unwrap();
        for seed in 0..10 {
            let cfg = LimeConfig {
                seed,
                ..Default::default()
            };
            let e = lime_explain(&model, &inst, 1, &cfg).unwrap();
            for w in e.weights.iter().take(3) {
                assert!(!data.is_categorical(w.feature), "row {row} seed {seed}: categorical in top 3");
                assert_eq!(w.weight.signum(), truth[w.feature].signum(), "row {row} seed {seed} feature {}", w.feature);
            }
        }
    }
}

#[test]
fn shap_on_linear_scores_matches_analytic_values() {
    let model = linear_model();
    let data = adult();
    let inst = TabularInstance::new(data.rows()[3].clone(), &data, false).unwrap();
    let baseline = inst.compose(&[false; 6]);
    let x = inst.original();
    let s = kernel_shap_values(6, ShapMode::Exact, 0, |masks| {
        Ok(masks.iter().map(|m| model.scores(&inst.compose(m))[1]).collect())
    })
    .unwrap();
    for j in 0..6 {
        let want = model.weights[1][j] * (x[j] - baseline[j]) as f64;
        assert!((s.values[j] - want).abs() < 1e-6, "feature {j}: {} vs {want}", s.values[j]);
    }
}

#[test]
fn shap_explain_on_text_is_efficient() {
    let model = bow();
    let inst = TextInstance::new(&sentences()[1]).unwrap();
    let cfg = ShapConfig {
        mode: ShapMode::Exact,
        ..Default::default()
    };
    let e = kernel_shap_explain(&model, &inst, 1, &cfg).unwrap();
    let full = model.predict_proba(&[inst.original()]).unwrap()[0][1];
    let total: f64 = e.weights.iter().map(|w| w.weight).sum();
    assert!((total + e.intercept - full).abs() < 1e-6);
    let best = &e.weights[0];
    assert!(["excellent", "wonderful"].contains(&best.name.as_str()), "{}", best.name);
}

#[test]
fn cle_on_linear_target_matches_lime() {
    let inst = TextInstance::new("a b c d e f").unwrap();
    let coef = [0.05, -0.1, 0.2, 0.0, 0.15, -0.05];
    let p = FnPredictor::new(2, move |t: &String| {
        let v = 0.4 + t.split_whitespace().map(|w| coef[(w.as_bytes()[0] - b'a') as usize]).sum::<f64>();
        vec![v, 1.0 - v]
    });
    let cfg = LimeConfig {
        samples: 400,
        lambda: 0.0,
        seed: 2,
        ..Default::default()
    };
    let lime = lime_explain(&p, &inst, 0, &cfg).unwrap();
    let cle = cle_explain(&p, &inst, 0, &cfg).unwrap();
    assert!(cle.pairs.as_ref().unwrap().iter().all(|pw| pw.weight.abs() < 1e-4));
    for j in 0..6 {
        assert!((lime.weight_of(j).unwrap() - cle.weight_of(j).unwrap()).abs() < 1e-4);
        assert!((lime.weight_of(j).unwrap() - coef[j]).abs() < 1e-6);
    }
}

#[test]
fn anchors_on_sentiment_sentences() {
    let model = bow();
    for (i, s) in sentences().iter().enumerate().step_by(3) {
        let inst = TextInstance::new(s).unwrap();
        let label = argmax(&model.predict_proba(&[inst.original()]).unwrap()[0]);
        let cfg = AnchorConfig {
            seed: i as u64,
            ..Default::default()
        };
        let a = anchors_explain(&model, &inst, label, &cfg).unwrap();
        assert!(a.meets_target, "{s}: {a:?}");
        let fresh = anchor_precision(&model, &inst, &a.features(), label, 10_000, 1000 + i as u64).unwrap();
        assert!(fresh >= 0.90, "{s}: {fresh}");
    }
}

#[test]
fn anchors_on_tabular_fixture() {
    let model = linear_model();
    let data = adult();
    for row in [0usize, 7] {
        let inst = TabularInstance::new(data.rows()[row].clone(), &data, true).unwrap();
        let label = argmax(&model.predict_proba(&[inst.original()]).unwrap()[0]);
        let a = anchors_explain(&model, &inst, label, &AnchorConfig::default()).unwrap();
        let fresh = anchor_precision(&model, &inst, &a.features(), label, 10_000, 77).unwrap();
        assert!(fresh >= 0.90, "row {row}: {fresh} {a:?}");
        assert!((0.0..=1.0).contains(&a.coverage_estimate));
    }
}

#[test]
fn categorical_frequency_is_preserved_by_sampling() {
    let data = adult();
    let sex = 4;
    let freq = data.stats()[sex].frequencies.clone();
    let mut row = data.rows()[0].clone();
    row[sex] = 0.0;
    let p = perturb_tabular(&row, &data, 10_000, 3, true).unwrap();
    let mean = p.binary.iter().filter(|b| b[sex]).count() as f64 / 10_000.0;
    assert!((mean - freq[0]).abs() < 0.02, "{mean} vs {}", freq[0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn adding_a_predicate_never_increases_coverage(seed in any::<u64>(), a in 0usize..6, b in 0usize..6) {
        let data = adult();
        let inst = TabularInstance::new(data.rows()[2].clone(), &data, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = inst.conditional(&[], 500, &mut rng).unwrap();
        let cov = |rule: &[usize]| sample.holds.iter().filter(|h| rule.iter().all(|&j| h[j])).count();
        prop_assert!(cov(&[a, b]) <= cov(&[a]));
        prop_assert!(cov(&[a]) <= cov(&[]));
    }

    #[test]
    fn exact_shap_equals_oracle_on_random_games(d in 2usize..=8, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table: Vec<f64> = (0..1usize << d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v = |m: &[bool]| table[m.iter().enumerate().fold(0usize, |acc, (j, &b)| acc | (b as usize) << j)];
        let oracle = exact_shapley_oracle(d, v).unwrap();
        let s = kernel_shap_values(d, ShapMode::Exact, 0, |ms| Ok(ms.iter().map(|m| v(m)).collect())).unwrap();
        for (a, b) in s.values.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
