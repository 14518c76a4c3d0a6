use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::instance::Instance;
use crate::error::{Error, Result};
use crate::models::{check_probabilities, Predictor};

/// Precision lower bounds are one-sided Hoeffding bounds:
/// p_hat - sqrt(ln(1/delta) / (2 n)).
pub fn hoeffding_lower_bound(p_hat: f64, n: usize, delta: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p_hat - ((1.0 / delta).ln() / (2.0 * n as f64)).sqrt()).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// Precision target tau.
    pub precision_target: f64,
    pub delta: f64,
    pub beam_width: usize,
    pub max_predicates: usize,
    /// Perturbations drawn per candidate rule.
    pub samples_per_candidate: usize,
    pub coverage_samples: usize,
    pub seed: u64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            precision_target: 0.95,
            delta: 0.05,
            beam_width: 2,
            max_predicates: 4,
            samples_per_candidate: 1000,
            coverage_samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorResult {
    pub label: usize,
    pub class_name: String,
    pub predicates: Vec<Predicate>,
    pub precision_estimate: f64,
    pub precision_lower_bound: f64,
    pub coverage_estimate: f64,
    pub samples_used: usize,
    /// False when no rule reached the precision target and this is the best
    /// rule found.
    pub meets_target: bool,
    pub seed: u64,
}

impl AnchorResult {
    pub fn features(&self) -> Vec<usize> {
        self.predicates.iter().map(|p| p.feature).collect()
    }
}

struct Candidate {
    rule: Vec<usize>,
    precision: f64,
    lower: f64,
    coverage: f64,
}

fn agreement<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    inputs: &[I::Input],
    label: usize,
) -> Result<usize> {
    let k = predictor.num_classes();
    let probs = predictor.predict_proba(inputs)?;
    check_probabilities(&probs, inputs.len(), k)?;
    Ok(probs.iter().filter(|row| argmax(row) == label).count())
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in row.iter().enumerate() {
        if *p > row[best] {
            best = i;
        }
    }
    best
}

/// Beam search for the shortest predicate conjunction whose precision lower
/// bound reaches the target.
pub fn anchors_explain<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    label: usize,
    cfg: &AnchorConfig,
) -> Result<AnchorResult> {
    let tau = cfg.precision_target;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param("precision target must lie in (0, 1)"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::param("delta must lie in (0, 1)"));
    }
    if cfg.beam_width == 0 || cfg.samples_per_candidate == 0 || cfg.coverage_samples == 0 {
        return Err(Error::param("beam width and sample counts must be positive"));
    }
    let k = predictor.num_classes();
    if label >= k {
        return Err(Error::InvalidTarget { target: label, classes: k });
    }
    let d = instance.num_features();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coverage_sample = instance.conditional(&[], cfg.coverage_samples, &mut rng)?.holds;
    let coverage = |rule: &[usize]| {
        coverage_sample.iter().filter(|h| rule.iter().all(|&j| h[j])).count() as f64 / coverage_sample.len() as f64
    };
    let mut samples_used = cfg.coverage_samples;

    let mut evaluate = |rules: Vec<Vec<usize>>, rng: &mut ChaCha8Rng| -> Result<Vec<Candidate>> {
        let n = cfg.samples_per_candidate;
        let mut inputs = Vec::with_capacity(rules.len() * n);
        for rule in &rules {
            inputs.extend(instance.conditional(rule, n, rng)?.inputs);
        }
        samples_used += inputs.len();
        let k = predictor.num_classes();
        let probs = predictor.predict_proba(&inputs)?;
        check_probabilities(&probs, inputs.len(), k)?;
        Ok(rules
            .into_iter()
            .zip(probs.chunks(n))
            .map(|(rule, rows)| {
                let precision = rows.iter().filter(|r| argmax(r) == label).count() as f64 / n as f64;
                Candidate {
                    lower: hoeffding_lower_bound(precision, n, cfg.delta),
                    coverage: coverage(&rule),
                    rule,
                    precision,
                }
            })
            .collect())
    };

    let mut best = evaluate(vec![Vec::new()], &mut rng)?.remove(0);
    let mut beams = vec![Vec::new()];
    let mut found = best.lower >= tau;
    for _ in 0..cfg.max_predicates.min(d) {
        if found {
            break;
        }
        let mut rules: Vec<Vec<usize>> = Vec::new();
        for beam in &beams {
            for j in 0..d {
                if beam.contains(&j) {
                    continue;
                }
                let mut r = beam.clone();
                r.push(j);
                r.sort_unstable();
                if !rules.contains(&r) {
                    rules.push(r);
                }
            }
        }
        if rules.is_empty() {
            break;
        }
        let mut cands = evaluate(rules, &mut rng)?;
        cands.sort_by(|a, b| b.lower.total_cmp(&a.lower).then(a.rule.cmp(&b.rule)));
        let mut passing: Vec<&Candidate> = cands.iter().filter(|c| c.lower >= tau).collect();
        if !passing.is_empty() {
            passing.sort_by(|a, b| {
                b.coverage
                    .total_cmp(&a.coverage)
                    .then(b.lower.total_cmp(&a.lower))
                    .then(a.rule.cmp(&b.rule))
            });
            let c = passing[0];
            best = Candidate {
                rule: c.rule.clone(),
                precision: c.precision,
                lower: c.lower,
                coverage: c.coverage,
            };
            found = true;
            break;
        }
        if cands[0].lower > best.lower {
            let c = &cands[0];
            best = Candidate {
                rule: c.rule.clone(),
                precision: c.precision,
                lower: c.lower,
                coverage: c.coverage,
            };
        }
        beams = cands.into_iter().take(cfg.beam_width).map(|c| c.rule).collect();
    }

    Ok(AnchorResult {
        label,
        class_name: predictor.class_names().get(label).cloned().unwrap_or_default(),
        predicates: best
            .rule
            .iter()
            .map(|&j| Predicate {
                feature: j,
                description: instance.predicate(j),
            })
            .collect(),
        precision_estimate: best.precision,
        precision_lower_bound: best.lower,
        coverage_estimate: best.coverage,
        samples_used,
        meets_target: found,
        seed: cfg.seed,
    })
}

/// Fraction of `n` fresh perturbations satisfying `rule` on which the
/// predictor still outputs `label`.
pub fn anchor_precision<I: Instance, P: Predictor<I::Input> + ?Sized>(
    predictor: &P,
    instance: &I,
    rule: &[usize],
    label: usize,
    n: usize,
    seed: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = instance.conditional(rule, n, &mut rng)?;
    Ok(agreement::<I, P>(predictor, &sample.inputs, label)? as f64 / n as f64)
}
