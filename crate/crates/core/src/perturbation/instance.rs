//! Interpretable feature spaces for the three data modalities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sampling::{cosine_distance_to_ones, sample_masks};
use super::segment::SegmentMap;
use crate::error::{Error, Result};
use crate::models::Dataset;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image,
    Text,
    Tabular,
}

/// Perturbation neighbourhood for surrogate fitting. Row 0 is the original
/// instance.
#[derive(Debug, Clone)]
pub struct Neighbourhood<I> {
    pub inputs: Vec<I>,
    /// Surrogate design matrix, one row per input.
    pub design: Vec<Vec<f64>>,
    pub distances: Vec<f64>,
}

/// Conditional perturbation draw used by anchors.
#[derive(Debug, Clone)]
pub struct ConditionalSample<I> {
    pub inputs: Vec<I>,
    /// `holds[i][j]`: whether feature `j`'s predicate is satisfied in sample `i`.
    pub holds: Vec<Vec<bool>>,
}

/// An instance expressed through `d` interpretable features.
pub trait Instance: Sync {
    type Input: Clone + Send + Sync;

    fn modality(&self) -> Modality;

    fn num_features(&self) -> usize;

    fn feature_name(&self, feature: usize) -> String;

    /// Text of the anchor predicate on `feature`.
    fn predicate(&self, feature: usize) -> String;

    fn original(&self) -> Self::Input;

    /// Features with `z[j] == true` keep the instance's value, the others
    /// take their "absent" value.
    fn compose(&self, z: &[bool]) -> Self::Input;

    /// `n` rows, the first being the original instance.
    fn neighbourhood(&self, n: usize, seed: u64) -> Result<Neighbourhood<Self::Input>>;

    /// `n` perturbations with every feature in `pinned` held at the
    /// instance's value.
    fn conditional(&self, pinned: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Result<ConditionalSample<Self::Input>>;

    fn default_kernel_width(&self) -> f64;
}

fn mask_neighbourhood<T: Instance + ?Sized>(inst: &T, n: usize, seed: u64) -> Neighbourhood<T::Input> {
    let masks = sample_masks(inst.num_features(), n, seed, 0.5);
    Neighbourhood {
        inputs: masks.iter().map(|m| inst.compose(m)).collect(),
        distances: masks.iter().map(|m| cosine_distance_to_ones(m)).collect(),
        design: masks
            .iter()
            .map(|m| m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .collect(),
    }
}

fn mask_conditional<T: Instance + ?Sized>(
    inst: &T,
    pinned: &[usize],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> ConditionalSample<T::Input> {
    let d = inst.num_features();
    let holds: Vec<Vec<bool>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| {
                    let on = rng.random_bool(0.5);
                    on || pinned.contains(&j)
                })
                .collect()
        })
        .collect();
    ConditionalSample {
        inputs: holds.iter().map(|m| inst.compose(m)).collect(),
        holds,
    }
}

/// Default kernel width for mask (cosine-distance) modalities.
pub const MASK_KERNEL_WIDTH: f64 = 0.25;
/// Tabular kernel width is `sqrt(d) * TABULAR_KERNEL_SCALE`.
pub const TABULAR_KERNEL_SCALE: f64 = 0.75;

/// Image whose interpretable features are segments; an absent segment is
/// filled with the image's per-channel mean.
#[derive(Debug, Clone)]
pub struct ImageInstance {
    image: Tensor,
    segments: SegmentMap,
    fill: Vec<f32>,
}

impl ImageInstance {
    pub fn new(image: Tensor, segments: SegmentMap) -> Result<Self> {
        let &[c, h, w] = image.shape() else {
            return Err(Error::param("image must be [C,H,W]"));
        };
        if segments.height != h || segments.width != w {
            return Err(Error::SizeMismatch {
                map_h: segments.height,
                map_w: segments.width,
                image_h: h,
                image_w: w,
            });
        }
        let fill = (0..c)
            .map(|ch| {
                let plane = &image.data()[ch * h * w..(ch + 1) * h * w];
                (plane.iter().map(|&v| v as f64).sum::<f64>() / plane.len() as f64) as f32
            })
            .collect();
        Ok(ImageInstance { image, segments, fill })
    }

    pub fn segments(&self) -> &SegmentMap {
        &self.segments
    }

    pub fn image(&self) -> &Tensor {
        &self.image
    }
}

impl Instance for ImageInstance {
    type Input = Tensor;

    fn modality(&self) -> Modality {
        Modality::Image
    }

    fn num_features(&self) -> usize {
        self.segments.count
    }

    fn feature_name(&self, feature: usize) -> String {
        format!("segment_{feature}")
    }

    fn predicate(&self, feature: usize) -> String {
        format!("segment {feature} kept")
    }

    fn original(&self) -> Tensor {
        self.image.clone()
    }

    fn compose(&self, z: &[bool]) -> Tensor {
        let area = self.segments.labels.len();
        let data = self
            .image
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if z[self.segments.labels[i % area]] {
                    v
                } else {
                    self.fill[i / area]
                }
            })
            .collect();
        Tensor::from_parts(self.image.shape().to_vec(), data)
    }

    fn neighbourhood(&self, n: usize, seed: u64) -> Result<Neighbourhood<Tensor>> {
        Ok(mask_neighbourhood(self, n, seed))
    }

    fn conditional(&self, pinned: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Result<ConditionalSample<Tensor>> {
        Ok(mask_conditional(self, pinned, n, rng))
    }

    fn default_kernel_width(&self) -> f64 {
        MASK_KERNEL_WIDTH
    }
}

/// Text whose interpretable features are its distinct lowercase
/// whitespace tokens; an absent token is removed everywhere it occurs.
#[derive(Debug, Clone)]
pub struct TextInstance {
    text: String,
    /// Leading whitespace, then (token, trailing whitespace) pieces.
    lead: String,
    pieces: Vec<(String, String, usize)>,
    vocab: Vec<String>,
}

impl TextInstance {
    pub fn new(text: &str) -> Result<Self> {
        let lead_len = text.len() - text.trim_start().len();
        let lead = text[..lead_len].to_string();
        let mut vocab: Vec<String> = Vec::new();
        let mut pieces = Vec::new();
        let mut rest = &text[lead_len..];
        while !rest.is_empty() {
            let word_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let word = &rest[..word_end];
            let after = &rest[word_end..];
            let gap_len = after.len() - after.trim_start().len();
            let key = word.to_lowercase();
            let id = match vocab.iter().position(|v| *v == key) {
                Some(i) => i,
                None => {
                    vocab.push(key);
                    vocab.len() - 1
                }
            };
            pieces.push((word.to_string(), after[..gap_len].to_string(), id));
            rest = &after[gap_len..];
        }
        if vocab.is_empty() {
            return Err(Error::param("text has no tokens"));
        }
        Ok(TextInstance {
            text: text.to_string(),
            lead,
            pieces,
            vocab,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.vocab
    }
}

impl Instance for TextInstance {
    type Input = String;

    fn modality(&self) -> Modality {
        Modality::Text
    }

    fn num_features(&self) -> usize {
        self.vocab.len()
    }

    fn feature_name(&self, feature: usize) -> String {
        self.vocab[feature].clone()
    }

    fn predicate(&self, feature: usize) -> String {
        format!("token '{}' present", self.vocab[feature])
    }

    fn original(&self) -> String {
        self.text.clone()
    }

    fn compose(&self, z: &[bool]) -> String {
        let mut out = self.lead.clone();
        for (word, gap, id) in &self.pieces {
            if z[*id] {
                out.push_str(word);
                out.push_str(gap);
            }
        }
        out
    }

    fn neighbourhood(&self, n: usize, seed: u64) -> Result<Neighbourhood<String>> {
        Ok(mask_neighbourhood(self, n, seed))
    }

    fn conditional(&self, pinned: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Result<ConditionalSample<String>> {
        Ok(mask_conditional(self, pinned, n, rng))
    }

    fn default_kernel_width(&self) -> f64 {
        MASK_KERNEL_WIDTH
    }
}

/// Output of [`perturb_tabular`].
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPerturbation {
    pub rows: Vec<Vec<f32>>,
    /// 1 where the perturbed value stays in the instance's bin or category.
    pub binary: Vec<Vec<bool>>,
}

fn draw_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f32 {
    if hi > lo {
        rng.random_range(lo..=hi) as f32
    } else {
        lo as f32
    }
}

/// Draws `n` rows around `row`.
///
/// With `discretize`, continuous columns pick a quartile bin by its
/// empirical frequency and a value uniformly inside it; the binary feature
/// is "same bin as the instance". Without it, continuous columns get
/// N(0, column std) noise and their binary feature is fixed at 1.
/// Categorical columns are resampled from their empirical frequencies
/// either way, binary feature "equals the instance's category".
pub fn perturb_tabular(row: &[f32], dataset: &Dataset, n: usize, seed: u64, discretize: bool) -> Result<TabularPerturbation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    perturb_tabular_with(row, dataset, n, &mut rng, discretize, &[])
}

fn perturb_tabular_with(
    row: &[f32],
    dataset: &Dataset,
    n: usize,
    rng: &mut ChaCha8Rng,
    discretize: bool,
    pinned: &[usize],
) -> Result<TabularPerturbation> {
    if dataset.rows().is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = dataset.num_features();
    if row.len() != d {
        return Err(Error::ShapeMismatch {
            expected: vec![d],
            actual: vec![row.len()],
        });
    }
    let stats = dataset.stats();
    let instance_bins: Vec<usize> = (0..d)
        .map(|c| {
            if dataset.is_categorical(c) {
                row[c] as usize
            } else {
                dataset.bin_of(c, row[c] as f64)
            }
        })
        .collect();
    let normals: Vec<Option<Normal<f64>>> = stats
        .iter()
        .map(|s| if s.std > 0.0 { Normal::new(0.0, s.std).ok() } else { None })
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut binary = Vec::with_capacity(n);
    for _ in 0..n {
        let mut r = Vec::with_capacity(d);
        let mut b = Vec::with_capacity(d);
        for c in 0..d {
            let keep = pinned.contains(&c);
            if dataset.is_categorical(c) {
                let cat = if keep {
                    instance_bins[c]
                } else {
                    draw_index(rng, &stats[c].frequencies)
                };
                r.push(cat as f32);
                b.push(cat == instance_bins[c]);
            } else if discretize {
                let bin = if keep {
                    instance_bins[c]
                } else {
                    draw_index(rng, &stats[c].frequencies)
                };
                let (lo, hi) = dataset.bin_range(c, bin);
                r.push(uniform_in(rng, lo, hi));
                b.push(bin == instance_bins[c]);
            } else {
                let noise = match (&normals[c], keep) {
                    (Some(nd), false) => nd.sample(rng),
                    _ => 0.0,
                };
                r.push((row[c] as f64 + noise) as f32);
                b.push(true);
            }
        }
        rows.push(r);
        binary.push(b);
    }
    Ok(TabularPerturbation { rows, binary })
}

/// A dataset row explained through its columns.
#[derive(Debug, Clone)]
pub struct TabularInstance<'a> {
    row: Vec<f32>,
    dataset: &'a Dataset,
    discretize: bool,
    baseline: Vec<f32>,
}

impl<'a> TabularInstance<'a> {
    pub fn new(row: Vec<f32>, dataset: &'a Dataset, discretize: bool) -> Result<Self> {
        if row.len() != dataset.num_features() {
            return Err(Error::ShapeMismatch {
                expected: vec![dataset.num_features()],
                actual: vec![row.len()],
            });
        }
        // "Absent" value: column mean, or the most frequent category.
        let baseline = dataset
            .stats()
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if dataset.is_categorical(c) {
                    let mut best = 0;
                    for (k, &f) in s.frequencies.iter().enumerate() {
                        if f > s.frequencies[best] {
                            best = k;
                        }
                    }
                    best as f32
                } else {
                    s.mean as f32
                }
            })
            .collect();
        Ok(TabularInstance {
            row,
            dataset,
            discretize,
            baseline,
        })
    }

    pub fn with_baseline(mut self, baseline: Vec<f32>) -> Result<Self> {
        if baseline.len() != self.row.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.row.len()],
                actual: vec![baseline.len()],
            });
        }
        self.baseline = baseline;
        Ok(self)
    }

    pub fn row(&self) -> &[f32] {
        &self.row
    }

    pub fn discretize(&self) -> bool {
        self.discretize
    }

    fn standardized_distance(&self, r: &[f32]) -> f64 {
        let stats = self.dataset.stats();
        let mut acc = 0.0;
        for c in 0..r.len() {
            if self.dataset.is_categorical(c) {
                if r[c] != self.row[c] {
                    acc += 1.0;
                }
            } else if stats[c].std > 0.0 {
                acc += ((r[c] - self.row[c]) as f64 / stats[c].std).powi(2);
            }
        }
        acc.sqrt()
    }

    fn design_row(&self, r: &[f32], binary: &[bool]) -> Vec<f64> {
        let stats = self.dataset.stats();
        (0..r.len())
            .map(|c| {
                if self.discretize || self.dataset.is_categorical(c) {
                    if binary[c] {
                        1.0
                    } else {
                        0.0
                    }
                } else if stats[c].std > 0.0 {
                    (r[c] as f64 - stats[c].mean) / stats[c].std
                } else {
                    0.0
                }
            })
            .collect()
    }
}

impl Instance for TabularInstance<'_> {
    type Input = Vec<f32>;

    fn modality(&self) -> Modality {
        Modality::Tabular
    }

    fn num_features(&self) -> usize {
        self.row.len()
    }

    fn feature_name(&self, feature: usize) -> String {
        self.dataset.schema().feature_names[feature].clone()
    }

    fn predicate(&self, c: usize) -> String {
        let name = self.feature_name(c);
        if self.dataset.is_categorical(c) {
            format!("{name} = {}", self.dataset.describe_value(c, self.row[c]))
        } else {
            let bin = self.dataset.bin_of(c, self.row[c] as f64);
            let (lo, hi) = self.dataset.bin_range(c, bin);
            if bin == 0 {
                format!("{name} <= {hi}")
            } else if bin == 3 {
                format!("{name} > {lo}")
            } else {
                format!("{lo} < {name} <= {hi}")
            }
        }
    }

    fn original(&self) -> Vec<f32> {
        self.row.clone()
    }

    fn compose(&self, z: &[bool]) -> Vec<f32> {
        self.row
            .iter()
            .zip(&self.baseline)
            .zip(z)
            .map(|((&x, &b), &on)| if on { x } else { b })
            .collect()
    }

    fn neighbourhood(&self, n: usize, seed: u64) -> Result<Neighbourhood<Vec<f32>>> {
        let p = perturb_tabular(&self.row, self.dataset, n.saturating_sub(1), seed, self.discretize)?;
        let mut inputs = Vec::with_capacity(n);
        let mut design = Vec::with_capacity(n);
        let mut distances = Vec::with_capacity(n);
        inputs.push(self.row.clone());
        design.push(self.design_row(&self.row, &vec![true; self.row.len()]));
        distances.push(0.0);
        for (r, b) in p.rows.into_iter().zip(&p.binary) {
            design.push(self.design_row(&r, b));
            distances.push(self.standardized_distance(&r));
            inputs.push(r);
        }
        Ok(Neighbourhood {
            inputs,
            design,
            distances,
        })
    }

    /// Anchor predicates are always bin/category membership, whatever the
    /// `discretize` setting.
    fn conditional(&self, pinned: &[usize], n: usize, rng: &mut ChaCha8Rng) -> Result<ConditionalSample<Vec<f32>>> {
        let p = perturb_tabular_with(&self.row, self.dataset, n, rng, true, pinned)?;
        Ok(ConditionalSample {
            inputs: p.rows,
            holds: p.binary,
        })
    }

    fn default_kernel_width(&self) -> f64 {
        (self.row.len() as f64).sqrt() * TABULAR_KERNEL_SCALE
    }
}
