use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Layer, Network};

pub const REFERENCE_INPUT: [usize; 3] = [1, 16, 16];
pub const REFERENCE_CLASSES: usize = 4;
pub const REFERENCE_LAYER_NAMES: [&str; 11] = [
    "conv1", "relu1", "pool1", "conv2", "relu2", "pool2", "flatten", "fc1", "relu3", "fc2", "softmax",
];

const CONV1_OUT: usize = 8;
const CONV2_OUT: usize = 24;
const POOLED: usize = 4;
const HIDDEN: usize = 32;
/// Hidden units of the planted variant that feed class 0.
const PLANTED_UNITS: usize = 4;

struct Draw(ChaCha8Rng);

impl Draw {
    fn uniform(&mut self, n: usize) -> Vec<f32> {
        (0..n).map(|_| self.0.random_range(-0.5f32..0.5)).collect()
    }
}

struct Params {
    conv1: (Vec<f32>, Vec<f32>),
    conv2: (Vec<f32>, Vec<f32>),
    fc1: (Vec<f32>, Vec<f32>),
    fc2: (Vec<f32>, Vec<f32>),
}

fn draw_params(seed: u64) -> Params {
    let mut d = Draw(ChaCha8Rng::seed_from_u64(seed));
    Params {
        conv1: (d.uniform(CONV1_OUT * 9), vec![0.0; CONV1_OUT]),
        conv2: (d.uniform(CONV2_OUT * CONV1_OUT * 9), vec![0.0; CONV2_OUT]),
        fc1: (d.uniform(HIDDEN * CONV2_OUT * POOLED * POOLED), vec![0.0; HIDDEN]),
        fc2: (d.uniform(REFERENCE_CLASSES * HIDDEN), d.uniform(REFERENCE_CLASSES)),
    }
}

fn assemble(p: Params) -> Network {
    let flat = CONV2_OUT * POOLED * POOLED;
    Network::new(
        REFERENCE_INPUT,
        vec![
            Layer::conv2d("conv1", 1, CONV1_OUT, 3, 1, 1, p.conv1.0, p.conv1.1),
            Layer::relu("relu1"),
            Layer::maxpool("pool1", 2, 2),
            Layer::conv2d("conv2", CONV1_OUT, CONV2_OUT, 3, 1, 1, p.conv2.0, p.conv2.1),
            Layer::relu("relu2"),
            Layer::maxpool("pool2", 2, 2),
            Layer::flatten("flatten"),
            Layer::dense("fc1", flat, HIDDEN, p.fc1.0, p.fc1.1),
            Layer::relu("relu3"),
            Layer::dense("fc2", HIDDEN, REFERENCE_CLASSES, p.fc2.0, p.fc2.1),
            Layer::softmax("softmax"),
        ],
    )
    .expect("reference architecture is consistent")
}

/// 1x16x16-input, 4-class CNN with weights drawn from a seeded
/// uniform(-0.5, 0.5) generator. Hidden-layer biases are zero; the fc2 bias
/// is drawn from the same generator, so an all-zero input yields exactly the
/// fc2 bias as logits.
///
/// conv1 (8ch 3x3 pad 1) -> relu1 -> pool1 (2x2) -> conv2 (24ch 3x3 pad 1)
/// -> relu2 -> pool2 (2x2) -> flatten (384) -> fc1 (32) -> relu3 -> fc2 (4) -> softmax
pub fn build_reference_cnn(seed: u64) -> Network {
    assemble(draw_params(seed))
}

/// Quadrant-planted variant: class 0 reads only the top-left input quadrant.
///
/// Hidden units `0..4` of fc1 see only the pool2 cell at (0, 0) of every
/// channel, whose receptive field is input rows and columns 0..=6. Row 0 of
/// fc2 is nonzero only on those units. All of these weights are
/// nonnegative, so the class-0 logit is a nondecreasing function of the
/// relu2 activations.
pub fn build_reference_cnn_planted(seed: u64) -> Network {
    let mut p = draw_params(seed);
    let flat = CONV2_OUT * POOLED * POOLED;
    let w1 = &mut p.fc1.0;
    for unit in 0..PLANTED_UNITS {
        let row = &mut w1[unit * flat..(unit + 1) * flat];
        for (j, w) in row.iter_mut().enumerate() {
            // flatten index = channel * 16 + y * 4 + x; keep (y, x) == (0, 0)
            *w = if j % (POOLED * POOLED) == 0 { 0.05 + w.abs() } else { 0.0 };
        }
    }
    let (w2, b2) = &mut p.fc2;
    for (j, w) in w2[..HIDDEN].iter_mut().enumerate() {
        *w = if j < PLANTED_UNITS { 0.25 + w.abs() } else { 0.0 };
    }
    for class in 1..REFERENCE_CLASSES {
        for w in &mut w2[class * HIDDEN..class * HIDDEN + PLANTED_UNITS] {
            *w = 0.0;
        }
    }
    b2[0] = 0.0;
    assemble(p)
}

/// `(row range, column range)` of the planted quadrant in input pixels.
pub fn planted_quadrant() -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    (0..REFERENCE_INPUT[1] / 2, 0..REFERENCE_INPUT[2] / 2)
}
