#![allow(dead_code)]

use std::path::{Path, PathBuf};

use percept::engine::{LayerKind, Network};
use percept::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden").join(name)
}

/// Compares `bytes` with a golden file. With `PERCEPT_BLESS=1` the golden
/// file is (re)written instead.
pub fn check_golden(name: &str, bytes: &[u8]) {
    let path = golden(name);
    if std::env::var("PERCEPT_BLESS").as_deref() == Ok("1") {
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert!(want == bytes, "{} differs from the golden file", name);
}

/// Uniform [0,1) content in rows/cols `< extent`, zero elsewhere.
pub fn corner_content(seed: u64, extent: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..256)
        .map(|i| {
            let (y, x) = (i / 16, i % 16);
            if y < extent && x < extent {
                rng.random::<f32>()
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(vec![1, 16, 16], data).unwrap()
}

pub fn uniform_image(seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(vec![1, 16, 16], (0..256).map(|_| rng.random::<f32>()).collect()).unwrap()
}

/// A fixture image plus small seeded noise, keeping the input off the
/// exact ties that a flat background produces.
pub fn nudged(image: &Tensor, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image.data().iter().map(|&v| v + rng.random_range(-0.02f32..0.02)).collect();
    Tensor::new(image.shape().to_vec(), data).unwrap()
}

/// Straight scalar-loop f64 forward pass, written independently of the
/// engine's kernels. Returns the logits (the output before softmax).
pub fn oracle_logits(net: &Network, input: &Tensor) -> Vec<f64> {
    let [mut c, mut h, mut w] = net.input_shape();
    let mut x: Vec<f64> = input.data().iter().map(|&v| v as f64).collect();
    for layer in net.layers() {
        match &layer.kind {
            LayerKind::Conv2d(conv) => {
                let (kh, kw, s, p) = (conv.kernel_h, conv.kernel_w, conv.stride, conv.padding);
                let oh = (h + 2 * p - kh) / s + 1;
                let ow = (w + 2 * p - kw) / s + 1;
                let mut y = vec![0.0; conv.out_channels * oh * ow];
                for o in 0..conv.out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = conv.bias[o] as f64;
                            for i in 0..c {
                                for ky in 0..kh {
                                    for kx in 0..kw {
                                        let iy = (oy * s + ky) as isize - p as isize;
                                        let ix = (ox * s + kx) as isize - p as isize;
                                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                            continue;
                                        }
                                        let wv = conv.weight[((o * c + i) * kh + ky) * kw + kx] as f64;
                                        acc += wv * x[(i * h + iy as usize) * w + ix as usize];
                                    }
                                }
                            }
                            y[(o * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                x = y;
                c = conv.out_channels;
                h = oh;
                w = ow;
            }
            LayerKind::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            LayerKind::MaxPool2d { size, stride } => {
                let oh = (h - size) / stride + 1;
                let ow = (w - size) / stride + 1;
                let mut y = vec![f64::NEG_INFINITY; c * oh * ow];
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ky in 0..*size {
                                for kx in 0..*size {
                                    let v = x[(ch * h + oy * stride + ky) * w + ox * stride + kx];
                                    let t = &mut y[(ch * oh + oy) * ow + ox];
                                    *t = t.max(v);
                                }
                            }
                        }
                    }
                }
                x = y;
                h = oh;
                w = ow;
            }
            LayerKind::Flatten => {
                c *= h * w;
                h = 1;
                w = 1;
            }
            LayerKind::Dense(d) => {
                x = (0..d.out_features)
                    .map(|o| {
                        d.bias[o] as f64
                            + (0..d.in_features).map(|i| d.weight[o * d.in_features + i] as f64 * x[i]).sum::<f64>()
                    })
                    .collect();
                c = d.out_features;
            }
            LayerKind::Softmax => {}
        }
    }
    x
}
