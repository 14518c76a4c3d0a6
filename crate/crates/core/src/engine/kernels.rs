//! Per-layer forward and backward kernels. Forward kernels are generic so
//! the finite-difference oracle can rerun the same network in `f64`.

use std::ops::{Add, Mul, Sub};

use super::layer::{Conv2d, Dense, LayerKind};
use super::PropagationRule;

pub(crate) trait Real:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync
{
    const ZERO: Self;
    fn from_f32(v: f32) -> Self;
    fn is_finite(self) -> bool;
    fn exp(self) -> Self;
    fn div(self, other: Self) -> Self;
}

impl Real for f32 {
    const ZERO: Self = 0.0;
    fn from_f32(v: f32) -> Self {
        v
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn div(self, other: Self) -> Self {
        self / other
    }
}

impl Real for f64 {
    const ZERO: Self = 0.0;
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn div(self, other: Self) -> Self {
        self / other
    }
}

pub(crate) fn forward<T: Real>(kind: &LayerKind, in_shape: &[usize], out_shape: &[usize], x: &[T]) -> Vec<T> {
    match kind {
        LayerKind::Conv2d(c) => conv_forward(c, in_shape, out_shape, x),
        LayerKind::Relu => x.iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect(),
        LayerKind::MaxPool2d { size, stride } => {
            let arg = pool_argmax(*size, *stride, in_shape, out_shape, x);
            arg.into_iter().map(|i| x[i]).collect()
        }
        LayerKind::Flatten => x.to_vec(),
        LayerKind::Dense(d) => dense_forward(d, x),
        LayerKind::Softmax => softmax(x),
    }
}

pub(crate) fn softmax<T: Real>(x: &[T]) -> Vec<T> {
    let mut max = x[0];
    for &v in x {
        if v > max {
            max = v;
        }
    }
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let mut total = T::ZERO;
    for &e in &exps {
        total = total + e;
    }
    exps.into_iter().map(|e| e.div(total)).collect()
}

fn conv_forward<T: Real>(c: &Conv2d, in_shape: &[usize], out_shape: &[usize], x: &[T]) -> Vec<T> {
    let (h, w) = (in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let (kh, kw) = (c.kernel_h, c.kernel_w);
    let mut out = vec![T::ZERO; c.out_channels * oh * ow];
    for o in 0..c.out_channels {
        let bias = T::from_f32(c.bias[o]);
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias;
                for ci in 0..c.in_channels {
                    for ky in 0..kh {
                        let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let wv = c.weight[((o * c.in_channels + ci) * kh + ky) * kw + kx];
                            acc = acc + T::from_f32(wv) * x[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    out
}

fn conv_backward(c: &Conv2d, in_shape: &[usize], out_shape: &[usize], g: &[f32]) -> Vec<f32> {
    let (h, w) = (in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let (kh, kw) = (c.kernel_h, c.kernel_w);
    let mut gin = vec![0.0f32; c.in_channels * h * w];
    for o in 0..c.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let go = g[(o * oh + oy) * ow + ox];
                if go == 0.0 {
                    continue;
                }
                for ci in 0..c.in_channels {
                    for ky in 0..kh {
                        let iy = (oy * c.stride + ky) as isize - c.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * c.stride + kx) as isize - c.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let wv = c.weight[((o * c.in_channels + ci) * kh + ky) * kw + kx];
                            gin[(ci * h + iy as usize) * w + ix as usize] += wv * go;
                        }
                    }
                }
            }
        }
    }
    gin
}

fn dense_forward<T: Real>(d: &Dense, x: &[T]) -> Vec<T> {
    (0..d.out_features)
        .map(|o| {
            let row = &d.weight[o * d.in_features..(o + 1) * d.in_features];
            let mut acc = T::from_f32(d.bias[o]);
            for (&wv, &xv) in row.iter().zip(x) {
                acc = acc + T::from_f32(wv) * xv;
            }
            acc
        })
        .collect()
}

fn dense_backward(d: &Dense, g: &[f32]) -> Vec<f32> {
    let mut gin = vec![0.0f32; d.in_features];
    for (o, &go) in g.iter().enumerate() {
        let row = &d.weight[o * d.in_features..(o + 1) * d.in_features];
        for (gi, &wv) in gin.iter_mut().zip(row) {
            *gi += wv * go;
        }
    }
    gin
}

/// Flat input index of each pooling window's first maximal element.
pub(crate) fn pool_argmax<T: Real>(
    size: usize,
    stride: usize,
    in_shape: &[usize],
    out_shape: &[usize],
    x: &[T],
) -> Vec<usize> {
    let (ch, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let mut idx = Vec::with_capacity(ch * oh * ow);
    for c in 0..ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (c * h + oy * stride) * w + ox * stride;
                for ky in 0..size {
                    for kx in 0..size {
                        let i = (c * h + oy * stride + ky) * w + ox * stride + kx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                idx.push(best);
            }
        }
    }
    idx
}

/// Gradient with respect to the layer input given the gradient `g` with
/// respect to its output. `x` and `y` are the forward input and output.
pub(crate) fn backward(
    kind: &LayerKind,
    in_shape: &[usize],
    out_shape: &[usize],
    x: &[f32],
    y: &[f32],
    g: &[f32],
    rule: PropagationRule,
) -> Vec<f32> {
    match kind {
        LayerKind::Conv2d(c) => conv_backward(c, in_shape, out_shape, g),
        LayerKind::Relu => x
            .iter()
            .zip(g)
            .map(|(&xv, &gv)| match rule {
                PropagationRule::Standard if xv > 0.0 => gv,
                PropagationRule::Guided if xv > 0.0 && gv > 0.0 => gv,
                _ => 0.0,
            })
            .collect(),
        LayerKind::MaxPool2d { size, stride } => {
            let mut gin = vec![0.0f32; x.len()];
            for (i, &src) in pool_argmax(*size, *stride, in_shape, out_shape, x).iter().enumerate() {
                gin[src] += g[i];
            }
            gin
        }
        LayerKind::Flatten => g.to_vec(),
        LayerKind::Dense(d) => dense_backward(d, g),
        LayerKind::Softmax => softmax_backward(y, g),
    }
}

/// Vector-Jacobian product through softmax with output `p`.
pub(crate) fn softmax_backward(p: &[f32], g: &[f32]) -> Vec<f32> {
    let dot: f32 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}
