use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    /// `[out][in][kh][kw]`, row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    /// `[out][in]`, row-major.
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv2d(Conv2d),
    Relu,
    MaxPool2d { size: usize, stride: usize },
    Flatten,
    Dense(Dense),
    Softmax,
}

impl LayerKind {
    pub fn tag(&self) -> u8 {
        match self {
            LayerKind::Conv2d(_) => 1,
            LayerKind::Relu => 2,
            LayerKind::MaxPool2d { .. } => 3,
            LayerKind::Flatten => 4,
            LayerKind::Dense(_) => 5,
            LayerKind::Softmax => 6,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerKind::Conv2d(_) => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool2d { .. } => "maxpool2d",
            LayerKind::Flatten => "flatten",
            LayerKind::Dense(_) => "dense",
            LayerKind::Softmax => "softmax",
        }
    }
}

/// A named layer; names are unique within a [`Network`](super::Network).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

impl Layer {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Layer {
            name: name.into(),
            kind,
        }
    }

    pub fn conv2d(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        weight: Vec<f32>,
        bias: Vec<f32>,
    ) -> Self {
        Layer::new(
            name,
            LayerKind::Conv2d(Conv2d {
                in_channels,
                out_channels,
                kernel_h: kernel,
                kernel_w: kernel,
                stride,
                padding,
                weight,
                bias,
            }),
        )
    }

    pub fn dense(name: &str, in_features: usize, out_features: usize, weight: Vec<f32>, bias: Vec<f32>) -> Self {
        Layer::new(
            name,
            LayerKind::Dense(Dense {
                in_features,
                out_features,
                weight,
                bias,
            }),
        )
    }

    pub fn relu(name: &str) -> Self {
        Layer::new(name, LayerKind::Relu)
    }

    pub fn maxpool(name: &str, size: usize, stride: usize) -> Self {
        Layer::new(name, LayerKind::MaxPool2d { size, stride })
    }

    pub fn flatten(name: &str) -> Self {
        Layer::new(name, LayerKind::Flatten)
    }

    pub fn softmax(name: &str) -> Self {
        Layer::new(name, LayerKind::Softmax)
    }

    /// Output shape for a given input shape, validating weight dimensions.
    pub(crate) fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |msg: String| Error::InvalidNetwork(format!("layer '{}': {msg}", self.name));
        match &self.kind {
            LayerKind::Conv2d(c) => {
                let [ch, h, w] = spatial(input).ok_or_else(|| bad(format!("expects [C,H,W] input, got {input:?}")))?;
                if ch != c.in_channels {
                    return Err(bad(format!("expects {} input channels, got {ch}", c.in_channels)));
                }
                if c.stride == 0 || c.kernel_h == 0 || c.kernel_w == 0 || c.out_channels == 0 {
                    return Err(bad("zero-sized kernel, stride or channel count".into()));
                }
                if c.weight.len() != c.out_channels * c.in_channels * c.kernel_h * c.kernel_w {
                    return Err(bad(format!("weight length {} inconsistent with shape", c.weight.len())));
                }
                if c.bias.len() != c.out_channels {
                    return Err(bad(format!("bias length {} != {}", c.bias.len(), c.out_channels)));
                }
                if h + 2 * c.padding < c.kernel_h || w + 2 * c.padding < c.kernel_w {
                    return Err(bad("kernel larger than padded input".into()));
                }
                let oh = (h + 2 * c.padding - c.kernel_h) / c.stride + 1;
                let ow = (w + 2 * c.padding - c.kernel_w) / c.stride + 1;
                Ok(vec![c.out_channels, oh, ow])
            }
            LayerKind::MaxPool2d { size, stride } => {
                let [ch, h, w] = spatial(input).ok_or_else(|| bad(format!("expects [C,H,W] input, got {input:?}")))?;
                if *size == 0 || *stride == 0 || *size > h || *size > w {
                    return Err(bad(format!("invalid pool size {size}/stride {stride}")));
                }
                Ok(vec![ch, (h - size) / stride + 1, (w - size) / stride + 1])
            }
            LayerKind::Dense(d) => {
                if input.len() != 1 || input[0] != d.in_features {
                    return Err(bad(format!("expects [{}] input, got {input:?}", d.in_features)));
                }
                if d.weight.len() != d.in_features * d.out_features || d.bias.len() != d.out_features {
                    return Err(bad("weight or bias length inconsistent with shape".into()));
                }
                if d.out_features == 0 {
                    return Err(bad("zero output features".into()));
                }
                Ok(vec![d.out_features])
            }
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::Softmax => {
                if input.len() != 1 {
                    return Err(bad(format!("softmax expects a vector, got {input:?}")));
                }
                Ok(input.to_vec())
            }
        }
    }
}

fn spatial(shape: &[usize]) -> Option<[usize; 3]> {
    match shape {
        [c, h, w] => Some([*c, *h, *w]),
        _ => None,
    }
}
