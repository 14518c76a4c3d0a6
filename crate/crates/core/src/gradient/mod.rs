//! Gradient-based local explanations for image networks: class activation
//! maps (Grad-CAM, Grad-CAM++, Score-CAM) and input-gradient saliency
//! (vanilla, guided, SmoothGrad, integrated gradients).

mod backprop;
mod cam;

use serde::{Deserialize, Serialize};

pub use backprop::{guided_bp, integrated_gradients, smooth_grad, vanilla_bp, IgConfig, SmoothGradConfig};
pub use cam::{grad_cam, grad_cam_pp, score_cam, CamMethod, CamRequest};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// H x W attribution grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
    /// `false` for CAM maps, which are guaranteed nonnegative.
    pub signed: bool,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>, signed: bool) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width],
                actual: vec![values.len()],
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "saliency map".into(),
            });
        }
        if !signed && values.iter().any(|&v| v < 0.0) {
            return Err(Error::param("nonnegative saliency map has negative entries"));
        }
        Ok(SaliencyMap {
            height,
            width,
            values,
            signed,
        })
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    /// Share of total map mass inside the given rectangle; 0 for an empty map.
    pub fn mass_fraction(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        let total: f64 = self.values.iter().map(|&v| v.abs() as f64).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut inside = 0.0;
        for y in rows {
            for x in cols.clone() {
                inside += self.get(y, x).abs() as f64;
            }
        }
        inside / total
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    /// Min-max normalization to [0, 1]; constant maps become all zeros.
    pub fn normalized(&self) -> Vec<f32> {
        let lo = self.values.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = self.values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if !(hi > lo) {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
    }
}

/// Intermediate quantities exposed for debugging and reports.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GradientTrace {
    /// Per-channel weights of CAM methods (alpha_k, or Score-CAM's
    /// probability differences).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel_weights: Option<Vec<f32>>,
    /// Signed input gradient / attribution before channel collapse.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<Tensor>,
    /// Integrated-gradients attribution total after each path step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ig_partial_sums: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Saliency {
    pub target: usize,
    pub map: SaliencyMap,
    pub trace: GradientTrace,
}

/// Bilinear resize with corner-aligned sampling.
pub fn upsample_bilinear(src: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let coord = |i: usize, n_out: usize, n_in: usize| -> (usize, usize, f32) {
        if n_in == 1 || n_out == 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
        let i0 = (s.floor() as usize).min(n_in - 1);
        let i1 = (i0 + 1).min(n_in - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let (y0, y1, fy) = coord(oy, out_h, h);
        for ox in 0..out_w {
            let (x0, x1, fx) = coord(ox, out_w, w);
            let top = lerp(src[y0 * w + x0], src[y0 * w + x1], fx);
            let bottom = lerp(src[y1 * w + x0], src[y1 * w + x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    out
}

// a + (b - a) t is exact when a == b, so constant maps survive resizing.
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + (b - a) * t
}

/// Max over channels of |g|, collapsing `[C,H,W]` to `H x W`.
pub fn collapse_channels(t: &Tensor) -> Result<SaliencyMap> {
    let &[c, h, w] = t.shape() else {
        return Err(Error::param(format!("expected [C,H,W], got {:?}", t.shape())));
    };
    let d = t.data();
    let values = (0..h * w)
        .map(|p| (0..c).map(|ch| d[ch * h * w + p].abs()).fold(0.0f32, f32::max))
        .collect();
    SaliencyMap::new(h, w, values, true)
}

/// Every method name accepted by the gradient family.
pub const METHOD_NAMES: [&str; 7] = ["gradcam", "gradcampp", "scorecam", "vanilla", "guided", "smoothgrad", "ig"];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn upsample_keeps_corners() {
        let src = [1.0, 2.0, 3.0, 4.0];
        let up = upsample_bilinear(&src, 2, 2, 3, 3);
        assert_eq!(up, vec![1.0, 1.5, 2.0, 2.0, 2.5, 3.0, 3.0, 3.5, 4.0]);
    }

    #[test]
    fn collapse_takes_max_abs() {
        let t = Tensor::new(vec![2, 1, 2], vec![-3.0, 1.0, 2.0, -0.5]).unwrap();
        assert_eq!(collapse_channels(&t).unwrap().values, vec![3.0, 1.0]);
    }

    #[test]
    fn normalization_of_constant_map_is_zero() {
        let m = SaliencyMap::new(2, 2, vec![0.7; 4], false).unwrap();
        assert_eq!(m.normalized(), vec![0.0; 4]);
    }

    proptest! {
        #[test]
        fn upsample_preserves_constants(v in -5.0f32..5.0, h in 1usize..6, w in 1usize..6, oh in 1usize..20, ow in 1usize..20) {
            let up = upsample_bilinear(&vec![v; h * w], h, w, oh, ow);
            prop_assert!(up.iter().all(|&u| u == v));
        }

        #[test]
        fn upsample_stays_within_source_range(src in proptest::collection::vec(0.0f32..1.0, 12), oh in 2usize..20, ow in 2usize..20) {
            let up = upsample_bilinear(&src, 3, 4, oh, ow);
            let lo = src.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = src.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(up.iter().all(|&u| u >= lo - 1e-6 && u <= hi + 1e-6));
        }
    }
}
