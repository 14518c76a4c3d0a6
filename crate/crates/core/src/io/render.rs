use serde::{Deserialize, Serialize};

use super::font::{glyph, ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH};
use super::pnm::{quantize, Raster};
use crate::error::{Error, Result};
use crate::gradient::SaliencyMap;
use crate::perturbation::{Explanation, FeatureWeight};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Colormap {
    #[default]
    Jet,
    Gray,
}

impl Colormap {
    pub fn color(self, t: f32) -> [f32; 3] {
        let t = t.clamp(0.0, 1.0);
        match self {
            Colormap::Gray => [t; 3],
            Colormap::Jet => {
                let ch = |c: f32| (1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0);
                [ch(3.0), ch(2.0), ch(1.0)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSpec {
    pub colormap: Colormap,
    pub alpha: f32,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec {
            colormap: Colormap::Jet,
            alpha: 0.5,
        }
    }
}

/// Min-max normalized map in the given colormap. Gray maps are
/// single-channel.
pub fn colorize(map: &SaliencyMap, colormap: Colormap) -> Raster {
    let norm = map.normalized();
    match colormap {
        Colormap::Gray => Raster {
            width: map.width,
            height: map.height,
            channels: 1,
            data: norm.iter().map(|&t| quantize(t)).collect(),
        },
        Colormap::Jet => Raster {
            width: map.width,
            height: map.height,
            channels: 3,
            data: norm.iter().flat_map(|&t| colormap.color(t).map(quantize)).collect(),
        },
    }
}

/// Returns the colormapped map and its alpha blend over `base`.
pub fn render_saliency(map: &SaliencyMap, base: &Tensor, spec: &RenderSpec) -> Result<(Raster, Raster)> {
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::param("overlay alpha must lie in [0, 1]"));
    }
    let &[c, h, w] = base.shape() else {
        return Err(Error::param(format!("expected a [C, H, W] image, got {:?}", base.shape())));
    };
    if c != 1 && c != 3 {
        return Err(Error::param(format!("base image must have 1 or 3 channels, got {c}")));
    }
    if map.height != h || map.width != w {
        return Err(Error::SizeMismatch {
            map_h: map.height,
            map_w: map.width,
            image_h: h,
            image_w: w,
        });
    }
    let norm = map.normalized();
    let a = spec.alpha;
    let mut data = Vec::with_capacity(h * w * 3);
    for (i, &t) in norm.iter().enumerate() {
        let color = spec.colormap.color(t);
        for (ch, &col) in color.iter().enumerate() {
            let b = base.data()[(if c == 1 { 0 } else { ch }) * h * w + i];
            data.push(quantize((1.0 - a) * b + a * col));
        }
    }
    let overlay = Raster {
        width: w,
        height: h,
        channels: 3,
        data,
    };
    Ok((colorize(map, spec.colormap), overlay))
}

pub const POSITIVE_COLOR: [u8; 3] = [0, 160, 0];
pub const NEGATIVE_COLOR: [u8; 3] = [200, 0, 0];
const BACKGROUND: [u8; 3] = [255, 255, 255];
const INK: [u8; 3] = [0, 0, 0];
const MARGIN: usize = 4;
const LABEL_CHARS: usize = 16;
pub(crate) const BAR_AREA: usize = 200;
const ROW: usize = GLYPH_HEIGHT + 4;

fn draw_text(r: &mut Raster, x0: usize, y0: usize, text: &str) {
    for (k, c) in text.chars().take(LABEL_CHARS).enumerate() {
        let rows = glyph(c);
        for (dy, bits) in rows.iter().enumerate() {
            for dx in 0..GLYPH_WIDTH {
                if bits >> (GLYPH_WIDTH - 1 - dx) & 1 == 1 {
                    r.set(x0 + k * ADVANCE + dx, y0 + dy, INK);
                }
            }
        }
    }
}

/// Horizontal bar chart of feature weights, longest bar first. Bar length
/// is |w| / max |w| of the bar area; positive bars are green, negative red.
pub fn render_bars(explanation: &Explanation) -> Raster {
    let mut bars: Vec<&FeatureWeight> = explanation.weights.iter().collect();
    bars.sort_by(|a, b| b.weight.abs().total_cmp(&a.weight.abs()).then(a.feature.cmp(&b.feature)));
    let label_w = LABEL_CHARS * ADVANCE;
    let width = MARGIN + label_w + MARGIN + BAR_AREA + MARGIN;
    let height = 2 * MARGIN + bars.len().max(1) * ROW;
    let mut r = Raster::filled(width, height, BACKGROUND);
    let max = bars.iter().map(|b| b.weight.abs()).fold(0.0, f64::max);
    let bar_x = MARGIN + label_w + MARGIN;
    for (k, b) in bars.iter().enumerate() {
        let y = MARGIN + k * ROW;
        draw_text(&mut r, MARGIN, y, &b.name);
        let len = if max > 0.0 {
            ((b.weight.abs() / max) * BAR_AREA as f64).round() as usize
        } else {
            0
        };
        let color = if b.weight < 0.0 { NEGATIVE_COLOR } else { POSITIVE_COLOR };
        for yy in y..y + GLYPH_HEIGHT {
            for xx in bar_x..bar_x + len {
                r.set(xx, yy, color);
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map() -> SaliencyMap {
        SaliencyMap::new(2, 2, vec![0.0, 1.0, 2.0, 4.0], false).unwrap()
    }

    fn base() -> Tensor {
        Tensor::new(vec![1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn alpha_extremes() {
        let spec = RenderSpec {
            colormap: Colormap::Jet,
            alpha: 0.0,
        };
        let (_, o) = render_saliency(&map(), &base(), &spec).unwrap();
        let b = Raster::from_tensor(&base()).unwrap();
        for i in 0..4 {
            assert!(o.data[i * 3..i * 3 + 3].iter().all(|&v| v == b.data[i]));
        }
        let spec = RenderSpec { alpha: 1.0, ..spec };
        let (m, o) = render_saliency(&map(), &base(), &spec).unwrap();
        assert_eq!(m, o);
    }

    #[test]
    fn size_mismatch_is_reported() {
        let big = Tensor::zeros(&[1, 3, 2]);
        assert!(matches!(
            render_saliency(&map(), &big, &RenderSpec::default()),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn constant_map_renders_zero_color() {
        let flat = SaliencyMap::new(2, 2, vec![3.0; 4], false).unwrap();
        let r = colorize(&flat, Colormap::Jet);
        let zero = Colormap::Jet.color(0.0).map(quantize);
        assert!(r.data.chunks(3).all(|p| p == zero));
    }

    #[test]
    fn jet_endpoints() {
        assert_eq!(Colormap::Jet.color(0.0), [0.0, 0.0, 0.5]);
        assert_eq!(Colormap::Jet.color(1.0), [0.5, 0.0, 0.0]);
    }

    fn explanation(weights: &[f64]) -> Explanation {
        Explanation {
            method: "lime".into(),
            label: 0,
            class_name: "a".into(),
            intercept: 0.0,
            weights: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| FeatureWeight {
                    feature: i,
                    name: format!("f{i}"),
                    weight: w,
                })
                .collect(),
            pairs: None,
            fit_quality: 0.0,
            n_samples: 0,
            seed: 0,
        }
    }

    fn colored(r: &Raster, color: [u8; 3]) -> usize {
        r.data.chunks(3).filter(|p| *p == color).count()
    }

    #[test]
    fn single_positive_weight_is_full_width_green() {
        let r = render_bars(&explanation(&[1.0]));
        assert_eq!(colored(&r, POSITIVE_COLOR), BAR_AREA * GLYPH_HEIGHT);
        assert_eq!(colored(&r, NEGATIVE_COLOR), 0);
    }

    #[test]
    fn zero_weights_draw_no_bars() {
        let r = render_bars(&explanation(&[0.0, 0.0]));
        assert_eq!(r.data.len(), r.width * r.height * 3);
        assert_eq!(colored(&r, POSITIVE_COLOR) + colored(&r, NEGATIVE_COLOR), 0);
    }

    #[test]
    fn negative_weights_are_red_and_scaled() {
        let r = render_bars(&explanation(&[0.5, -1.0]));
        assert_eq!(colored(&r, NEGATIVE_COLOR), BAR_AREA * GLYPH_HEIGHT);
        assert_eq!(colored(&r, POSITIVE_COLOR), BAR_AREA / 2 * GLYPH_HEIGHT);
    }
}
