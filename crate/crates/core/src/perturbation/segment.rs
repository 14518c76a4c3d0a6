use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel segment labels forming the contiguous set `0..count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<usize>,
    pub count: usize,
}

impl SegmentMap {
    pub fn label(&self, y: usize, x: usize) -> usize {
        self.labels[y * self.width + x]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.count];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Splits an image into a `rows x cols` grid of near-equal rectangles,
/// labelled in row-major order.
pub fn grid_segment(height: usize, width: usize, rows: usize, cols: usize) -> Result<SegmentMap> {
    if rows == 0 || cols == 0 || rows * cols < 2 || rows > height || cols > width {
        return Err(Error::InvalidGrid {
            rows,
            cols,
            height,
            width,
        });
    }
    let mut labels = Vec::with_capacity(height * width);
    for y in 0..height {
        let r = y * rows / height;
        for x in 0..width {
            labels.push(r * cols + x * cols / width);
        }
    }
    Ok(SegmentMap {
        height,
        width,
        labels,
        count: rows * cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves() {
        let s = grid_segment(16, 16, 1, 2).unwrap();
        assert_eq!(s.count, 2);
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(s.label(y, x), usize::from(x >= 8));
            }
        }
    }

    #[test]
    fn one_segment_per_pixel() {
        let s = grid_segment(16, 16, 16, 16).unwrap();
        assert_eq!(s.count, 256);
        assert_eq!(s.labels, (0..256).collect::<Vec<_>>());
    }

    #[test]
    fn four_by_four_has_equal_cells() {
        assert_eq!(grid_segment(16, 16, 4, 4).unwrap().sizes(), vec![16; 16]);
    }

    #[test]
    fn uneven_grid_covers_every_label() {
        let s = grid_segment(10, 7, 3, 3).unwrap();
        assert!(s.sizes().iter().all(|&n| n > 0));
    }

    #[test]
    fn invalid_grids() {
        assert!(grid_segment(16, 16, 1, 1).is_err());
        assert!(grid_segment(16, 16, 17, 1).is_err());
        assert!(grid_segment(16, 16, 0, 4).is_err());
    }
}
