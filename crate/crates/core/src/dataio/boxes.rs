//! Boxes in (x0, y0, x1, y1) pixel coordinates with exclusive upper bounds.

use serde::{Deserialize, Serialize};

use crate::dataio::Mask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxXYXY {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoxXYXY {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BoxXYXY { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    pub fn iou(&self, other: &BoxXYXY) -> f64 {
        let ix0 = self.x0.max(other.x0);
        let iy0 = self.y0.max(other.y0);
        let ix1 = self.x1.min(other.x1);
        let iy1 = self.y1.min(other.y1);
        let inter = (ix1 - ix0).max(0.0) * (iy1 - iy0).max(0.0);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn clip(&self, w: f64, h: f64) -> BoxXYXY {
        BoxXYXY {
            x0: self.x0.clamp(0.0, w),
            y0: self.y0.clamp(0.0, h),
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
        }
    }

    /// Expand to a square about the center (side = max(w, h)); used to give
    /// mask crops a fixed aspect before resizing.
    pub fn pad_to_square(&self) -> BoxXYXY {
        let side = self.width().max(self.height());
        let (cx, cy) = self.center();
        BoxXYXY {
            x0: cx - side / 2.0,
            y0: cy - side / 2.0,
            x1: cx + side / 2.0,
            y1: cy + side / 2.0,
        }
    }
}

/// Centroid of foreground pixels using pixel-center coordinates
/// (x + 0.5, y + 0.5). Errors on an empty mask.
pub fn mask_centroid(mask: &Mask) -> Result<(f64, f64)> {
    let (h, w) = mask.dim();
    let mut sx = 0.0f64;
    let mut sy = 0.0f64;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if mask[(y, x)] != 0 {
                sx += x as f64 + 0.5;
                sy += y as f64 + 0.5;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask("mask_centroid on empty mask".into()));
    }
    Ok((sx / n as f64, sy / n as f64))
}

/// Shift `bbox` (width and height preserved) so its center sits at the
/// centroid of `visible_mask`, rounded to the nearest pixel. The result is
/// not clipped; downstream crops pad with zeros.
pub fn adjust_box_center(bbox: &BoxXYXY, visible_mask: &Mask) -> Result<BoxXYXY> {
    let (cx, cy) = mask_centroid(visible_mask)?;
    let (cx, cy) = (cx.round(), cy.round());
    let (w, h) = (bbox.width(), bbox.height());
    Ok(BoxXYXY {
        x0: cx - w / 2.0,
        y0: cy - h / 2.0,
        x1: cx + w / 2.0,
        y1: cy + h / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn left_half_mask() -> Mask {
        let mut m = Mask::zeros((8, 8));
        for y in 0..8 {
            for x in 0..4 {
                m[(y, x)] = 1;
            }
        }
        m
    }

    #[test]
    fn centered_box_unchanged() {
        // Mask centroid of the left half block: x in [0,4) centers 0.5..3.5 -> 2.0; y -> 4.0.
        let m = left_half_mask();
        let b = BoxXYXY::new(-1.0, 1.0, 5.0, 7.0); // center (2, 4) already
        let adj = adjust_box_center(&b, &m).unwrap();
        assert_eq!(adj, b);
    }

    #[test]
    fn center_moves_to_visible_centroid() {
        let m = left_half_mask();
        let b = BoxXYXY::new(2.0, 2.0, 8.0, 6.0);
        let adj = adjust_box_center(&b, &m).unwrap();
        assert_eq!(adj.center(), (2.0, 4.0));
        assert_eq!(adj.width(), b.width());
        assert_eq!(adj.height(), b.height());
    }

    #[test]
    fn idempotent_and_dimension_preserving() {
        let mut m = Mask::zeros((16, 16));
        m[(3, 11)] = 1;
        m[(4, 12)] = 1;
        m[(9, 2)] = 1;
        let b = BoxXYXY::new(0.0, 0.0, 7.0, 5.0);
        let once = adjust_box_center(&b, &m).unwrap();
        let twice = adjust_box_center(&once, &m).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.width(), b.width());
        assert_eq!(once.height(), b.height());
    }

    #[test]
    fn empty_mask_errors() {
        let m = Mask::zeros((4, 4));
        let b = BoxXYXY::new(0.0, 0.0, 2.0, 2.0);
        assert!(adjust_box_center(&b, &m).is_err());
    }
}
