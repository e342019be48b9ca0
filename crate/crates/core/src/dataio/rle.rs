//! Column-major run-length codec for binary masks.
//!
//! Counts alternate starting with the number of zeros (COCO convention),
//! so external amodal datasets in that layout can be ingested unchanged.
//! Pixel (x, y) of an H x W mask sits at flat index `y + H * x`.

use crate::dataio::Mask;
use crate::error::{Error, Result};

/// Encode a binary mask into column-major zero-first run counts.
pub fn rle_encode(mask: &Mask) -> Vec<u32> {
    let (h, w) = mask.dim();
    let mut counts = Vec::new();
    let mut current: u8 = 0;
    let mut run: u32 = 0;
    for x in 0..w {
        for y in 0..h {
            let v = if mask[(y, x)] != 0 { 1 } else { 0 };
            if v == current {
                run += 1;
            } else {
                counts.push(run);
                current = v;
                run = 1;
            }
        }
    }
    counts.push(run);
    if counts.is_empty() {
        counts.push(0);
    }
    counts
}

/// Decode run counts back to an H x W mask. Counts must sum to `h * w`.
pub fn rle_decode(counts: &[u32], h: usize, w: usize) -> Result<Mask> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    if total != (h * w) as u64 {
        return Err(Error::MalformedRle(format!(
            "counts sum to {total}, expected {}",
            h * w
        )));
    }
    let mut mask = Mask::zeros((h, w));
    let mut idx = 0usize;
    let mut value: u8 = 0;
    for &c in counts {
        for _ in 0..c {
            let (x, y) = (idx / h, idx % h);
            mask[(y, x)] = value;
            idx += 1;
        }
        value = 1 - value;
    }
    Ok(mask)
}

/// Number of foreground pixels.
pub fn mask_area(mask: &Mask) -> usize {
    mask.iter().filter(|&&v| v != 0).count()
}

/// Tight bounding box (x0, y0, x1, y1) with exclusive upper bounds, or
/// `None` for an empty mask.
pub fn mask_tight_box(mask: &Mask) -> Option<(usize, usize, usize, usize)> {
    let (h, w) = mask.dim();
    let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0usize, 0usize);
    let mut any = false;
    for y in 0..h {
        for x in 0..w {
            if mask[(y, x)] != 0 {
                any = true;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    any.then_some((x0, y0, x1, y1))
}
