use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImagingError};

pub const DEFAULT_MIN_BLOB_AREA: usize = 4;
const MAX_BLOBS: usize = 4;

/// Axis-aligned pixel rectangle, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl RoiRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self { x: 0, y: 0, w: width, h: height }
    }

    pub fn x_end(&self) -> usize {
        self.x + self.w
    }

    pub fn y_end(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x as i64 && y >= self.y as i64 && x < self.x_end() as i64 && y < self.y_end() as i64
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    /// Smallest rectangle covering both.
    pub fn union(&self, o: &RoiRect) -> RoiRect {
        let x = self.x.min(o.x);
        let y = self.y.min(o.y);
        RoiRect {
            x,
            y,
            w: self.x_end().max(o.x_end()) - x,
            h: self.y_end().max(o.y_end()) - y,
        }
    }

    pub fn clamp_to(&self, width: usize, height: usize) -> RoiRect {
        let x = self.x.min(width);
        let y = self.y.min(height);
        RoiRect {
            x,
            y,
            w: self.x_end().min(width) - x,
            h: self.y_end().min(height) - y,
        }
    }
}

/// Bounding box of the largest silhouette blobs grown by `margin_px`.
pub fn compute_roi(silhouette: &BinaryImage, margin_px: usize) -> Result<RoiRect, ImagingError> {
    compute_roi_with(silhouette, margin_px, DEFAULT_MIN_BLOB_AREA)
}

/// Like [`compute_roi`], ignoring 8-connected blobs smaller than `min_area`
/// and keeping at most the four largest.
pub fn compute_roi_with(silhouette: &BinaryImage, margin_px: usize, min_area: usize) -> Result<RoiRect, ImagingError> {
    let (w, h) = (silhouette.width, silhouette.height);
    let mut seen = vec![false; w * h];
    let mut blobs: Vec<(usize, RoiRect)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !silhouette.data[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..(y + 2).min(h) {
                for nx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = ny * w + nx;
                    if silhouette.data[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if area >= min_area {
            blobs.push((area, RoiRect { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 }));
        }
    }
    // largest first; scan order breaks ties
    blobs.sort_by(|a, b| b.0.cmp(&a.0));
    let mut boxes = blobs.into_iter().take(MAX_BLOBS).map(|(_, r)| r);
    let first = boxes.next().ok_or(ImagingError::EmptySilhouette)?;
    let bbox = boxes.fold(first, |acc, r| acc.union(&r));
    let x = bbox.x.saturating_sub(margin_px);
    let y = bbox.y.saturating_sub(margin_px);
    let grown = RoiRect {
        x,
        y,
        w: bbox.x_end() + margin_px - x,
        h: bbox.y_end() + margin_px - y,
    };
    Ok(grown.clamp_to(w, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(mask: &mut BinaryImage, x: usize, y: usize, w: usize, h: usize) {
        for yy in y..y + h {
            for xx in x..x + w {
                mask.set(xx, yy, true);
            }
        }
    }

    #[test]
    fn single_blob_with_margin() {
        let mut m = BinaryImage::new(20, 20);
        blob(&mut m, 5, 5, 2, 2);
        assert_eq!(compute_roi(&m, 1).unwrap(), RoiRect { x: 4, y: 4, w: 4, h: 4 });
    }

    #[test]
    fn empty_mask_errors() {
        let m = BinaryImage::new(20, 10);
        assert!(matches!(compute_roi(&m, 3), Err(ImagingError::EmptySilhouette)));
    }

    #[test]
    fn two_blobs_union() {
        let mut m = BinaryImage::new(30, 30);
        blob(&mut m, 2, 3, 3, 3);
        blob(&mut m, 20, 15, 4, 2);
        // boxes [2,5)x[3,6) and [20,24)x[15,17) enumerate to the union below
        assert_eq!(compute_roi(&m, 0).unwrap(), RoiRect { x: 2, y: 3, w: 22, h: 14 });
    }

    #[test]
    fn small_blobs_ignored_and_clamped() {
        let mut m = BinaryImage::new(10, 10);
        blob(&mut m, 0, 0, 3, 3);
        m.set(9, 9, true);
        let r = compute_roi(&m, 2).unwrap();
        assert_eq!(r, RoiRect { x: 0, y: 0, w: 5, h: 5 });
    }

    #[test]
    fn keeps_four_largest() {
        let mut m = BinaryImage::new(40, 10);
        for (i, size) in [2usize, 3, 4, 5, 6].iter().enumerate() {
            blob(&mut m, i * 8, 0, *size, *size);
        }
        // the 2x2 blob at x=0 is the fifth largest and drops out
        let r = compute_roi(&m, 0).unwrap();
        assert_eq!(r.x, 8);
        assert_eq!(r.x_end(), 38);
    }
}
