//! Sobel edge extraction and 3x3 morphology.

use super::{check_dims, BinaryImage, GrayImage, ImagingError};

/// Raw `|Gx| + |Gy|` of the 3x3 Sobel masks, zero on the border.
pub fn sobel_magnitude(frame: &GrayImage) -> Result<Vec<u32>, ImagingError> {
    let (w, h) = (frame.width, frame.height);
    if w < 3 || h < 3 {
        return Err(ImagingError::ImageTooSmall(w, h));
    }
    let src: Vec<i32> = frame.data.iter().map(|&v| v as i32).collect();
    Ok(sobel_i32(&src, w, h))
}

fn sobel_i32(src: &[i32], w: usize, h: usize) -> Vec<u32> {
    let mut out = vec![0u32; w * h];
    for y in 1..h - 1 {
        let up = &src[(y - 1) * w..y * w];
        let mid = &src[y * w..(y + 1) * w];
        let dn = &src[(y + 1) * w..(y + 2) * w];
        for x in 1..w - 1 {
            let gx = (up[x - 1] + 2 * mid[x - 1] + dn[x - 1]) - (up[x + 1] + 2 * mid[x + 1] + dn[x + 1]);
            let gy = (up[x - 1] + 2 * up[x] + up[x + 1]) - (dn[x - 1] + 2 * dn[x] + dn[x + 1]);
            out[y * w + x] = gx.unsigned_abs() + gy.unsigned_abs();
        }
    }
    out
}

/// 3x3 binomial smoothing scaled by 16 (no division), borders replicated.
pub fn gaussian3x3(frame: &GrayImage) -> Vec<i32> {
    let (w, h) = (frame.width, frame.height);
    let at = |x: isize, y: isize| {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        frame.data[yc * w + xc] as i32
    };
    let mut out = vec![0i32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let row = |yy: isize| at(x - 1, yy) + 2 * at(x, yy) + at(x + 1, yy);
            out[y as usize * w + x as usize] = row(y - 1) + 2 * row(y) + row(y + 1);
        }
    }
    out
}

/// Gaussian-smoothed Sobel magnitude thresholded at `threshold` (in
/// intensity units). Border pixels are never edges.
pub fn sobel_edges(frame: &GrayImage, threshold: f64) -> Result<BinaryImage, ImagingError> {
    let (w, h) = (frame.width, frame.height);
    if w < 3 || h < 3 {
        return Err(ImagingError::ImageTooSmall(w, h));
    }
    let smooth = gaussian3x3(frame);
    let mag = sobel_i32(&smooth, w, h);
    // smoothed values carry a factor of 16
    let limit = threshold * 16.0;
    let mut out = BinaryImage::new(w, h);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            out.data[i] = mag[i] as f64 >= limit;
        }
    }
    Ok(out)
}

/// 8-neighbourhood dilation, repeated.
pub fn dilate3x3(mask: &BinaryImage, iterations: usize) -> BinaryImage {
    let (w, h) = (mask.width, mask.height);
    let mut cur = mask.clone();
    for _ in 0..iterations {
        let mut next = BinaryImage::new(w, h);
        for y in 0..h {
            for x in 0..w {
                if !cur.data[y * w + x] {
                    continue;
                }
                for ny in y.saturating_sub(1)..(y + 2).min(h) {
                    for nx in x.saturating_sub(1)..(x + 2).min(w) {
                        next.data[ny * w + nx] = true;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Keeps only edges lying on the (one-step dilated) silhouette.
pub fn mask_edges(edges: &BinaryImage, silhouette: &BinaryImage) -> Result<BinaryImage, ImagingError> {
    check_dims((edges.width, edges.height), (silhouette.width, silhouette.height))?;
    let grown = dilate3x3(silhouette, 1);
    Ok(BinaryImage {
        width: edges.width,
        height: edges.height,
        data: edges.data.iter().zip(&grown.data).map(|(&e, &s)| e && s).collect(),
    })
}
