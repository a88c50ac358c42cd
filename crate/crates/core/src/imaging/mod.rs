//! Feature extraction: background subtraction, edges, distance maps, ROI and
//! the packed reference-image encoding.

mod distance;
mod edges;
mod mog;
pub mod pgm;
mod roi;

pub use distance::{distance_map, normalize_map, DistanceMap, Metric, Normalization};
pub use edges::{dilate3x3, gaussian3x3, mask_edges, sobel_edges, sobel_magnitude};
pub use mog::{gaussian_density, update_mean_variance, update_weight, MogModel, MogParams};
pub use roi::{compute_roi, compute_roi_with, RoiRect, DEFAULT_MIN_BLOB_AREA};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image must be at least 3x3, got {0}x{1}")]
    ImageTooSmall(usize, usize),
    #[error("no edge pixels in the edge image")]
    NoEdges,
    #[error("silhouette is empty")]
    EmptySilhouette,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("pgm: {0}")]
    Pgm(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// 0/255 grayscale rendering, for debugging dumps.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

pub(crate) fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), ImagingError> {
    if a != b {
        return Err(ImagingError::DimensionMismatch(a.0, a.1, b.0, b.1));
    }
    Ok(())
}

/// Round half up, for nonnegative inputs.
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

pub const SILHOUETTE_FLAG: u8 = 0x80;
pub const VALUE_MASK: u8 = 0x7f;

/// Per-camera observation image: quantized normalized edge distance in bits
/// 0-6, silhouette flag in bit 7.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl ReferenceImage {
    pub fn silhouette(&self, idx: usize) -> bool {
        self.data[idx] & SILHOUETTE_FLAG != 0
    }

    pub fn quantized(&self, idx: usize) -> u8 {
        self.data[idx] & VALUE_MASK
    }

    /// Normalized distance value recovered from the 7-bit code.
    pub fn decoded(&self, idx: usize) -> f64 {
        self.quantized(idx) as f64 / 127.0
    }

    pub fn silhouette_mask(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| b & SILHOUETTE_FLAG != 0).collect(),
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.clone(),
        }
    }
}

/// Quantize a normalized map to 7 bits and pack it with the silhouette flag.
pub fn encode_reference(silhouette: &BinaryImage, nmap: &[f64]) -> Result<ReferenceImage, ImagingError> {
    if nmap.len() != silhouette.data.len() {
        return Err(ImagingError::DimensionMismatch(
            silhouette.width,
            silhouette.height,
            nmap.len(),
            1,
        ));
    }
    let data = silhouette
        .data
        .iter()
        .zip(nmap)
        .map(|(&s, &n)| {
            let q = round_half_up(127.0 * n.clamp(0.0, 1.0)) as u8;
            q | if s { SILHOUETTE_FLAG } else { 0 }
        })
        .collect();
    Ok(ReferenceImage {
        width: silhouette.width,
        height: silhouette.height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        let sil = BinaryImage { width: 3, height: 1, data: vec![true, false, true] };
        let r = encode_reference(&sil, &[1.0, 0.0, 0.5]).unwrap();
        assert_eq!(r.data, vec![0xFF, 0x00, 0xC0]);
        assert!(r.silhouette(0) && !r.silhouette(1));
        assert_eq!(r.quantized(2), 64);
        assert!(encode_reference(&sil, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_within_half_step(n in 0.0f64..=1.0, s: bool) {
            let sil = BinaryImage { width: 1, height: 1, data: vec![s] };
            let r = encode_reference(&sil, &[n]).unwrap();
            prop_assert!((r.decoded(0) - n).abs() <= 1.0 / 254.0 + 1e-15);
            prop_assert_eq!(r.silhouette(0), s);
        }
    }
}
