//! Distance-to-nearest-edge maps and their normalization to [0, 1].

use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImagingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    CityBlock,
    #[default]
    Chessboard,
    /// `max + (sqrt 2 - 1) min` of the coordinate offsets.
    Quasi,
}

impl Metric {
    pub fn between(self, dx: f64, dy: f64) -> f64 {
        let (ax, ay) = (dx.abs(), dy.abs());
        match self {
            Metric::Euclidean => (ax * ax + ay * ay).sqrt(),
            Metric::CityBlock => ax + ay,
            Metric::Chessboard => ax.max(ay),
            Metric::Quasi => {
                if ax > ay {
                    ax + (std::f64::consts::SQRT_2 - 1.0) * ay
                } else {
                    (std::f64::consts::SQRT_2 - 1.0) * ax + ay
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    /// Set when the edge image was empty; every value is then `+inf` until
    /// [`DistanceMap::saturate`] is applied.
    pub no_edges: bool,
}

impl DistanceMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn saturate(&mut self, d_sat: f64) {
        for v in &mut self.data {
            *v = v.min(d_sat);
        }
    }
}

/// Exact per-pixel distance to the nearest edge pixel.
pub fn distance_map(edges: &BinaryImage, metric: Metric) -> DistanceMap {
    let (w, h) = (edges.width, edges.height);
    if edges.is_empty() {
        return DistanceMap {
            width: w,
            height: h,
            data: vec![f64::INFINITY; w * h],
            no_edges: true,
        };
    }
    let data = match metric {
        Metric::Euclidean => euclidean(edges),
        Metric::CityBlock => chamfer(edges, 1.0, 2.0),
        Metric::Chessboard => chamfer(edges, 1.0, 1.0),
        Metric::Quasi => chamfer(edges, 1.0, std::f64::consts::SQRT_2),
    };
    DistanceMap {
        width: w,
        height: h,
        data,
        no_edges: false,
    }
}

/// Two-pass 3x3 chamfer with axial cost `a` and diagonal cost `b`.
fn chamfer(edges: &BinaryImage, a: f64, b: f64) -> Vec<f64> {
    let (w, h) = (edges.width, edges.height);
    let mut d: Vec<f64> = edges.data.iter().map(|&e| if e { 0.0 } else { f64::INFINITY }).collect();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut v = d[i];
            if x > 0 {
                v = v.min(d[i - 1] + a);
            }
            if y > 0 {
                v = v.min(d[i - w] + a);
                if x > 0 {
                    v = v.min(d[i - w - 1] + b);
                }
                if x + 1 < w {
                    v = v.min(d[i - w + 1] + b);
                }
            }
            d[i] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let i = y * w + x;
            let mut v = d[i];
            if x + 1 < w {
                v = v.min(d[i + 1] + a);
            }
            if y + 1 < h {
                v = v.min(d[i + w] + a);
                if x + 1 < w {
                    v = v.min(d[i + w + 1] + b);
                }
                if x > 0 {
                    v = v.min(d[i + w - 1] + b);
                }
            }
            d[i] = v;
        }
    }
    d
}

/// Exact Euclidean transform: separable lower envelope of parabolas on
/// integer squared distances.
fn euclidean(edges: &BinaryImage) -> Vec<f64> {
    let (w, h) = (edges.width, edges.height);
    const INF: i64 = i64::MAX / 4;
    // column pass: squared vertical distance to nearest edge in the column
    let mut g = vec![INF; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if edges.data[y * w + x] {
                last = Some(y);
            }
            if let Some(l) = last {
                let d = (y - l) as i64;
                g[y * w + x] = d * d;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if edges.data[y * w + x] {
                next = Some(y);
            }
            if let Some(n) = next {
                let d = (n - y) as i64;
                g[y * w + x] = g[y * w + x].min(d * d);
            }
        }
    }
    let mut out = vec![0.0; w * h];
    let mut v = vec![0usize; w];
    let mut z = vec![0f64; w + 1];
    for y in 0..h {
        let row = &g[y * w..(y + 1) * w];
        let f = |q: usize| row[q];
        let mut k = 0usize;
        let mut started = false;
        for q in 0..w {
            if f(q) >= INF {
                continue;
            }
            if !started {
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                started = true;
                continue;
            }
            let intersect = |p: usize| {
                ((f(q) + (q * q) as i64) - (f(p) + (p * p) as i64)) as f64 / (2.0 * (q as f64 - p as f64))
            };
            // z[0] is -inf, so k never drops below zero
            let mut s = intersect(v[k]);
            while s <= z[k] {
                k -= 1;
                s = intersect(v[k]);
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k2 = 0usize;
        for q in 0..w {
            while z[k2 + 1] < q as f64 {
                k2 += 1;
            }
            let p = v[k2];
            let dq = q as i64 - p as i64;
            out[y * w + q] = ((dq * dq + f(p)) as f64).sqrt();
        }
    }
    out
}

/// Maps raw distances to [0, 1]; 1 on edges, falling with distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    Impulse,
    Proportional { d_min: f64, d_max: f64, n_range: f64 },
    /// Decaying exponential between `d_min` and `d_max`.
    Exponential { d_min: f64, d_max: f64, n_range: f64, m: f64 },
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::Proportional {
            d_min: 0.0,
            d_max: 12.0,
            n_range: 1.0,
        }
    }
}

impl Normalization {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let bad = |m: &str| Err(ImagingError::BadParams(m.to_string()));
        match *self {
            Normalization::Impulse => Ok(()),
            Normalization::Proportional { d_min, d_max, n_range } => {
                if !(d_min < d_max) {
                    return bad("d_min must be < d_max");
                }
                if !(n_range > 0.0 && n_range <= 1.0) {
                    return bad("n_range must be in (0, 1]");
                }
                Ok(())
            }
            Normalization::Exponential { d_min, d_max, n_range, m } => {
                if !(d_min < d_max) {
                    return bad("d_min must be < d_max");
                }
                if !(n_range > 0.0 && n_range <= 1.0) {
                    return bad("n_range must be in (0, 1]");
                }
                if !(m > 0.0 && m < 1.0) {
                    return bad("m must be in (0, 1)");
                }
                Ok(())
            }
        }
    }

    /// Distance at which the normalized value reaches zero.
    pub fn saturation_distance(&self) -> f64 {
        match *self {
            Normalization::Impulse => 1.0,
            Normalization::Proportional { d_max, .. } | Normalization::Exponential { d_max, .. } => d_max,
        }
    }

    pub fn apply(&self, d: f64) -> f64 {
        match *self {
            Normalization::Impulse => {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Normalization::Proportional { d_min, d_max, n_range } => {
                if d <= d_min {
                    1.0
                } else if d >= d_max {
                    0.0
                } else {
                    1.0 - n_range * (d - d_min) / (d_max - d_min)
                }
            }
            Normalization::Exponential { d_min, d_max, n_range, m } => {
                if d <= d_min {
                    1.0
                } else if d >= d_max {
                    0.0
                } else {
                    n_range * (-d * m).exp() + (1.0 - n_range)
                }
            }
        }
    }
}

pub fn normalize_map(d: &DistanceMap, norm: Normalization) -> Result<Vec<f64>, ImagingError> {
    norm.validate()?;
    Ok(d.data.iter().map(|&v| norm.apply(v)).collect())
}
