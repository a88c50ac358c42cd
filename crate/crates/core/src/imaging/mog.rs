//! Per-pixel adaptive mixture-of-Gaussians background model (grayscale).

use super::{check_dims, BinaryImage, GrayImage, ImagingError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MogParams {
    /// Components per pixel.
    pub k: usize,
    /// Learning rate.
    pub alpha: f64,
    /// Match when `|x - mu| <= match_sigmas * sigma`.
    pub match_sigmas: f64,
    /// Cumulative weight of the background prefix.
    pub background_fraction: f64,
    pub sigma_init: f64,
    pub weight_init: f64,
    pub variance_min: f64,
}

impl Default for MogParams {
    fn default() -> Self {
        Self {
            k: 3,
            alpha: 0.01,
            match_sigmas: 2.5,
            background_fraction: 0.7,
            sigma_init: 30.0,
            weight_init: 0.05,
            variance_min: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Component {
    weight: f64,
    mean: f64,
    variance: f64,
}

#[derive(Debug, Clone)]
pub struct MogModel {
    width: usize,
    height: usize,
    params: MogParams,
    components: Vec<Component>,
}

/// `w' = (1 - alpha) w + alpha M`.
pub fn update_weight(weight: f64, alpha: f64, matched: bool) -> f64 {
    (1.0 - alpha) * weight + alpha * if matched { 1.0 } else { 0.0 }
}

/// Matched-component update with learning factor `rho`; returns
/// `(mean, variance)`. The variance uses the squared deviation from the
/// updated mean.
pub fn update_mean_variance(mean: f64, variance: f64, x: f64, rho: f64) -> (f64, f64) {
    let m = (1.0 - rho) * mean + rho * x;
    let d = x - m;
    (m, (1.0 - rho) * variance + rho * d * d)
}

/// 1-D normal density.
pub fn gaussian_density(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (std::f64::consts::TAU * variance).sqrt()
}

impl MogModel {
    pub fn new(width: usize, height: usize, params: MogParams) -> Result<Self, ImagingError> {
        if params.k == 0 {
            return Err(ImagingError::BadParams("k must be >= 1".into()));
        }
        if !(params.alpha > 0.0 && params.alpha <= 1.0) {
            return Err(ImagingError::BadParams("alpha must be in (0, 1]".into()));
        }
        if !(params.background_fraction > 0.0 && params.background_fraction <= 1.0) {
            return Err(ImagingError::BadParams("background fraction must be in (0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            params,
            components: vec![Component::default(); width * height * params.k],
        })
    }

    pub fn params(&self) -> &MogParams {
        &self.params
    }

    /// Component weights of one pixel.
    pub fn weights(&self, x: usize, y: usize) -> Vec<f64> {
        let k = self.params.k;
        let base = (y * self.width + x) * k;
        self.components[base..base + k].iter().map(|c| c.weight).collect()
    }

    /// Classifies `frame` and folds it into the model. Returns the
    /// foreground mask.
    pub fn apply(&mut self, frame: &GrayImage) -> Result<BinaryImage, ImagingError> {
        check_dims((self.width, self.height), (frame.width, frame.height))?;
        let k = self.params.k;
        let p = self.params;
        let mut mask = BinaryImage::new(self.width, self.height);
        let mut order: Vec<usize> = Vec::with_capacity(k);
        for (i, &px) in frame.data.iter().enumerate() {
            let comps = &mut self.components[i * k..(i + 1) * k];
            let x = px as f64;

            let matched = comps.iter().position(|c| {
                c.weight > 0.0 && (x - c.mean).abs() <= p.match_sigmas * c.variance.sqrt()
            });
            let owner = match matched {
                Some(m) => {
                    for (j, c) in comps.iter_mut().enumerate() {
                        c.weight = update_weight(c.weight, p.alpha, j == m);
                    }
                    let c = &mut comps[m];
                    let rho = (p.alpha * gaussian_density(x, c.mean, c.variance)).min(1.0);
                    let (mean, var) = update_mean_variance(c.mean, c.variance, x, rho);
                    c.mean = mean;
                    c.variance = var.max(p.variance_min);
                    m
                }
                None => {
                    let weakest = comps
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
                        .map(|(j, _)| j)
                        .unwrap_or(0);
                    for c in comps.iter_mut() {
                        c.weight = update_weight(c.weight, p.alpha, false);
                    }
                    comps[weakest] = Component {
                        weight: p.weight_init,
                        mean: x,
                        variance: (p.sigma_init * p.sigma_init).max(p.variance_min),
                    };
                    weakest
                }
            };
            let total: f64 = comps.iter().map(|c| c.weight).sum();
            for c in comps.iter_mut() {
                c.weight /= total;
            }

            // background = shortest prefix by w/sigma reaching the fraction
            order.clear();
            order.extend(0..k);
            order.sort_by(|&a, &b| {
                let ka = comps[a].weight / comps[a].variance.sqrt().max(1e-12);
                let kb = comps[b].weight / comps[b].variance.sqrt().max(1e-12);
                kb.total_cmp(&ka).then(a.cmp(&b))
            });
            let mut cumulative = 0.0;
            let mut background = false;
            for &j in &order {
                if comps[j].weight <= 0.0 {
                    break;
                }
                if j == owner {
                    background = true;
                    break;
                }
                cumulative += comps[j].weight;
                if cumulative >= p.background_fraction {
                    break;
                }
            }
            mask.data[i] = !background;
        }
        Ok(mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_rules() {
        assert!((update_weight(0.4, 0.5, true) - 0.7).abs() < 1e-15);
        assert!((update_weight(0.4, 0.5, false) - 0.2).abs() < 1e-15);
        let (m, _) = update_mean_variance(10.0, 9.0, 20.0, 0.5);
        assert_eq!(m, 15.0);
    }

    #[test]
    fn constant_scene_becomes_background() {
        let frame = GrayImage::from_fn(12, 9, |x, y| (x * 13 + y * 7) as u8);
        let mut mog = MogModel::new(12, 9, MogParams::default()).unwrap();
        let mut mask = BinaryImage::new(12, 9);
        for _ in 0..10 {
            mask = mog.apply(&frame).unwrap();
        }
        assert!(mask.is_empty());
    }

    #[test]
    fn new_object_is_foreground_and_weights_stay_normalized() {
        let bg = GrayImage::filled(16, 16, 40);
        let mut mog = MogModel::new(16, 16, MogParams::default()).unwrap();
        for _ in 0..30 {
            mog.apply(&bg).unwrap();
        }
        let mut fg = bg.clone();
        for y in 4..8 {
            for x in 4..10 {
                fg.set(x, y, 220);
            }
        }
        let mask = mog.apply(&fg).unwrap();
        assert_eq!(mask.count(), 24);
        assert!(mask.get(5, 5) && !mask.get(0, 0));
        for y in 0..16 {
            for x in 0..16 {
                let s: f64 = mog.weights(x, y).iter().sum();
                assert!((s - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mut mog = MogModel::new(4, 4, MogParams::default()).unwrap();
        assert!(matches!(
            mog.apply(&GrayImage::new(5, 4)),
            Err(ImagingError::DimensionMismatch(..))
        ));
    }
}
