//! Fitness components and the objective functions comparing rendered
//! hypotheses with the per-camera reference images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::TsaiCamera;
use crate::imaging::{check_dims, ImagingError, ReferenceImage, RoiRect};
use crate::render::{project_parts, render_parts, Accumulator, CameraView, EncodedImage, EDGE_FLAG, LABEL_MASK};
use crate::skeleton::{PoseState, SkeletonModel};

/// Environment variable overriding the evaluation worker count.
pub const WORKERS_ENV: &str = "MOCAPLAB_WORKERS";

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("bad objective config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("expected {expected} cameras, got {got}")]
    CameraCount { expected: usize, got: usize },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Pixel counts of one (hypothesis, camera) pair over the ROI.
///
/// `distance_q` sums the raw 7-bit distance codes under model edges, so the
/// fused and two-pass paths agree exactly; [`FitnessComponents::distance_sum`]
/// gives the decoded value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitnessComponents {
    pub area_ref: u64,
    pub area_model: u64,
    pub overlap: u64,
    pub edge_count: u64,
    pub distance_q: u64,
}

impl FitnessComponents {
    /// Components with only the reference area filled in.
    pub fn for_reference(reference: &ReferenceImage, roi: &RoiRect) -> Self {
        Self {
            area_ref: reference_area(reference, roi),
            ..Self::default()
        }
    }

    pub fn distance_sum(&self) -> f64 {
        self.distance_q as f64 / 127.0
    }

    #[inline]
    pub fn add_model_pixel(&mut self, reference: &ReferenceImage, idx: usize) {
        self.area_model += 1;
        self.overlap += reference.silhouette(idx) as u64;
    }

    /// Bulk form of [`Self::add_model_pixel`].
    pub fn add_model_pixels(&mut self, area: u64, overlap: u64) {
        self.area_model += area;
        self.overlap += overlap;
    }

    #[inline]
    pub fn add_edge_pixel(&mut self, reference: &ReferenceImage, idx: usize) {
        self.edge_count += 1;
        self.distance_q += reference.quantized(idx) as u64;
    }

    pub fn pooled(all: &[FitnessComponents]) -> FitnessComponents {
        all.iter().fold(FitnessComponents::default(), |a, c| FitnessComponents {
            area_ref: a.area_ref + c.area_ref,
            area_model: a.area_model + c.area_model,
            overlap: a.overlap + c.overlap,
            edge_count: a.edge_count + c.edge_count,
            distance_q: a.distance_q + c.distance_q,
        })
    }
}

/// Silhouette pixel count of the reference inside the ROI.
pub fn reference_area(reference: &ReferenceImage, roi: &RoiRect) -> u64 {
    let r = roi.clamp_to(reference.width, reference.height);
    let mut n = 0;
    for y in r.y..r.y_end() {
        for x in r.x..r.x_end() {
            n += reference.silhouette(y * reference.width + x) as u64;
        }
    }
    n
}

/// Two-pass component computation from a finished model image.
pub fn components(model: &EncodedImage, reference: &ReferenceImage, roi: &RoiRect) -> Result<FitnessComponents, ImagingError> {
    check_dims((model.width, model.height), (reference.width, reference.height))?;
    let r = roi.clamp_to(model.width, model.height);
    let mut c = FitnessComponents::default();
    for y in r.y..r.y_end() {
        for x in r.x..r.x_end() {
            let i = y * model.width + x;
            c.area_ref += reference.silhouette(i) as u64;
            let m = model.data[i];
            if m & LABEL_MASK != 0 {
                c.add_model_pixel(reference, i);
                if m & EDGE_FLAG != 0 {
                    c.add_edge_pixel(reference, i);
                }
            }
        }
    }
    Ok(c)
}

/// Components bucketed by part label (index = label, 0 unused).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledComponents {
    pub per_label: Vec<FitnessComponents>,
}

/// Labeled components against a segmented reference, where `ref_labels`
/// carries the observed part label of every pixel. A pixel overlaps only
/// when model and reference labels are equal.
pub fn labeled_components(
    model: &EncodedImage,
    ref_labels: &EncodedImage,
    reference: &ReferenceImage,
    roi: &RoiRect,
) -> Result<LabeledComponents, ImagingError> {
    check_dims((model.width, model.height), (reference.width, reference.height))?;
    check_dims((model.width, model.height), (ref_labels.width, ref_labels.height))?;
    let mut per_label = vec![FitnessComponents::default(); 128];
    let r = roi.clamp_to(model.width, model.height);
    for y in r.y..r.y_end() {
        for x in r.x..r.x_end() {
            let i = y * model.width + x;
            let s = (ref_labels.data[i] & LABEL_MASK) as usize;
            if s != 0 {
                per_label[s].area_ref += 1;
            }
            let m = (model.data[i] & LABEL_MASK) as usize;
            if m == 0 {
                continue;
            }
            let c = &mut per_label[m];
            c.area_model += 1;
            c.overlap += (m == s) as u64;
            if model.data[i] & EDGE_FLAG != 0 {
                c.add_edge_pixel(reference, i);
            }
        }
    }
    Ok(LabeledComponents { per_label })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Silhouette fit of one set of components.
pub fn f1(c: &FitnessComponents, beta: f64) -> f64 {
    let o = c.overlap as f64;
    beta * ratio(o, c.area_ref as f64) + (1.0 - beta) * ratio(o, c.area_model as f64)
}

/// Edge fit: mean decoded distance value under the model edges.
pub fn f2(c: &FitnessComponents) -> f64 {
    ratio(c.distance_sum(), c.edge_count as f64)
}

/// Label-weighted silhouette fit; `weights[l - 1]` belongs to label `l`.
pub fn f1_labeled(lc: &LabeledComponents, weights: &[f64], beta: f64) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * lc.per_label.get(i + 1).map_or(0.0, |c| f1(c, beta)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Weighted sum of pooled fits.
    #[serde(rename = "WS")]
    Ws,
    /// Product of pooled fits raised to the smoothing exponents.
    #[default]
    #[serde(rename = "SP")]
    Sp,
    /// Per-camera weighted sums, averaged.
    #[serde(rename = "AoWS")]
    AoWs,
    /// Per-camera smoothed products, averaged.
    #[serde(rename = "AoSP")]
    AoSp,
    /// Product over cameras of the smoothed products.
    #[serde(rename = "PoSP")]
    PoSp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveConfig {
    pub variant: Variant,
    pub beta: f64,
    pub w1: f64,
    pub w2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Sp,
            beta: 0.5,
            w1: 0.5,
            w2: 0.5,
            omega1: 0.7,
            omega2: 0.3,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: String| Err(ObjectiveError::BadConfig(m));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(0.0..=1.0).contains(&self.w1) || !(0.0..=1.0).contains(&self.w2) || (self.w1 + self.w2 - 1.0).abs() > 1e-9 {
            return bad(format!("weights {} + {} must be in [0, 1] and sum to 1", self.w1, self.w2));
        }
        for w in [self.omega1, self.omega2] {
            if !(0.0..1.0).contains(&w) {
                return bad(format!("exponent {w} outside [0, 1)"));
            }
        }
        Ok(())
    }

    fn weighted(&self, a: f64, b: f64) -> f64 {
        self.w1 * a + self.w2 * b
    }

    fn smoothed(&self, a: f64, b: f64) -> f64 {
        // powf(0, 0) is 1
        a.powf(self.omega1) * b.powf(self.omega2)
    }
}

/// Combines per-camera components into a score in [0, 1].
pub fn objective(comps: &[FitnessComponents], cfg: &ObjectiveConfig) -> f64 {
    if comps.is_empty() {
        return 0.0;
    }
    let per_cam = || comps.iter().map(|c| (f1(c, cfg.beta), f2(c)));
    let n = comps.len() as f64;
    let v = match cfg.variant {
        Variant::Ws | Variant::Sp => {
            let p = FitnessComponents::pooled(comps);
            let (a, b) = (f1(&p, cfg.beta), f2(&p));
            if cfg.variant == Variant::Ws {
                cfg.weighted(a, b)
            } else {
                cfg.smoothed(a, b)
            }
        }
        Variant::AoWs => per_cam().map(|(a, b)| cfg.weighted(a, b)).sum::<f64>() / n,
        Variant::AoSp => per_cam().map(|(a, b)| cfg.smoothed(a, b)).sum::<f64>() / n,
        Variant::PoSp => per_cam().map(|(a, b)| cfg.smoothed(a, b)).product(),
    };
    v.clamp(0.0, 1.0)
}

/// Observation for one frame: per-camera reference images and ROIs.
#[derive(Debug, Clone)]
pub struct FrameFeatures {
    pub refs: Vec<ReferenceImage>,
    pub rois: Vec<RoiRect>,
    ref_areas: Vec<u64>,
}

impl FrameFeatures {
    pub fn new(refs: Vec<ReferenceImage>, rois: Vec<RoiRect>) -> Result<Self, ObjectiveError> {
        if refs.len() != rois.len() {
            return Err(ObjectiveError::CameraCount { expected: refs.len(), got: rois.len() });
        }
        let ref_areas = refs.iter().zip(&rois).map(|(r, roi)| reference_area(r, roi)).collect();
        Ok(Self { refs, rois, ref_areas })
    }

    /// Features with every ROI covering its whole image.
    pub fn full_frame(refs: Vec<ReferenceImage>) -> Self {
        let rois = refs.iter().map(|r| RoiRect::full(r.width, r.height)).collect();
        Self::new(refs, rois).expect("one ROI per reference")
    }

    pub fn cameras(&self) -> usize {
        self.refs.len()
    }
}

/// Worker count from `MOCAPLAB_WORKERS` if set, else `fallback`, else the
/// number of available cores.
pub fn worker_count(fallback: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(fallback)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Scores pose hypotheses: render into every camera with fused component
/// accumulation and combine with the configured objective. Evaluation runs
/// on a private worker pool; results do not depend on the worker count.
pub struct Evaluator {
    model: SkeletonModel,
    views: Vec<CameraView>,
    cfg: ObjectiveConfig,
    pool: rayon::ThreadPool,
    workers: usize,
}

impl Evaluator {
    pub fn new(model: SkeletonModel, cams: &[TsaiCamera], cfg: ObjectiveConfig, workers: usize) -> Result<Self, ObjectiveError> {
        cfg.validate()?;
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ObjectiveError::Pool(e.to_string()))?;
        Ok(Self {
            model,
            views: cams.iter().map(|&c| CameraView::new(c)).collect(),
            cfg,
            pool,
            workers,
        })
    }

    pub fn model(&self) -> &SkeletonModel {
        &self.model
    }

    pub fn views(&self) -> &[CameraView] {
        &self.views
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn scratch(&self) -> Vec<EncodedImage> {
        self.views.iter().map(|v| EncodedImage::new(v.width(), v.height())).collect()
    }

    fn check(&self, frame: &FrameFeatures) -> Result<(), ObjectiveError> {
        if frame.cameras() != self.views.len() {
            return Err(ObjectiveError::CameraCount { expected: self.views.len(), got: frame.cameras() });
        }
        for (v, r) in self.views.iter().zip(&frame.refs) {
            check_dims((v.width(), v.height()), (r.width, r.height))?;
        }
        Ok(())
    }

    /// Per-camera components of one pose, or `None` when the pose is
    /// invalid or projects behind a camera.
    pub fn pose_components(&self, pose: &PoseState, frame: &FrameFeatures) -> Option<Vec<FitnessComponents>> {
        let mut scratch = self.scratch();
        self.components_with(pose, frame, &mut scratch)
    }

    fn components_with(&self, pose: &PoseState, frame: &FrameFeatures, scratch: &mut [EncodedImage]) -> Option<Vec<FitnessComponents>> {
        let globals = self.model.pose_globals(pose).ok()?;
        let mut out = Vec::with_capacity(self.views.len());
        for (c, view) in self.views.iter().enumerate() {
            let parts = project_parts(&self.model, &globals, view).ok()?;
            let roi = &frame.rois[c];
            let img = &mut scratch[c];
            img.clear_roi(roi);
            let mut comps = FitnessComponents {
                area_ref: frame.ref_areas[c],
                ..FitnessComponents::default()
            };
            render_parts(&parts, roi, img, Some(Accumulator { reference: &frame.refs[c], comps: &mut comps }));
            out.push(comps);
        }
        Some(out)
    }

    pub fn score(&self, pose: &PoseState, frame: &FrameFeatures) -> f64 {
        self.pose_components(pose, frame)
            .map_or(0.0, |c| objective(&c, &self.cfg))
    }

    /// Scores in input order. Hypotheses projecting behind any camera
    /// score 0.
    pub fn evaluate_batch(&self, poses: &[PoseState], frame: &FrameFeatures) -> Result<Vec<f64>, ObjectiveError> {
        self.check(frame)?;
        let eval = |scratch: &mut Vec<EncodedImage>, p: &PoseState| {
            self.components_with(p, frame, scratch)
                .map_or(0.0, |c| objective(&c, &self.cfg))
        };
        if self.workers == 1 {
            let mut scratch = self.scratch();
            return Ok(poses.iter().map(|p| eval(&mut scratch, p)).collect());
        }
        Ok(self.pool.install(|| {
            poses
                .par_iter()
                .map_init(|| self.scratch(), eval)
                .collect()
        }))
    }

    /// Renders one pose per camera into full model images.
    pub fn render(&self, pose: &PoseState) -> Option<Vec<EncodedImage>> {
        let globals = self.model.pose_globals(pose).ok()?;
        self.views
            .iter()
            .map(|v| crate::render::render_pose(&self.model, &globals, v).ok())
            .collect()
    }
}
