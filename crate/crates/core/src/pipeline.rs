//! End-to-end orchestration: synthetic sequences, feature extraction,
//! the tracking loop, accuracy evaluation and parallel-performance metrics.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraRig, Intrinsics};
use crate::geometry::Point3;
use crate::imaging::{
    compute_roi, distance_map, encode_reference, mask_edges, normalize_map, pgm, sobel_edges, BinaryImage, GrayImage,
    ImagingError, Metric, MogModel, MogParams, Normalization, ReferenceImage, RoiRect,
};
use crate::objective::{Evaluator, FrameFeatures, ObjectiveError};
use crate::optimize::{pf_track_frame, pso_track_frame, Algorithm, OptimizeError, ParticleSet, RngPool, Sigma, TrackerConfig};
use crate::render::{render_pose, CameraView, EncodedImage, EDGE_FLAG, LABEL_MASK};
use crate::skeleton::{Dof, PoseState, SkeletonError, SkeletonModel};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("bad motion script: {0}")]
    BadScript(String),
    #[error("missing frame: {0}")]
    MissingFrame(String),
    #[error("config: {0}")]
    Config(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Camera ring used by the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub cameras: usize,
    /// Ring radius, mm.
    pub radius: f64,
    pub camera_height: f64,
    pub target: [f64; 3],
    pub f: f64,
    pub kappa: f64,
    pub pixel_pitch: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            cameras: 4,
            radius: 3000.0,
            camera_height: 1100.0,
            target: [0.0, 0.0, 900.0],
            f: 6.5,
            kappa: 0.0,
            pixel_pitch: 0.05,
            width: 160,
            height: 120,
        }
    }
}

impl SceneSpec {
    pub fn rig(&self) -> Result<CameraRig, PipelineError> {
        if self.cameras == 0 {
            return Err(PipelineError::Config("scene needs at least one camera".into()));
        }
        let intr = Intrinsics {
            f: self.f,
            kappa: self.kappa,
            pixel_pitch: self.pixel_pitch,
            img_w: self.width,
            img_h: self.height,
        };
        let rig = CameraRig::ring(self.cameras, self.radius, self.camera_height, Point3::from(self.target), intr);
        Ok(CameraRig::new(rig.cameras)?)
    }
}

/// `offset + amplitude * sin(2 pi t / period + phase)` on one DoF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub bone: String,
    pub dof: Dof,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub amplitude: f64,
    /// Frames per cycle.
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_period() -> f64 {
    30.0
}

/// Root moves `start + velocity * t` (mm, per frame); waves add on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MotionScript {
    pub root_start: [f64; 3],
    pub root_velocity: [f64; 3],
    pub waves: Vec<Wave>,
}

impl MotionScript {
    /// A slow walk along world x with swinging legs and arms.
    pub fn walk() -> Self {
        let w = |bone: &str, dof: Dof, offset: f64, amplitude: f64, phase: f64| Wave {
            bone: bone.into(),
            dof,
            offset,
            amplitude,
            period: 30.0,
            phase,
        };
        use std::f64::consts::PI;
        MotionScript {
            root_start: [-450.0, 0.0, 950.0],
            root_velocity: [9.0, 0.0, 0.0],
            waves: vec![
                Wave { period: 15.0, ..w("pelvis", Dof::Tz, 0.0, 12.0, 0.0) },
                w("pelvis", Dof::Rx, 0.0, 0.04, 0.0),
                w("pelvis", Dof::Rz, 0.0, 0.08, 0.0),
                w("thorax", Dof::Rz, 0.0, 0.1, PI),
                w("thorax", Dof::Ry, -0.05, 0.03, 0.0),
                w("left_hip", Dof::Ry, -0.15, 0.4, 0.0),
                w("right_hip", Dof::Ry, -0.15, 0.4, PI),
                w("left_knee", Dof::Ry, 0.4, 0.35, 0.5 * PI),
                w("right_knee", Dof::Ry, 0.4, 0.35, 1.5 * PI),
                w("left_shoulder", Dof::Rx, 0.15, 0.0, 0.0),
                w("right_shoulder", Dof::Rx, -0.15, 0.0, 0.0),
                w("left_shoulder", Dof::Ry, 0.0, 0.35, PI),
                w("right_shoulder", Dof::Ry, 0.0, 0.35, 0.0),
                w("left_elbow", Dof::Ry, -0.4, 0.2, PI),
                w("right_elbow", Dof::Ry, -0.4, 0.2, 0.0),
                w("head", Dof::Rz, 0.0, 0.1, 0.5 * PI),
            ],
        }
    }

    /// Checks every wave against the model.
    pub fn validate(&self, model: &SkeletonModel) -> Result<(), PipelineError> {
        for w in &self.waves {
            if model.state_index(&w.bone, w.dof).is_none() {
                return Err(PipelineError::BadScript(format!("{} has no {:?} DoF", w.bone, w.dof)));
            }
            if !(w.period > 0.0) {
                return Err(PipelineError::BadScript(format!("period of {} must be > 0", w.bone)));
            }
        }
        let finite = self.root_start.iter().chain(&self.root_velocity).all(|v| v.is_finite());
        if !finite {
            return Err(PipelineError::BadScript("non-finite root path".into()));
        }
        Ok(())
    }

    /// Per-DoF diffusion spread matched to the script: `scale` times the
    /// largest frame-to-frame change over `frames`, never below the floors
    /// (mm for translations, rad for rotations).
    pub fn calibrated_sigma(
        &self,
        model: &SkeletonModel,
        frames: usize,
        scale: f64,
        floor_t: f64,
        floor_r: f64,
    ) -> Result<Sigma, PipelineError> {
        let mut step = vec![0.0f64; model.dof_count()];
        let mut prev = self.pose_at(model, 0)?;
        for t in 1..frames {
            let cur = self.pose_at(model, t)?;
            for (s, (a, b)) in step.iter_mut().zip(cur.0.iter().zip(&prev.0)) {
                *s = s.max((a - b).abs());
            }
            prev = cur;
        }
        let floors = model.bones().iter().flat_map(|b| b.dof.iter().map(|d| if d.is_translation() { floor_t } else { floor_r }));
        Ok(Sigma::PerDof(step.iter().zip(floors).map(|(s, f)| (scale * s).max(f)).collect()))
    }

    /// Pose at frame `t`, clamped to the joint limits.
    pub fn pose_at(&self, model: &SkeletonModel, t: usize) -> Result<PoseState, PipelineError> {
        let mut s = model.zero_pose();
        let root = &model.bones()[0].name;
        for (k, dof) in [Dof::Tx, Dof::Ty, Dof::Tz].into_iter().enumerate() {
            if let Some(i) = model.state_index(root, dof) {
                s.0[i] = self.root_start[k] + self.root_velocity[k] * t as f64;
            }
        }
        for w in &self.waves {
            let i = model
                .state_index(&w.bone, w.dof)
                .ok_or_else(|| PipelineError::BadScript(format!("{} has no {:?} DoF", w.bone, w.dof)))?;
            s.0[i] += w.offset + w.amplitude * (std::f64::consts::TAU * t as f64 / w.period + w.phase).sin();
        }
        Ok(model.clamp_limits(&s))
    }
}

/// Synthetic sequence description, as stored in `spec.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceSpec {
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    /// Probability that a silhouette pixel is flipped.
    pub noise: f64,
    pub scene: SceneSpec,
    pub script: MotionScript,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self {
            frames: 100,
            fps: 25.0,
            seed: 1,
            noise: 0.0,
            scene: SceneSpec::default(),
            script: MotionScript::walk(),
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self, model: &SkeletonModel) -> Result<(), PipelineError> {
        if self.frames == 0 {
            return Err(PipelineError::Config("frame count must be >= 1".into()));
        }
        if !(self.fps > 0.0) {
            return Err(PipelineError::Config("fps must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(PipelineError::Config("noise must be in [0, 1]".into()));
        }
        self.script.validate(model)
    }

    /// Default tracker with diffusion matched to this sequence's motion:
    /// twice the largest per-frame change, at least 2 mm / 0.01 rad.
    pub fn calibrated_tracker(&self, model: &SkeletonModel) -> Result<TrackerConfig, PipelineError> {
        Ok(TrackerConfig {
            sigma: self.script.calibrated_sigma(model, self.frames, 2.0, 2.0, 0.01)?,
            ..TrackerConfig::default()
        })
    }
}

/// Parameters turning silhouettes and edges into reference images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub metric: Metric,
    pub normalization: Normalization,
    pub roi_margin: usize,
    pub sobel_threshold: f64,
    pub mog_warmup: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            metric: Metric::Chessboard,
            normalization: Normalization::default(),
            roi_margin: 8,
            sobel_threshold: 60.0,
            mog_warmup: 30,
        }
    }
}

/// Reference image and ROI from a silhouette and its edge pixels. An empty
/// silhouette yields the full-image ROI; missing edges give a map
/// saturated at the normalization's zero point.
pub fn reference_from(silhouette: &BinaryImage, edges: &BinaryImage, params: &FeatureParams) -> Result<(ReferenceImage, RoiRect), PipelineError> {
    params.normalization.validate()?;
    let mut d = distance_map(edges, params.metric);
    if d.no_edges {
        d.saturate(params.normalization.saturation_distance());
    }
    let n = normalize_map(&d, params.normalization)?;
    let reference = encode_reference(silhouette, &n)?;
    let roi = match compute_roi(silhouette, params.roi_margin) {
        Ok(r) => r,
        Err(ImagingError::EmptySilhouette) => RoiRect::full(silhouette.width, silhouette.height),
        Err(e) => return Err(e.into()),
    };
    Ok((reference, roi))
}

/// Silhouette (nonzero label) and edge masks of a model image.
pub fn split_model_image(img: &EncodedImage) -> (BinaryImage, BinaryImage) {
    let sil = BinaryImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&b| b & LABEL_MASK != 0).collect(),
    };
    let edges = BinaryImage {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&b| b & EDGE_FLAG != 0).collect(),
    };
    (sil, edges)
}

/// Grayscale camera frame: textured background with the model painted
/// over it, one intensity per part.
pub fn shade_frame(model_img: &EncodedImage, background: &GrayImage) -> GrayImage {
    GrayImage {
        width: model_img.width,
        height: model_img.height,
        data: model_img
            .data
            .iter()
            .zip(&background.data)
            .map(|(&m, &bg)| {
                let l = m & LABEL_MASK;
                if l == 0 {
                    bg
                } else {
                    150 + (l % 16) * 6
                }
            })
            .collect(),
    }
}

/// Smooth static background, different per camera.
pub fn background_image(width: usize, height: usize, camera: usize) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        let v = 40.0 + 15.0 * ((x as f64 * 0.07 + camera as f64).sin() + (y as f64 * 0.05).cos());
        v.round() as u8
    })
}

/// Rendered synthetic sequence kept in memory.
#[derive(Debug, Clone)]
pub struct SyntheticSequence {
    pub spec: SequenceSpec,
    pub rig: CameraRig,
    pub model: SkeletonModel,
    pub truth: Vec<PoseState>,
    /// `[frame][camera]`, possibly with silhouette noise applied.
    pub model_images: Vec<Vec<EncodedImage>>,
}

/// Flips silhouette pixels with probability `p`: flipped-on pixels get
/// label 1, flipped-off pixels lose label and edge.
pub fn apply_silhouette_noise(img: &mut EncodedImage, p: f64, rng: &mut RngPool) {
    if p <= 0.0 {
        return;
    }
    for b in img.data.iter_mut() {
        if rng.uniform() < p {
            *b = if *b & LABEL_MASK == 0 { 1 } else { 0 };
        }
    }
}

pub fn synth_generate(spec: &SequenceSpec, model: &SkeletonModel) -> Result<SyntheticSequence, PipelineError> {
    spec.validate(model)?;
    let rig = spec.scene.rig()?;
    let views: Vec<CameraView> = rig.cameras.iter().map(|&c| CameraView::new(c)).collect();
    let mut rng = RngPool::new(spec.seed);
    let mut truth = Vec::with_capacity(spec.frames);
    let mut model_images = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let pose = spec.script.pose_at(model, t)?;
        let globals = model.pose_globals(&pose)?;
        let mut per_cam = Vec::with_capacity(views.len());
        for v in &views {
            let mut img = render_pose(model, &globals, v)?;
            apply_silhouette_noise(&mut img, spec.noise, &mut rng);
            per_cam.push(img);
        }
        truth.push(pose);
        model_images.push(per_cam);
    }
    Ok(SyntheticSequence {
        spec: spec.clone(),
        rig,
        model: model.clone(),
        truth,
        model_images,
    })
}

impl SyntheticSequence {
    /// Features straight from the rendered labels and edges.
    pub fn features(&self, params: &FeatureParams) -> Result<Vec<FrameFeatures>, PipelineError> {
        self.model_images.iter().map(|cams| features_from_model_images(cams, params)).collect()
    }

    /// Shaded grayscale frames, `[frame][camera]`.
    pub fn gray_frames(&self) -> Vec<Vec<GrayImage>> {
        let bgs = self.backgrounds();
        self.model_images
            .iter()
            .map(|cams| cams.iter().zip(&bgs).map(|(m, bg)| shade_frame(m, bg)).collect())
            .collect()
    }

    pub fn backgrounds(&self) -> Vec<GrayImage> {
        let (w, h) = (self.spec.scene.width as usize, self.spec.scene.height as usize);
        (0..self.rig.len()).map(|c| background_image(w, h, c)).collect()
    }

    /// Writes `spec.json`, `rig.json`, `model.json`, `truth.csv` and per
    /// camera `camN/` directories with `background.pgm`, `frame_XXXXX.pgm`
    /// (grayscale) and `mask_XXXXX.pgm` (model labels and edge flags).
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&self.spec)?)?;
        self.rig.save(dir.join("rig.json"))?;
        std::fs::write(dir.join("model.json"), self.model.to_json())?;
        write_states_csv(&dir.join("truth.csv"), &self.model, &self.truth, None)?;
        let bgs = self.backgrounds();
        for (c, bg) in bgs.iter().enumerate() {
            let cd = camera_dir(dir, c);
            std::fs::create_dir_all(&cd)?;
            pgm::write(cd.join("background.pgm"), bg)?;
        }
        for (t, cams) in self.model_images.iter().enumerate() {
            for (c, img) in cams.iter().enumerate() {
                let cd = camera_dir(dir, c);
                pgm::write(cd.join(frame_name("frame", t)), &shade_frame(img, &bgs[c]))?;
                let raw = GrayImage { width: img.width, height: img.height, data: img.data.clone() };
                pgm::write(cd.join(frame_name("mask", t)), &raw)?;
            }
        }
        Ok(())
    }
}

pub fn camera_dir(dir: &Path, c: usize) -> PathBuf {
    dir.join(format!("cam{c}"))
}

pub fn frame_name(kind: &str, t: usize) -> String {
    format!("{kind}_{t:05}.pgm")
}

pub fn features_from_model_images(cams: &[EncodedImage], params: &FeatureParams) -> Result<FrameFeatures, PipelineError> {
    let mut refs = Vec::with_capacity(cams.len());
    let mut rois = Vec::with_capacity(cams.len());
    for img in cams {
        let (sil, edges) = split_model_image(img);
        let (r, roi) = reference_from(&sil, &edges, params)?;
        refs.push(r);
        rois.push(roi);
    }
    Ok(FrameFeatures::new(refs, rois)?)
}

/// Camera-side vision path: background subtraction, masked Sobel edges.
/// One model per camera, warmed up on the empty background.
pub struct VisionFrontEnd {
    mogs: Vec<MogModel>,
    params: FeatureParams,
}

impl VisionFrontEnd {
    pub fn new(backgrounds: &[GrayImage], params: FeatureParams) -> Result<Self, PipelineError> {
        let mut mogs = Vec::with_capacity(backgrounds.len());
        for bg in backgrounds {
            let mut m = MogModel::new(bg.width, bg.height, MogParams::default())?;
            for _ in 0..params.mog_warmup {
                m.apply(bg)?;
            }
            mogs.push(m);
        }
        Ok(Self { mogs, params })
    }

    /// Features for one frame; cameras are processed on separate workers.
    pub fn process(&mut self, frames: &[GrayImage]) -> Result<FrameFeatures, PipelineError> {
        if frames.len() != self.mogs.len() {
            return Err(PipelineError::MissingFrame(format!("{} camera frames for {} cameras", frames.len(), self.mogs.len())));
        }
        let params = self.params;
        let results: Vec<Result<(ReferenceImage, RoiRect), PipelineError>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .mogs
                .iter_mut()
                .zip(frames)
                .map(|(mog, frame)| {
                    s.spawn(move || {
                        let fg = mog.apply(frame)?;
                        let edges = mask_edges(&sobel_edges(frame, params.sobel_threshold)?, &fg)?;
                        reference_from(&fg, &edges, &params)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("camera worker panicked")).collect()
        });
        let mut refs = Vec::new();
        let mut rois = Vec::new();
        for r in results {
            let (a, b) = r?;
            refs.push(a);
            rois.push(b);
        }
        Ok(FrameFeatures::new(refs, rois)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub state: PoseState,
    pub score: f64,
    /// Wall time spent on the frame; not part of the CSV.
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRun {
    pub seed: u64,
    pub config: TrackerConfig,
    pub labels: Vec<String>,
    pub records: Vec<FrameRecord>,
}

impl TrackRun {
    pub fn states(&self) -> Vec<PoseState> {
        self.records.iter().map(|r| r.state.clone()).collect()
    }

    pub fn frames(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.frame).collect()
    }

    /// `frame, <state columns>, score`.
    pub fn to_csv_string(&self) -> Result<String, PipelineError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["frame".to_string()];
        header.extend(self.labels.iter().cloned());
        header.push("score".into());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.frame.to_string()];
            row.extend(r.state.0.iter().map(|v| v.to_string()));
            row.push(r.score.to_string());
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| PipelineError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn timing_csv_string(&self) -> String {
        let mut s = String::from("frame,ms\n");
        for r in &self.records {
            s.push_str(&format!("{},{:.3}\n", r.frame, r.ms));
        }
        s
    }

    /// Writes `run.csv`, `timing.csv` and `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run.csv"), self.to_csv_string()?)?;
        std::fs::write(dir.join("timing.csv"), self.timing_csv_string())?;
        std::fs::write(dir.join("config.json"), self.config.to_json())?;
        Ok(())
    }

    /// Reads `run.csv` (and `config.json` when present) back.
    pub fn read(dir: &Path) -> Result<TrackRun, PipelineError> {
        let (labels, rows) = read_states_csv(&dir.join("run.csv"), true)?;
        let config = match std::fs::read_to_string(dir.join("config.json")) {
            Ok(t) => TrackerConfig::from_json(&t)?,
            Err(_) => TrackerConfig::default(),
        };
        Ok(TrackRun {
            seed: config.seed,
            config,
            labels,
            records: rows
                .into_iter()
                .map(|(frame, state, score)| FrameRecord { frame, state, score: score.unwrap_or(0.0), ms: 0.0 })
                .collect(),
        })
    }
}

pub fn write_states_csv(path: &Path, model: &SkeletonModel, states: &[PoseState], scores: Option<&[f64]>) -> Result<(), PipelineError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["frame".to_string()];
    header.extend(model.state_labels());
    if scores.is_some() {
        header.push("score".into());
    }
    w.write_record(&header)?;
    for (t, s) in states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(s.0.iter().map(|v| v.to_string()));
        if let Some(sc) = scores {
            row.push(sc[t].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

type StateRow = (usize, PoseState, Option<f64>);

/// Reads a `frame, states..., [score]` CSV.
pub fn read_states_csv(path: &Path, has_score: bool) -> Result<(Vec<String>, Vec<StateRow>), PipelineError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    let n_state = header.len().saturating_sub(1 + has_score as usize);
    let labels = header[1..1 + n_state].to_vec();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, PipelineError> {
            rec.get(i)
                .ok_or_else(|| PipelineError::BadInput(format!("{}: short row", path.display())))?
                .parse::<f64>()
                .map_err(|e| PipelineError::BadInput(format!("{}: {e}", path.display())))
        };
        let frame = num(0)? as usize;
        let state = (1..=n_state).map(num).collect::<Result<Vec<_>, _>>()?;
        let score = if has_score { Some(num(1 + n_state)?) } else { None };
        rows.push((frame, PoseState(state), score));
    }
    Ok((labels, rows))
}

pub fn read_truth(path: &Path) -> Result<Vec<PoseState>, PipelineError> {
    let (_, rows) = read_states_csv(path, false)?;
    Ok(rows.into_iter().map(|(_, s, _)| s).collect())
}

/// Runtime switches for [`track_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackOptions {
    /// Evaluation workers; `None` takes `MOCAPLAB_WORKERS` or all cores.
    pub workers: Option<usize>,
    /// Simulated camera rate: frames that arrived while the previous
    /// frame was being tracked are dropped.
    pub realtime_fps: Option<f64>,
}

/// Source of per-frame features.
pub trait FeatureSource {
    fn frame_count(&self) -> usize;
    fn features(&mut self, t: usize) -> Result<FrameFeatures, PipelineError>;
}

/// Features prepared up front.
pub struct PreparedFeatures(pub Vec<FrameFeatures>);

impl FeatureSource for PreparedFeatures {
    fn frame_count(&self) -> usize {
        self.0.len()
    }

    fn features(&mut self, t: usize) -> Result<FrameFeatures, PipelineError> {
        self.0
            .get(t)
            .cloned()
            .ok_or_else(|| PipelineError::MissingFrame(format!("frame {t}")))
    }
}

/// Grayscale frames pushed through the vision front end.
pub struct VisionFeatures {
    pub frames: Vec<Vec<GrayImage>>,
    pub front: VisionFrontEnd,
}

impl FeatureSource for VisionFeatures {
    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn features(&mut self, t: usize) -> Result<FrameFeatures, PipelineError> {
        let frames = self
            .frames
            .get(t)
            .ok_or_else(|| PipelineError::MissingFrame(format!("frame {t}")))?;
        self.front.process(frames)
    }
}

/// Tracks every frame (or, in real-time simulation, every frame available
/// when the tracker becomes free), starting from `initial`.
pub fn track_sequence(
    model: &SkeletonModel,
    rig: &CameraRig,
    source: &mut dyn FeatureSource,
    initial: &PoseState,
    cfg: &TrackerConfig,
    opts: &TrackOptions,
) -> Result<TrackRun, PipelineError> {
    cfg.validate()?;
    if initial.len() != model.dof_count() {
        return Err(PipelineError::Config(format!(
            "initial pose has {} values, model has {} DoF",
            initial.len(),
            model.dof_count()
        )));
    }
    let sigma = cfg.sigma.resolve(model.dof_count())?;
    let workers = crate::objective::worker_count(opts.workers);
    let evaluator = Evaluator::new(model.clone(), &rig.cameras, cfg.objective, workers)?;
    let clamp = |x: &mut [f64]| model.clamp_in_place(x);
    let mut rng = RngPool::new(cfg.seed);
    let mut prev = model.clamp_limits(initial).0;
    let mut pf = ParticleSet::new(&prev, cfg.particles);
    let pso = cfg.pso_params();
    let n = source.frame_count();
    let mut records = Vec::with_capacity(n);
    let start = Instant::now();
    let mut t = 0;
    while t < n {
        let t0 = Instant::now();
        let features = source.features(t)?;
        let mut eval = |xs: &[Vec<f64>]| -> Vec<f64> {
            let poses: Vec<PoseState> = xs.iter().map(|x| PoseState(x.clone())).collect();
            evaluator
                .evaluate_batch(&poses, &features)
                .expect("features were checked against the rig")
        };
        let (estimate, score) = match cfg.algorithm {
            Algorithm::Pso => pso_track_frame(&prev, &sigma, &pso, &mut rng, &clamp, &mut eval),
            Algorithm::Pf => {
                let step = pf_track_frame(&mut pf, &sigma, cfg.sigma_z, &mut rng, &clamp, &mut eval);
                let score = evaluator.score(&PoseState(step.estimate.clone()), &features);
                (step.estimate, score)
            }
        };
        prev.clone_from(&estimate);
        records.push(FrameRecord {
            frame: t,
            state: PoseState(estimate),
            score,
            ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        t = match opts.realtime_fps {
            Some(fps) => {
                // newest frame captured by now, never going backwards
                let available = (start.elapsed().as_secs_f64() * fps).floor() as usize;
                available.max(t + 1)
            }
            None => t + 1,
        };
    }
    Ok(TrackRun {
        seed: cfg.seed,
        config: cfg.clone(),
        labels: model.state_labels(),
        records,
    })
}

/// Marker errors of a tracked run against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `[frame][marker]` Euclidean error, mm.
    pub per_frame: Vec<Vec<f64>>,
    /// Mean over frames for each marker.
    pub per_marker: Vec<f64>,
    pub mean: f64,
    /// Standard deviation of all per-frame marker errors.
    pub std: f64,
    pub frames: usize,
}

/// Compares estimated and true marker positions. `run_fps` and
/// `truth_fps` align frames by time, picking the nearest truth frame.
pub fn evaluate(
    run_frames: &[usize],
    estimates: &[PoseState],
    truth: &[PoseState],
    model: &SkeletonModel,
    run_fps: f64,
    truth_fps: f64,
) -> Result<ErrorReport, PipelineError> {
    if run_frames.len() != estimates.len() {
        return Err(PipelineError::LengthMismatch("frame indices and estimates differ in length".into()));
    }
    let mut per_frame = Vec::with_capacity(estimates.len());
    for (&f, est) in run_frames.iter().zip(estimates) {
        let ti = (f as f64 / run_fps * truth_fps).round() as usize;
        let tr = truth
            .get(ti)
            .ok_or_else(|| PipelineError::LengthMismatch(format!("no truth for frame {f}")))?;
        let a = model.marker_positions(est)?;
        let b = model.marker_positions(tr)?;
        per_frame.push(a.iter().zip(&b).map(|(p, q)| p.distance(*q)).collect::<Vec<f64>>());
    }
    let m = model.marker_count();
    let nf = per_frame.len();
    let per_marker: Vec<f64> = (0..m)
        .map(|k| if nf == 0 { 0.0 } else { per_frame.iter().map(|e| e[k]).sum::<f64>() / nf as f64 })
        .collect();
    let all: Vec<f64> = per_frame.iter().flatten().copied().collect();
    let mean = if all.is_empty() { 0.0 } else { all.iter().sum::<f64>() / all.len() as f64 };
    let var = if all.is_empty() { 0.0 } else { all.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / all.len() as f64 };
    Ok(ErrorReport { per_frame, per_marker, mean, std: var.sqrt(), frames: nf })
}

pub fn evaluate_run(run: &TrackRun, truth: &[PoseState], model: &SkeletonModel) -> Result<ErrorReport, PipelineError> {
    evaluate(&run.frames(), &run.states(), truth, model, 1.0, 1.0)
}

/// Parallel performance summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub t_serial_ms: f64,
    pub t_parallel_ms: f64,
    pub workers: usize,
    pub speedup: f64,
    pub efficiency: f64,
    /// Experimentally determined serial fraction; needs at least 2 workers.
    pub karp_flatt: Option<f64>,
    /// Scaled speedup for the given serial fraction.
    pub gustafson: Option<f64>,
    /// Work in flight: latency times throughput.
    pub little_parallelism: Option<f64>,
}

pub fn perf_metrics(
    t_serial: f64,
    t_parallel: f64,
    workers: usize,
    serial_fraction: Option<f64>,
    latency: Option<f64>,
    throughput: Option<f64>,
) -> Result<PerfReport, PipelineError> {
    if !(t_parallel > 0.0) || !(t_serial >= 0.0) || workers == 0 {
        return Err(PipelineError::BadInput("need T_p > 0, T_s >= 0 and p >= 1".into()));
    }
    if let Some(s) = serial_fraction {
        if !(0.0..=1.0).contains(&s) {
            return Err(PipelineError::BadInput("serial fraction must be in [0, 1]".into()));
        }
    }
    let p = workers as f64;
    let speedup = t_serial / t_parallel;
    let karp_flatt = (workers >= 2 && speedup > 0.0).then(|| (1.0 / speedup - 1.0 / p) / (1.0 - 1.0 / p));
    Ok(PerfReport {
        t_serial_ms: t_serial,
        t_parallel_ms: t_parallel,
        workers,
        speedup,
        efficiency: speedup / p,
        karp_flatt,
        gustafson: serial_fraction.map(|s| s + p * (1.0 - s)),
        little_parallelism: latency.zip(throughput).map(|(l, t)| l * t),
    })
}

/// Timing of batch evaluation at several worker counts on the default
/// synthetic scene. The first entry is the baseline.
pub fn bench_evaluate_batch(particles: usize, iterations: usize, workers: &[usize], seed: u64) -> Result<Vec<PerfReport>, PipelineError> {
    let model = SkeletonModel::default_human();
    let spec = SequenceSpec { frames: 1, seed, ..SequenceSpec::default() };
    let seq = synth_generate(&spec, &model)?;
    let features = seq.features(&FeatureParams::default())?.remove(0);
    let cfg = TrackerConfig::default();
    let sigma = cfg.sigma.resolve(model.dof_count())?;
    let mut rng = RngPool::new(seed);
    let clamp = |x: &mut [f64]| model.clamp_in_place(x);
    let poses: Vec<PoseState> = (0..particles.max(1))
        .map(|_| PoseState(crate::optimize::diffuse(&seq.truth[0].0, &sigma, &mut rng, &clamp)))
        .collect();
    let mut times = Vec::new();
    for &p in workers {
        let ev = Evaluator::new(model.clone(), &seq.rig.cameras, cfg.objective, p)?;
        ev.evaluate_batch(&poses, &features)?;
        let t0 = Instant::now();
        for _ in 0..iterations.max(1) {
            ev.evaluate_batch(&poses, &features)?;
        }
        times.push((p, t0.elapsed().as_secs_f64() * 1e3));
    }
    let base = times.first().map_or(0.0, |t| t.1);
    times
        .iter()
        .map(|&(p, ms)| perf_metrics(base, ms, p, None, None, None))
        .collect()
}

/// Frame with the model's edge pixels burned in white.
pub fn overlay(frame: &GrayImage, model_img: &EncodedImage) -> GrayImage {
    GrayImage {
        width: frame.width,
        height: frame.height,
        data: frame
            .data
            .iter()
            .zip(&model_img.data)
            .map(|(&g, &m)| if m & EDGE_FLAG != 0 { 255 } else { g })
            .collect(),
    }
}

/// A sequence directory written by [`SyntheticSequence::write`].
pub struct SequenceDir {
    pub dir: PathBuf,
    pub spec: SequenceSpec,
    pub cameras: usize,
}

impl SequenceDir {
    pub fn open(dir: &Path, cameras: usize) -> Result<Self, PipelineError> {
        let spec: SequenceSpec = serde_json::from_str(&std::fs::read_to_string(dir.join("spec.json"))?)?;
        Ok(Self { dir: dir.to_path_buf(), spec, cameras })
    }

    fn read(&self, kind: &str, t: usize, c: usize) -> Result<GrayImage, PipelineError> {
        let p = camera_dir(&self.dir, c).join(frame_name(kind, t));
        if !p.exists() {
            return Err(PipelineError::MissingFrame(p.display().to_string()));
        }
        Ok(pgm::read(p)?)
    }

    /// Model-image masks as features.
    pub fn mask_features(&self, params: &FeatureParams) -> Result<PreparedFeatures, PipelineError> {
        let mut out = Vec::with_capacity(self.spec.frames);
        for t in 0..self.spec.frames {
            let cams = (0..self.cameras)
                .map(|c| {
                    let g = self.read("mask", t, c)?;
                    Ok(EncodedImage { width: g.width, height: g.height, data: g.data })
                })
                .collect::<Result<Vec<_>, PipelineError>>()?;
            out.push(features_from_model_images(&cams, params)?);
        }
        Ok(PreparedFeatures(out))
    }

    /// Grayscale frames through the vision front end.
    pub fn vision_features(&self, params: &FeatureParams) -> Result<VisionFeatures, PipelineError> {
        let bgs = (0..self.cameras)
            .map(|c| Ok(pgm::read(camera_dir(&self.dir, c).join("background.pgm"))?))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let frames = (0..self.spec.frames)
            .map(|t| (0..self.cameras).map(|c| self.read("frame", t, c)).collect())
            .collect::<Result<Vec<Vec<_>>, PipelineError>>()?;
        Ok(VisionFeatures { frames, front: VisionFrontEnd::new(&bgs, *params)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_spec(frames: usize) -> SequenceSpec {
        SequenceSpec { frames, ..SequenceSpec::default() }
    }

    #[test]
    fn perf_examples() {
        let r = perf_metrics(100.0, 25.0, 8, Some(0.1), Some(0.13), Some(11.0)).unwrap();
        assert_eq!(r.speedup, 4.0);
        assert_eq!(r.efficiency, 0.5);
        assert!((r.karp_flatt.unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!((r.gustafson.unwrap() - 7.3).abs() < 1e-12);
        assert!((r.little_parallelism.unwrap() - 1.43).abs() < 1e-12);
        let one = perf_metrics(50.0, 40.0, 1, None, None, None).unwrap();
        assert_eq!(one.speedup, one.efficiency);
        assert!(one.karp_flatt.is_none());
        assert!(perf_metrics(1.0, 0.0, 2, None, None, None).is_err());
        assert!(perf_metrics(1.0, 1.0, 0, None, None, None).is_err());
    }

    #[test]
    fn walk_script_is_valid_and_deterministic() {
        let model = SkeletonModel::default_human();
        let s = MotionScript::walk();
        s.validate(&model).unwrap();
        assert_eq!(s.pose_at(&model, 7).unwrap(), s.pose_at(&model, 7).unwrap());
        let still = MotionScript { root_start: [0.0, 0.0, 950.0], ..Default::default() };
        assert_eq!(still.pose_at(&model, 0).unwrap(), still.pose_at(&model, 40).unwrap());
        let bad = MotionScript {
            waves: vec![Wave { bone: "left_knee".into(), dof: Dof::Rx, offset: 0.0, amplitude: 1.0, period: 10.0, phase: 0.0 }],
            ..Default::default()
        };
        assert!(matches!(bad.validate(&model), Err(PipelineError::BadScript(_))));
    }

    #[test]
    fn synthetic_frames_show_the_model() {
        let model = SkeletonModel::default_human();
        let seq = synth_generate(&short_spec(3), &model).unwrap();
        assert_eq!(seq.truth[0], seq.spec.script.pose_at(&model, 0).unwrap());
        for cams in &seq.model_images {
            for img in cams {
                let area = img.data.iter().filter(|&&b| b & LABEL_MASK != 0).count();
                assert!(area > 200, "area {area}");
            }
        }
    }

    #[test]
    fn still_script_gives_identical_frames() {
        let model = SkeletonModel::default_human();
        let spec = SequenceSpec {
            frames: 3,
            script: MotionScript { root_start: [0.0, 0.0, 950.0], ..Default::default() },
            ..SequenceSpec::default()
        };
        let seq = synth_generate(&spec, &model).unwrap();
        assert_eq!(seq.model_images[0], seq.model_images[2]);
    }

    #[test]
    fn zero_sigma_tracking_reproduces_truth() {
        let model = SkeletonModel::default_human();
        let spec = SequenceSpec {
            frames: 2,
            script: MotionScript { root_start: [100.0, 0.0, 950.0], ..Default::default() },
            ..SequenceSpec::default()
        };
        let seq = synth_generate(&spec, &model).unwrap();
        let mut src = PreparedFeatures(seq.features(&FeatureParams::default()).unwrap());
        let cfg = TrackerConfig {
            sigma: crate::optimize::Sigma::Scalar(0.0),
            particles: 8,
            iterations: 2,
            ..TrackerConfig::default()
        };
        let run = track_sequence(&model, &seq.rig, &mut src, &seq.truth[0], &cfg, &TrackOptions { workers: Some(1), ..Default::default() }).unwrap();
        assert_eq!(run.states(), seq.truth);
        let rep = evaluate_run(&run, &seq.truth, &model).unwrap();
        assert_eq!(rep.mean, 0.0);
        assert!(run.records.iter().all(|r| r.score > 0.99));
    }

    #[test]
    fn evaluation_examples() {
        let model = SkeletonModel::default_human();
        let a = model.zero_pose();
        let mut b = a.clone();
        // shift the root by a 3-4-5 offset
        b.0[0] = 3.0;
        b.0[1] = 4.0;
        let rep = evaluate(&[0, 1], &[b.clone(), b], &[a.clone(), a], &model, 1.0, 1.0).unwrap();
        assert!(rep.per_frame[0].iter().all(|&e| (e - 5.0).abs() < 1e-12));
        assert!(rep.per_marker.iter().all(|&e| (e - 5.0).abs() < 1e-12));
        assert!(rep.std < 1e-12);
        let model2 = SkeletonModel::default_human();
        assert!(evaluate(&[5], &[model2.zero_pose()], &[model2.zero_pose()], &model2, 1.0, 1.0).is_err());
    }

    #[test]
    fn realtime_sim_drops_frames() {
        let model = SkeletonModel::default_human();
        let seq = synth_generate(&short_spec(6), &model).unwrap();
        let mut src = PreparedFeatures(seq.features(&FeatureParams::default()).unwrap());
        let cfg = TrackerConfig { particles: 4, iterations: 1, ..TrackerConfig::default() };
        let opts = TrackOptions { workers: Some(1), realtime_fps: Some(1e6) };
        let run = track_sequence(&model, &seq.rig, &mut src, &seq.truth[0], &cfg, &opts).unwrap();
        assert!(run.records.len() < 6);
    }

    #[test]
    fn csv_round_trip() {
        let model = SkeletonModel::default_human();
        let dir = tempfile::tempdir().unwrap();
        let seq = synth_generate(&short_spec(2), &model).unwrap();
        let run = TrackRun {
            seed: 1,
            config: TrackerConfig::default(),
            labels: model.state_labels(),
            records: seq
                .truth
                .iter()
                .enumerate()
                .map(|(t, s)| FrameRecord { frame: t, state: s.clone(), score: 0.5, ms: 1.0 })
                .collect(),
        };
        run.write(dir.path()).unwrap();
        let back = TrackRun::read(dir.path()).unwrap();
        assert_eq!(back.states(), run.states());
        assert_eq!(back.to_csv_string().unwrap(), run.to_csv_string().unwrap());
    }
}
