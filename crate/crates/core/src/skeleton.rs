//! Articulated skeleton: state expansion, local/global transform chains,
//! rigid skinning and the flat (billboard trapezoid) shape model.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Mat4, Point3};

/// Slots per bone in the full state vector.
pub const SLOTS_PER_BONE: usize = 6;

const DEFAULT_MODEL_JSON: &str = include_str!("../assets/human31.json");

#[derive(Debug, Error)]
pub enum SkeletonError {
    #[error("state has {got} values, model expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("billboard is degenerate: bone axis points at the camera")]
    DegenerateBillboard,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One degree of freedom; the discriminant is the slot in a bone's 6-vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dof {
    #[serde(rename = "t_x")]
    Tx = 0,
    #[serde(rename = "t_y")]
    Ty = 1,
    #[serde(rename = "t_z")]
    Tz = 2,
    #[serde(rename = "r_x")]
    Rx = 3,
    #[serde(rename = "r_y")]
    Ry = 4,
    #[serde(rename = "r_z")]
    Rz = 5,
}

impl Dof {
    pub fn slot(self) -> usize {
        self as usize
    }

    pub fn is_translation(self) -> bool {
        matches!(self, Dof::Tx | Dof::Ty | Dof::Tz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bone {
    pub id: usize,
    pub name: String,
    pub parent: Option<usize>,
    pub dof: Vec<Dof>,
    /// Bind translation from the parent joint, mm.
    pub offset: Point3,
    /// One `[lo, hi]` per entry of `dof` (radians or mm).
    pub limits: Vec<Limit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatPart {
    pub name: String,
    pub bone: usize,
    /// Top and bottom cap centres in bone-local bind coordinates.
    pub t_p: Point3,
    pub b_p: Point3,
    pub t_r: f64,
    pub b_r: f64,
    /// 7-bit colour label, 1..=127.
    pub label: u8,
}

/// Compact pose: one value per model DoF, ordered bone by bone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PoseState(pub Vec<f64>);

/// `SLOTS_PER_BONE` values per bone, zero where the bone has no DoF.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState(pub Vec<f64>);

impl PoseState {
    pub fn zeros(len: usize) -> Self {
        PoseState(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoneFile {
    name: String,
    parent: Option<String>,
    #[serde(default)]
    dof: Vec<Dof>,
    offset: [f64; 3],
    #[serde(default)]
    limits: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartFile {
    #[serde(default)]
    name: String,
    bone: String,
    t_p: [f64; 3],
    b_p: [f64; 3],
    t_r: f64,
    b_r: f64,
    label: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    bones: Vec<BoneFile>,
    parts: Vec<PartFile>,
}

#[derive(Debug, Clone)]
pub struct SkeletonModel {
    bones: Vec<Bone>,
    parts: Vec<FlatPart>,
    /// State index -> index into the full state.
    state_slots: Vec<usize>,
    limits: Vec<Limit>,
    bind_globals: Vec<Mat4>,
}

impl SkeletonModel {
    /// The 15-bone, 31-DoF human model shipped with the crate.
    pub fn default_human() -> Self {
        Self::from_json(DEFAULT_MODEL_JSON).expect("bundled model is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SkeletonError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SkeletonError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let bones = self
            .bones
            .iter()
            .map(|b| BoneFile {
                name: b.name.clone(),
                parent: b.parent.map(|p| self.bones[p].name.clone()),
                dof: b.dof.clone(),
                offset: b.offset.to_array(),
                limits: b.limits.iter().map(|l| [l.lo, l.hi]).collect(),
            })
            .collect();
        let parts = self
            .parts
            .iter()
            .map(|p| PartFile {
                name: p.name.clone(),
                bone: self.bones[p.bone].name.clone(),
                t_p: p.t_p.to_array(),
                b_p: p.b_p.to_array(),
                t_r: p.t_r,
                b_r: p.b_r,
                label: p.label,
            })
            .collect();
        serde_json::to_string_pretty(&ModelFile { bones, parts }).expect("model serializes")
    }

    fn from_file(file: ModelFile) -> Result<Self, SkeletonError> {
        let invalid = |m: String| SkeletonError::InvalidModel(m);
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut bones = Vec::with_capacity(file.bones.len());
        for (id, b) in file.bones.into_iter().enumerate() {
            let parent = match &b.parent {
                None => None,
                Some(p) => Some(*index.get(p).ok_or_else(|| {
                    invalid(format!("bone {} references unknown or later parent {p}", b.name))
                })?),
            };
            if parent.is_none() && id != 0 {
                return Err(invalid(format!("only bone 0 may be the root, {} has no parent", b.name)));
            }
            if parent.is_some() && b.dof.iter().any(|d| d.is_translation()) {
                return Err(invalid(format!("only the root may translate ({})", b.name)));
            }
            if b.limits.len() != b.dof.len() {
                return Err(invalid(format!("bone {} needs one limit per DoF", b.name)));
            }
            let mut seen = [false; SLOTS_PER_BONE];
            for d in &b.dof {
                if std::mem::replace(&mut seen[d.slot()], true) {
                    return Err(invalid(format!("bone {} repeats a DoF", b.name)));
                }
            }
            let limits: Vec<Limit> = b.limits.iter().map(|l| Limit { lo: l[0], hi: l[1] }).collect();
            if limits.iter().any(|l| !(l.lo <= l.hi)) {
                return Err(invalid(format!("bone {} has an empty limit interval", b.name)));
            }
            if index.insert(b.name.clone(), id).is_some() {
                return Err(invalid(format!("duplicate bone name {}", b.name)));
            }
            bones.push(Bone {
                id,
                name: b.name,
                parent,
                dof: b.dof,
                offset: Point3::from(b.offset),
                limits,
            });
        }
        if bones.is_empty() {
            return Err(invalid("model has no bones".into()));
        }
        let mut parts = Vec::with_capacity(file.parts.len());
        for p in file.parts {
            let bone = *index
                .get(&p.bone)
                .ok_or_else(|| invalid(format!("part {} references unknown bone {}", p.name, p.bone)))?;
            if !(p.t_r > 0.0 && p.b_r > 0.0) {
                return Err(invalid(format!("part {} radii must be > 0", p.name)));
            }
            if !(1..=127).contains(&p.label) {
                return Err(invalid(format!("part {} label must be in 1..=127", p.name)));
            }
            parts.push(FlatPart {
                name: p.name,
                bone,
                t_p: Point3::from(p.t_p),
                b_p: Point3::from(p.b_p),
                t_r: p.t_r,
                b_r: p.b_r,
                label: p.label,
            });
        }
        let mut state_slots = Vec::new();
        let mut limits = Vec::new();
        for b in &bones {
            for (d, l) in b.dof.iter().zip(&b.limits) {
                state_slots.push(b.id * SLOTS_PER_BONE + d.slot());
                limits.push(*l);
            }
        }
        let mut model = SkeletonModel {
            bones,
            parts,
            state_slots,
            limits,
            bind_globals: Vec::new(),
        };
        let bind = model.pose_globals(&model.zero_pose())?;
        model.bind_globals = bind;
        Ok(model)
    }

    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    pub fn parts(&self) -> &[FlatPart] {
        &self.parts
    }

    pub fn dof_count(&self) -> usize {
        self.state_slots.len()
    }

    pub fn full_len(&self) -> usize {
        self.bones.len() * SLOTS_PER_BONE
    }

    /// Limits in state order.
    pub fn limits(&self) -> &[Limit] {
        &self.limits
    }

    /// Global matrices of the bind pose (all DoF zero).
    pub fn bind_globals(&self) -> &[Mat4] {
        &self.bind_globals
    }

    pub fn zero_pose(&self) -> PoseState {
        PoseState::zeros(self.dof_count())
    }

    pub fn bone_index(&self, name: &str) -> Option<usize> {
        self.bones.iter().position(|b| b.name == name)
    }

    /// Index of `dof` of the named bone in the compact state.
    pub fn state_index(&self, bone: &str, dof: Dof) -> Option<usize> {
        let b = self.bone_index(bone)?;
        let slot = b * SLOTS_PER_BONE + dof.slot();
        self.state_slots.iter().position(|&s| s == slot)
    }

    /// Human-readable names like `left_knee.r_y`, in state order.
    pub fn state_labels(&self) -> Vec<String> {
        self.bones
            .iter()
            .flat_map(|b| {
                b.dof.iter().map(move |d| {
                    let n = ["t_x", "t_y", "t_z", "r_x", "r_y", "r_z"][d.slot()];
                    format!("{}.{}", b.name, n)
                })
            })
            .collect()
    }

    fn check_len(&self, s: &PoseState) -> Result<(), SkeletonError> {
        if s.len() != self.dof_count() {
            return Err(SkeletonError::LengthMismatch {
                expected: self.dof_count(),
                got: s.len(),
            });
        }
        Ok(())
    }

    pub fn expand_state(&self, s: &PoseState) -> Result<FullState, SkeletonError> {
        self.check_len(s)?;
        let mut full = vec![0.0; self.full_len()];
        for (&slot, &v) in self.state_slots.iter().zip(&s.0) {
            full[slot] = v;
        }
        Ok(FullState(full))
    }

    /// Reads the DoF slots back out of a full state.
    pub fn collapse_state(&self, fs: &FullState) -> PoseState {
        PoseState(self.state_slots.iter().map(|&slot| fs.0[slot]).collect())
    }

    /// `L_i = T(offset_i + t_i) * Rx * Ry * Rz` per bone.
    pub fn local_matrices(&self, fs: &FullState) -> Vec<Mat4> {
        self.bones
            .iter()
            .map(|b| {
                let s = &fs.0[b.id * SLOTS_PER_BONE..(b.id + 1) * SLOTS_PER_BONE];
                let t = b.offset + Point3::new(s[0], s[1], s[2]);
                Mat4::fused_trxyz(t, s[3], s[4], s[5])
            })
            .collect()
    }

    /// `W_root = L_root`, `W_i = W_parent(i) * L_i`.
    pub fn global_matrices(&self, locals: &[Mat4]) -> Vec<Mat4> {
        let mut out: Vec<Mat4> = Vec::with_capacity(locals.len());
        for (b, l) in self.bones.iter().zip(locals) {
            let w = match b.parent {
                None => *l,
                Some(p) => out[p] * *l,
            };
            out.push(w);
        }
        out
    }

    pub fn pose_globals(&self, s: &PoseState) -> Result<Vec<Mat4>, SkeletonError> {
        let fs = self.expand_state(s)?;
        Ok(self.global_matrices(&self.local_matrices(&fs)))
    }

    pub fn clamp_limits(&self, s: &PoseState) -> PoseState {
        PoseState(
            s.0.iter()
                .zip(&self.limits)
                .map(|(&v, l)| v.clamp(l.lo, l.hi))
                .collect(),
        )
    }

    pub fn clamp_in_place(&self, s: &mut [f64]) {
        for (v, l) in s.iter_mut().zip(&self.limits) {
            *v = v.clamp(l.lo, l.hi);
        }
    }

    /// Virtual markers: skinned `t_p` and `b_p` of every flat part, in part
    /// order.
    pub fn marker_positions(&self, s: &PoseState) -> Result<Vec<Point3>, SkeletonError> {
        let w = self.pose_globals(s)?;
        Ok(self.markers_from_globals(&w))
    }

    pub fn markers_from_globals(&self, w: &[Mat4]) -> Vec<Point3> {
        self.parts
            .iter()
            .flat_map(|p| [skin_point(p.t_p, &w[p.bone]), skin_point(p.b_p, &w[p.bone])])
            .collect()
    }

    pub fn marker_count(&self) -> usize {
        self.parts.len() * 2
    }

    /// Vertical extent (world z) of the bind-pose markers, widened by the
    /// part radii.
    pub fn height(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.parts {
            let w = &self.bind_globals[p.bone];
            for (c, r) in [(p.t_p, p.t_r), (p.b_p, p.b_r)] {
                let z = skin_point(c, w).z;
                lo = lo.min(z - r);
                hi = hi.max(z + r);
            }
        }
        hi - lo
    }
}

/// Rigid skinning of a bone-local point.
pub fn skin_point(v_local: Point3, w: &Mat4) -> Point3 {
    w.transform_point(v_local)
}

/// Maps a point authored in the bind pose into the current pose:
/// `W * B^-1 * v`.
pub fn skin_bind_point(v_bind: Point3, w: &Mat4, bind: &Mat4) -> Result<Point3, SkeletonError> {
    Ok((*w * bind.rigid_inverse()?).transform_point(v_bind))
}

/// Camera-facing trapezoid approximating a truncated cone, winding
/// `v1 -> v2 -> v3 -> v4`.
pub fn trapezoid_vertices(part: &FlatPart, w: &Mat4, cam_pos: Point3) -> Result<[Point3; 4], SkeletonError> {
    let tp = skin_point(part.t_p, w);
    let bp = skin_point(part.b_p, w);
    let u = tp - bp;
    let n = cam_pos - bp;
    let r = u.cross(n);
    let len = r.norm();
    if !(len >= 1e-9) {
        return Err(SkeletonError::DegenerateBillboard);
    }
    Ok(trapezoid_from_axis(tp, bp, part, r.scaled(1.0 / len)))
}

/// Same as [`trapezoid_vertices`] but substitutes a side direction when the
/// bone points straight at the camera: world x made orthogonal to the bone
/// axis (world y if the bone is along x).
pub fn trapezoid_vertices_or_fallback(part: &FlatPart, w: &Mat4, cam_pos: Point3) -> [Point3; 4] {
    match trapezoid_vertices(part, w, cam_pos) {
        Ok(v) => v,
        Err(_) => {
            let tp = skin_point(part.t_p, w);
            let bp = skin_point(part.b_p, w);
            trapezoid_from_axis(tp, bp, part, fallback_side(tp - bp))
        }
    }
}

pub(crate) fn fallback_side(u: Point3) -> Point3 {
    let un = u.norm();
    let axis_dir = if un > 0.0 { u.scaled(1.0 / un) } else { Point3::new(0.0, 0.0, 1.0) };
    for cand in [Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)] {
        let r = cand - axis_dir.scaled(cand.dot(axis_dir));
        let n = r.norm();
        if n > 1e-6 {
            return r.scaled(1.0 / n);
        }
    }
    Point3::new(1.0, 0.0, 0.0)
}

fn trapezoid_from_axis(tp: Point3, bp: Point3, part: &FlatPart, r: Point3) -> [Point3; 4] {
    [
        tp + r.scaled(part.t_r),
        bp + r.scaled(part.b_r),
        bp - r.scaled(part.b_r),
        tp - r.scaled(part.t_r),
    ]
}
