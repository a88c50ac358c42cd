//! Forward Tsai projection with one radial distortion coefficient.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat4, Point3};

/// Camera-space depth below which a point counts as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

const SOLVE_TOL: f64 = 1e-12;
const NEWTON_MAX_ITERS: usize = 20;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("invalid camera parameters: {0}")]
    InvalidParams(String),
    #[error("camera rig io: {0}")]
    Io(#[from] std::io::Error),
    #[error("camera rig json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Calibrated camera. Extrinsics map world to camera frame as
/// `p_k = Rx(r_x) Ry(r_y) Rz(r_z) p_w + t`; the camera looks along its +z
/// axis with image y pointing down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsaiCamera {
    pub r_x: f64,
    pub r_y: f64,
    pub r_z: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
    /// Focal length, mm.
    pub f: f64,
    /// Radial distortion, mm^-2.
    pub kappa: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub s_x: f64,
    /// Effective pixel pitch, mm/px.
    pub d_px: f64,
    pub d_py: f64,
    pub img_w: u32,
    pub img_h: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
    /// Camera-space z, mm.
    pub depth: f64,
}

impl TsaiCamera {
    pub fn validate(&self) -> Result<(), CameraError> {
        let finite = [
            self.r_x, self.r_y, self.r_z, self.t_x, self.t_y, self.t_z, self.f, self.kappa,
            self.c_x, self.c_y, self.s_x, self.d_px, self.d_py,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(CameraError::InvalidParams("non-finite parameter".into()));
        }
        if self.f <= 0.0 {
            return Err(CameraError::InvalidParams(format!("f = {} must be > 0", self.f)));
        }
        if self.d_px <= 0.0 || self.d_py <= 0.0 {
            return Err(CameraError::InvalidParams("pixel pitch must be > 0".into()));
        }
        if self.img_w == 0 || self.img_h == 0 {
            return Err(CameraError::InvalidParams("image size must be >= 1".into()));
        }
        Ok(())
    }

    /// World-to-camera rigid transform.
    pub fn extrinsic(&self) -> Mat4 {
        Mat4::fused_trxyz(
            Point3::new(self.t_x, self.t_y, self.t_z),
            self.r_x,
            self.r_y,
            self.r_z,
        )
    }

    pub fn world_to_camera(&self, p_w: Point3) -> Point3 {
        self.extrinsic().transform_point(p_w)
    }

    /// Optical centre in world coordinates, `-R^T t`.
    pub fn center(&self) -> Point3 {
        let e = self.extrinsic();
        let t = e.translation_part();
        let m = &e.0;
        -Point3::new(
            m[0][0] * t.x + m[1][0] * t.y + m[2][0] * t.z,
            m[0][1] * t.x + m[1][1] * t.y + m[2][1] * t.z,
            m[0][2] * t.x + m[1][2] * t.y + m[2][2] * t.z,
        )
    }

    pub fn project(&self, p_w: Point3) -> Result<PixelCoord, CameraError> {
        self.project_camera(self.world_to_camera(p_w))
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project_camera(&self, p_k: Point3) -> Result<PixelCoord, CameraError> {
        if !(p_k.z > MIN_DEPTH) {
            return Err(CameraError::BehindCamera(p_k.z));
        }
        let x_u = self.f * p_k.x / p_k.z;
        let y_u = self.f * p_k.y / p_k.z;
        let (x_d, y_d) = undistorted_to_distorted(self.kappa, x_u, y_u);
        Ok(PixelCoord {
            x: self.s_x * x_d / self.d_px + self.c_x,
            y: y_d / self.d_py + self.c_y,
            depth: p_k.z,
        })
    }

    /// Builds a camera at `eye` looking at `target`, with `up` mapping to
    /// image-up. The rotation is decomposed into the `Rx Ry Rz` angles this
    /// type stores.
    pub fn look_at(eye: Point3, target: Point3, up: Point3, intrinsics: Intrinsics) -> TsaiCamera {
        let fwd = (target - eye).scaled(1.0 / (target - eye).norm());
        let right = fwd.cross(up);
        let right = right.scaled(1.0 / right.norm());
        // image y runs downwards
        let down = fwd.cross(right);
        // rows of R are the camera axes in world coordinates
        let r = [right.to_array(), down.to_array(), fwd.to_array()];
        let beta = r[0][2].clamp(-1.0, 1.0).asin();
        let alpha = (-r[1][2]).atan2(r[2][2]);
        let gamma = (-r[0][1]).atan2(r[0][0]);
        let rot = Mat4::fused_trxyz(Point3::ZERO, alpha, beta, gamma);
        let t = -rot.transform_point(eye);
        TsaiCamera {
            r_x: alpha,
            r_y: beta,
            r_z: gamma,
            t_x: t.x,
            t_y: t.y,
            t_z: t.z,
            f: intrinsics.f,
            kappa: intrinsics.kappa,
            c_x: intrinsics.img_w as f64 / 2.0,
            c_y: intrinsics.img_h as f64 / 2.0,
            s_x: 1.0,
            d_px: intrinsics.pixel_pitch,
            d_py: intrinsics.pixel_pitch,
            img_w: intrinsics.img_w,
            img_h: intrinsics.img_h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub f: f64,
    pub kappa: f64,
    pub pixel_pitch: f64,
    pub img_w: u32,
    pub img_h: u32,
}

/// Inverts `x_u = x_d (1 + k r^2)`, `r^2 = x_d^2 + y_d^2`.
///
/// The distorted point is `s * (x_u, y_u)` for a scalar `s` solving
/// `k r_u^2 s^3 + s - 1 = 0`. Newton from `s = 1`, bisection on a bracket
/// when Newton fails. When `k < 0` and `|k| r_u^2 > 4/27` the lens model has
/// no positive root and the (negative) real root is returned.
pub fn undistorted_to_distorted(kappa: f64, x_u: f64, y_u: f64) -> (f64, f64) {
    if kappa == 0.0 {
        return (x_u, y_u);
    }
    let r_u2 = x_u * x_u + y_u * y_u;
    if r_u2 == 0.0 {
        return (0.0, 0.0);
    }
    let a = kappa * r_u2;
    let s = solve_radial_scale(a);
    (s * x_u, s * y_u)
}

/// Root of `a s^3 + s - 1 = 0`.
pub(crate) fn solve_radial_scale(a: f64) -> f64 {
    let g = |s: f64| a * s * s * s + s - 1.0;
    let mut s = 1.0;
    for _ in 0..NEWTON_MAX_ITERS {
        let r = g(s);
        if r.abs() <= SOLVE_TOL {
            return s;
        }
        let d = 3.0 * a * s * s + 1.0;
        if d.abs() < 1e-300 {
            break;
        }
        let next = s - r / d;
        if !next.is_finite() {
            break;
        }
        s = next;
    }
    if g(s).abs() <= SOLVE_TOL {
        return s;
    }
    let (lo, hi) = radial_bracket(a);
    bisect(g, lo, hi)
}

fn radial_bracket(a: f64) -> (f64, f64) {
    if a > 0.0 {
        return (0.0, 1.0);
    }
    let b = -a;
    if b <= 4.0 / 27.0 {
        // g rises from g(1) = -b < 0 to its maximum at 1/sqrt(3b)
        (1.0, 1.0 / (3.0 * b).sqrt())
    } else {
        // only a negative root: g(0) = -1 and g(-L) > 0 for L below
        let l = 2.0f64.max(2.0 / b.sqrt());
        (-l, 0.0)
    }
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid == 0.0 || (hi - lo).abs() < 1e-16 {
            return mid;
        }
        if (g_mid < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordered list of cameras, stored as a JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraRig {
    pub cameras: Vec<TsaiCamera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<TsaiCamera>) -> Result<Self, CameraError> {
        if cameras.is_empty() {
            return Err(CameraError::InvalidParams("rig needs at least one camera".into()));
        }
        for c in &cameras {
            c.validate()?;
        }
        Ok(Self { cameras })
    }

    pub fn from_json(text: &str) -> Result<Self, CameraError> {
        let cameras: Vec<TsaiCamera> = serde_json::from_str(text)?;
        Self::new(cameras)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CameraError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CameraError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// `count` cameras evenly spaced on a horizontal ring around `target`
    /// (world z is up), all aimed at `target`.
    pub fn ring(count: usize, radius: f64, height: f64, target: Point3, intrinsics: Intrinsics) -> Self {
        let cameras = (0..count)
            .map(|i| {
                let phi = std::f64::consts::TAU * i as f64 / count as f64;
                let eye = Point3::new(
                    target.x + radius * phi.cos(),
                    target.y + radius * phi.sin(),
                    height,
                );
                TsaiCamera::look_at(eye, target, Point3::new(0.0, 0.0, 1.0), intrinsics)
            })
            .collect();
        Self { cameras }
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}
