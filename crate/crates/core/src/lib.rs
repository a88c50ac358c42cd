//! Markerless 3D human pose tracking: an articulated flat-part model rendered
//! into calibrated cameras, scored against silhouette and edge features, and
//! tracked over frames with particle swarm optimization or a particle filter.

pub mod camera;
pub mod geometry;
pub mod imaging;
pub mod objective;
pub mod optimize;
pub mod pipeline;
pub mod render;
pub mod skeleton;

pub use camera::{CameraError, CameraRig, Intrinsics, PixelCoord, TsaiCamera};
pub use geometry::{Axis, GeometryError, Mat4, Point3};
pub use skeleton::{FlatPart, FullState, PoseState, SkeletonError, SkeletonModel};
