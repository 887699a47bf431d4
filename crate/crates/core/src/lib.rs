//! Exposure-robust monocular tracking toolkit: SE(3) pose algebra, trajectory
//! metrics (APE / RMSE), four-level image pyramids, global and local exposure
//! correction, a procedural endoscopy-like tube renderer and a direct
//! photometric tracker.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, process
//! execution and the command line live in `exposlam-cli`.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod camera;
pub mod enhance;
pub mod geometry;
pub mod image;
pub mod metrics;
pub mod odometry;
pub mod pyramid;
pub mod simulator;
pub mod trajectory;

pub use camera::CameraModel;
pub use geometry::{Pose, Twist};
pub use image::{DepthMap, Image};
pub use trajectory::{Trajectory, TrajectoryPoint};
