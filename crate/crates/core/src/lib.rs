//! Lane-marker projection from a sparse two-view street model.
//!
//! The crate reconstructs feature and lane-marker points from two
//! location-matched database images, registers a degraded current view
//! against them with PnP and projects the lane markers into that view.

pub mod database;
pub mod epipolar;
pub mod error;
pub mod features;
pub mod geometry;
pub mod image;
pub mod lane_matching;
pub mod lanes;
pub mod pipeline;
pub mod polar;
pub mod registration;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, Pixel, Point3D, RigidPose};
