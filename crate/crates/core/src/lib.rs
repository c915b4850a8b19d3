//! Global trajectories of occluded people and the moving camera that filmed
//! them, recovered from camera-frame pose observations.
//!
//! Geometry and energy code is generic over [`scalar::Real`]; the aliases
//! below fix the scalar for the common cases.

pub mod body;
pub mod camera;
pub mod ego;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod infill;
pub mod metrics;
pub mod motion;
pub mod optim;
pub mod pipeline;
pub mod scalar;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};

pub type Vec3f = geometry::Vec3<f32>;
pub type Vec3d = geometry::Vec3<f64>;
pub type Rotationf = geometry::Rotation<f32>;
pub type Rotationd = geometry::Rotation<f64>;
pub type Transformf = geometry::Transform<f32>;
pub type Transformd = geometry::Transform<f64>;
pub type EgoTrajectoryf = ego::EgoTrajectory<f32>;
pub type EgoTrajectoryd = ego::EgoTrajectory<f64>;
pub type GlobalTrajectoryf = ego::GlobalTrajectory<f32>;
pub type GlobalTrajectoryd = ego::GlobalTrajectory<f64>;
