//! Per-person global motion: root trajectory plus body pose and shape.

use crate::body::{joint_positions, surface_markers, BodyPose, BodyShape, GlobalPose, KinematicTree};
use crate::ego::GlobalTrajectory;
use crate::error::{Error, Result};
use crate::geometry::{Transform, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMotion {
    /// First scene frame of the motion.
    pub start: usize,
    pub trajectory: GlobalTrajectory,
    pub theta: Vec<BodyPose>,
    pub beta: Vec<BodyShape>,
    pub fps: f64,
}

impl GlobalMotion {
    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        for (what, got) in [
            ("rotations", self.trajectory.rotations.len()),
            ("theta", self.theta.len()),
            ("beta", self.beta.len()),
        ] {
            if got != m {
                return Err(Error::LengthMismatch {
                    what: format!("motion {what}"),
                    expected: m,
                    got,
                });
            }
        }
        Ok(())
    }

    pub fn pose(&self, k: usize) -> GlobalPose {
        GlobalPose {
            tau: self.trajectory.translations[k],
            gamma: self.trajectory.rotations[k],
            theta: self.theta[k],
            beta: self.beta[k],
        }
    }

    pub fn root(&self, k: usize) -> Transform<f64> {
        Transform::new(self.trajectory.rotations[k], self.trajectory.translations[k])
    }

    pub fn joints(&self, tree: &KinematicTree) -> Vec<Vec<Vec3<f64>>> {
        (0..self.len()).map(|k| joint_positions(&self.pose(k), tree)).collect()
    }

    pub fn markers(&self, tree: &KinematicTree) -> Vec<Vec<Vec3<f64>>> {
        (0..self.len()).map(|k| surface_markers(&self.pose(k), tree)).collect()
    }

    /// Applies a rigid transform to the whole motion.
    pub fn transformed(&self, g: &Transform<f64>) -> Self {
        let mut out = self.clone();
        for k in 0..self.len() {
            let r = g.compose(&self.root(k));
            out.trajectory.rotations[k] = r.rotation;
            out.trajectory.translations[k] = r.translation;
        }
        out
    }
}
