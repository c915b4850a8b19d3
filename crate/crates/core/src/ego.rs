//! Egocentric trajectory representation.
//!
//! Each step stores the xy displacement expressed in the heading frame of the
//! previous step, the absolute root height, the heading increment and the
//! root rotation with its heading removed (6D form). Step 0 instead stores the
//! absolute start position and heading, so editing one step moves every later
//! frame and nothing before it.

use crate::geometry::{heading_of, wrap_angle, HeadingFrame, Rotation, Vec3};
use crate::scalar::Real;

/// Number of scalar components in one step: dx, dy, z, dphi and 6 for eta.
pub const EGO_STEP_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EgoStep<S = f64> {
    pub dx: S,
    pub dy: S,
    pub z: S,
    pub dphi: S,
    /// Heading-free root rotation in 6D form.
    pub eta: [S; 6],
}

impl<S: Real> EgoStep<S> {
    pub fn to_array(&self) -> [S; EGO_STEP_DIM] {
        let e = &self.eta;
        [self.dx, self.dy, self.z, self.dphi, e[0], e[1], e[2], e[3], e[4], e[5]]
    }

    pub fn from_array(a: [S; EGO_STEP_DIM]) -> Self {
        Self {
            dx: a[0],
            dy: a[1],
            z: a[2],
            dphi: a[3],
            eta: [a[4], a[5], a[6], a[7], a[8], a[9]],
        }
    }

    pub fn local_rotation(&self) -> Rotation<S> {
        Rotation::from_6d_unchecked(self.eta)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EgoTrajectory<S = f64> {
    pub steps: Vec<EgoStep<S>>,
    pub fps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalTrajectory<S = f64> {
    pub translations: Vec<Vec3<S>>,
    pub rotations: Vec<Rotation<S>>,
}

impl<S: Real> GlobalTrajectory<S> {
    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }
}

/// Per-frame headings, reusing the previous frame's heading where the root is
/// upside down (zero for a degenerate first frame).
pub fn sequence_headings<S: Real>(rotations: &[Rotation<S>]) -> Vec<S> {
    let mut out = Vec::with_capacity(rotations.len());
    let mut prev = S::zero();
    for r in rotations {
        let h = heading_of(r).unwrap_or(prev);
        out.push(h);
        prev = h;
    }
    out
}

pub fn global_to_ego<S: Real>(traj: &GlobalTrajectory<S>, fps: f64) -> EgoTrajectory<S> {
    assert_eq!(traj.translations.len(), traj.rotations.len(), "trajectory arrays differ in length");
    let headings = sequence_headings(&traj.rotations);
    let mut steps = Vec::with_capacity(traj.len());
    for t in 0..traj.len() {
        let tau = traj.translations[t];
        let phi = headings[t];
        let eta = traj.rotations[t].to_heading(phi).to_6d();
        let step = if t == 0 {
            EgoStep {
                dx: tau.x,
                dy: tau.y,
                z: tau.z,
                dphi: phi,
                eta,
            }
        } else {
            let prev = traj.translations[t - 1];
            let [dx, dy] = [tau.x - prev.x, tau.y - prev.y].to_heading(headings[t - 1]);
            EgoStep {
                dx,
                dy,
                z: tau.z,
                dphi: wrap_angle(phi - headings[t - 1]),
                eta,
            }
        };
        steps.push(step);
    }
    EgoTrajectory { steps, fps }
}

/// Accumulated headings `phi_t = wrap(phi_{t-1} + dphi_t)`, `phi_0 = wrap(dphi_0)`.
pub fn accumulate_headings<S: Real>(ego: &EgoTrajectory<S>) -> Vec<S> {
    let mut out = Vec::with_capacity(ego.steps.len());
    let mut phi = S::zero();
    for (t, s) in ego.steps.iter().enumerate() {
        phi = if t == 0 { wrap_angle(s.dphi) } else { wrap_angle(phi + s.dphi) };
        out.push(phi);
    }
    out
}

pub fn ego_to_global<S: Real>(ego: &EgoTrajectory<S>) -> GlobalTrajectory<S> {
    let headings = accumulate_headings(ego);
    let mut translations = Vec::with_capacity(ego.steps.len());
    let mut rotations = Vec::with_capacity(ego.steps.len());
    let (mut x, mut y) = (S::zero(), S::zero());
    for (t, s) in ego.steps.iter().enumerate() {
        if t == 0 {
            x = s.dx;
            y = s.dy;
        } else {
            let [ddx, ddy] = [s.dx, s.dy].from_heading(headings[t - 1]);
            x = x + ddx;
            y = y + ddy;
        }
        translations.push(Vec3::new(x, y, s.z));
        rotations.push(s.local_rotation().from_heading(headings[t]));
    }
    GlobalTrajectory {
        translations,
        rotations,
    }
}

/// Replaces the start position and heading stored in step 0.
pub fn apply_start_override<S: Real>(ego: &EgoTrajectory<S>, x0: S, y0: S, phi0: S) -> EgoTrajectory<S> {
    let mut out = ego.clone();
    if let Some(s) = out.steps.first_mut() {
        s.dx = x0;
        s.dy = y0;
        s.dphi = phi0;
    }
    out
}
