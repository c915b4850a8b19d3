//! Pinhole camera, extrinsics initialization and SE(3) projection.
//!
//! Poses are camera-to-world. Camera axes: x right, y down, z forward.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Rotation, Transform, Vec3};
use crate::scalar::Real;

/// Points closer than this to the image plane (camera-frame z) are invalid.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width
            && self.cy > 0.0
            && self.cy < self.height
            && [self.fx, self.fy, self.cx, self.cy, self.width, self.height].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid intrinsics {self:?}")))
        }
    }
}

/// Principal point at the image centre, focal length `max(width, height)`.
pub fn default_intrinsics(width: f64, height: f64) -> Intrinsics {
    let f = width.max(height);
    Intrinsics {
        fx: f,
        fy: f,
        cx: width / 2.0,
        cy: height / 2.0,
        width,
        height,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraTrack {
    pub poses: Vec<Transform<f64>>,
    pub intrinsics: Intrinsics,
}

/// Projects one camera-frame point. `None` when the point is not in front.
#[inline]
pub fn project_camera_point<S: Real>(p: Vec3<S>, k: &Intrinsics) -> Option<[S; 2]> {
    if p.z.re() <= MIN_DEPTH {
        return None;
    }
    Some([S::c(k.fx) * p.x / p.z + S::c(k.cx), S::c(k.fy) * p.y / p.z + S::c(k.cy)])
}

#[inline]
pub fn project_point<S: Real>(x: Vec3<S>, pose: &Transform<S>, k: &Intrinsics) -> Option<[S; 2]> {
    project_camera_point(pose.apply_inverse(x), k)
}

/// Projects world points; invalid points come back as `None`.
pub fn project<S: Real>(points: &[Vec3<S>], pose: &Transform<S>, k: &Intrinsics) -> Vec<Option<[S; 2]>> {
    points.iter().map(|&x| project_point(x, pose, k)).collect()
}

/// Camera uprightness `<C^y, Y>`: world z-component of the camera y-axis.
#[inline]
pub fn uprightness<S: Real>(pose: &Transform<S>) -> S {
    pose.rotation.matrix().m[2][1]
}

/// Nearest SE(3) element to a 4×4 matrix (the bottom row is ignored).
pub fn project_to_se3(m: &[[f64; 4]; 4]) -> Result<Transform<f64>> {
    let block = Matrix3::from_fn(|r, c| m[r][c]);
    let rot = nearest_rotation(&block)?;
    Ok(Transform::new(rot, Vec3::new(m[0][3], m[1][3], m[2][3])))
}

fn nearest_rotation(block: &Matrix3<f64>) -> Result<Rotation<f64>> {
    if !block.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("non-finite rotation block".into()));
    }
    let svd = block.svd(true, true);
    let smin = svd.singular_values.min();
    if smin < 1e-9 {
        return Err(Error::RankDeficient(smin));
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    Ok(Rotation::from_matrix_unchecked(Mat3 {
        m: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
    }))
}

/// Per-frame camera poses from `C_t = Ω(mean_i P_global · P_cam⁻¹)` over the
/// persons visible at frame t.
///
/// `global[i][t]` and `cam[i][t]` are indexed by scene frame; entries where
/// `visible[i][t]` is false are ignored. Frames without a visible person hold
/// the previous pose; leading ones take the first initialized pose.
pub fn init_extrinsics(
    global: &[Vec<Transform<f64>>],
    cam: &[Vec<Transform<f64>>],
    visible: &[Vec<bool>],
    frames: usize,
) -> Result<Vec<Transform<f64>>> {
    if global.len() != cam.len() || global.len() != visible.len() {
        return Err(Error::LengthMismatch {
            what: "persons in camera initialization".into(),
            expected: global.len(),
            got: cam.len().min(visible.len()),
        });
    }
    let mut out: Vec<Option<Transform<f64>>> = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut acc = [[0.0f64; 4]; 4];
        let mut n = 0usize;
        for i in 0..global.len() {
            if !visible[i].get(t).copied().unwrap_or(false) {
                continue;
            }
            let m = global[i][t].compose(&cam[i][t].inverse()).to_matrix4();
            for r in 0..4 {
                for c in 0..4 {
                    acc[r][c] += m[r][c];
                }
            }
            n += 1;
        }
        if n == 0 {
            out.push(None);
            continue;
        }
        for row in acc.iter_mut() {
            for v in row.iter_mut() {
                *v /= n as f64;
            }
        }
        out.push(Some(project_to_se3(&acc)?));
    }
    let first = out.iter().flatten().next().copied().ok_or(Error::NoVisiblePerson)?;
    let mut prev = first;
    Ok(out
        .into_iter()
        .map(|p| {
            if let Some(p) = p {
                prev = p;
            }
            prev
        })
        .collect())
}
