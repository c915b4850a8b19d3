//! A 24-joint articulated body with linear shape blending on bone offsets.
//!
//! The joint table, shape basis and capsule radii are loaded from
//! `data/body_template.json`. Parameters follow the usual layout: a root
//! translation and rotation, 23 local joint rotations (axis-angle) and a
//! 10-dimensional shape vector.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};
use crate::scalar::Real;

pub const NUM_JOINTS: usize = 24;
pub const NUM_BODY_JOINTS: usize = NUM_JOINTS - 1;
pub const NUM_BETAS: usize = 10;
pub const NUM_BONES: usize = NUM_JOINTS - 1;
pub const MARKERS_PER_BONE: usize = 2;
pub const NUM_MARKERS: usize = MARKERS_PER_BONE * NUM_BONES;
pub const MIN_CAPSULE_RADIUS: f64 = 0.005;
pub const TEMPLATE_SCHEMA_VERSION: u32 = 1;

const BUNDLED_TEMPLATE: &str = include_str!("../data/body_template.json");
const MARKER_FRACTIONS: [f64; MARKERS_PER_BONE] = [1.0 / 3.0, 2.0 / 3.0];

#[derive(Clone, Debug)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    /// Template offset from the parent joint, in the parent's frame (meters).
    pub offset: Vec3<f64>,
    /// Offset delta per unit of each shape coefficient.
    pub shape_basis: [Vec3<f64>; NUM_BETAS],
    /// Radius of the capsule on the bone ending at this joint.
    pub capsule_radius: f64,
    pub radius_shape_row: [f64; NUM_BETAS],
}

#[derive(Clone, Debug)]
pub struct KinematicTree {
    joints: Vec<JointSpec>,
}

#[derive(Deserialize)]
struct TemplateFile {
    schema_version: u32,
    joints: Vec<TemplateJoint>,
}

#[derive(Deserialize)]
struct TemplateJoint {
    name: String,
    parent: Option<usize>,
    offset: [f64; 3],
    shape_basis: Vec<[f64; 3]>,
    #[serde(default)]
    capsule_radius: f64,
    #[serde(default)]
    radius_shape_row: Option<Vec<f64>>,
}

impl KinematicTree {
    /// The template shipped with the crate.
    pub fn standard() -> Self {
        Self::from_json(BUNDLED_TEMPLATE).expect("bundled body template is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TemplateFile = serde_json::from_str(text)?;
        if file.schema_version > TEMPLATE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: file.schema_version,
                supported: TEMPLATE_SCHEMA_VERSION,
            });
        }
        let mut joints = Vec::with_capacity(file.joints.len());
        for j in file.joints {
            if j.shape_basis.len() != NUM_BETAS {
                return Err(Error::LengthMismatch {
                    what: format!("shape basis of joint {}", j.name),
                    expected: NUM_BETAS,
                    got: j.shape_basis.len(),
                });
            }
            let mut basis = [Vec3::zero(); NUM_BETAS];
            for (b, row) in basis.iter_mut().zip(&j.shape_basis) {
                *b = Vec3::from_array(*row);
            }
            let mut row = [0.0; NUM_BETAS];
            if let Some(r) = &j.radius_shape_row {
                if r.len() != NUM_BETAS {
                    return Err(Error::LengthMismatch {
                        what: format!("radius shape row of joint {}", j.name),
                        expected: NUM_BETAS,
                        got: r.len(),
                    });
                }
                row.copy_from_slice(r);
            }
            joints.push(JointSpec {
                name: j.name,
                parent: j.parent,
                offset: Vec3::from_array(j.offset),
                shape_basis: basis,
                capsule_radius: j.capsule_radius,
                radius_shape_row: row,
            });
        }
        let tree = Self { joints };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.joints.len() != NUM_JOINTS {
            return Err(Error::LengthMismatch {
                what: "body template joints".into(),
                expected: NUM_JOINTS,
                got: self.joints.len(),
            });
        }
        for (j, spec) in self.joints.iter().enumerate() {
            match (j, spec.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::InvalidConfig("root joint must not have a parent".into())),
                (_, Some(p)) if p < j => {
                    if !(spec.offset.norm() > 0.0) {
                        return Err(Error::InvalidConfig(format!("bone `{}` has zero length", spec.name)));
                    }
                    if spec.capsule_radius < 0.0 {
                        return Err(Error::InvalidConfig(format!("bone `{}` has negative radius", spec.name)));
                    }
                }
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "joint `{}` is not in topological order",
                        spec.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    /// Parent-frame bone offset for shape `beta`.
    pub fn shaped_offset<S: Real>(&self, j: usize, beta: &[S; NUM_BETAS]) -> Vec3<S> {
        let spec = &self.joints[j];
        let mut o = spec.offset.cast::<S>();
        for (b, d) in beta.iter().zip(&spec.shape_basis) {
            o += d.cast::<S>().scale(*b);
        }
        o
    }

    /// Capsule radius of the bone ending at `j` before clamping.
    pub fn shaped_radius<S: Real>(&self, j: usize, beta: &[S; NUM_BETAS]) -> S {
        let spec = &self.joints[j];
        let mut s = S::one();
        for (b, r) in beta.iter().zip(&spec.radius_shape_row) {
            s = s + *b * S::c(*r);
        }
        S::c(spec.capsule_radius) * s
    }

    /// Sum of template bone lengths from `j` down to its deepest descendant.
    pub fn descendant_chain_length(&self, j: usize) -> f64 {
        self.joints
            .iter()
            .enumerate()
            .filter(|(_, s)| s.parent == Some(j))
            .map(|(c, s)| s.offset.norm() + self.descendant_chain_length(c))
            .fold(0.0, f64::max)
    }
}

/// Local joint rotations (axis-angle, radians) of the 23 non-root joints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyPose<S = f64> {
    pub theta: [[S; 3]; NUM_BODY_JOINTS],
}

impl<S: Real> BodyPose<S> {
    pub fn rest() -> Self {
        Self {
            theta: [[S::zero(); 3]; NUM_BODY_JOINTS],
        }
    }

    /// Reduces every axis-angle magnitude into [0, 2π).
    pub fn canonicalized(mut self) -> Self {
        let two_pi = S::c(std::f64::consts::TAU);
        for w in self.theta.iter_mut() {
            let v = Vec3::from_array(*w);
            let n = v.norm();
            if n >= two_pi {
                let r = n % two_pi;
                *w = v.scale(r / n).to_array();
            }
        }
        self
    }

    pub fn joint_rotation(&self, body_joint: usize) -> Rotation<S> {
        Rotation::from_axis_angle(Vec3::from_array(self.theta[body_joint]))
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().flatten().all(|v| v.is_finite())
    }
}

impl<S: Real> Default for BodyPose<S> {
    fn default() -> Self {
        Self::rest()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyShape<S = f64> {
    pub beta: [S; NUM_BETAS],
}

impl<S: Real> BodyShape<S> {
    pub fn mean() -> Self {
        Self {
            beta: [S::zero(); NUM_BETAS],
        }
    }

    /// Human-readable warnings for components outside [−5, 5].
    pub fn warnings(&self) -> Vec<String> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| b.abs() > S::c(5.0))
            .map(|(k, b)| format!("shape component {k} = {:.3} is outside [-5, 5]", b.re()))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.beta.iter().all(|v| v.is_finite())
    }
}

impl<S: Real> Default for BodyShape<S> {
    fn default() -> Self {
        Self::mean()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalPose<S = f64> {
    pub tau: Vec3<S>,
    pub gamma: Rotation<S>,
    pub theta: BodyPose<S>,
    pub beta: BodyShape<S>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule<S = f64> {
    pub a: Vec3<S>,
    pub b: Vec3<S>,
    pub radius: S,
}

struct Posed<S> {
    positions: Vec<Vec3<S>>,
    rotations: Vec<Rotation<S>>,
}

fn forward<S: Real>(q: &GlobalPose<S>, tree: &KinematicTree) -> Posed<S> {
    let mut positions = Vec::with_capacity(NUM_JOINTS);
    let mut rotations = Vec::with_capacity(NUM_JOINTS);
    positions.push(q.tau);
    rotations.push(q.gamma);
    for j in 1..NUM_JOINTS {
        let p = tree.joints[j].parent.expect("validated tree");
        let offset = tree.shaped_offset(j, &q.beta.beta);
        let pos = positions[p] + rotations[p].apply(offset);
        let rot = rotations[p].compose(&q.theta.joint_rotation(j - 1));
        positions.push(pos);
        rotations.push(rot);
    }
    Posed { positions, rotations }
}

/// Forward kinematics: world positions of all 24 joints.
pub fn joint_positions<S: Real>(q: &GlobalPose<S>, tree: &KinematicTree) -> Vec<Vec3<S>> {
    forward(q, tree).positions
}

/// Two markers per bone at 1/3 and 2/3 of its length, pushed out by the
/// bone's capsule radius along two directions perpendicular to the bone.
pub fn surface_markers<S: Real>(q: &GlobalPose<S>, tree: &KinematicTree) -> Vec<Vec3<S>> {
    let posed = forward(q, tree);
    let mut out = Vec::with_capacity(NUM_MARKERS);
    for j in 1..NUM_JOINTS {
        let p = tree.joints[j].parent.expect("validated tree");
        let offset = tree.shaped_offset(j, &q.beta.beta);
        let radius = tree.shaped_radius(j, &q.beta.beta).max(S::zero());
        let (n1, n2) = perpendiculars(offset);
        for (k, f) in MARKER_FRACTIONS.iter().enumerate() {
            let n = if k == 0 { n1 } else { n2 };
            let local = offset.scale(S::c(*f)) + n.scale(radius);
            out.push(posed.positions[p] + posed.rotations[p].apply(local));
        }
    }
    out
}

fn perpendiculars<S: Real>(v: Vec3<S>) -> (Vec3<S>, Vec3<S>) {
    let d = v.normalized();
    let reference = if d.x.abs() < S::c(0.9) {
        Vec3::unit_x()
    } else {
        Vec3::unit_y()
    };
    let n1 = d.cross(reference).normalized();
    (n1, d.cross(n1))
}

/// One capsule per parent-child bone, radius clamped to at least 5 mm.
pub fn bone_capsules<S: Real>(q: &GlobalPose<S>, tree: &KinematicTree) -> Vec<Capsule<S>> {
    let posed = forward(q, tree);
    (1..NUM_JOINTS)
        .map(|j| {
            let p = tree.joints[j].parent.expect("validated tree");
            Capsule {
                a: posed.positions[p],
                b: posed.positions[j],
                radius: tree.shaped_radius(j, &q.beta.beta).max(S::c(MIN_CAPSULE_RADIUS)),
            }
        })
        .collect()
}

/// Body geometry expressed in the root frame (root at the origin, identity
/// orientation). Pose and shape stay fixed during trajectory optimization, so
/// world geometry is `tau + gamma · local`.
#[derive(Clone, Debug)]
pub struct RootLocalBody {
    pub joints: Vec<Vec3<f64>>,
    pub markers: Vec<Vec3<f64>>,
    pub capsules: Vec<Capsule<f64>>,
    /// Radius of a root-centred sphere containing every capsule.
    pub bounding_radius: f64,
}

impl RootLocalBody {
    pub fn new(theta: &BodyPose<f64>, beta: &BodyShape<f64>, tree: &KinematicTree) -> Self {
        let q = GlobalPose {
            tau: Vec3::zero(),
            gamma: Rotation::identity(),
            theta: *theta,
            beta: *beta,
        };
        let capsules = bone_capsules(&q, tree);
        let bounding_radius = capsules
            .iter()
            .map(|c| c.a.norm().max(c.b.norm()) + c.radius)
            .fold(0.0, f64::max);
        Self {
            joints: joint_positions(&q, tree),
            markers: surface_markers(&q, tree),
            capsules,
            bounding_radius,
        }
    }
}
