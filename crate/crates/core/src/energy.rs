//! Five-term scene energy and its gradient.
//!
//! Parameters are the egocentric steps of every person followed by a
//! quaternion and translation per camera frame. Every residual block depends
//! on a handful of intermediate quantities (a person's root translation,
//! heading and heading-free rotation at one frame, and one or two camera
//! poses), so blocks are differentiated with small dual numbers and the
//! per-frame root gradients are pushed back through the egocentric
//! accumulation in a single reverse sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{BodyPose, BodyShape, KinematicTree, RootLocalBody, NUM_JOINTS};
use crate::camera::{project_camera_point, CameraTrack, Intrinsics};
use crate::ego::{accumulate_headings, EgoStep, EgoTrajectory, EGO_STEP_DIM};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Rotation, Transform, Vec3};
use crate::scalar::{Dual, Real};

pub const TERM_NAMES: [&str; 5] = ["e_2d", "e_traj", "e_reg", "e_cam", "e_pen"];
const CAM_DIM: usize = 7;
const U_DIM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyCoefficients {
    pub lambda_2d: f64,
    pub lambda_traj: f64,
    pub lambda_reg: f64,
    pub lambda_cam: f64,
    pub lambda_pen: f64,
    pub w_t: f64,
    /// Weights for (dx, dy, z, dphi, eta); the eta weight covers all six components.
    pub w_psi: [f64; 5],
}

impl Default for EnergyCoefficients {
    fn default() -> Self {
        Self {
            lambda_2d: 1.0,
            lambda_traj: 1e5,
            lambda_reg: 100.0,
            lambda_cam: 1e4,
            lambda_pen: 1e5,
            w_t: 0.0,
            w_psi: [3.0, 10.0, 10000.0, 5.0, 10000.0],
        }
    }
}

impl EnergyCoefficients {
    pub fn lambdas(&self) -> [f64; 5] {
        [self.lambda_2d, self.lambda_traj, self.lambda_reg, self.lambda_cam, self.lambda_pen]
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.lambdas().into_iter().chain([self.w_t]).chain(self.w_psi);
        for v in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("energy coefficients must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Coefficients actually used for a scene: the penetration term is
    /// switched off when there is only one person.
    pub fn effective(&self, persons: usize) -> Self {
        let mut c = *self;
        if persons < 2 {
            c.lambda_pen = 0.0;
        }
        c
    }

    fn psi_weight(&self, component: usize) -> f64 {
        self.w_psi[component.min(4)]
    }
}

/// Detected 2D keypoints with per-joint confidence. Zero confidence marks a
/// missing detection.
#[derive(Clone, Debug, PartialEq)]
pub struct Keypoints {
    pub xy: Vec<[f64; 2]>,
    pub conf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonTrack {
    pub id: u32,
    /// First scene frame of the span.
    pub start: usize,
    pub visible: Vec<bool>,
    pub theta: Vec<BodyPose>,
    pub beta: Vec<BodyShape>,
    pub ego: EgoTrajectory,
    pub anchor: EgoTrajectory,
    /// Camera-frame root pose from the pose estimator.
    pub cam_obs: Vec<Option<Transform<f64>>>,
    pub keypoints: Vec<Option<Keypoints>>,
}

impl PersonTrack {
    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    /// One past the last scene frame of the span.
    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    pub fn covers(&self, frame: usize) -> bool {
        frame >= self.start && frame < self.end()
    }

    /// True where the frame is visible and carries observations.
    pub fn observed(&self, k: usize) -> bool {
        self.visible[k] && self.cam_obs[k].is_some() && self.keypoints[k].is_some()
    }

    pub fn validate(&self, frames: usize) -> Result<()> {
        let m = self.len();
        if m == 0 {
            return Err(Error::InvalidConfig(format!("person {} has an empty span", self.id)));
        }
        if self.end() > frames {
            return Err(Error::LengthMismatch {
                what: format!("person {} span end vs scene frames", self.id),
                expected: frames,
                got: self.end(),
            });
        }
        let lens = [
            ("theta", self.theta.len()),
            ("beta", self.beta.len()),
            ("ego", self.ego.steps.len()),
            ("anchor", self.anchor.steps.len()),
            ("cam_obs", self.cam_obs.len()),
            ("keypoints", self.keypoints.len()),
        ];
        for (what, got) in lens {
            if got != m {
                return Err(Error::LengthMismatch {
                    what: format!("person {} {what}", self.id),
                    expected: m,
                    got,
                });
            }
        }
        for k in 0..m {
            if self.visible[k] && (self.cam_obs[k].is_none() || self.keypoints[k].is_none()) {
                return Err(Error::Schema(format!(
                    "person {} frame {} is visible but has no observation",
                    self.id,
                    self.start + k
                )));
            }
            if let Some(kp) = &self.keypoints[k] {
                if kp.xy.len() != NUM_JOINTS || kp.conf.len() != NUM_JOINTS {
                    return Err(Error::LengthMismatch {
                        what: format!("person {} keypoints at frame {}", self.id, self.start + k),
                        expected: NUM_JOINTS,
                        got: kp.xy.len().min(kp.conf.len()),
                    });
                }
            }
        }
        if !self.ego.steps.iter().chain(&self.anchor.steps).all(EgoStep::is_finite) {
            return Err(Error::Numerical(format!("person {} has non-finite trajectory values", self.id)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneProblem {
    pub persons: Vec<PersonTrack>,
    pub camera: CameraTrack,
    pub fps: f64,
}

impl SceneProblem {
    pub fn frames(&self) -> usize {
        self.camera.poses.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames() == 0 {
            return Err(Error::InvalidConfig("scene has no frames".into()));
        }
        if self.persons.is_empty() {
            return Err(Error::InvalidConfig("scene has no persons".into()));
        }
        self.camera.intrinsics.validate()?;
        for p in &self.persons {
            p.validate(self.frames())?;
        }
        Ok(())
    }
}

/// Unweighted (but normalized) energy terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub e_2d: f64,
    pub e_traj: f64,
    pub e_reg: f64,
    pub e_cam: f64,
    pub e_pen: f64,
}

impl EnergyTerms {
    pub fn to_array(&self) -> [f64; 5] {
        [self.e_2d, self.e_traj, self.e_reg, self.e_cam, self.e_pen]
    }

    fn from_array(a: [f64; 5]) -> Self {
        Self {
            e_2d: a[0],
            e_traj: a[1],
            e_reg: a[2],
            e_cam: a[3],
            e_pen: a[4],
        }
    }

    pub fn total(&self, c: &EnergyCoefficients) -> f64 {
        self.to_array().iter().zip(c.lambdas()).map(|(e, l)| e * l).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub terms: EnergyTerms,
    pub total: f64,
    /// Joints skipped in E_2d because they were behind the camera.
    pub behind_camera: usize,
}

impl Energy {
    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        self.terms.to_array().iter().position(|v| !v.is_finite()).map(|i| TERM_NAMES[i])
    }
}

#[derive(Clone, Copy, Debug)]
enum Block {
    PersonFrame { person: usize, k: usize },
    Reg { person: usize },
    CamUp { t: usize },
    CamSmooth { t: usize },
    Pen { t: usize, a: usize, b: usize },
}

#[derive(Default)]
struct BlockOut {
    terms: [f64; 5],
    behind: usize,
    /// Gradient w.r.t. a person's per-frame root quantities `u`.
    person: Vec<(usize, usize, [f64; U_DIM])>,
    /// Gradient entries for flat parameter indices.
    flat: Vec<(usize, f64)>,
}

/// Per-frame root state of one person: translation, heading, heading-free
/// rotation (6D) and the egocentric displacements used by the reverse pass.
struct PersonState {
    tau: Vec<Vec3<f64>>,
    phi: Vec<f64>,
    eta: Vec<[f64; 6]>,
    d: Vec<[f64; 2]>,
}

impl PersonState {
    fn u(&self, k: usize) -> [f64; U_DIM] {
        let (t, e) = (self.tau[k], self.eta[k]);
        [t.x, t.y, t.z, self.phi[k], e[0], e[1], e[2], e[3], e[4], e[5]]
    }
}

struct State {
    persons: Vec<PersonState>,
    cams: Vec<[f64; CAM_DIM]>,
}

/// Precomputed fixed data for repeated energy and gradient evaluation.
pub struct Evaluator {
    coeffs: EnergyCoefficients,
    intrinsics: Intrinsics,
    frames: usize,
    persons: Vec<PersonTrack>,
    bodies: Vec<Vec<RootLocalBody>>,
    offsets: Vec<usize>,
    cam_offset: usize,
    num_params: usize,
    blocks: Vec<Block>,
}

impl Evaluator {
    pub fn new(problem: &SceneProblem, tree: &KinematicTree, coeffs: &EnergyCoefficients) -> Result<Self> {
        problem.validate()?;
        coeffs.validate()?;
        let frames = problem.frames();
        let bodies: Vec<Vec<RootLocalBody>> = problem
            .persons
            .par_iter()
            .map(|p| (0..p.len()).map(|k| RootLocalBody::new(&p.theta[k], &p.beta[k], tree)).collect())
            .collect();
        let mut offsets = Vec::with_capacity(problem.persons.len());
        let mut n = 0;
        for p in &problem.persons {
            offsets.push(n);
            n += p.len() * EGO_STEP_DIM;
        }
        let cam_offset = n;
        let num_params = n + frames * CAM_DIM;

        let mut blocks = Vec::new();
        for (i, p) in problem.persons.iter().enumerate() {
            for k in 0..p.len() {
                if p.observed(k) {
                    blocks.push(Block::PersonFrame { person: i, k });
                }
            }
        }
        for i in 0..problem.persons.len() {
            blocks.push(Block::Reg { person: i });
        }
        for t in 0..frames {
            blocks.push(Block::CamUp { t });
        }
        for t in 0..frames.saturating_sub(1) {
            blocks.push(Block::CamSmooth { t });
        }
        for t in 0..frames {
            for a in 0..problem.persons.len() {
                for b in a + 1..problem.persons.len() {
                    if problem.persons[a].covers(t) && problem.persons[b].covers(t) {
                        blocks.push(Block::Pen { t, a, b });
                    }
                }
            }
        }
        Ok(Self {
            coeffs: *coeffs,
            intrinsics: problem.camera.intrinsics,
            frames,
            persons: problem.persons.clone(),
            bodies,
            offsets,
            cam_offset,
            num_params,
            blocks,
        })
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn coefficients(&self) -> &EnergyCoefficients {
        &self.coeffs
    }

    /// Flat index of the first camera parameter.
    pub fn camera_offset(&self) -> usize {
        self.cam_offset
    }

    /// Flat index of a person's step component.
    pub fn person_index(&self, person: usize, k: usize, component: usize) -> usize {
        self.offsets[person] + k * EGO_STEP_DIM + component
    }

    pub fn camera_index(&self, t: usize, component: usize) -> usize {
        self.cam_offset + t * CAM_DIM + component
    }

    pub fn param_label(&self, index: usize) -> String {
        const STEP: [&str; EGO_STEP_DIM] = ["dx", "dy", "z", "dphi", "eta0", "eta1", "eta2", "eta3", "eta4", "eta5"];
        const CAM: [&str; CAM_DIM] = ["qw", "qx", "qy", "qz", "tx", "ty", "tz"];
        if index >= self.cam_offset {
            let r = index - self.cam_offset;
            return format!("camera frame {} {}", r / CAM_DIM, CAM[r % CAM_DIM]);
        }
        let i = self.offsets.iter().rposition(|&o| o <= index).unwrap_or(0);
        let r = index - self.offsets[i];
        format!("person {} step {} {}", self.persons[i].id, r / EGO_STEP_DIM, STEP[r % EGO_STEP_DIM])
    }

    pub fn pack(&self, egos: &[EgoTrajectory], cameras: &[Transform<f64>]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_params);
        for ego in egos {
            for s in &ego.steps {
                x.extend_from_slice(&s.to_array());
            }
        }
        for c in cameras {
            x.extend_from_slice(&c.rotation.to_quaternion().to_array());
            x.extend_from_slice(&c.translation.to_array());
        }
        debug_assert_eq!(x.len(), self.num_params);
        x
    }

    pub fn pack_problem(&self, problem: &SceneProblem) -> Vec<f64> {
        let egos: Vec<_> = problem.persons.iter().map(|p| p.ego.clone()).collect();
        self.pack(&egos, &problem.camera.poses)
    }

    pub fn unpack(&self, x: &[f64]) -> (Vec<EgoTrajectory>, Vec<Transform<f64>>) {
        let egos = self
            .persons
            .iter()
            .enumerate()
            .map(|(i, p)| EgoTrajectory {
                steps: (0..p.len())
                    .map(|k| {
                        let o = self.person_index(i, k, 0);
                        EgoStep::from_array(x[o..o + EGO_STEP_DIM].try_into().unwrap())
                    })
                    .collect(),
                fps: p.ego.fps,
            })
            .collect();
        let cams = (0..self.frames).map(|t| camera_from_params(&self.cam_params(x, t))).collect();
        (egos, cams)
    }

    /// Writes the parameters back into a copy of `problem`.
    pub fn apply(&self, problem: &SceneProblem, x: &[f64]) -> SceneProblem {
        let (egos, cams) = self.unpack(x);
        let mut out = problem.clone();
        for (p, e) in out.persons.iter_mut().zip(egos) {
            p.ego = e;
        }
        out.camera.poses = cams;
        out
    }

    fn cam_params(&self, x: &[f64], t: usize) -> [f64; CAM_DIM] {
        let o = self.camera_index(t, 0);
        x[o..o + CAM_DIM].try_into().unwrap()
    }

    fn state(&self, x: &[f64]) -> State {
        let (egos, _) = self.unpack(x);
        let persons = egos
            .iter()
            .map(|ego| {
                let phi = accumulate_headings(ego);
                let mut tau = Vec::with_capacity(ego.steps.len());
                let (mut px, mut py) = (0.0, 0.0);
                for (k, s) in ego.steps.iter().enumerate() {
                    if k == 0 {
                        px = s.dx;
                        py = s.dy;
                    } else {
                        let (sn, cs) = phi[k - 1].sin_cos();
                        px += cs * s.dx - sn * s.dy;
                        py += sn * s.dx + cs * s.dy;
                    }
                    tau.push(Vec3::new(px, py, s.z));
                }
                PersonState {
                    tau,
                    phi,
                    eta: ego.steps.iter().map(|s| s.eta).collect(),
                    d: ego.steps.iter().map(|s| [s.dx, s.dy]).collect(),
                }
            })
            .collect();
        let cams = (0..self.frames).map(|t| self.cam_params(x, t)).collect();
        State { persons, cams }
    }

    fn norm_person_frame(&self) -> f64 {
        (self.persons.len() * self.frames) as f64
    }

    fn eval_block(&self, block: Block, st: &State, x: &[f64], grad: bool) -> BlockOut {
        let mut out = BlockOut::default();
        let c = &self.coeffs;
        match block {
            Block::PersonFrame { person, k } => {
                let p = &self.persons[person];
                let body = &self.bodies[person][k];
                let kp = p.keypoints[k].as_ref().expect("observed frame");
                let obs = p.cam_obs[k].as_ref().expect("observed frame");
                let t = p.start + k;
                let s2d = 1.0 / (self.norm_person_frame() * NUM_JOINTS as f64);
                let straj = 1.0 / self.norm_person_frame();
                let u = st.persons[person].u(k);
                let cam = st.cams[t];
                if grad {
                    let ud: [Dual<17>; U_DIM] = Dual::seed(u, 0);
                    let cd: [Dual<17>; CAM_DIM] = Dual::seed(cam, U_DIM);
                    let (e2d, etraj, behind) = person_frame_terms(&ud, &cd, body, kp, obs, &self.intrinsics, c.w_t);
                    out.terms[0] = e2d.re * s2d;
                    out.terms[1] = etraj.re * straj;
                    out.behind = behind;
                    let w2 = c.lambda_2d * s2d;
                    let wt = c.lambda_traj * straj;
                    let g: [f64; 17] = std::array::from_fn(|j| w2 * e2d.eps[j] + wt * etraj.eps[j]);
                    out.person.push((person, k, g[..U_DIM].try_into().unwrap()));
                    for j in 0..CAM_DIM {
                        out.flat.push((self.camera_index(t, j), g[U_DIM + j]));
                    }
                } else {
                    let (e2d, etraj, behind) = person_frame_terms(&u, &cam, body, kp, obs, &self.intrinsics, c.w_t);
                    out.terms[0] = e2d * s2d;
                    out.terms[1] = etraj * straj;
                    out.behind = behind;
                }
            }
            Block::Reg { person } => {
                let p = &self.persons[person];
                let scale = 1.0 / self.norm_person_frame();
                let mut sum = 0.0;
                for k in 0..p.len() {
                    let o = self.person_index(person, k, 0);
                    let anchor = p.anchor.steps[k].to_array();
                    for j in 0..EGO_STEP_DIM {
                        if k == 0 && matches!(j, 0 | 1 | 3) {
                            continue;
                        }
                        let w = c.psi_weight(j);
                        let diff = x[o + j] - anchor[j];
                        sum += w * diff * diff;
                        if grad {
                            out.flat.push((o + j, c.lambda_reg * scale * 2.0 * w * diff));
                        }
                    }
                }
                out.terms[2] = sum * scale;
            }
            Block::CamUp { t } => {
                let scale = 1.0 / self.frames as f64;
                let q: [f64; 4] = st.cams[t][..4].try_into().unwrap();
                if grad {
                    let qd: [Dual<4>; 4] = Dual::seed(q, 0);
                    let v = Quat::from_array(qd).to_matrix().m[2][1];
                    out.terms[3] = v.re * scale;
                    for j in 0..4 {
                        out.flat.push((self.camera_index(t, j), c.lambda_cam * scale * v.eps[j]));
                    }
                } else {
                    out.terms[3] = Quat::from_array(q).to_matrix().m[2][1] * scale;
                }
            }
            Block::CamSmooth { t } => {
                let scale = 1.0 / (self.frames - 1) as f64;
                let (a, b) = (st.cams[t], st.cams[t + 1]);
                if grad {
                    let ad: [Dual<14>; CAM_DIM] = Dual::seed(a, 0);
                    let bd: [Dual<14>; CAM_DIM] = Dual::seed(b, CAM_DIM);
                    let v = cam_smooth_term(&ad, &bd);
                    out.terms[3] = v.re * scale;
                    for j in 0..CAM_DIM {
                        out.flat.push((self.camera_index(t, j), c.lambda_cam * scale * v.eps[j]));
                        out.flat.push((self.camera_index(t + 1, j), c.lambda_cam * scale * v.eps[CAM_DIM + j]));
                    }
                } else {
                    out.terms[3] = cam_smooth_term(&a, &b) * scale;
                }
            }
            Block::Pen { t, a, b } => {
                let scale = 1.0 / self.frames as f64;
                let (pa, pb) = (&self.persons[a], &self.persons[b]);
                let (ka, kb) = (t - pa.start, t - pb.start);
                let (body_a, body_b) = (&self.bodies[a][ka], &self.bodies[b][kb]);
                let (ua, ub) = (st.persons[a].u(ka), st.persons[b].u(kb));
                let reach = body_a.bounding_radius + body_b.bounding_radius;
                if (st.persons[a].tau[ka] - st.persons[b].tau[kb]).norm() > reach {
                    return out;
                }
                let pairs = penetrating_pairs(&ua, &ub, body_a, body_b);
                if pairs.is_empty() {
                    return out;
                }
                if grad {
                    let uad: [Dual<20>; U_DIM] = Dual::seed(ua, 0);
                    let ubd: [Dual<20>; U_DIM] = Dual::seed(ub, U_DIM);
                    let v = penetration(&uad, &ubd, body_a, body_b, &pairs);
                    out.terms[4] = v.re * scale;
                    let w = c.lambda_pen * scale;
                    out.person.push((a, ka, std::array::from_fn(|j| w * v.eps[j])));
                    out.person.push((b, kb, std::array::from_fn(|j| w * v.eps[U_DIM + j])));
                } else {
                    out.terms[4] = penetration(&ua, &ub, body_a, body_b, &pairs) * scale;
                }
            }
        }
        out
    }

    fn run(&self, x: &[f64], grad: bool) -> Vec<BlockOut> {
        assert_eq!(x.len(), self.num_params, "parameter vector length");
        let st = self.state(x);
        self.blocks.par_iter().map(|&b| self.eval_block(b, &st, x, grad)).collect()
    }

    fn summarize(&self, outs: &[BlockOut]) -> Energy {
        let mut sums = [0.0; 5];
        let mut behind = 0;
        for o in outs {
            for (s, v) in sums.iter_mut().zip(o.terms) {
                *s += v;
            }
            behind += o.behind;
        }
        let terms = EnergyTerms::from_array(sums);
        Energy {
            total: terms.total(&self.coeffs),
            terms,
            behind_camera: behind,
        }
    }

    pub fn energy(&self, x: &[f64]) -> Energy {
        self.summarize(&self.run(x, false))
    }

    /// Weighted energy of each residual block, in a fixed block order that
    /// does not depend on `x`. Their sum is the total energy.
    pub fn block_values(&self, x: &[f64]) -> Vec<f64> {
        let l = self.coeffs.lambdas();
        self.run(x, false)
            .iter()
            .map(|o| o.terms.iter().zip(l).map(|(v, l)| v * l).sum())
            .collect()
    }

    pub fn energy_and_gradient(&self, x: &[f64]) -> Result<(Energy, Vec<f64>)> {
        let outs = self.run(x, true);
        let energy = self.summarize(&outs);
        let mut g = vec![0.0; self.num_params];
        let mut gu: Vec<Vec<[f64; U_DIM]>> = self.persons.iter().map(|p| vec![[0.0; U_DIM]; p.len()]).collect();
        for o in &outs {
            for &(i, v) in &o.flat {
                g[i] += v;
            }
            for (p, k, v) in &o.person {
                for (acc, v) in gu[*p][*k].iter_mut().zip(v) {
                    *acc += v;
                }
            }
        }
        let st = self.state(x);
        for (i, gu) in gu.iter().enumerate() {
            self.backpropagate(i, &st.persons[i], gu, &mut g);
        }
        if let Some(index) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                index,
                label: self.param_label(index),
            });
        }
        Ok((energy, g))
    }

    /// Maps gradients w.r.t. per-frame (tau, phi, eta) onto the egocentric
    /// steps through the accumulation `tau_k = tau_{k-1} + Rz(phi_{k-1}) d_k`,
    /// `phi_k = phi_{k-1} + dphi_k`.
    fn backpropagate(&self, person: usize, st: &PersonState, gu: &[[f64; U_DIM]], g: &mut [f64]) {
        let m = gu.len();
        let mut a_tau = [0.0f64; 2];
        let mut a_phi = 0.0f64;
        for k in (0..m).rev() {
            // Contribution of d_{k+1} through Rz(phi_k).
            let through_next = if k + 1 < m {
                let (s, c) = st.phi[k].sin_cos();
                let d = st.d[k + 1];
                let dr = [-s * d[0] - c * d[1], c * d[0] - s * d[1]];
                a_tau[0] * dr[0] + a_tau[1] * dr[1]
            } else {
                0.0
            };
            a_tau[0] += gu[k][0];
            a_tau[1] += gu[k][1];
            a_phi += gu[k][3] + through_next;
            let o = self.person_index(person, k, 0);
            if k == 0 {
                g[o] += a_tau[0];
                g[o + 1] += a_tau[1];
            } else {
                let (s, c) = st.phi[k - 1].sin_cos();
                g[o] += c * a_tau[0] + s * a_tau[1];
                g[o + 1] += -s * a_tau[0] + c * a_tau[1];
            }
            g[o + 2] += gu[k][2];
            g[o + 3] += a_phi;
            for j in 0..6 {
                g[o + 4 + j] += gu[k][4 + j];
            }
        }
    }
}

fn camera_from_params(p: &[f64; CAM_DIM]) -> Transform<f64> {
    let q = Quat::new(p[0], p[1], p[2], p[3]);
    Transform::new(
        Rotation::from_matrix_unchecked(q.to_matrix()),
        Vec3::new(p[4], p[5], p[6]),
    )
}

fn lift<S: Real>(v: Vec3<f64>) -> Vec3<S> {
    Vec3::new(S::c(v.x), S::c(v.y), S::c(v.z))
}

fn root_pose<S: Real>(u: &[S; U_DIM]) -> (Vec3<S>, Rotation<S>) {
    let eta = [u[4], u[5], u[6], u[7], u[8], u[9]];
    let gamma = Rotation::rz(u[3]).compose(&Rotation::from_6d_unchecked(eta));
    (Vec3::new(u[0], u[1], u[2]), gamma)
}

fn camera_pose<S: Real>(c: &[S; CAM_DIM]) -> Transform<S> {
    let q = Quat::new(c[0], c[1], c[2], c[3]);
    Transform::new(Rotation::from_matrix_unchecked(q.to_matrix()), Vec3::new(c[4], c[5], c[6]))
}

/// Raw (unnormalized) reprojection and camera-frame root residuals for one
/// person at one frame, plus the number of joints behind the camera.
fn person_frame_terms<S: Real>(
    u: &[S; U_DIM],
    cam: &[S; CAM_DIM],
    body: &RootLocalBody,
    kp: &Keypoints,
    obs: &Transform<f64>,
    k: &Intrinsics,
    w_t: f64,
) -> (S, S, usize) {
    let (tau, gamma) = root_pose(u);
    let c = camera_pose(cam);
    // Root in camera coordinates.
    let rot_c = c.rotation.between(&gamma);
    let tau_c = c.apply_inverse(tau);
    let mut e2d = S::zero();
    let mut behind = 0;
    for (j, l) in body.joints.iter().enumerate() {
        if kp.conf[j] <= 0.0 {
            continue;
        }
        let p = rot_c.apply(lift(*l)) + tau_c;
        match project_camera_point(p, k) {
            Some(px) => {
                let dx = px[0] - S::c(kp.xy[j][0]);
                let dy = px[1] - S::c(kp.xy[j][1]);
                e2d = e2d + dx * dx + dy * dy;
            }
            None => behind += 1,
        }
    }
    let obs_rot: Rotation<S> = obs.rotation.cast();
    let mut etraj = obs_rot.between(&rot_c).angle_squared();
    if w_t != 0.0 {
        etraj = etraj + S::c(w_t) * (tau_c - lift(obs.translation)).norm_squared();
    }
    (e2d, etraj, behind)
}

fn cam_smooth_term<S: Real>(a: &[S; CAM_DIM], b: &[S; CAM_DIM]) -> S {
    let (ca, cb) = (camera_pose(a), camera_pose(b));
    ca.rotation.between(&cb.rotation).angle_squared() + (cb.translation - ca.translation).norm_squared()
}

fn world_capsule<S: Real>(tau: Vec3<S>, gamma: &Rotation<S>, a: Vec3<f64>, b: Vec3<f64>) -> (Vec3<S>, Vec3<S>) {
    (tau + gamma.apply(lift(a)), tau + gamma.apply(lift(b)))
}

fn penetrating_pairs(ua: &[f64; U_DIM], ub: &[f64; U_DIM], body_a: &RootLocalBody, body_b: &RootLocalBody) -> Vec<(usize, usize)> {
    let (ta, ga) = root_pose(ua);
    let (tb, gb) = root_pose(ub);
    let wa: Vec<_> = body_a.capsules.iter().map(|c| world_capsule(ta, &ga, c.a, c.b)).collect();
    let wb: Vec<_> = body_b.capsules.iter().map(|c| world_capsule(tb, &gb, c.a, c.b)).collect();
    let mut out = Vec::new();
    for (i, ca) in body_a.capsules.iter().enumerate() {
        for (j, cb) in body_b.capsules.iter().enumerate() {
            let r = ca.radius + cb.radius;
            if segment_distance_squared(wa[i].0, wa[i].1, wb[j].0, wb[j].1) < r * r {
                out.push((i, j));
            }
        }
    }
    out
}

fn penetration<S: Real>(
    ua: &[S; U_DIM],
    ub: &[S; U_DIM],
    body_a: &RootLocalBody,
    body_b: &RootLocalBody,
    pairs: &[(usize, usize)],
) -> S {
    let (ta, ga) = root_pose(ua);
    let (tb, gb) = root_pose(ub);
    let mut sum = S::zero();
    for &(i, j) in pairs {
        let (ca, cb) = (&body_a.capsules[i], &body_b.capsules[j]);
        let (a0, a1) = world_capsule(ta, &ga, ca.a, ca.b);
        let (b0, b1) = world_capsule(tb, &gb, cb.a, cb.b);
        let p = capsule_penetration(a0, a1, S::c(ca.radius), b0, b1, S::c(cb.radius));
        sum = sum + p * p;
    }
    sum
}

/// `max(0, r_a + r_b − distance between the capsule axes)`.
pub fn capsule_penetration<S: Real>(a0: Vec3<S>, a1: Vec3<S>, ra: S, b0: Vec3<S>, b1: Vec3<S>, rb: S) -> S {
    let d2 = segment_distance_squared(a0, a1, b0, b1);
    let d = d2.max(S::c(1e-24)).sqrt();
    (ra + rb - d).max(S::zero())
}

/// Squared distance between segments `p1q1` and `p2q2` (closest-point
/// parameters clamped to the segments).
pub fn segment_distance_squared<S: Real>(p1: Vec3<S>, q1: Vec3<S>, p2: Vec3<S>, q2: Vec3<S>) -> S {
    let eps = S::c(1e-12);
    let (zero, one) = (S::zero(), S::one());
    let clamp = |v: S| v.max(zero).min(one);
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let (s, t);
    if a <= eps && e <= eps {
        return r.dot(r);
    }
    if a <= eps {
        s = zero;
        t = clamp(f / e);
    } else {
        let c = d1.dot(r);
        if e <= eps {
            t = zero;
            s = clamp(-c / a);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let s0 = if denom > eps { clamp((b * f - c * e) / denom) } else { zero };
            let t0 = (b * s0 + f) / e;
            if t0 < zero {
                t = zero;
                s = clamp(-c / a);
            } else if t0 > one {
                t = one;
                s = clamp((b - c) / a);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    let c1 = p1 + d1.scale(s);
    let c2 = p2 + d2.scale(t);
    (c1 - c2).norm_squared()
}

/// Camera-only energy terms: mean uprightness plus mean squared steps.
pub fn e_cam(poses: &[Transform<f64>]) -> f64 {
    let t = poses.len();
    if t == 0 {
        return 0.0;
    }
    let up: f64 = poses.iter().map(crate::camera::uprightness).sum::<f64>() / t as f64;
    if t == 1 {
        return up;
    }
    let smooth: f64 = poses
        .windows(2)
        .map(|w| w[0].rotation.between(&w[1].rotation).angle_squared() + (w[1].translation - w[0].translation).norm_squared())
        .sum();
    up + smooth / (t - 1) as f64
}

/// Energy terms of a problem at its current state.
pub fn energy_terms(problem: &SceneProblem, tree: &KinematicTree, coeffs: &EnergyCoefficients) -> Result<Energy> {
    let ev = Evaluator::new(problem, tree, coeffs)?;
    Ok(ev.energy(&ev.pack_problem(problem)))
}
