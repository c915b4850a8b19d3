//! Synthetic benchmark: procedural walkers, moving cameras, oscillating crop
//! windows for occlusion, simulated pose-estimator observations and drifting
//! trajectory anchors.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::body::{BodyPose, BodyShape, KinematicTree, NUM_BETAS, NUM_JOINTS};
use crate::camera::{default_intrinsics, project_point, Intrinsics};
use crate::ego::{global_to_ego, EgoTrajectory, GlobalTrajectory};
use crate::energy::Keypoints;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Rotation, Transform, Vec3};
use crate::motion::GlobalMotion;
use crate::scene::{GroundTruth, GtPerson, Metadata, PersonData, Scene};

const STRIDE_LENGTH: f64 = 1.4;
const WALK_SPEED: f64 = 1.2;
const PELVIS_HEIGHT: f64 = 0.92;
const CAMERA_HEIGHT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionPattern {
    Straight,
    Circle,
    FigureEight,
    Stand,
}

impl MotionPattern {
    pub const ALL: [MotionPattern; 4] = [Self::Straight, Self::Circle, Self::FigureEight, Self::Stand];

    pub fn name(self) -> &'static str {
        match self {
            Self::Straight => "straight",
            Self::Circle => "circle",
            Self::FigureEight => "figure-eight",
            Self::Stand => "stand",
        }
    }
}

impl fmt::Display for MotionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "motion pattern",
            name: s.into(),
            available: Self::ALL.map(Self::name).join(", "),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraPattern {
    Static,
    Orbit,
    LateralTrack,
}

impl CameraPattern {
    pub const ALL: [CameraPattern; 3] = [Self::Static, Self::Orbit, Self::LateralTrack];

    pub fn name(self) -> &'static str {
        match self {
            Self::Static => "static",
            Self::Orbit => "orbit",
            Self::LateralTrack => "lateral-track",
        }
    }
}

impl fmt::Display for CameraPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraPattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "camera pattern",
            name: s.into(),
            available: Self::ALL.map(Self::name).join(", "),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationNoise {
    /// Keypoint noise per pixel coordinate.
    pub keypoint_sigma: f64,
    /// Camera-frame root rotation noise (radians, per axis).
    pub rot_sigma: f64,
    /// Camera-frame root translation noise (meters, per axis).
    pub trans_sigma: f64,
}

impl Default for ObservationNoise {
    fn default() -> Self {
        Self {
            keypoint_sigma: 2.0,
            rot_sigma: 0.01,
            trans_sigma: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasSign {
    /// Every person drifts the same way.
    Same,
    /// Person i drifts with sign (−1)^i.
    Alternating,
}

impl BiasSign {
    pub const ALL: [BiasSign; 2] = [Self::Same, Self::Alternating];

    pub fn name(self) -> &'static str {
        match self {
            Self::Same => "same",
            Self::Alternating => "alternating",
        }
    }
}

impl FromStr for BiasSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "bias sign",
            name: s.into(),
            available: Self::ALL.map(Self::name).join(", "),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorDrift {
    pub sigma_xy: f64,
    pub sigma_z: f64,
    pub sigma_dphi: f64,
    pub sigma_eta: f64,
    /// Constant heading increment error per frame (radians).
    pub dphi_bias: f64,
    pub bias_sign: BiasSign,
}

impl Default for AnchorDrift {
    fn default() -> Self {
        Self {
            sigma_xy: 0.001,
            sigma_z: 0.001,
            sigma_dphi: 0.0005,
            sigma_eta: 0.002,
            dphi_bias: 0.0,
            bias_sign: BiasSign::Same,
        }
    }
}

impl AnchorDrift {
    pub fn none() -> Self {
        Self {
            sigma_xy: 0.0,
            sigma_z: 0.0,
            sigma_dphi: 0.0,
            sigma_eta: 0.0,
            dphi_bias: 0.0,
            bias_sign: BiasSign::Same,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewWindow {
    pub image_width: f64,
    pub image_height: f64,
    pub width: f64,
    pub height: f64,
    /// Oscillation period in seconds.
    pub period: f64,
    /// Oscillation amplitude in pixels.
    pub amplitude: f64,
}

impl Default for ViewWindow {
    fn default() -> Self {
        Self {
            image_width: 1000.0,
            image_height: 1000.0,
            width: 300.0,
            height: 600.0,
            period: 4.8,
            amplitude: 200.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub patterns: Vec<MotionPattern>,
    pub frames: usize,
    pub fps: f64,
    pub camera: CameraPattern,
    pub window: ViewWindow,
    pub noise: ObservationNoise,
    pub drift: AnchorDrift,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            patterns: vec![MotionPattern::Straight; 2],
            frames: 600,
            fps: 30.0,
            camera: CameraPattern::LateralTrack,
            window: ViewWindow::default(),
            noise: ObservationNoise::default(),
            drift: AnchorDrift::default(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.patterns.is_empty() {
            return bad("at least one person is required".into());
        }
        if self.frames == 0 {
            return bad("frame count must be positive".into());
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        let w = &self.window;
        let dims = [w.image_width, w.image_height, w.width, w.height, w.period];
        if dims.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(w.amplitude >= 0.0) {
            return bad("view window sizes and period must be positive".into());
        }
        if w.amplitude + w.width / 2.0 > w.image_width / 2.0 + 1e-9 || w.height > w.image_height {
            return bad("oscillating view window does not fit in the virtual image".into());
        }
        let n = &self.noise;
        let d = &self.drift;
        let sig = [n.keypoint_sigma, n.rot_sigma, n.trans_sigma, d.sigma_xy, d.sigma_z, d.sigma_dphi, d.sigma_eta];
        if sig.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || !d.dphi_bias.is_finite() {
            return bad("noise levels must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Intrinsics {
        default_intrinsics(self.window.image_width, self.window.image_height)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn axis_angle(r: Rotation<f64>) -> [f64; 3] {
    r.to_axis_angle().to_array()
}

/// Body pose for a walker at gait phase `psi` (radians); `amp` scales limb swing.
fn gait_pose(psi: f64, amp: f64, idle: f64) -> BodyPose {
    let mut p = BodyPose::rest();
    let s = psi.sin();
    let c = psi.cos();
    // Hips and knees.
    p.theta[0] = [0.45 * amp * s, 0.0, 0.0];
    p.theta[1] = [-0.45 * amp * s, 0.0, 0.0];
    p.theta[3] = [-0.35 * amp * (1.0 - c), 0.0, 0.0];
    p.theta[4] = [-0.35 * amp * (1.0 + c), 0.0, 0.0];
    // Spine counter-rotation plus idle sway.
    p.theta[2] = [0.0, 0.0, 0.08 * amp * s + idle];
    // Arms hang from the T-pose and swing against the legs.
    p.theta[15] = axis_angle(Rotation::rx(-0.3 * amp * s).compose(&Rotation::ry(-FRAC_PI_2)));
    p.theta[16] = axis_angle(Rotation::rx(0.3 * amp * s).compose(&Rotation::ry(FRAC_PI_2)));
    p.theta[17] = [0.0, 0.0, -0.25];
    p.theta[18] = [0.0, 0.0, 0.25];
    p
}

/// Path point, heading and cumulative arc length at time `t` seconds.
fn path(pattern: MotionPattern, t: f64, eight: &FigureEight) -> (f64, f64, f64, f64) {
    match pattern {
        MotionPattern::Straight => {
            let s = WALK_SPEED * t;
            (0.0, s, 0.0, s)
        }
        MotionPattern::Circle => {
            let r = 2.0;
            let s = WALK_SPEED * t;
            let a = s / r;
            (r * a.cos() - r, r * a.sin(), a, s)
        }
        MotionPattern::FigureEight => eight.at(t),
        MotionPattern::Stand => (0.0, 0.0, 0.0, 0.0),
    }
}

/// Lemniscate of Gerono `(a/2 sin 2u, a sin u)` traversed at mean walking speed.
struct FigureEight {
    a: f64,
    period: f64,
    table: Vec<f64>,
}

impl FigureEight {
    const SAMPLES: usize = 4096;

    fn new() -> Self {
        let a = 3.0;
        let mut table = vec![0.0];
        let mut prev = Self::point(a, 0.0);
        for i in 1..=Self::SAMPLES {
            let p = Self::point(a, TAU * i as f64 / Self::SAMPLES as f64);
            table.push(table[i - 1] + ((p.0 - prev.0).powi(2) + (p.1 - prev.1).powi(2)).sqrt());
            prev = p;
        }
        let period = table[Self::SAMPLES] / WALK_SPEED;
        Self { a, period, table }
    }

    fn point(a: f64, u: f64) -> (f64, f64) {
        (0.5 * a * (2.0 * u).sin(), a * u.sin())
    }

    fn at(&self, t: f64) -> (f64, f64, f64, f64) {
        let laps = (t / self.period).floor();
        let u = TAU * (t / self.period - laps);
        let (x, y) = Self::point(self.a, u);
        let (vx, vy) = (self.a * (2.0 * u).cos(), self.a * u.cos());
        let phi = (-vx).atan2(vy);
        let f = u / TAU * Self::SAMPLES as f64;
        let i = (f.floor() as usize).min(Self::SAMPLES - 1);
        let s_lap = self.table[i] + (f - i as f64) * (self.table[i + 1] - self.table[i]);
        (x, y, phi, laps * self.table[Self::SAMPLES] + s_lap)
    }
}

/// Procedural walker in its canonical placement (starting near the origin).
pub fn generate_motion(pattern: MotionPattern, frames: usize, fps: f64, seed: u64) -> Result<GlobalMotion> {
    if frames == 0 || !(fps > 0.0) {
        return Err(Error::InvalidConfig("motion needs positive frames and fps".into()));
    }
    let mut rng = stream_rng(seed, 1);
    let phase0: f64 = rng.random_range(0.0..TAU);
    let mut beta = BodyShape::mean();
    for b in beta.beta.iter_mut().take(NUM_BETAS) {
        *b = 0.5 * normal(&mut rng);
    }
    let eight = FigureEight::new();
    let mut translations = Vec::with_capacity(frames);
    let mut rotations = Vec::with_capacity(frames);
    let mut theta = Vec::with_capacity(frames);
    for k in 0..frames {
        let t = k as f64 / fps;
        let (x, y, phi, s) = path(pattern, t, &eight);
        if pattern == MotionPattern::Stand {
            let idle = 0.03 * (TAU * t / 3.0 + phase0).sin();
            translations.push(Vec3::new(0.0, 0.0, PELVIS_HEIGHT));
            rotations.push(Rotation::identity());
            theta.push(gait_pose(0.0, 0.0, idle));
        } else {
            let psi = TAU * s / STRIDE_LENGTH + phase0;
            translations.push(Vec3::new(x, y, PELVIS_HEIGHT + 0.015 * (2.0 * psi).cos()));
            rotations.push(Rotation::rz(phi).compose(&Rotation::rx(0.05 + 0.03 * (2.0 * psi).sin())));
            theta.push(gait_pose(psi, 1.0, 0.0));
        }
    }
    Ok(GlobalMotion {
        start: 0,
        trajectory: GlobalTrajectory {
            translations,
            rotations,
        },
        theta,
        beta: vec![beta; frames],
        fps,
    })
}

/// Scene placement of person `i`: straight walkers head along +x in parallel
/// lanes, other patterns sit side by side along x.
fn placement(pattern: MotionPattern, i: usize) -> Transform<f64> {
    match pattern {
        MotionPattern::Straight => Transform::new(Rotation::rz(-FRAC_PI_2), Vec3::new(-0.6 * i as f64, 1.5 * i as f64, 0.0)),
        _ => Transform::new(Rotation::identity(), Vec3::new(6.0 * i as f64, 0.0, 0.0)),
    }
}

/// Camera-to-world rotation of an upright camera looking along horizontal `dir`.
pub fn looking_horizontally(dir: Vec3<f64>) -> Rotation<f64> {
    let z = Vec3::new(dir.x, dir.y, 0.0).normalized();
    let x = z.cross(Vec3::unit_z());
    let y = z.cross(x);
    Rotation::from_matrix_unchecked(Mat3::from_cols(x, y, z))
}

fn camera_poses(pattern: CameraPattern, motions: &[GlobalMotion], frames: usize) -> Vec<Transform<f64>> {
    let centre_at = |t: usize| {
        let mut c = Vec3::zero();
        let mut n = 0.0;
        for m in motions {
            if t >= m.start && t < m.start + m.len() {
                c += m.trajectory.translations[t - m.start];
                n += 1.0;
            }
        }
        if n > 0.0 {
            Some(c.scale(1.0 / n))
        } else {
            None
        }
    };
    let all: Vec<Vec3<f64>> = motions.iter().flat_map(|m| m.trajectory.translations.iter().copied()).collect();
    let centre = all.iter().fold(Vec3::zero(), |a, b| a + *b).scale(1.0 / all.len() as f64);
    let extent = all
        .iter()
        .map(|p| ((p.x - centre.x).powi(2) + (p.y - centre.y).powi(2)).sqrt())
        .fold(0.0, f64::max);
    match pattern {
        CameraPattern::Static => {
            let d = 7.0 + 1.5 * extent;
            let pos = Vec3::new(centre.x, centre.y - d, CAMERA_HEIGHT);
            vec![Transform::new(looking_horizontally(Vec3::unit_y()), pos); frames]
        }
        CameraPattern::LateralTrack => {
            let d = 8.0;
            let mut last = centre;
            (0..frames)
                .map(|t| {
                    if let Some(c) = centre_at(t) {
                        last = c;
                    }
                    Transform::new(
                        looking_horizontally(Vec3::unit_y()),
                        Vec3::new(last.x, centre.y - d, CAMERA_HEIGHT),
                    )
                })
                .collect()
        }
        CameraPattern::Orbit => {
            let d = 7.0 + 1.5 * extent;
            (0..frames)
                .map(|t| {
                    let a = -FRAC_PI_2 + PI * t as f64 / frames.max(1) as f64;
                    let pos = Vec3::new(centre.x + d * a.cos(), centre.y + d * a.sin(), CAMERA_HEIGHT);
                    Transform::new(looking_horizontally(centre - pos), pos)
                })
                .collect()
        }
    }
}

/// Crop-window visibility: the window oscillates horizontally about the
/// person's projected bounding-box centre and follows it vertically; a person
/// is visible when at least half of the joints fall inside it.
pub fn oscillating_window_visibility(
    motions: &[GlobalMotion],
    cameras: &[Transform<f64>],
    intrinsics: &Intrinsics,
    window: &ViewWindow,
    fps: f64,
    tree: &KinematicTree,
) -> Vec<Vec<bool>> {
    motions
        .iter()
        .map(|m| {
            let joints = m.joints(tree);
            (0..m.len())
                .map(|k| {
                    let t = m.start + k;
                    let px: Vec<[f64; 2]> = joints[k].iter().filter_map(|x| project_point(*x, &cameras[t], intrinsics)).collect();
                    if px.is_empty() {
                        return false;
                    }
                    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                    for p in &px {
                        for a in 0..2 {
                            lo[a] = lo[a].min(p[a]);
                            hi[a] = hi[a].max(p[a]);
                        }
                    }
                    let cx = 0.5 * (lo[0] + hi[0]) + window.amplitude * (TAU * t as f64 / (window.period * fps)).sin();
                    let cy = 0.5 * (lo[1] + hi[1]);
                    let inside = px
                        .iter()
                        .filter(|p| (p[0] - cx).abs() <= window.width / 2.0 && (p[1] - cy).abs() <= window.height / 2.0)
                        .count();
                    2 * inside >= NUM_JOINTS
                })
                .collect()
        })
        .collect()
}

/// Simulated pose-estimator outputs on visible frames.
pub struct Observation {
    pub cam_obs: Vec<Option<Transform<f64>>>,
    pub keypoints: Vec<Option<Keypoints>>,
}

pub fn observe(
    motion: &GlobalMotion,
    cameras: &[Transform<f64>],
    intrinsics: &Intrinsics,
    visible: &[bool],
    noise: &ObservationNoise,
    tree: &KinematicTree,
    seed: u64,
    stream: u64,
) -> Observation {
    let mut rng = stream_rng(seed, stream);
    let joints = motion.joints(tree);
    let mut cam_obs = Vec::with_capacity(motion.len());
    let mut keypoints = Vec::with_capacity(motion.len());
    for k in 0..motion.len() {
        if !visible[k] {
            cam_obs.push(None);
            keypoints.push(None);
            continue;
        }
        let cam = &cameras[motion.start + k];
        let mut xy = Vec::with_capacity(NUM_JOINTS);
        let mut conf = Vec::with_capacity(NUM_JOINTS);
        for x in &joints[k] {
            match project_point(*x, cam, intrinsics) {
                Some(p) => {
                    let nx = noise.keypoint_sigma * normal(&mut rng);
                    let ny = noise.keypoint_sigma * normal(&mut rng);
                    xy.push([p[0] + nx, p[1] + ny]);
                    conf.push(1.0);
                }
                None => {
                    xy.push([0.0, 0.0]);
                    conf.push(0.0);
                }
            }
        }
        keypoints.push(Some(Keypoints { xy, conf }));
        let root = cam.inverse().compose(&motion.root(k));
        let w = Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)).scale(noise.rot_sigma);
        let dt = Vec3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng)).scale(noise.trans_sigma);
        cam_obs.push(Some(Transform::new(
            Rotation::from_axis_angle(w).compose(&root.rotation),
            root.translation + dt,
        )));
    }
    Observation { cam_obs, keypoints }
}

/// Drifting copy of a ground-truth egocentric trajectory. `sign` multiplies
/// the heading bias. Step 0 loses its start position and heading.
pub fn make_anchors(gt: &EgoTrajectory, drift: &AnchorDrift, sign: f64, seed: u64, stream: u64) -> EgoTrajectory {
    let mut rng = stream_rng(seed, stream);
    let mut out = gt.clone();
    for (k, s) in out.steps.iter_mut().enumerate() {
        s.dx += drift.sigma_xy * normal(&mut rng);
        s.dy += drift.sigma_xy * normal(&mut rng);
        s.z += drift.sigma_z * normal(&mut rng);
        s.dphi += drift.sigma_dphi * normal(&mut rng);
        if k > 0 {
            s.dphi += sign * drift.dphi_bias;
        }
        for e in s.eta.iter_mut() {
            *e += drift.sigma_eta * normal(&mut rng);
        }
    }
    if let Some(s0) = out.steps.first_mut() {
        s0.dx = 0.0;
        s0.dy = 0.0;
        s0.dphi = 0.0;
    }
    out
}

/// Builds a complete synthetic scene with ground truth.
pub fn generate(cfg: &SceneConfig, tree: &KinematicTree) -> Result<Scene> {
    cfg.validate()?;
    let intrinsics = cfg.intrinsics();
    let motions: Vec<GlobalMotion> = cfg
        .patterns
        .iter()
        .enumerate()
        // Motion depends on the person index only, so visibility does not
        // change with the noise seed.
        .map(|(i, &p)| Ok(generate_motion(p, cfg.frames, cfg.fps, i as u64)?.transformed(&placement(p, i))))
        .collect::<Result<_>>()?;
    let cameras = camera_poses(cfg.camera, &motions, cfg.frames);
    let visibility = oscillating_window_visibility(&motions, &cameras, &intrinsics, &cfg.window, cfg.fps, tree);
    let mut persons = Vec::with_capacity(motions.len());
    for (i, m) in motions.iter().enumerate() {
        let vis = &visibility[i];
        let obs = observe(m, &cameras, &intrinsics, vis, &cfg.noise, tree, cfg.seed, 200 + i as u64);
        let sign = match cfg.drift.bias_sign {
            BiasSign::Same => 1.0,
            BiasSign::Alternating if i % 2 == 1 => -1.0,
            BiasSign::Alternating => 1.0,
        };
        let gt_ego = global_to_ego(&m.trajectory, cfg.fps);
        let anchor = make_anchors(&gt_ego, &cfg.drift, sign, cfg.seed, 300 + i as u64);
        persons.push(PersonData {
            id: i as u32,
            start: m.start,
            visible: vis.clone(),
            theta: (0..m.len()).map(|k| vis[k].then_some(m.theta[k])).collect(),
            beta: (0..m.len()).map(|k| vis[k].then_some(m.beta[k])).collect(),
            cam_obs: obs.cam_obs,
            keypoints: obs.keypoints,
            anchor,
            ego: None,
        });
    }
    Ok(Scene {
        fps: cfg.fps,
        frames: cfg.frames,
        intrinsics,
        camera: None,
        persons,
        gt: Some(GroundTruth {
            persons: motions
                .into_iter()
                .enumerate()
                .map(|(i, motion)| GtPerson { id: i as u32, motion })
                .collect(),
            camera: cameras,
        }),
        metadata: Metadata {
            generator: Some(cfg.clone()),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::uprightness;
    use crate::geometry::{geodesic, heading_of};

    #[test]
    fn stand_is_static_with_identity_heading() {
        let m = generate_motion(MotionPattern::Stand, 90, 30.0, 1).unwrap();
        for k in 0..90 {
            assert_eq!(m.trajectory.translations[k], m.trajectory.translations[0]);
            assert_eq!(m.trajectory.rotations[k], Rotation::identity());
        }
        assert!(m.theta[0] != m.theta[40]);
    }

    #[test]
    fn circle_heading_increment() {
        let m = generate_motion(MotionPattern::Circle, 300, 30.0, 2).unwrap();
        let ego = global_to_ego(&m.trajectory, 30.0);
        for s in &ego.steps[1..] {
            assert!((s.dphi - 0.02).abs() < 1e-9, "{}", s.dphi);
        }
    }

    #[test]
    fn straight_walker_heads_along_its_path() {
        let m = generate_motion(MotionPattern::Straight, 60, 30.0, 2).unwrap();
        for r in &m.trajectory.rotations {
            assert!(heading_of(r).unwrap().abs() < 1e-12);
        }
        let d = m.trajectory.translations[59] - m.trajectory.translations[0];
        assert!((d.y - 1.2 * 59.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn figure_eight_speed() {
        let m = generate_motion(MotionPattern::FigureEight, 600, 30.0, 2).unwrap();
        let t = &m.trajectory.translations;
        let len: f64 = t.windows(2).map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt()).sum();
        assert!((len / (599.0 / 30.0) - 1.2).abs() < 0.05);
    }

    #[test]
    fn visibility_ignores_seed() {
        let tree = KinematicTree::standard();
        let a = generate(&SceneConfig { frames: 300, seed: 1, ..Default::default() }, &tree).unwrap();
        let b = generate(&SceneConfig { frames: 300, seed: 2, ..Default::default() }, &tree).unwrap();
        for (p, q) in a.persons.iter().zip(&b.persons) {
            assert_eq!(p.visible, q.visible);
            assert_ne!(p.keypoints, q.keypoints);
        }
    }

    #[test]
    fn motion_is_seed_deterministic() {
        for p in MotionPattern::ALL {
            assert_eq!(generate_motion(p, 50, 30.0, 9).unwrap(), generate_motion(p, 50, 30.0, 9).unwrap());
        }
        assert!("spiral".parse::<MotionPattern>().is_err());
        assert_eq!("figure-eight".parse::<MotionPattern>().unwrap(), MotionPattern::FigureEight);
    }

    #[test]
    fn cameras_are_upright() {
        for c in CameraPattern::ALL {
            let cfg = SceneConfig {
                camera: c,
                frames: 60,
                ..Default::default()
            };
            let s = generate(&cfg, &KinematicTree::standard()).unwrap();
            for p in &s.gt.unwrap().camera {
                assert!((uprightness(p) + 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_window_sees_everything() {
        let cfg = SceneConfig {
            window: ViewWindow {
                width: 1000.0,
                height: 1000.0,
                amplitude: 0.0,
                ..Default::default()
            },
            frames: 100,
            ..Default::default()
        };
        let s = generate(&cfg, &KinematicTree::standard()).unwrap();
        assert!(s.persons.iter().all(|p| p.visible.iter().all(|v| *v)));
    }

    #[test]
    fn standing_visibility_period() {
        let cfg = SceneConfig {
            patterns: vec![MotionPattern::Stand],
            camera: CameraPattern::Static,
            frames: 432,
            ..Default::default()
        };
        let s = generate(&cfg, &KinematicTree::standard()).unwrap();
        let v = &s.persons[0].visible;
        assert!(v.iter().any(|x| !x) && v.iter().any(|x| *x));
        for t in 0..432 - 144 {
            assert_eq!(v[t], v[t + 144], "frame {t}");
        }
    }

    #[test]
    fn default_scene_occlusion_fraction() {
        let s = generate(&SceneConfig::default(), &KinematicTree::standard()).unwrap();
        for p in &s.persons {
            let occ = p.visible.iter().filter(|v| !**v).count() as f64 / p.visible.len() as f64;
            assert!((0.35..0.55).contains(&occ), "{occ}");
        }
    }

    #[test]
    fn noiseless_observations_are_exact() {
        let cfg = SceneConfig {
            frames: 120,
            noise: ObservationNoise {
                keypoint_sigma: 0.0,
                rot_sigma: 0.0,
                trans_sigma: 0.0,
            },
            ..Default::default()
        };
        let tree = KinematicTree::standard();
        let s = generate(&cfg, &tree).unwrap();
        let gt = s.gt.as_ref().unwrap();
        for (p, g) in s.persons.iter().zip(&gt.persons) {
            let m = &g.motion;
            let joints = m.joints(&tree);
            for k in 0..m.len() {
                match (&p.cam_obs[k], &p.keypoints[k]) {
                    (Some(o), Some(kp)) => {
                        let want = gt.camera[k].inverse().compose(&m.root(k));
                        assert!(geodesic(&o.rotation, &want.rotation) < 1e-12);
                        assert!((o.translation - want.translation).norm() < 1e-12);
                        for (j, x) in joints[k].iter().enumerate() {
                            let px = project_point(*x, &gt.camera[k], &s.intrinsics).unwrap();
                            assert_eq!(kp.xy[j], px);
                        }
                    }
                    (None, None) => assert!(!p.visible[k]),
                    _ => panic!("partial observation"),
                }
            }
        }
    }

    #[test]
    fn anchors_without_drift_match_gt_after_step_zero() {
        let m = generate_motion(MotionPattern::Circle, 50, 30.0, 3).unwrap();
        let gt = global_to_ego(&m.trajectory, 30.0);
        let a = make_anchors(&gt, &AnchorDrift::none(), 1.0, 0, 0);
        assert_eq!(a.steps[1..], gt.steps[1..]);
        assert_eq!((a.steps[0].dx, a.steps[0].dy, a.steps[0].dphi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn heading_bias_accumulates() {
        let m = generate_motion(MotionPattern::Straight, 101, 30.0, 3).unwrap();
        let gt = global_to_ego(&m.trajectory, 30.0);
        let drift = AnchorDrift {
            dphi_bias: 0.002,
            ..AnchorDrift::none()
        };
        let a = make_anchors(&gt, &drift, 1.0, 0, 0);
        let g = crate::ego::ego_to_global(&a);
        let h = heading_of(&g.rotations[100]).unwrap();
        assert!((h - 0.2).abs() < 1e-9);
    }

    #[test]
    fn invalid_configs() {
        let tree = KinematicTree::standard();
        let zero = SceneConfig {
            frames: 0,
            ..Default::default()
        };
        assert!(generate(&zero, &tree).is_err());
        let wide = SceneConfig {
            window: ViewWindow {
                amplitude: 400.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(generate(&wide, &tree).is_err());
    }
}
