//! Scene files: the JSON document passed between pipeline stages.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::body::{BodyPose, BodyShape, NUM_BETAS, NUM_BODY_JOINTS, NUM_JOINTS};
use crate::camera::{CameraTrack, Intrinsics};
use crate::ego::{ego_to_global, EgoStep, EgoTrajectory, GlobalTrajectory, EGO_STEP_DIM};
use crate::energy::{EnergyCoefficients, Keypoints, PersonTrack, SceneProblem};
use crate::error::{Error, Result};
use crate::geometry::{Quat, Rotation, Transform, Vec3};
use crate::infill::{MotionSequence, WindowConfig};
use crate::motion::GlobalMotion;
use crate::optim::OptimizerConfig;
use crate::synth::SceneConfig;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PersonData {
    pub id: u32,
    pub start: usize,
    pub visible: Vec<bool>,
    /// `None` on frames not yet infilled.
    pub theta: Vec<Option<BodyPose>>,
    pub beta: Vec<Option<BodyShape>>,
    pub cam_obs: Vec<Option<Transform<f64>>>,
    pub keypoints: Vec<Option<Keypoints>>,
    pub anchor: EgoTrajectory,
    /// Current trajectory estimate, absent before optimization.
    pub ego: Option<EgoTrajectory>,
}

impl PersonData {
    pub fn len(&self) -> usize {
        self.visible.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn is_infilled(&self) -> bool {
        self.theta.iter().all(Option::is_some) && self.beta.iter().all(Option::is_some)
    }

    /// Poses with occluded frames replaced by the rest pose.
    pub fn sequence(&self, fps: f64) -> MotionSequence {
        MotionSequence {
            theta: self.theta.iter().map(|p| p.unwrap_or_default()).collect(),
            beta: self.beta.iter().map(|b| b.unwrap_or_default()).collect(),
            visible: self.theta.iter().map(Option::is_some).collect(),
            fps,
        }
    }

    /// Global motion of the current estimate (or of the anchor when `anchor`).
    pub fn motion(&self, fps: f64, anchor: bool) -> Result<GlobalMotion> {
        if !self.is_infilled() {
            return Err(Error::Schema(format!("person {} has frames without a body pose; run infill first", self.id)));
        }
        let ego = if anchor { &self.anchor } else { self.ego.as_ref().unwrap_or(&self.anchor) };
        Ok(GlobalMotion {
            start: self.start,
            trajectory: ego_to_global(ego),
            theta: self.theta.iter().map(|p| p.unwrap()).collect(),
            beta: self.beta.iter().map(|b| b.unwrap()).collect(),
            fps,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GtPerson {
    pub id: u32,
    pub motion: GlobalMotion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub persons: Vec<GtPerson>,
    pub camera: Vec<Transform<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfillRecord {
    pub method: String,
    pub window: WindowConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRecord {
    pub coefficients: EnergyCoefficients,
    pub optimizer: OptimizerConfig,
    pub iterations_run: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Metadata {
    pub generator: Option<SceneConfig>,
    pub infill: Option<InfillRecord>,
    pub optimize: Option<OptimizeRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub fps: f64,
    pub frames: usize,
    pub intrinsics: Intrinsics,
    /// Camera-to-world pose per frame, absent until initialized.
    pub camera: Option<Vec<Transform<f64>>>,
    pub persons: Vec<PersonData>,
    pub gt: Option<GroundTruth>,
    pub metadata: Metadata,
}

fn len_check(what: impl Into<String>, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch {
            what: what.into(),
            expected,
            got,
        });
    }
    Ok(())
}

fn finite(what: impl FnOnce() -> String, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Schema(format!("non-finite value in {}", what())))
    }
}

fn transform_finite(p: &Transform<f64>) -> bool {
    p.rotation.is_finite() && p.translation.is_finite()
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Schema(format!("fps must be positive, got {}", self.fps)));
        }
        self.intrinsics.validate()?;
        if let Some(cam) = &self.camera {
            len_check("camera poses", self.frames, cam.len())?;
            for (t, p) in cam.iter().enumerate() {
                finite(|| format!("camera pose {t}"), transform_finite(p))?;
            }
        }
        let mut ids: Vec<u32> = self.persons.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate person id".into()));
        }
        for p in &self.persons {
            let m = p.len();
            if m == 0 || p.start + m > self.frames {
                return Err(Error::Schema(format!(
                    "person {} span [{}, {}) lies outside the {} scene frames",
                    p.id,
                    p.start,
                    p.start + m,
                    self.frames
                )));
            }
            let who = |w: &str| format!("person {} {w}", p.id);
            len_check(who("theta"), m, p.theta.len())?;
            len_check(who("beta"), m, p.beta.len())?;
            len_check(who("cam_obs"), m, p.cam_obs.len())?;
            len_check(who("keypoints2d"), m, p.keypoints.len())?;
            len_check(who("anchor_ego"), m, p.anchor.steps.len())?;
            if let Some(e) = &p.ego {
                len_check(who("ego"), m, e.steps.len())?;
                for (k, s) in e.steps.iter().enumerate() {
                    finite(|| format!("{} step {k}", who("ego")), s.is_finite())?;
                }
            }
            for k in 0..m {
                let vis = p.visible[k];
                if vis && (p.theta[k].is_none() || p.cam_obs[k].is_none() || p.keypoints[k].is_none()) {
                    return Err(Error::Schema(format!("{} is missing observations at visible frame {k}", who(""))));
                }
                if !vis && (p.cam_obs[k].is_some() || p.keypoints[k].is_some()) {
                    return Err(Error::Schema(format!("{} has observations at occluded frame {k}", who(""))));
                }
                if let Some(th) = &p.theta[k] {
                    finite(|| format!("{} frame {k}", who("theta")), th.is_finite())?;
                }
                if let Some(b) = &p.beta[k] {
                    finite(|| format!("{} frame {k}", who("beta")), b.is_finite())?;
                }
                if let Some(o) = &p.cam_obs[k] {
                    finite(|| format!("{} frame {k}", who("cam_obs")), transform_finite(o))?;
                }
                if let Some(kp) = &p.keypoints[k] {
                    len_check(format!("{} frame {k}", who("keypoints2d")), NUM_JOINTS, kp.xy.len())?;
                    len_check(format!("{} confidences frame {k}", who("keypoints2d")), NUM_JOINTS, kp.conf.len())?;
                    let ok = kp.xy.iter().flatten().all(|v| v.is_finite()) && kp.conf.iter().all(|c| c.is_finite() && *c >= 0.0);
                    finite(|| format!("{} frame {k}", who("keypoints2d")), ok)?;
                }
                finite(|| format!("{} step {k}", who("anchor_ego")), p.anchor.steps[k].is_finite())?;
            }
        }
        if let Some(gt) = &self.gt {
            len_check("gt camera poses", self.frames, gt.camera.len())?;
            for g in &gt.persons {
                g.motion.validate()?;
                if g.motion.start + g.motion.len() > self.frames {
                    return Err(Error::Schema(format!("gt person {} extends past the scene", g.id)));
                }
                let ok = g.motion.trajectory.translations.iter().all(|v| v.is_finite())
                    && g.motion.trajectory.rotations.iter().all(|r| r.is_finite())
                    && g.motion.theta.iter().all(BodyPose::is_finite)
                    && g.motion.beta.iter().all(BodyShape::is_finite);
                finite(|| format!("gt person {}", g.id), ok)?;
            }
            for (t, p) in gt.camera.iter().enumerate() {
                finite(|| format!("gt camera pose {t}"), transform_finite(p))?;
            }
        }
        Ok(())
    }

    pub fn is_infilled(&self) -> bool {
        self.persons.iter().all(PersonData::is_infilled)
    }

    /// Optimization problem for the current state. The scene must be
    /// infilled and its camera and trajectories initialized.
    pub fn problem(&self) -> Result<SceneProblem> {
        let camera = self
            .camera
            .clone()
            .ok_or_else(|| Error::Schema("scene has no camera poses".into()))?;
        let persons = self
            .persons
            .iter()
            .map(|p| {
                if !p.is_infilled() {
                    return Err(Error::Schema(format!("person {} has frames without a body pose; run infill first", p.id)));
                }
                Ok(PersonTrack {
                    id: p.id,
                    start: p.start,
                    visible: p.visible.clone(),
                    theta: p.theta.iter().map(|x| x.unwrap()).collect(),
                    beta: p.beta.iter().map(|x| x.unwrap()).collect(),
                    ego: p.ego.clone().unwrap_or_else(|| p.anchor.clone()),
                    anchor: p.anchor.clone(),
                    cam_obs: p.cam_obs.clone(),
                    keypoints: p.keypoints.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(SceneProblem {
            persons,
            camera: CameraTrack {
                poses: camera,
                intrinsics: self.intrinsics,
            },
            fps: self.fps,
        })
    }

    /// Copies trajectories and camera poses of an optimized problem back.
    pub fn update_from(&mut self, problem: &SceneProblem) {
        for (p, t) in self.persons.iter_mut().zip(&problem.persons) {
            p.ego = Some(t.ego.clone());
        }
        self.camera = Some(problem.camera.poses.clone());
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string(&SceneDto::from_scene(self))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            schema_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.schema_version > SCENE_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: probe.schema_version,
                supported: SCENE_SCHEMA_VERSION,
            });
        }
        let dto: SceneDto = serde_json::from_str(text)?;
        let scene = dto.into_scene()?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes the scene; nothing is written when validation fails.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Quaternion that maps back to itself through the matrix form, so a
/// read-write cycle reproduces the same digits.
fn stable_quaternion(r: &Rotation<f64>) -> Quat<f64> {
    let round_trip = |q: Quat<f64>| Rotation::from_quaternion(q).to_quaternion().canonical();
    let mut q = r.to_quaternion().canonical();
    for _ in 0..4 {
        let next = round_trip(q);
        if next == q {
            return q;
        }
        q = next;
    }
    // Stuck in a cycle: look for a fixed point a few ulps away.
    let base = q.to_array();
    let nudge = |a: &mut [f64; 4], i: usize, d: i64| a[i] = f64::from_bits((a[i].to_bits() as i64 + d) as u64);
    let settle = |mut c: Quat<f64>| {
        for _ in 0..3 {
            let next = round_trip(c);
            if next == c {
                return Some(c);
            }
            c = next;
        }
        None
    };
    for step in 1..=64i64 {
        for i in 0..4 {
            for d in [step, -step] {
                let mut a = base;
                nudge(&mut a, i, d);
                if let Some(c) = settle(Quat::from_array(a)) {
                    return c;
                }
            }
        }
    }
    q
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDto {
    q: [f64; 4],
    t: [f64; 3],
}

impl PoseDto {
    fn from_transform(p: &Transform<f64>) -> Self {
        Self {
            q: stable_quaternion(&p.rotation).to_array(),
            t: p.translation.to_array(),
        }
    }

    fn to_transform(self) -> Result<Transform<f64>> {
        let q = Quat::from_array(self.q);
        let n = q.norm();
        if !((n - 1.0).abs() <= QUAT_NORM_TOL) {
            return Err(Error::Schema(format!("quaternion {:?} is not unit length", self.q)));
        }
        Ok(Transform::new(Rotation::from_quaternion(q), Vec3::from_array(self.t)))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointsDto {
    xy: Vec<[f64; 2]>,
    conf: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDto {
    intrinsics: Intrinsics,
    poses: Option<Vec<PoseDto>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersonDto {
    id: u32,
    span: [usize; 2],
    visibility: Vec<bool>,
    theta: Vec<Option<Vec<[f64; 3]>>>,
    beta: Vec<Option<[f64; NUM_BETAS]>>,
    cam_obs: Vec<Option<PoseDto>>,
    keypoints2d: Vec<Option<KeypointsDto>>,
    anchor_ego: Vec<[f64; EGO_STEP_DIM]>,
    ego: Option<Vec<[f64; EGO_STEP_DIM]>>,
    /// Root poses reconstructed from `ego`; written for inspection, ignored on read.
    global: Option<Vec<PoseDto>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GtPersonDto {
    id: u32,
    span: [usize; 2],
    root: Vec<PoseDto>,
    theta: Vec<Vec<[f64; 3]>>,
    beta: Vec<[f64; NUM_BETAS]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GtDto {
    camera: Vec<PoseDto>,
    persons: Vec<GtPersonDto>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDto {
    schema_version: u32,
    fps: f64,
    frames: usize,
    camera: CameraDto,
    persons: Vec<PersonDto>,
    gt: Option<GtDto>,
    metadata: Metadata,
}

fn theta_from(v: &[[f64; 3]], what: impl FnOnce() -> String) -> Result<BodyPose> {
    if v.len() != NUM_BODY_JOINTS {
        return Err(Error::LengthMismatch {
            what: what(),
            expected: NUM_BODY_JOINTS,
            got: v.len(),
        });
    }
    let mut p = BodyPose::rest();
    p.theta.copy_from_slice(v);
    Ok(p)
}

fn ego_from(steps: &[[f64; EGO_STEP_DIM]], fps: f64) -> EgoTrajectory {
    EgoTrajectory {
        steps: steps.iter().map(|a| EgoStep::from_array(*a)).collect(),
        fps,
    }
}

fn span_len(span: [usize; 2], what: impl FnOnce() -> String) -> Result<usize> {
    span[1]
        .checked_sub(span[0])
        .ok_or_else(|| Error::Schema(format!("{} span end precedes its start", what())))
}

impl SceneDto {
    fn from_scene(s: &Scene) -> Self {
        let persons = s
            .persons
            .iter()
            .map(|p| PersonDto {
                id: p.id,
                span: [p.start, p.start + p.len()],
                visibility: p.visible.clone(),
                theta: p.theta.iter().map(|x| x.map(|th| th.theta.to_vec())).collect(),
                beta: p.beta.iter().map(|x| x.map(|b| b.beta)).collect(),
                cam_obs: p.cam_obs.iter().map(|x| x.as_ref().map(PoseDto::from_transform)).collect(),
                keypoints2d: p
                    .keypoints
                    .iter()
                    .map(|x| {
                        x.as_ref().map(|k| KeypointsDto {
                            xy: k.xy.clone(),
                            conf: k.conf.clone(),
                        })
                    })
                    .collect(),
                anchor_ego: p.anchor.steps.iter().map(EgoStep::to_array).collect(),
                ego: p.ego.as_ref().map(|e| e.steps.iter().map(EgoStep::to_array).collect()),
                global: p.ego.as_ref().map(|e| {
                    let g = ego_to_global(e);
                    (0..g.len())
                        .map(|k| PoseDto::from_transform(&Transform::new(g.rotations[k], g.translations[k])))
                        .collect()
                }),
            })
            .collect();
        let gt = s.gt.as_ref().map(|gt| GtDto {
            camera: gt.camera.iter().map(PoseDto::from_transform).collect(),
            persons: gt
                .persons
                .iter()
                .map(|g| {
                    let m = &g.motion;
                    GtPersonDto {
                        id: g.id,
                        span: [m.start, m.start + m.len()],
                        root: (0..m.len()).map(|k| PoseDto::from_transform(&m.root(k))).collect(),
                        theta: m.theta.iter().map(|p| p.theta.to_vec()).collect(),
                        beta: m.beta.iter().map(|b| b.beta).collect(),
                    }
                })
                .collect(),
        });
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            fps: s.fps,
            frames: s.frames,
            camera: CameraDto {
                intrinsics: s.intrinsics,
                poses: s.camera.as_ref().map(|c| c.iter().map(PoseDto::from_transform).collect()),
            },
            persons,
            gt,
            metadata: s.metadata.clone(),
        }
    }

    fn into_scene(self) -> Result<Scene> {
        let fps = self.fps;
        let persons = self
            .persons
            .into_iter()
            .map(|p| {
                let id = p.id;
                let m = span_len(p.span, || format!("person {id}"))?;
                len_check(format!("person {id} visibility"), m, p.visibility.len())?;
                let theta = p
                    .theta
                    .iter()
                    .enumerate()
                    .map(|(k, x)| {
                        x.as_ref()
                            .map(|v| theta_from(v, || format!("person {id} theta joints at frame {k}")))
                            .transpose()
                    })
                    .collect::<Result<_>>()?;
                let cam_obs = p
                    .cam_obs
                    .into_iter()
                    .map(|x| x.map(PoseDto::to_transform).transpose())
                    .collect::<Result<_>>()?;
                Ok(PersonData {
                    id,
                    start: p.span[0],
                    visible: p.visibility,
                    theta,
                    beta: p.beta.into_iter().map(|x| x.map(|beta| BodyShape { beta })).collect(),
                    cam_obs,
                    keypoints: p.keypoints2d.into_iter().map(|x| x.map(|k| Keypoints { xy: k.xy, conf: k.conf })).collect(),
                    anchor: ego_from(&p.anchor_ego, fps),
                    ego: p.ego.map(|e| ego_from(&e, fps)),
                })
            })
            .collect::<Result<_>>()?;
        let gt = self
            .gt
            .map(|g| -> Result<GroundTruth> {
                let persons = g
                    .persons
                    .into_iter()
                    .map(|p| {
                        let id = p.id;
                        let m = span_len(p.span, || format!("gt person {id}"))?;
                        len_check(format!("gt person {id} root"), m, p.root.len())?;
                        let roots: Vec<Transform<f64>> = p.root.into_iter().map(PoseDto::to_transform).collect::<Result<_>>()?;
                        let theta = p
                            .theta
                            .iter()
                            .enumerate()
                            .map(|(k, v)| theta_from(v, || format!("gt person {id} theta joints at frame {k}")))
                            .collect::<Result<_>>()?;
                        Ok(GtPerson {
                            id,
                            motion: GlobalMotion {
                                start: p.span[0],
                                trajectory: GlobalTrajectory {
                                    translations: roots.iter().map(|r| r.translation).collect(),
                                    rotations: roots.iter().map(|r| r.rotation).collect(),
                                },
                                theta,
                                beta: p.beta.into_iter().map(|beta| BodyShape { beta }).collect(),
                                fps,
                            },
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(GroundTruth {
                    persons,
                    camera: g.camera.into_iter().map(PoseDto::to_transform).collect::<Result<_>>()?,
                })
            })
            .transpose()?;
        Ok(Scene {
            fps,
            frames: self.frames,
            intrinsics: self.camera.intrinsics,
            camera: self
                .camera
                .poses
                .map(|c| c.into_iter().map(PoseDto::to_transform).collect::<Result<_>>())
                .transpose()?,
            persons,
            gt,
            metadata: self.metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::KinematicTree;
    use crate::geometry::geodesic;
    use crate::synth::{generate, SceneConfig};

    fn small() -> Scene {
        let cfg = SceneConfig {
            frames: 40,
            ..Default::default()
        };
        generate(&cfg, &KinematicTree::standard()).unwrap()
    }

    fn close(a: &Transform<f64>, b: &Transform<f64>) -> bool {
        geodesic(&a.rotation, &b.rotation) < 1e-12 && (a.translation - b.translation).norm() < 1e-14
    }

    #[test]
    fn written_quaternions_are_fixed_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut misses = 0;
        for _ in 0..200_000 {
            let w = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let q = stable_quaternion(&Rotation::from_axis_angle(w));
            if Rotation::from_quaternion(q).to_quaternion().canonical() != q {
                misses += 1;
            }
        }
        // A handful per million rotations have no fixed point within reach.
        assert!(misses <= 2, "{misses} rotations without a fixed point");
    }

    #[test]
    fn round_trip_preserves_content() {
        let s = small();
        let text = s.to_json().unwrap();
        let back = Scene::from_json(&text).unwrap();
        assert_eq!(back.frames, s.frames);
        assert_eq!(back.metadata, s.metadata);
        for (a, b) in s.persons.iter().zip(&back.persons) {
            assert_eq!(a.theta, b.theta);
            assert_eq!(a.beta, b.beta);
            assert_eq!(a.keypoints, b.keypoints);
            assert_eq!(a.anchor, b.anchor);
            for (x, y) in a.cam_obs.iter().zip(&b.cam_obs) {
                match (x, y) {
                    (Some(x), Some(y)) => assert!(close(x, y)),
                    (None, None) => {}
                    _ => panic!("observation presence changed"),
                }
            }
        }
        let gt = (s.gt.as_ref().unwrap(), back.gt.as_ref().unwrap());
        for (a, b) in gt.0.camera.iter().zip(&gt.1.camera) {
            assert!(close(a, b));
        }
        assert_eq!(gt.0.persons[1].motion.theta, gt.1.persons[1].motion.theta);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let text = small().to_json().unwrap();
        assert_eq!(Scene::from_json(&text).unwrap().to_json().unwrap(), text);
    }

    #[test]
    fn newer_schema_is_rejected_by_version() {
        let text = small().to_json().unwrap().replacen("\"schema_version\":1", "\"schema_version\":7", 1);
        match Scene::from_json(&text) {
            Err(Error::SchemaVersion { found: 7, supported: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_values_are_not_written() {
        let mut s = small();
        s.persons[0].anchor.steps[3].z = f64::NAN;
        assert!(matches!(s.to_json(), Err(Error::Schema(_))));
    }

    #[test]
    fn null_numbers_are_rejected_on_read() {
        let s = small();
        let text = s.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut v2 = v.clone();
        v2["persons"][0]["anchor_ego"][2][0] = serde_json::Value::Null;
        assert!(Scene::from_json(&v2.to_string()).is_err());
        let mut v3 = v;
        v3["persons"][0]["visibility"].as_array_mut().unwrap().pop();
        assert!(Scene::from_json(&v3.to_string()).is_err());
    }

    #[test]
    fn quaternions_are_canonical() {
        let text = small().to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for p in v["gt"]["camera"].as_array().unwrap() {
            assert!(p["q"][0].as_f64().unwrap() >= 0.0);
        }
    }

    #[test]
    fn problem_requires_infill_and_camera() {
        let s = small();
        assert!(s.problem().is_err());
    }
}
