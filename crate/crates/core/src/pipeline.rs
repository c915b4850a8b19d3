//! Scene-level stages: infilling, initialization and optimization.

use rayon::prelude::*;

use crate::body::KinematicTree;
use crate::camera::init_extrinsics;
use crate::ego::{apply_start_override, ego_to_global};
use crate::energy::{EnergyCoefficients, Evaluator};
use crate::error::{Error, Result};
use crate::geometry::{heading_or_zero, wrap_angle, Rotation, Transform, Vec3};
use crate::infill::{autoregressive_infill, interpolate_shapes, Infiller, WindowConfig};
use crate::optim::{optimize, OptimizeResult, OptimizerConfig};
use crate::scene::{InfillRecord, OptimizeRecord, Scene};

/// Completes body poses and shapes on every frame of every person.
pub fn infill_scene(scene: &Scene, infiller: &dyn Infiller, cfg: &WindowConfig) -> Result<Scene> {
    cfg.validate()?;
    let filled = scene
        .persons
        .par_iter()
        .map(|p| {
            let seq = autoregressive_infill(&p.sequence(scene.fps), infiller, cfg)?;
            Ok((seq.theta, interpolate_shapes(&p.beta)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = scene.clone();
    for (p, (theta, beta)) in out.persons.iter_mut().zip(filled) {
        p.theta = theta.into_iter().map(Some).collect();
        p.beta = beta.into_iter().map(Some).collect();
    }
    out.metadata.infill = Some(InfillRecord {
        method: infiller.name().into(),
        window: *cfg,
    });
    Ok(out)
}

/// Root poses of a person's trajectory indexed by scene frame.
fn world_roots(traj: &crate::ego::GlobalTrajectory, start: usize, frames: usize) -> Vec<Transform<f64>> {
    let mut out = vec![Transform::identity(); frames];
    for k in 0..traj.len() {
        out[start + k] = Transform::new(traj.rotations[k], traj.translations[k]);
    }
    out
}

/// Starting trajectories and camera poses.
///
/// Each person's trajectory starts from its anchor. The first person with a
/// visible frame keeps the anchor's start at the origin; every other person is
/// placed from the first frame it shares with an already placed person, where
/// the two camera-frame observations fix their relative pose. Persons never
/// seen together with a placed one keep their anchor start. Cameras then come
/// from [`init_extrinsics`] unless the scene already has them.
pub fn initialize(scene: &Scene) -> Result<Scene> {
    let mut out = scene.clone();
    let n = out.persons.len();
    for p in out.persons.iter_mut() {
        if p.ego.is_none() {
            p.ego = Some(p.anchor.clone());
        }
    }
    let first = out
        .persons
        .iter()
        .position(|p| p.visible.iter().any(|v| *v))
        .ok_or(Error::NoVisiblePerson)?;
    let mut placed = vec![false; n];
    placed[first] = true;
    loop {
        let mut progress = false;
        for i in 0..n {
            if placed[i] {
                continue;
            }
            if let Some((j, t)) = first_shared_frame(&out, &placed, i) {
                let pi = &out.persons[i];
                let pj = &out.persons[j];
                let gj = ego_to_global(pj.ego.as_ref().unwrap());
                let kj = t - pj.start;
                let ki = t - pi.start;
                // Camera implied by person j, then person i's world root.
                let cam = Transform::new(gj.rotations[kj], gj.translations[kj]).compose(&pj.cam_obs[kj].unwrap().inverse());
                let target = cam.compose(&pi.cam_obs[ki].unwrap());
                let gi = ego_to_global(pi.ego.as_ref().unwrap());
                let delta = wrap_angle(heading_or_zero(&target.rotation) - heading_or_zero(&gi.rotations[ki]));
                let moved = Rotation::rz(delta).apply(gi.translations[ki]);
                let d = target.translation - moved;
                let start = Rotation::rz(delta).apply(Vec3::new(gi.translations[0].x, gi.translations[0].y, 0.0)) + Vec3::new(d.x, d.y, 0.0);
                let phi0 = wrap_angle(pi.ego.as_ref().unwrap().steps[0].dphi + delta);
                let ego = apply_start_override(pi.ego.as_ref().unwrap(), start.x, start.y, phi0);
                out.persons[i].ego = Some(ego);
                placed[i] = true;
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    if out.camera.is_none() {
        let frames = out.frames;
        let mut global = Vec::with_capacity(n);
        let mut cam = Vec::with_capacity(n);
        let mut visible = Vec::with_capacity(n);
        for p in &out.persons {
            global.push(world_roots(&ego_to_global(p.ego.as_ref().unwrap()), p.start, frames));
            let mut c = vec![Transform::identity(); frames];
            let mut v = vec![false; frames];
            for k in 0..p.len() {
                if let Some(o) = p.cam_obs[k] {
                    c[p.start + k] = o;
                    v[p.start + k] = true;
                }
            }
            cam.push(c);
            visible.push(v);
        }
        out.camera = Some(init_extrinsics(&global, &cam, &visible, frames)?);
    }
    Ok(out)
}

fn first_shared_frame(scene: &Scene, placed: &[bool], i: usize) -> Option<(usize, usize)> {
    let pi = &scene.persons[i];
    for k in 0..pi.len() {
        if !pi.visible[k] {
            continue;
        }
        let t = pi.start + k;
        for (j, pj) in scene.persons.iter().enumerate() {
            if placed[j] && t >= pj.start && t < pj.start + pj.len() && pj.visible[t - pj.start] {
                return Some((j, t));
            }
        }
    }
    None
}

pub struct OptimizeOutcome {
    pub scene: Scene,
    pub result: OptimizeResult,
}

/// Initializes what is missing, then runs the optimizer.
pub fn optimize_scene(
    scene: &Scene,
    tree: &KinematicTree,
    coeffs: &EnergyCoefficients,
    cfg: &OptimizerConfig,
) -> Result<OptimizeOutcome> {
    if !scene.is_infilled() {
        return Err(Error::Schema("scene has frames without a body pose; run infill first".into()));
    }
    let ready = if scene.camera.is_none() || scene.persons.iter().any(|p| p.ego.is_none()) {
        initialize(scene)?
    } else {
        scene.clone()
    };
    let problem = ready.problem()?;
    let result = optimize(&problem, tree, coeffs, cfg)?;
    let mut out = ready;
    out.update_from(&result.problem);
    let (first, last) = (result.trace.first().unwrap(), result.trace.last().unwrap());
    out.metadata.optimize = Some(OptimizeRecord {
        coefficients: *coeffs,
        optimizer: OptimizerConfig { threads: None, ..*cfg },
        iterations_run: last.iteration,
        initial_energy: first.total,
        final_energy: last.total,
    });
    Ok(OptimizeOutcome { scene: out, result })
}

/// Energy of the scene's current state.
pub fn scene_energy(scene: &Scene, tree: &KinematicTree, coeffs: &EnergyCoefficients) -> Result<crate::energy::Energy> {
    let problem = scene.problem()?;
    let ev = Evaluator::new(&problem, tree, coeffs)?;
    Ok(ev.energy(&ev.pack_problem(&problem)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::uprightness;
    use crate::geometry::geodesic;
    use crate::infill::LinearInfiller;
    use crate::synth::{generate, AnchorDrift, ObservationNoise, SceneConfig};

    fn clean(frames: usize) -> Scene {
        let cfg = SceneConfig {
            frames,
            noise: ObservationNoise {
                keypoint_sigma: 0.0,
                rot_sigma: 0.0,
                trans_sigma: 0.0,
            },
            drift: AnchorDrift::none(),
            ..Default::default()
        };
        generate(&cfg, &KinematicTree::standard()).unwrap()
    }

    #[test]
    fn infill_completes_every_frame() {
        let s = clean(120);
        assert!(!s.is_infilled());
        let f = infill_scene(&s, &LinearInfiller::default(), &WindowConfig::default()).unwrap();
        assert!(f.is_infilled());
        for (a, b) in s.persons.iter().zip(&f.persons) {
            assert_eq!(a.visible, b.visible);
            for k in 0..a.len() {
                if a.visible[k] {
                    assert_eq!(a.theta[k], b.theta[k]);
                }
            }
        }
        assert_eq!(f.metadata.infill.as_ref().unwrap().method, "linear");
    }

    #[test]
    fn clean_scene_initializes_to_ground_truth_up_to_a_planar_motion() {
        let s = infill_scene(&clean(150), &LinearInfiller::default(), &WindowConfig::default()).unwrap();
        let init = initialize(&s).unwrap();
        let gt = init.gt.as_ref().unwrap();
        // Planar transform taking the estimate of person 0 onto its ground truth.
        let g0 = ego_to_global(init.persons[0].ego.as_ref().unwrap());
        let m0 = &gt.persons[0].motion;
        let align = Transform::new(m0.trajectory.rotations[0], m0.trajectory.translations[0])
            .compose(&Transform::new(g0.rotations[0], g0.translations[0]).inverse());
        for (p, g) in init.persons.iter().zip(&gt.persons) {
            let est = ego_to_global(p.ego.as_ref().unwrap());
            for k in 0..p.len() {
                let mapped = align.compose(&Transform::new(est.rotations[k], est.translations[k]));
                assert!((mapped.translation - g.motion.trajectory.translations[k]).norm() < 1e-6);
                assert!(geodesic(&mapped.rotation, &g.motion.trajectory.rotations[k]) < 1e-6);
            }
        }
        for (t, (c, want)) in init.camera.as_ref().unwrap().iter().zip(&gt.camera).enumerate() {
            assert!((uprightness(c) + 1.0).abs() < 1e-6);
            let seen = init.persons.iter().any(|p| t >= p.start && t < p.start + p.len() && p.visible[t - p.start]);
            if !seen {
                continue;
            }
            let mapped = align.compose(c);
            assert!((mapped.translation - want.translation).norm() < 1e-6);
            assert!(geodesic(&mapped.rotation, &want.rotation) < 1e-6);
        }
    }

    #[test]
    fn zero_iterations_keep_the_initial_state() {
        let s = infill_scene(&clean(60), &LinearInfiller::default(), &WindowConfig::default()).unwrap();
        let init = initialize(&s).unwrap();
        let cfg = OptimizerConfig {
            iterations: 0,
            ..Default::default()
        };
        let out = optimize_scene(&init, &KinematicTree::standard(), &EnergyCoefficients::default(), &cfg).unwrap();
        assert_eq!(out.result.trace.len(), 1);
        assert_eq!(out.scene.persons, init.persons);
        for (a, b) in out.scene.camera.unwrap().iter().zip(init.camera.as_ref().unwrap()) {
            assert!(geodesic(&a.rotation, &b.rotation) < 1e-12);
            assert_eq!(a.translation, b.translation);
        }
    }

    #[test]
    fn optimize_requires_infill() {
        let s = clean(30);
        let r = optimize_scene(&s, &KinematicTree::standard(), &EnergyCoefficients::default(), &OptimizerConfig::default());
        assert!(r.is_err());
    }
}
