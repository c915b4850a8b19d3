//! Autoregressive sliding-window infilling of occluded body poses, the two
//! deterministic baselines, shape interpolation and occlusion synthesis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::{BodyPose, BodyShape, NUM_BODY_JOINTS};
use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};

pub const INFILLER_NAMES: [&str; 2] = ["linear", "lastpose"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Window length in frames.
    pub h: usize,
    /// Context frames at the window start.
    pub h_c: usize,
    /// Look-ahead frames at the window end.
    pub h_l: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { h: 50, h_c: 10, h_l: 10 }
    }
}

impl WindowConfig {
    /// Frames committed per window step.
    pub fn advance(&self) -> usize {
        self.h.saturating_sub(self.h_c + self.h_l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_c + self.h_l >= self.h {
            return Err(Error::InvalidConfig(format!(
                "window of {} frames leaves nothing to commit after {} context and {} look-ahead frames",
                self.h, self.h_c, self.h_l
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    pub theta: Vec<BodyPose>,
    pub beta: Vec<BodyShape>,
    pub visible: Vec<bool>,
    pub fps: f64,
}

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (what, got) in [("beta", self.beta.len()), ("visibility", self.visible.len())] {
            if got != self.len() {
                return Err(Error::LengthMismatch {
                    what: format!("sequence {what}"),
                    expected: self.len(),
                    got,
                });
            }
        }
        Ok(())
    }
}

/// Fills occluded frames of a window. Implementations must return exactly
/// `poses.len()` frames and leave every frame flagged in `visible` untouched.
pub trait Infiller: Sync {
    fn name(&self) -> &str;

    /// Number of samples drawn per window by stochastic infillers.
    fn samples(&self) -> Option<usize> {
        None
    }

    fn infill(&self, poses: &[BodyPose], visible: &[bool]) -> Result<Vec<BodyPose>>;
}

/// Per-joint slerp between the visible poses bracketing each gap.
#[derive(Clone, Debug, Default)]
pub struct LinearInfiller {
    /// Used when a window has no visible frame at all.
    pub rest: BodyPose,
}

/// Copies the last visible pose forward.
#[derive(Clone, Debug, Default)]
pub struct LastPoseInfiller {
    pub rest: BodyPose,
}

pub fn infiller_by_name(name: &str, rest: BodyPose) -> Result<Box<dyn Infiller>> {
    match name {
        "linear" => Ok(Box::new(LinearInfiller { rest })),
        "lastpose" => Ok(Box::new(LastPoseInfiller { rest })),
        _ => Err(Error::UnknownName {
            kind: "infill method",
            name: name.into(),
            available: INFILLER_NAMES.join(", "),
        }),
    }
}

fn nearest_visible(visible: &[bool]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n = visible.len();
    let mut prev = vec![None; n];
    let mut next = vec![None; n];
    let mut last = None;
    for t in 0..n {
        if visible[t] {
            last = Some(t);
        }
        prev[t] = last;
    }
    last = None;
    for t in (0..n).rev() {
        if visible[t] {
            last = Some(t);
        }
        next[t] = last;
    }
    (prev, next)
}

/// Shortest-arc interpolation of every body joint rotation.
pub fn slerp_pose(a: &BodyPose, b: &BodyPose, t: f64) -> BodyPose {
    let mut out = *a;
    for j in 0..NUM_BODY_JOINTS {
        let qa = Rotation::from_axis_angle(Vec3::from_array(a.theta[j])).to_quaternion();
        let qb = Rotation::from_axis_angle(Vec3::from_array(b.theta[j])).to_quaternion();
        out.theta[j] = Rotation::from_quaternion(qa.slerp(qb, t)).to_axis_angle().to_array();
    }
    out
}

impl Infiller for LinearInfiller {
    fn name(&self) -> &str {
        "linear"
    }

    fn infill(&self, poses: &[BodyPose], visible: &[bool]) -> Result<Vec<BodyPose>> {
        let (prev, next) = nearest_visible(visible);
        Ok((0..poses.len())
            .map(|t| match (visible[t], prev[t], next[t]) {
                (true, _, _) => poses[t],
                (false, Some(a), Some(b)) => slerp_pose(&poses[a], &poses[b], (t - a) as f64 / (b - a) as f64),
                (false, Some(a), None) | (false, None, Some(a)) => poses[a],
                (false, None, None) => self.rest,
            })
            .collect())
    }
}

impl Infiller for LastPoseInfiller {
    fn name(&self) -> &str {
        "lastpose"
    }

    fn infill(&self, poses: &[BodyPose], visible: &[bool]) -> Result<Vec<BodyPose>> {
        let (prev, next) = nearest_visible(visible);
        Ok((0..poses.len())
            .map(|t| match (visible[t], prev[t], next[t]) {
                (true, _, _) => poses[t],
                (false, Some(a), _) | (false, None, Some(a)) => poses[a],
                (false, None, None) => self.rest,
            })
            .collect())
    }
}

/// One step of the window schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowStep {
    pub start: usize,
    pub end: usize,
    pub commit_start: usize,
    pub commit_end: usize,
}

/// Window placement for a sequence of `len` frames. The first window starts
/// at frame 0 and commits its context too (leading frames have no earlier
/// context); later windows commit `h_o` frames after `h_c` committed ones.
/// Near the end the look-ahead shrinks first.
pub fn schedule(len: usize, cfg: &WindowConfig) -> Result<Vec<WindowStep>> {
    cfg.validate()?;
    let mut steps = Vec::new();
    let mut c = 0;
    while c < len {
        let start = c.saturating_sub(cfg.h_c);
        let end = (start + cfg.h).min(len);
        let commit_end = if c == 0 { cfg.h_c + cfg.advance() } else { c + cfg.advance() }.min(len);
        steps.push(WindowStep {
            start,
            end,
            commit_start: c,
            commit_end,
        });
        c = commit_end;
    }
    Ok(steps)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfillOutput {
    pub sequence: MotionSequence,
    /// Number of times each frame was overwritten by infiller output.
    pub commits: Vec<u32>,
}

pub fn autoregressive_infill(seq: &MotionSequence, infiller: &dyn Infiller, cfg: &WindowConfig) -> Result<MotionSequence> {
    autoregressive_infill_counted(seq, infiller, cfg).map(|o| o.sequence)
}

pub fn autoregressive_infill_counted(seq: &MotionSequence, infiller: &dyn Infiller, cfg: &WindowConfig) -> Result<InfillOutput> {
    seq.validate()?;
    if seq.is_empty() {
        return Err(Error::InvalidConfig("cannot infill an empty sequence".into()));
    }
    let steps = schedule(seq.len(), cfg)?;
    let mut theta = seq.theta.clone();
    let mut known = seq.visible.clone();
    let mut commits = vec![0u32; seq.len()];
    let contract = |reason: String| Error::InfillerContract {
        name: infiller.name().into(),
        reason,
    };
    for w in steps {
        if known[w.commit_start..w.commit_end].iter().all(|k| *k) {
            continue;
        }
        let out = infiller.infill(&theta[w.start..w.end], &known[w.start..w.end])?;
        if out.len() != w.end - w.start {
            return Err(contract(format!("returned {} frames for a window of {}", out.len(), w.end - w.start)));
        }
        for (k, t) in (w.start..w.end).enumerate() {
            if known[t] && out[k] != theta[t] {
                return Err(contract(format!("modified visible frame {t}")));
            }
            if !out[k].is_finite() {
                return Err(contract(format!("returned a non-finite pose at frame {t}")));
            }
        }
        for t in w.commit_start..w.commit_end {
            if !known[t] {
                theta[t] = out[t - w.start];
                known[t] = true;
                commits[t] += 1;
            }
        }
    }
    Ok(InfillOutput {
        sequence: MotionSequence {
            theta,
            beta: seq.beta.clone(),
            visible: vec![true; seq.len()],
            fps: seq.fps,
        },
        commits,
    })
}

/// Per-component linear interpolation of shapes over gaps; edge gaps copy the
/// nearest visible shape, and a sequence with none falls back to the mean.
pub fn interpolate_shapes(beta: &[Option<BodyShape>]) -> Vec<BodyShape> {
    let visible: Vec<bool> = beta.iter().map(Option::is_some).collect();
    let (prev, next) = nearest_visible(&visible);
    (0..beta.len())
        .map(|t| match (beta[t], prev[t], next[t]) {
            (Some(b), _, _) => b,
            (None, Some(a), Some(c)) => {
                let (ba, bc) = (beta[a].unwrap(), beta[c].unwrap());
                let s = (t - a) as f64 / (c - a) as f64;
                let mut out = ba;
                for i in 0..out.beta.len() {
                    out.beta[i] = ba.beta[i] + s * (bc.beta[i] - ba.beta[i]);
                }
                out
            }
            (None, Some(a), None) | (None, None, Some(a)) => beta[a].unwrap(),
            (None, None, None) => BodyShape::mean(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcclusionConfig {
    /// Leading frames that are never occluded.
    pub h_c: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            h_c: 10,
            min_len: 10,
            max_len: 40,
        }
    }
}

/// One contiguous occluded run of uniformly drawn length, placed uniformly
/// after the context frames. Lengths longer than the room left are not drawn.
pub fn synthesize_occlusions(len: usize, cfg: &OcclusionConfig, seed: u64) -> Result<Vec<bool>> {
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::InvalidConfig(format!(
            "occlusion length range {}..={} is empty",
            cfg.min_len, cfg.max_len
        )));
    }
    if len < cfg.h_c + cfg.min_len {
        return Err(Error::InvalidConfig(format!(
            "sequence of {len} frames cannot hold {} context and {} occluded frames",
            cfg.h_c, cfg.min_len
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rng.random_range(cfg.min_len..=cfg.max_len.min(len - cfg.h_c));
    let start = rng.random_range(cfg.h_c..=len - h);
    let mut v = vec![true; len];
    v[start..start + h].iter_mut().for_each(|x| *x = false);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geodesic;

    fn pose(a: f64) -> BodyPose {
        let mut p = BodyPose::rest();
        for j in 0..NUM_BODY_JOINTS {
            p.theta[j] = [0.1 * a, 0.05 * a * j as f64 / 23.0, -0.2 * a];
        }
        p
    }

    fn seq(len: usize, occluded: std::ops::Range<usize>) -> MotionSequence {
        let visible: Vec<bool> = (0..len).map(|t| !occluded.contains(&t)).collect();
        MotionSequence {
            theta: (0..len).map(|t| if visible[t] { pose((t as f64 * 0.07).sin()) } else { BodyPose::rest() }).collect(),
            beta: vec![BodyShape::mean(); len],
            visible,
            fps: 30.0,
        }
    }

    fn joint_rot(p: &BodyPose, j: usize) -> Rotation<f64> {
        Rotation::from_axis_angle(Vec3::from_array(p.theta[j]))
    }

    #[test]
    fn default_window_advance() {
        assert_eq!(WindowConfig::default().advance(), 30);
        assert!(WindowConfig { h: 20, h_c: 10, h_l: 10 }.validate().is_err());
    }

    #[test]
    fn schedule_tiles_the_sequence() {
        let s = schedule(200, &WindowConfig::default()).unwrap();
        assert_eq!(s[0], WindowStep { start: 0, end: 50, commit_start: 0, commit_end: 40 });
        assert_eq!(s[1], WindowStep { start: 30, end: 80, commit_start: 40, commit_end: 70 });
        let last = s.last().unwrap();
        assert_eq!((last.end, last.commit_end), (200, 200));
        for w in s.windows(2) {
            assert_eq!(w[0].commit_end, w[1].commit_start);
            assert_eq!(w[1].start, w[0].start + 30);
        }
    }

    #[test]
    fn fully_visible_is_untouched() {
        struct Panics;
        impl Infiller for Panics {
            fn name(&self) -> &str {
                "panics"
            }
            fn infill(&self, _: &[BodyPose], _: &[bool]) -> Result<Vec<BodyPose>> {
                panic!("consulted")
            }
        }
        let s = seq(120, 0..0);
        let out = autoregressive_infill_counted(&s, &Panics, &WindowConfig::default()).unwrap();
        assert_eq!(out.sequence.theta, s.theta);
        assert!(out.commits.iter().all(|c| *c == 0));
    }

    #[test]
    fn gap_inside_first_window_matches_single_shot() {
        let s = seq(200, 20..45);
        let out = autoregressive_infill(&s, &LinearInfiller::default(), &WindowConfig::default()).unwrap();
        for t in 20..45 {
            let want = slerp_pose(&s.theta[19], &s.theta[45], (t - 19) as f64 / 26.0);
            for j in 0..NUM_BODY_JOINTS {
                assert!(geodesic(&joint_rot(&out.theta[t], j), &joint_rot(&want, j)) < 1e-12);
            }
        }
    }

    #[test]
    fn long_gap_commits_once() {
        let s = seq(200, 15..180);
        let out = autoregressive_infill_counted(&s, &LinearInfiller::default(), &WindowConfig::default()).unwrap();
        for t in 0..200 {
            assert_eq!(out.commits[t], u32::from(!s.visible[t]), "frame {t}");
        }
        let steps = schedule(200, &WindowConfig::default()).unwrap();
        let active = steps
            .iter()
            .filter(|w| (w.commit_start..w.commit_end).any(|t| !s.visible[t]))
            .count();
        assert_eq!(active, 165usize.div_ceil(30));
        assert!(out.sequence.visible.iter().all(|v| *v));
    }

    #[test]
    fn slerp_half_way() {
        let mut a = BodyPose::rest();
        let mut b = BodyPose::rest();
        a.theta[4] = [0.0, 0.0, 0.0];
        b.theta[4] = [0.0, 0.0, std::f64::consts::FRAC_PI_2];
        let mut visible = vec![true, false, true];
        let out = LinearInfiller::default().infill(&[a, BodyPose::rest(), b], &visible).unwrap();
        let want = Rotation::rz(std::f64::consts::FRAC_PI_4);
        assert!(geodesic(&joint_rot(&out[1], 4), &want) < 1e-12);
        visible[2] = false;
        let out = LinearInfiller::default().infill(&[a, b, b], &visible).unwrap();
        assert_eq!(out[2], a);
    }

    #[test]
    fn antipodal_boundaries_take_the_short_path() {
        // Boundary rotations 0.1 apart whose quaternions land on opposite hemispheres.
        let r0 = Rotation::from_axis_angle(Vec3::new(0.0, 0.0, 3.1));
        let r1 = Rotation::from_axis_angle(Vec3::new(0.0, 0.0, -3.083185307179586));
        let mut a = BodyPose::rest();
        let mut b = BodyPose::rest();
        a.theta[0] = r0.to_axis_angle().to_array();
        b.theta[0] = r1.to_axis_angle().to_array();
        let gap = geodesic(&r0, &r1);
        assert!(gap < 0.2);
        let mut poses = vec![BodyPose::rest(); 12];
        poses[0] = a;
        poses[11] = b;
        let visible: Vec<bool> = (0..12).map(|t| t == 0 || t == 11).collect();
        let out = LinearInfiller::default().infill(&poses, &visible).unwrap();
        for t in 0..11 {
            let step = geodesic(&joint_rot(&out[t], 0), &joint_rot(&out[t + 1], 0));
            assert!(step <= gap / 11.0 + 1e-9, "{step}");
        }
    }

    #[test]
    fn last_pose_behaviour() {
        let s = seq(100, 30..70);
        let out = autoregressive_infill(&s, &LastPoseInfiller::default(), &WindowConfig::default()).unwrap();
        for t in 30..70 {
            assert_eq!(out.theta[t], s.theta[29]);
        }
        let lead = seq(100, 0..25);
        let out = autoregressive_infill(&lead, &LastPoseInfiller::default(), &WindowConfig::default()).unwrap();
        for t in 0..25 {
            assert_eq!(out.theta[t], s.theta[25]);
        }
    }

    #[test]
    fn all_occluded_window_uses_rest() {
        let rest = pose(0.3);
        let v = vec![false; 5];
        let out = LinearInfiller { rest }.infill(&[BodyPose::rest(); 5], &v).unwrap();
        assert!(out.iter().all(|p| *p == rest));
    }

    #[test]
    fn contract_violations_are_reported() {
        struct Short;
        impl Infiller for Short {
            fn name(&self) -> &str {
                "short"
            }
            fn infill(&self, p: &[BodyPose], _: &[bool]) -> Result<Vec<BodyPose>> {
                Ok(p[1..].to_vec())
            }
        }
        struct Meddles;
        impl Infiller for Meddles {
            fn name(&self) -> &str {
                "meddles"
            }
            fn infill(&self, p: &[BodyPose], _: &[bool]) -> Result<Vec<BodyPose>> {
                Ok(vec![pose(0.9); p.len()])
            }
        }
        let s = seq(80, 20..30);
        let cfg = WindowConfig::default();
        assert!(matches!(autoregressive_infill(&s, &Short, &cfg), Err(Error::InfillerContract { .. })));
        assert!(matches!(autoregressive_infill(&s, &Meddles, &cfg), Err(Error::InfillerContract { .. })));
    }

    #[test]
    fn shape_interpolation() {
        let mut e1 = BodyShape::mean();
        e1.beta[0] = 1.0;
        let b = vec![Some(BodyShape::mean()), None, None, None, Some(e1)];
        let out = interpolate_shapes(&b);
        for (t, want) in [(1, 0.25), (2, 0.5), (3, 0.75)] {
            assert_eq!(out[t].beta[0], want);
        }
        let lead = interpolate_shapes(&[None, None, Some(e1), Some(BodyShape::mean())]);
        assert_eq!(lead[0], e1);
        let flat = interpolate_shapes(&[Some(e1), None, Some(e1)]);
        assert_eq!(flat[1], e1);
    }

    #[test]
    fn occlusion_synthesis() {
        let cfg = OcclusionConfig::default();
        for seed in 0..200 {
            let v = synthesize_occlusions(50, &cfg, seed).unwrap();
            assert!(v[..10].iter().all(|x| *x));
            let n = v.iter().filter(|x| !**x).count();
            assert!((10..=40).contains(&n));
            let first = v.iter().position(|x| !x).unwrap();
            assert!(v[first..first + n].iter().all(|x| !x));
        }
        assert_eq!(synthesize_occlusions(90, &cfg, 5).unwrap(), synthesize_occlusions(90, &cfg, 5).unwrap());
        assert!(synthesize_occlusions(19, &cfg, 0).is_err());
        assert!(infiller_by_name("cvae", BodyPose::rest()).is_err());
    }
}
