//! Evaluation metrics: windowed global joint errors, Procrustes-aligned
//! errors, acceleration error, FID on kinetic features and relative pose
//! errors between persons.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::KinematicTree;
use crate::error::{Error, Result};
use crate::geometry::{geodesic, heading_or_zero, Rotation, Transform, Vec3};
use crate::motion::GlobalMotion;
use crate::scene::{GroundTruth, Scene};

const MM: f64 = 1000.0;
/// Diagonal regularization of FID covariances.
pub const FID_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignMode {
    /// Full rigid transform of the root at the window start.
    FullRootRigid,
    /// Rotation about the vertical plus translation.
    YawAndTranslation,
}

impl AlignMode {
    pub const ALL: [AlignMode; 2] = [Self::FullRootRigid, Self::YawAndTranslation];

    pub fn name(self) -> &'static str {
        match self {
            Self::FullRootRigid => "full-root-rigid",
            Self::YawAndTranslation => "yaw-and-translation",
        }
    }
}

impl std::str::FromStr for AlignMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "alignment mode",
            name: s.into(),
            available: Self::ALL.map(Self::name).join(", "),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentWindowConfig {
    pub seconds: f64,
    pub mode: AlignMode,
    /// Window start spacing in seconds; `None` tiles without overlap.
    pub stride_seconds: Option<f64>,
    /// Clip length for FID features in seconds.
    pub fid_clip_seconds: f64,
}

impl Default for AlignmentWindowConfig {
    fn default() -> Self {
        Self {
            seconds: 10.0,
            mode: AlignMode::FullRootRigid,
            stride_seconds: None,
            fid_clip_seconds: 2.0,
        }
    }
}

impl AlignmentWindowConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.seconds) || !pos(self.fid_clip_seconds) || self.stride_seconds.is_some_and(|s| !pos(s)) {
            return Err(Error::InvalidConfig("metric window lengths must be positive".into()));
        }
        Ok(())
    }

    /// `(start, end)` frame ranges of the alignment windows.
    pub fn windows(&self, len: usize, fps: f64) -> Vec<(usize, usize)> {
        let w = ((self.seconds * fps).floor() as usize).max(1);
        let stride = self.stride_seconds.map_or(w, |s| ((s * fps).floor() as usize).max(1));
        let mut out = Vec::new();
        let mut s = 0;
        while s < len {
            let e = (s + w).min(len);
            out.push((s, e));
            if e == len {
                break;
            }
            s += stride;
        }
        out
    }
}

fn alignment(pred: &Transform<f64>, gt: &Transform<f64>, mode: AlignMode) -> Transform<f64> {
    match mode {
        AlignMode::FullRootRigid => gt.compose(&pred.inverse()),
        AlignMode::YawAndTranslation => {
            let r = Rotation::rz(heading_or_zero(&gt.rotation) - heading_or_zero(&pred.rotation));
            Transform::new(r, gt.translation - r.apply(pred.translation))
        }
    }
}

/// Mean point error (mm) after aligning each window's first predicted root
/// onto the ground-truth root. Only frames with `mask[t]` contribute;
/// `None` when no frame does.
pub fn windowed_global_error(
    pred_points: &[Vec<Vec3<f64>>],
    pred_roots: &[Transform<f64>],
    gt_points: &[Vec<Vec3<f64>>],
    gt_roots: &[Transform<f64>],
    mask: Option<&[bool]>,
    fps: f64,
    cfg: &AlignmentWindowConfig,
) -> Result<Option<f64>> {
    cfg.validate()?;
    let n = gt_points.len();
    for (what, got) in [("predicted points", pred_points.len()), ("predicted roots", pred_roots.len()), ("gt roots", gt_roots.len())] {
        if got != n {
            return Err(Error::LengthMismatch {
                what: what.into(),
                expected: n,
                got,
            });
        }
    }
    let sums: Vec<(f64, usize)> = cfg
        .windows(n, fps)
        .into_par_iter()
        .map(|(s, e)| {
            let a = alignment(&pred_roots[s], &gt_roots[s], cfg.mode);
            let mut sum = 0.0;
            let mut count = 0;
            for t in s..e {
                if mask.is_some_and(|m| !m[t]) {
                    continue;
                }
                for (p, g) in pred_points[t].iter().zip(&gt_points[t]) {
                    sum += (a.apply(*p) - *g).norm();
                    count += 1;
                }
            }
            (sum, count)
        })
        .collect();
    let (sum, count) = sums.iter().fold((0.0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    Ok((count > 0).then(|| MM * sum / count as f64))
}

fn check_pair(pred: &GlobalMotion, gt: &GlobalMotion) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "predicted motion frames".into(),
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if (pred.fps - gt.fps).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("frame rates differ: {} vs {}", pred.fps, gt.fps)));
    }
    Ok(())
}

fn roots(m: &GlobalMotion) -> Vec<Transform<f64>> {
    (0..m.len()).map(|k| m.root(k)).collect()
}

/// Global mean per-joint position error in mm.
pub fn g_mpjpe(pred: &GlobalMotion, gt: &GlobalMotion, tree: &KinematicTree, mask: Option<&[bool]>, cfg: &AlignmentWindowConfig) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    windowed_global_error(&pred.joints(tree), &roots(pred), &gt.joints(tree), &roots(gt), mask, gt.fps, cfg)
}

/// Global mean per-marker position error in mm.
pub fn g_pve(pred: &GlobalMotion, gt: &GlobalMotion, tree: &KinematicTree, mask: Option<&[bool]>, cfg: &AlignmentWindowConfig) -> Result<Option<f64>> {
    check_pair(pred, gt)?;
    windowed_global_error(&pred.markers(tree), &roots(pred), &gt.markers(tree), &roots(gt), mask, gt.fps, cfg)
}

fn to_na(v: Vec3<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, v.z)
}

/// Similarity transform `(s, R, t)` minimizing `Σ‖s·R·p + t − g‖²`.
pub fn procrustes(pred: &[Vec3<f64>], gt: &[Vec3<f64>]) -> Result<(f64, Matrix3<f64>, Vector3<f64>)> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            what: "procrustes point sets".into(),
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let n = pred.len() as f64;
    let mx = pred.iter().fold(Vector3::zeros(), |a, p| a + to_na(*p)) / n;
    let my = gt.iter().fold(Vector3::zeros(), |a, p| a + to_na(*p)) / n;
    let mut cov = Matrix3::zeros();
    let mut var_x = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        let x = to_na(*p) - mx;
        cov += (to_na(*g) - my) * x.transpose();
        var_x += x.norm_squared();
    }
    cov /= n;
    var_x /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let s = if var_x > 1e-300 {
        (svd.singular_values[0] * d[(0, 0)] + svd.singular_values[1] * d[(1, 1)] + svd.singular_values[2] * d[(2, 2)]) / var_x
    } else {
        1.0
    };
    Ok((s, r, my - s * r * mx))
}

/// Mean joint error (mm) of one frame after similarity alignment.
pub fn pa_mpjpe(pred: &[Vec3<f64>], gt: &[Vec3<f64>]) -> Result<f64> {
    let (s, r, t) = procrustes(pred, gt)?;
    let sum: f64 = pred.iter().zip(gt).map(|(p, g)| (s * r * to_na(*p) + t - to_na(*g)).norm()).sum();
    Ok(MM * sum / pred.len() as f64)
}

/// Mean of per-frame PA-MPJPE over the frames in `mask`.
pub fn pa_mpjpe_sequence(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>], mask: Option<&[bool]>) -> Result<Option<f64>> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "predicted frames".into(),
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let frames: Vec<usize> = (0..gt.len()).filter(|t| mask.is_none_or(|m| m[*t])).collect();
    if frames.is_empty() {
        return Ok(None);
    }
    let vals = frames.par_iter().map(|t| pa_mpjpe(&pred[*t], &gt[*t])).collect::<Result<Vec<f64>>>()?;
    Ok(Some(vals.iter().sum::<f64>() / vals.len() as f64))
}

/// Lowest sequence PA-MPJPE over several predicted samples.
pub fn best_of_k_pa_mpjpe(samples: &[Vec<Vec<Vec3<f64>>>], gt: &[Vec<Vec3<f64>>], mask: Option<&[bool]>) -> Result<Option<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("best-of-k needs at least one sample".into()));
    }
    let mut best: Option<f64> = None;
    for s in samples {
        if let Some(v) = pa_mpjpe_sequence(s, gt, mask)? {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    Ok(best)
}

/// Mean acceleration error (mm/frame²) over interior frames in `mask`.
pub fn accel_error(pred: &[Vec<Vec3<f64>>], gt: &[Vec<Vec3<f64>>], mask: Option<&[bool]>) -> Result<Option<f64>> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "predicted frames".into(),
            expected: gt.len(),
            got: pred.len(),
        });
    }
    if gt.len() < 3 {
        return Err(Error::InvalidConfig(format!("acceleration needs at least 3 frames, got {}", gt.len())));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 1..gt.len() - 1 {
        if mask.is_some_and(|m| !m[t]) {
            continue;
        }
        for j in 0..gt[t].len() {
            let acc = |x: &[Vec<Vec3<f64>>]| x[t + 1][j] - x[t][j].scale(2.0) + x[t - 1][j];
            sum += (acc(pred) - acc(gt)).norm();
            count += 1;
        }
    }
    Ok((count > 0).then(|| MM * sum / count as f64))
}

/// Per-joint mean squared velocity of a clip, in (m/frame)².
pub fn kinetic_features(clip: &[Vec<Vec3<f64>>]) -> Result<Vec<f64>> {
    if clip.len() < 2 {
        return Err(Error::InvalidConfig("kinetic features need clips of at least 2 frames".into()));
    }
    let j = clip[0].len();
    let mut f = vec![0.0; j];
    for t in 1..clip.len() {
        for (k, fk) in f.iter_mut().enumerate() {
            *fk += (clip[t][k] - clip[t - 1][k]).norm_squared();
        }
    }
    let n = (clip.len() - 1) as f64;
    Ok(f.into_iter().map(|v| v / n).collect())
}

fn mean_cov(x: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let d = x[0].len();
    let n = x.len() as f64;
    let mut mu = vec![0.0; d];
    for row in x {
        for i in 0..d {
            mu[i] += row[i] / n;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for row in x {
        for i in 0..d {
            for k in 0..d {
                cov[(i, k)] += (row[i] - mu[i]) * (row[k] - mu[k]) / (n - 1.0);
            }
        }
    }
    for i in 0..d {
        cov[(i, i)] += FID_EPSILON;
    }
    (mu, cov)
}

fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::new(m.clone());
    let mut vals = e.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-6 {
            return Err(Error::Numerical(format!("covariance product has eigenvalue {v:.3e}")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&e.eigenvectors * DMatrix::from_diagonal(&vals) * e.eigenvectors.transpose())
}

/// Frechet distance between Gaussian fits of two feature sets.
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidConfig("FID needs at least two clips per set".into()));
    }
    let (mu_a, sa) = mean_cov(a);
    let (mu_b, sb) = mean_cov(b);
    let ra = sqrt_psd(&sa)?;
    let mut m = &ra * &sb * &ra;
    m = (&m + m.transpose()) * 0.5;
    let cross = sqrt_psd(&m)?.trace();
    let dmu: f64 = mu_a.iter().zip(&mu_b).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((dmu + sa.trace() + sb.trace() - 2.0 * cross).max(0.0))
}

pub fn fid(set_a: &[Vec<Vec<Vec3<f64>>>], set_b: &[Vec<Vec<Vec3<f64>>>]) -> Result<f64> {
    let fa = set_a.iter().map(|c| kinetic_features(c)).collect::<Result<Vec<_>>>()?;
    let fb = set_b.iter().map(|c| kinetic_features(c)).collect::<Result<Vec<_>>>()?;
    frechet_distance(&fa, &fb)
}

/// Mean relative translation error (m) and rotation error (rad) over every
/// person pair and every frame both cover. `None` with fewer than two persons
/// or no overlap.
pub fn relative_pose_errors(pred: &[GlobalMotion], gt: &[GlobalMotion]) -> Result<Option<(f64, f64)>> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            what: "persons".into(),
            expected: gt.len(),
            got: pred.len(),
        });
    }
    for (p, g) in pred.iter().zip(gt) {
        check_pair(p, g)?;
        if p.start != g.start {
            return Err(Error::InvalidConfig("predicted and ground-truth spans differ".into()));
        }
    }
    let rel = |m: &[GlobalMotion], i: usize, j: usize, t: usize| {
        let a = m[i].root(t - m[i].start);
        let b = m[j].root(t - m[j].start);
        (a.rotation.apply_inverse(b.translation - a.translation), a.rotation.between(&b.rotation))
    };
    let (mut st, mut sr, mut n) = (0.0, 0.0, 0usize);
    for i in 0..gt.len() {
        for j in i + 1..gt.len() {
            let lo = gt[i].start.max(gt[j].start);
            let hi = (gt[i].start + gt[i].len()).min(gt[j].start + gt[j].len());
            for t in lo..hi {
                let (tp, rp) = rel(pred, i, j, t);
                let (tg, rg) = rel(gt, i, j, t);
                st += (tp - tg).norm();
                sr += geodesic(&rp, &rg);
                n += 1;
            }
        }
    }
    Ok((n > 0).then(|| (st / n as f64, sr / n as f64)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameSet {
    Visible,
    Invisible,
    All,
}

impl FrameSet {
    pub fn name(self) -> &'static str {
        match self {
            Self::Visible => "visible",
            Self::Invisible => "invisible",
            Self::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub unit: String,
    pub frame_set: FrameSet,
    /// Person-frames in the set.
    pub frames: usize,
    /// `None` when the metric does not apply.
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

pub const REPORT_CSV_HEADER: &str = "metric,unit,frame_set,frames,value";

impl MetricReport {
    pub fn get(&self, metric: &str, set: FrameSet) -> Option<f64> {
        self.rows.iter().find(|r| r.metric == metric && r.frame_set == set).and_then(|r| r.value)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let v = r.value.map_or_else(|| "absent".to_string(), |v| v.to_string());
            let _ = writeln!(s, "{},{},{},{},{}", r.metric, r.unit, r.frame_set.name(), r.frames, v);
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Joint positions of one predicted and ground-truth person.
struct Stacked {
    pred: Vec<Vec<Vec3<f64>>>,
    gt: Vec<Vec<Vec3<f64>>>,
}

/// Full metric suite of a predicted scene against ground truth. Persons are
/// matched by id; predictions use the current trajectory estimate.
pub fn evaluate(pred: &Scene, gt: &GroundTruth, tree: &KinematicTree, cfg: &AlignmentWindowConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let mut pairs = Vec::new();
    for p in &pred.persons {
        let g = gt
            .persons
            .iter()
            .find(|g| g.id == p.id)
            .ok_or_else(|| Error::Schema(format!("no ground truth for person {}", p.id)))?;
        if g.motion.len() != p.len() || g.motion.start != p.start {
            return Err(Error::LengthMismatch {
                what: format!("person {} frames against ground truth", p.id),
                expected: g.motion.len(),
                got: p.len(),
            });
        }
        pairs.push((p.motion(pred.fps, false)?, g.motion.clone(), p.visible.clone()));
    }
    let mut report = MetricReport::default();
    let total: usize = pairs.iter().map(|p| p.2.len()).sum();
    let visible: usize = pairs.iter().map(|p| p.2.iter().filter(|v| **v).count()).sum();
    let sets = [
        (FrameSet::Visible, visible),
        (FrameSet::Invisible, total - visible),
        (FrameSet::All, total),
    ];
    for (set, frames) in sets {
        let masks: Vec<Vec<bool>> = pairs
            .iter()
            .map(|(_, _, v)| match set {
                FrameSet::Visible => v.clone(),
                FrameSet::Invisible => v.iter().map(|x| !x).collect(),
                FrameSet::All => vec![true; v.len()],
            })
            .collect();
        let mut push = |metric: &str, unit: &str, value: Option<f64>| {
            report.rows.push(MetricRow {
                metric: metric.into(),
                unit: unit.into(),
                frame_set: set,
                frames,
                value,
            })
        };
        // Frame-weighted mean over persons of per-person values.
        let weighted = |f: &dyn Fn(usize, &[bool]) -> Result<Option<f64>>| -> Result<Option<f64>> {
            let (mut s, mut w) = (0.0, 0usize);
            for (i, m) in masks.iter().enumerate() {
                if let Some(v) = f(i, m)? {
                    let n = m.iter().filter(|x| **x).count();
                    s += v * n as f64;
                    w += n;
                }
            }
            Ok((w > 0).then(|| s / w as f64))
        };
        push("g_mpjpe", "mm", weighted(&|i, m| g_mpjpe(&pairs[i].0, &pairs[i].1, tree, Some(m), cfg))?);
        push("g_pve", "mm", weighted(&|i, m| g_pve(&pairs[i].0, &pairs[i].1, tree, Some(m), cfg))?);
        let stacked: Vec<Stacked> = pairs
            .iter()
            .map(|(p, g, _)| Stacked {
                pred: p.joints(tree),
                gt: g.joints(tree),
            })
            .collect();
        push("pa_mpjpe", "mm", weighted(&|i, m| pa_mpjpe_sequence(&stacked[i].pred, &stacked[i].gt, Some(m)))?);
        push(
            "accel_error",
            "mm/frame^2",
            weighted(&|i, m| if m.len() < 3 { Ok(None) } else { accel_error(&stacked[i].pred, &stacked[i].gt, Some(m)) })?,
        );
        if set == FrameSet::All {
            let clip = ((cfg.fid_clip_seconds * pred.fps).floor() as usize).max(2);
            let clips = |pick: fn(&Stacked) -> &Vec<Vec<Vec3<f64>>>| -> Vec<Vec<Vec<Vec3<f64>>>> {
                stacked.iter().flat_map(|s| pick(s).chunks_exact(clip).map(|c| c.to_vec()).collect::<Vec<_>>()).collect()
            };
            let (ca, cb) = (clips(|s| &s.pred), clips(|s| &s.gt));
            let fid_value = if ca.len() >= 2 { Some(fid(&ca, &cb)?) } else { None };
            push("fid", "unitless", fid_value);
            let (pm, gm): (Vec<GlobalMotion>, Vec<GlobalMotion>) = pairs.iter().map(|(p, g, _)| (p.clone(), g.clone())).unzip();
            let rel = relative_pose_errors(&pm, &gm)?;
            push("rel_translation", "m", rel.map(|r| r.0));
            push("rel_rotation", "rad", rel.map(|r| r.1));
        }
    }
    Ok(report)
}
