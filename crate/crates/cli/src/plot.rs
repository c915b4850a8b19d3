//! Standalone SVG plots: top-down trajectories per person, the camera path
//! and the energy trace.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use egotraj::ego::{apply_start_override, ego_to_global};
use egotraj::geometry::{heading_or_zero, wrap_angle, Rotation, Transform, Vec3};
use egotraj::scene::Scene;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 30.0;

#[derive(Debug, Deserialize)]
pub struct TracePoint {
    pub iteration: f64,
    pub total: f64,
}

pub fn read_trace(path: &Path) -> Result<Vec<TracePoint>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading trace {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<TracePoint>, _>>()?;
    Ok(rows)
}

struct Series {
    class: &'static str,
    color: &'static str,
    points: Vec<(f64, f64)>,
}

/// Maps data coordinates into the square canvas, y pointing up.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    /// Fits every series; `equal` keeps one scale for both axes.
    fn fit(series: &[Series], equal: bool) -> Self {
        let pts = series.iter().flat_map(|s| s.points.iter());
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &(x, y) in pts {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        if !lo.0.is_finite() {
            return Self { x0: 0.0, y0: 0.0, sx: 1.0, sy: 1.0 };
        }
        let inner = SIZE - 2.0 * MARGIN;
        let (wx, wy) = ((hi.0 - lo.0).max(1e-9), (hi.1 - lo.1).max(1e-9));
        let (sx, sy) = if equal {
            let s = inner / wx.max(wy);
            (s, s)
        } else {
            (inner / wx, inner / wy)
        };
        Self { x0: lo.0, y0: lo.1, sx, sy }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (MARGIN + (x - self.x0) * self.sx, SIZE - MARGIN - (y - self.y0) * self.sy)
    }
}

fn document(title: &str, series: &[Series], frame: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#);
    for (i, ser) in series.iter().enumerate() {
        let _ = write!(s, r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="1.5" points=""#, ser.class, ser.color);
        for (k, p) in ser.points.iter().enumerate() {
            let (x, y) = frame.map(*p);
            let sep = if k == 0 { "" } else { " " };
            let _ = write!(s, "{sep}{x:.3},{y:.3}");
        }
        let _ = writeln!(s, r#""/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{}">{}</text>"#,
            SIZE - 110.0,
            20.0 + 14.0 * i as f64,
            ser.color,
            ser.class
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xy(t: &Vec3<f64>) -> (f64, f64) {
    (t.x, t.y)
}

/// Planar transform taking the estimate's first root onto the ground truth's.
fn planar_alignment(scene: &Scene) -> Transform<f64> {
    let Some(gt) = scene.gt.as_ref() else {
        return Transform::identity();
    };
    for p in &scene.persons {
        let (Some(ego), Some(g)) = (p.ego.as_ref(), gt.persons.iter().find(|g| g.id == p.id)) else {
            continue;
        };
        let est = ego_to_global(ego);
        let target = g.motion.root(0);
        let delta = wrap_angle(heading_or_zero(&target.rotation) - heading_or_zero(&est.rotations[0]));
        let r = Rotation::rz(delta);
        let moved = r.apply(est.translations[0]);
        let d = target.translation - moved;
        return Transform::new(r, Vec3::new(d.x, d.y, 0.0));
    }
    Transform::identity()
}

/// File name and SVG text of every plot for the scene.
pub fn render(scene: &Scene, trace: Option<&[TracePoint]>) -> Result<Vec<(String, String)>> {
    let align = planar_alignment(scene);
    let mut files = Vec::new();
    for p in &scene.persons {
        let mut series = Vec::new();
        if let Some(g) = scene.gt.as_ref().and_then(|gt| gt.persons.iter().find(|g| g.id == p.id)) {
            series.push(Series {
                class: "gt",
                color: "black",
                points: g.motion.trajectory.translations.iter().map(xy).collect(),
            });
        }
        let mut anchor = p.anchor.clone();
        if let Some(ego) = &p.ego {
            let est = ego_to_global(ego);
            series.push(Series {
                class: "pred",
                color: "crimson",
                points: est.translations.iter().map(|t| xy(&align.apply(*t))).collect(),
            });
            let s0 = ego.steps[0];
            anchor = apply_start_override(&anchor, s0.dx, s0.dy, s0.dphi);
        }
        series.push(Series {
            class: "anchor",
            color: "steelblue",
            points: ego_to_global(&anchor).translations.iter().map(|t| xy(&align.apply(*t))).collect(),
        });
        let frame = Frame::fit(&series, true);
        files.push((format!("trajectory_{}.svg", p.id), document(&format!("person {} (top view, m)", p.id), &series, &frame)));
    }
    let mut cams = Vec::new();
    if let Some(gt) = &scene.gt {
        cams.push(Series {
            class: "gt",
            color: "black",
            points: gt.camera.iter().map(|c| xy(&c.translation)).collect(),
        });
    }
    if let Some(c) = &scene.camera {
        cams.push(Series {
            class: "pred",
            color: "crimson",
            points: c.iter().map(|c| xy(&align.apply(c.translation))).collect(),
        });
    }
    let frame = Frame::fit(&cams, true);
    files.push(("camera.svg".into(), document("camera path (top view, m)", &cams, &frame)));
    if let Some(trace) = trace {
        let series = [Series {
            class: "total",
            color: "darkgreen",
            points: trace.iter().map(|r| (r.iteration, r.total)).collect(),
        }];
        files.push(("energy.svg".into(), document("total energy per iteration", &series, &Frame::fit(&series, false))));
    }
    Ok(files)
}
