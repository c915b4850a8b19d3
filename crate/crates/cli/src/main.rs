use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use egotraj::body::{BodyPose, KinematicTree};
use egotraj::infill::infiller_by_name;
use egotraj::metrics::{evaluate, AlignMode};
use egotraj::optim::TraceRow;
use egotraj::pipeline::{infill_scene, optimize_scene};
use egotraj::scene::Scene;
use egotraj::synth::{generate, BiasSign, CameraPattern, MotionPattern};

mod config;
mod plot;

use config::RunConfig;

const THREADS_VAR: &str = "GLAMR_OPT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "egotraj", version, about = "Global trajectory and camera reconstruction pipeline")]
struct Cli {
    /// TOML run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Generate(GenerateArgs),
    /// Fill in body poses on occluded frames.
    Infill(InfillArgs),
    /// Optimize trajectories and camera poses.
    Optimize(OptimizeArgs),
    /// Compare a scene against ground truth.
    Evaluate(EvaluateArgs),
    /// Draw trajectories, camera path and energy trace as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    /// Motion pattern per person (comma separated); a single pattern is repeated.
    #[arg(long, value_delimiter = ',')]
    pattern: Vec<MotionPattern>,
    #[arg(long)]
    persons: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    camera: Option<CameraPattern>,
    #[arg(long)]
    keypoint_sigma: Option<f64>,
    #[arg(long)]
    rot_sigma: Option<f64>,
    #[arg(long)]
    trans_sigma: Option<f64>,
    /// Constant per-frame heading error of the anchors (radians).
    #[arg(long, allow_negative_numbers = true)]
    dphi_bias: Option<f64>,
    #[arg(long)]
    bias_sign: Option<BiasSign>,
}

#[derive(Args, Debug)]
struct InfillArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Infiller name: linear or lastpose.
    #[arg(long)]
    method: Option<String>,
    /// Window length h.
    #[arg(long)]
    window: Option<usize>,
    /// Context frames h_c.
    #[arg(long)]
    context: Option<usize>,
    /// Look-ahead frames h_l.
    #[arg(long)]
    lookahead: Option<usize>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration energy trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda_2d: Option<f64>,
    #[arg(long)]
    lambda_traj: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    #[arg(long)]
    lambda_cam: Option<f64>,
    #[arg(long)]
    lambda_pen: Option<f64>,
    #[arg(long)]
    w_t: Option<f64>,
    /// Five weights for (dx, dy, z, dphi, eta).
    #[arg(long, value_delimiter = ',', num_args = 5)]
    w_psi: Option<Vec<f64>>,
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Relative energy change over 20 iterations that stops the run.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Scene with the estimate.
    #[arg(long)]
    pred: PathBuf,
    /// Scene holding the ground truth block; defaults to the prediction's own.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Metric report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Metric report JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Alignment window length in seconds.
    #[arg(long)]
    window_seconds: Option<f64>,
    #[arg(long)]
    stride_seconds: Option<f64>,
    #[arg(long)]
    align: Option<AlignMode>,
    #[arg(long)]
    fid_clip_seconds: Option<f64>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    /// Energy trace CSV written by `optimize --trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn read_scene(path: &Path) -> Result<Scene> {
    Scene::read(path).with_context(|| format!("reading scene {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(cfg: &RunConfig, a: GenerateArgs) -> Result<()> {
    let mut g = cfg.generate.clone();
    match (a.pattern.len(), a.persons) {
        (0, Some(n)) => {
            let p = g.patterns.first().copied().unwrap_or(MotionPattern::Straight);
            g.patterns = vec![p; n];
        }
        (0, None) => {}
        (1, Some(n)) => g.patterns = vec![a.pattern[0]; n],
        (k, Some(n)) if k != n => bail!(egotraj::Error::InvalidConfig(format!("{k} patterns given for {n} persons"))),
        _ => g.patterns = a.pattern,
    }
    set(&mut g.frames, a.frames);
    set(&mut g.fps, a.fps);
    set(&mut g.seed, a.seed);
    set(&mut g.camera, a.camera);
    set(&mut g.noise.keypoint_sigma, a.keypoint_sigma);
    set(&mut g.noise.rot_sigma, a.rot_sigma);
    set(&mut g.noise.trans_sigma, a.trans_sigma);
    set(&mut g.drift.dphi_bias, a.dphi_bias);
    set(&mut g.drift.bias_sign, a.bias_sign);
    let scene = generate(&g, &KinematicTree::standard())?;
    write_file(&a.out, &scene.to_json()?)?;
    println!("generated {} persons, {} frames -> {}", scene.persons.len(), scene.frames, a.out.display());
    Ok(())
}

fn cmd_infill(cfg: &RunConfig, a: InfillArgs) -> Result<()> {
    let mut s = cfg.infill.clone();
    set(&mut s.method, a.method);
    set(&mut s.window.h, a.window);
    set(&mut s.window.h_c, a.context);
    set(&mut s.window.h_l, a.lookahead);
    let infiller = infiller_by_name(&s.method, BodyPose::rest())?;
    let scene = read_scene(&a.input)?;
    let out = infill_scene(&scene, infiller.as_ref(), &s.window)?;
    write_file(&a.out, &out.to_json()?)?;
    println!("infilled with {} (h {}, h_c {}, h_l {}) -> {}", s.method, s.window.h, s.window.h_c, s.window.h_l, a.out.display());
    Ok(())
}

fn trace_csv(trace: &[TraceRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "total", "e_2d", "e_traj", "e_reg", "e_cam", "e_pen"])?;
    for r in trace {
        let t = &r.terms;
        let cells = [r.iteration as f64, r.total, t.e_2d, t.e_traj, t.e_reg, t.e_cam, t.e_pen];
        w.write_record(cells.iter().map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_optimize(cfg: &RunConfig, a: OptimizeArgs) -> Result<()> {
    let mut c = cfg.energy;
    set(&mut c.lambda_2d, a.lambda_2d);
    set(&mut c.lambda_traj, a.lambda_traj);
    set(&mut c.lambda_reg, a.lambda_reg);
    set(&mut c.lambda_cam, a.lambda_cam);
    set(&mut c.lambda_pen, a.lambda_pen);
    set(&mut c.w_t, a.w_t);
    if let Some(w) = a.w_psi {
        c.w_psi = w.try_into().map_err(|_| egotraj::Error::InvalidConfig("--w-psi takes five values".into()))?;
    }
    c.validate()?;
    let mut o = cfg.optimizer;
    set(&mut o.iterations, a.iters);
    set(&mut o.learning_rate, a.lr);
    set(&mut o.tolerance, a.tolerance);
    set(&mut o.seed, a.seed);
    if a.grad_clip.is_some() {
        o.grad_clip = a.grad_clip;
    }
    o.validate()?;
    let scene = read_scene(&a.input)?;
    let l = c.effective(scene.persons.len());
    println!(
        "coefficients lambda (2d, traj, reg, cam, pen) = ({}, {}, {}, {}, {}), w_t = {}, w_psi = ({})",
        l.lambda_2d,
        l.lambda_traj,
        l.lambda_reg,
        l.lambda_cam,
        l.lambda_pen,
        l.w_t,
        l.w_psi.map(|v| v.to_string()).join(", ")
    );
    println!("adam iterations = {}, lr = {}, betas = ({}, {})", o.iterations, o.learning_rate, o.beta1, o.beta2);
    let out = optimize_scene(&scene, &KinematicTree::standard(), &c, &o)?;
    write_file(&a.out, &out.scene.to_json()?)?;
    if let Some(path) = &a.trace {
        write_file(path, &trace_csv(&out.result.trace)?)?;
    }
    let (first, last) = (out.result.trace.first().unwrap(), out.result.trace.last().unwrap());
    println!("energy {} -> {} after {} iterations -> {}", first.total, last.total, last.iteration, a.out.display());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, a: EvaluateArgs) -> Result<()> {
    let mut m = cfg.metrics;
    set(&mut m.seconds, a.window_seconds);
    set(&mut m.mode, a.align);
    set(&mut m.fid_clip_seconds, a.fid_clip_seconds);
    if a.stride_seconds.is_some() {
        m.stride_seconds = a.stride_seconds;
    }
    m.validate()?;
    let pred = read_scene(&a.pred)?;
    let gt_scene = match &a.gt {
        Some(p) => read_scene(p)?,
        None => pred.clone(),
    };
    if gt_scene.frames != pred.frames {
        bail!(egotraj::Error::LengthMismatch {
            what: "scene frames against ground truth".into(),
            expected: gt_scene.frames,
            got: pred.frames,
        });
    }
    let Some(gt) = gt_scene.gt.as_ref() else {
        bail!(egotraj::Error::Schema("ground truth scene has no gt block".into()));
    };
    let report = evaluate(&pred, gt, &KinematicTree::standard(), &m)?;
    write_file(&a.out, &report.to_csv())?;
    if let Some(path) = &a.json {
        write_file(path, &report.to_json()?)?;
    }
    println!("{} metric rows -> {}", report.rows.len(), a.out.display());
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let scene = read_scene(&a.input)?;
    let trace = match &a.trace {
        Some(p) => Some(plot::read_trace(p)?),
        None => None,
    };
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let files = plot::render(&scene, trace.as_deref())?;
    for (name, svg) in &files {
        write_file(&a.out_dir.join(name), svg)?;
    }
    println!("{} plots -> {}", files.len(), a.out_dir.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| egotraj::Error::InvalidConfig(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => cmd_generate(&cfg, a),
        Command::Infill(a) => cmd_infill(&cfg, a),
        Command::Optimize(a) => cmd_optimize(&cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&cfg, a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e.chain().any(|c| c.downcast_ref::<egotraj::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
