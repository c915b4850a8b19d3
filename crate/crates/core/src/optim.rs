//! Adam optimization of the scene energy.

use serde::{Deserialize, Serialize};

use crate::body::KinematicTree;
use crate::energy::{EnergyCoefficients, EnergyTerms, Evaluator, SceneProblem, TERM_NAMES};
use crate::error::{Error, Result};

/// Window (in iterations) of the relative-change convergence test.
pub const CONVERGENCE_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Stop once the relative energy change over the last 20 iterations is
    /// below this value. Zero never stops early.
    pub tolerance: f64,
    pub seed: u64,
    /// Worker threads for energy evaluation; `None` uses the ambient pool.
    pub threads: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            grad_clip: None,
            tolerance: 0.0,
            seed: 0,
            threads: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("gradient clip must be positive");
            }
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive");
        }
        Ok(())
    }
}

/// First-order moment-based update with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &OptimizerConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn step(&mut self, x: &mut [f64], g: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            x[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    #[serde(flatten)]
    pub terms: EnergyTerms,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub problem: SceneProblem,
    pub trace: Vec<TraceRow>,
    /// Iteration at which the convergence test stopped the run.
    pub converged_at: Option<usize>,
}

/// Minimum of each trailing window of `window` values.
pub fn moving_minimum(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            values[lo..=i].iter().cloned().fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn optimize(
    problem: &SceneProblem,
    tree: &KinematicTree,
    coeffs: &EnergyCoefficients,
    cfg: &OptimizerConfig,
) -> Result<OptimizeResult> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| run(problem, tree, coeffs, cfg)),
        None => run(problem, tree, coeffs, cfg),
    }
}

fn run(problem: &SceneProblem, tree: &KinematicTree, coeffs: &EnergyCoefficients, cfg: &OptimizerConfig) -> Result<OptimizeResult> {
    let ev = Evaluator::new(problem, tree, coeffs)?;
    let mut x = ev.pack_problem(problem);
    let mut adam = Adam::new(x.len(), cfg);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let mut converged_at = None;
    let cam0 = ev.camera_offset();
    let frames = problem.frames();
    let lambdas = ev.coefficients().lambdas();
    let record = |trace: &mut Vec<TraceRow>, it: usize, e: &crate::energy::Energy| -> Result<()> {
        if let Some(term) = e.non_finite_term() {
            return Err(Error::NonFiniteEnergy { term, iteration: it });
        }
        if !e.total.is_finite() {
            // Every term is finite, so a weighted one overflowed.
            let weighted = e.terms.to_array().into_iter().zip(lambdas).map(|(t, l)| t * l);
            let term = weighted.zip(TERM_NAMES).find(|(v, _)| !v.is_finite()).map_or("total", |(_, n)| n);
            return Err(Error::NonFiniteEnergy { term, iteration: it });
        }
        trace.push(TraceRow {
            iteration: it,
            total: e.total,
            terms: e.terms,
        });
        Ok(())
    };
    for it in 0..cfg.iterations {
        let (e, mut g) = ev.energy_and_gradient(&x)?;
        record(&mut trace, it, &e)?;
        if converged(&trace, cfg.tolerance) {
            converged_at = Some(it);
            break;
        }
        for t in 0..frames {
            let o = cam0 + 7 * t;
            let q = [x[o], x[o + 1], x[o + 2], x[o + 3]];
            let gq = [g[o], g[o + 1], g[o + 2], g[o + 3]];
            let dot: f64 = q.iter().zip(&gq).map(|(a, b)| a * b).sum();
            for j in 0..4 {
                g[o + j] -= dot * q[j];
            }
        }
        if let Some(clip) = cfg.grad_clip {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > clip {
                let s = clip / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }
        }
        adam.step(&mut x, &g);
        for t in 0..frames {
            let o = cam0 + 7 * t;
            let n = (x[o] * x[o] + x[o + 1] * x[o + 1] + x[o + 2] * x[o + 2] + x[o + 3] * x[o + 3]).sqrt();
            if !(n > 1e-12 && n.is_finite()) {
                return Err(Error::Numerical(format!("camera quaternion collapsed at frame {t}")));
            }
            for j in 0..4 {
                x[o + j] /= n;
            }
        }
    }
    if converged_at.is_none() {
        record(&mut trace, cfg.iterations, &ev.energy(&x))?;
    }
    Ok(OptimizeResult {
        problem: ev.apply(problem, &x),
        trace,
        converged_at,
    })
}

fn converged(trace: &[TraceRow], tol: f64) -> bool {
    if tol <= 0.0 || trace.len() <= CONVERGENCE_WINDOW {
        return false;
    }
    let now = trace[trace.len() - 1].total;
    let then = trace[trace.len() - 1 - CONVERGENCE_WINDOW].total;
    (now - then).abs() <= tol * then.abs().max(f64::MIN_POSITIVE)
}
