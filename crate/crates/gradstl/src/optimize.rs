//! Gradient ascent on smooth robustness.
//!
//! [`optimize_signal`] treats the signal's value matrix as the decision
//! variable and climbs the smooth robustness surface with Adam. Each
//! step evaluates the full gradient at the scheduled γ, applies the
//! bias-corrected update to every unpinned entry, and records both the
//! smooth objective and the hard (γ = 0) robustness so progress can be
//! judged against the semantics that actually matters.
//!
//! The loop itself is deterministic: same signal, formula, and
//! configuration give bitwise identical trajectories. Domain-specific
//! structure (derived columns, projection steps) plugs in through
//! [`StepHooks`] rather than by forking the loop.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::Formula;
use crate::robustness::{gradient, rstar, GradientTensor, RobustnessError};
use crate::signal::{Signal, SignalError};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("invalid optimizer configuration: {message}")]
    Config { message: String },
    #[error("robustness or gradient became non-finite at step {step}")]
    NonFinite { step: usize },
}

/// Entries excluded from optimization. Pins come in two granularities:
/// whole samples (every variable at that time) and single entries.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinMask {
    samples: BTreeSet<usize>,
    entries: BTreeSet<(usize, usize)>,
}

impl PinMask {
    pub fn new() -> Self {
        PinMask::default()
    }

    pub fn pin_sample(&mut self, k: usize) {
        self.samples.insert(k);
    }

    pub fn pin(&mut self, k: usize, var: usize) {
        self.entries.insert((k, var));
    }

    pub fn is_pinned(&self, k: usize, var: usize) -> bool {
        self.samples.contains(&k) || self.entries.contains(&(k, var))
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty() && self.entries.is_empty()
    }

    fn validate(&self, rows: usize, cols: usize) -> Result<(), OptimizeError> {
        let bad_sample = self.samples.iter().find(|k| **k >= rows);
        if let Some(k) = bad_sample {
            return Err(OptimizeError::Config {
                message: format!("pinned sample {k} out of range for {rows} samples"),
            });
        }
        let bad = self.entries.iter().find(|(k, i)| *k >= rows || *i >= cols);
        if let Some((k, i)) = bad {
            return Err(OptimizeError::Config {
                message: format!("pinned entry ({k}, {i}) out of range for {rows}x{cols} signal"),
            });
        }
        Ok(())
    }
}

/// How γ evolves over the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSchedule {
    /// Keep the starting γ throughout.
    Constant,
    /// Interpolate linearly from the starting γ at step 0 down to
    /// `floor` at the final step, sharpening the surrogate as the
    /// signal approaches a solution.
    LinearTo { floor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Starting smoothing parameter; must be strictly positive.
    pub gamma: f64,
    pub schedule: GammaSchedule,
    pub pin_mask: PinMask,
    /// Reserved for stochastic variants; the current loop is
    /// deterministic and never reads it.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 500,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            gamma: 0.25,
            schedule: GammaSchedule::Constant,
            pin_mask: PinMask::new(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    /// γ used for the gradient evaluation at `step`.
    pub fn gamma_at(&self, step: usize) -> f64 {
        match self.schedule {
            GammaSchedule::Constant => self.gamma,
            GammaSchedule::LinearTo { floor } => {
                if self.steps <= 1 {
                    self.gamma
                } else {
                    let u = step as f64 / (self.steps - 1) as f64;
                    (1.0 - u) * self.gamma + u * floor
                }
            }
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |message: String| Err(OptimizeError::Config { message });
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must lie in [0, 1), got {beta}"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be strictly positive, got {}", self.gamma));
        }
        if let GammaSchedule::LinearTo { floor } = self.schedule {
            if !(floor.is_finite() && floor > 0.0) {
                return bad(format!("gamma floor must be strictly positive, got {floor}"));
            }
        }
        Ok(())
    }
}

/// Objective values observed at the start of one step, before the
/// update is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub gamma: f64,
    pub smooth: f64,
    pub hard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub steps: Vec<StepRecord>,
    pub final_smooth: f64,
    pub final_hard: f64,
}

/// Extension points for the ascent loop. `adjust_gradient` runs after
/// each gradient evaluation and may rewrite it (fold derived columns,
/// zero directions); `after_update` runs once the update is applied and
/// may restore invariants the plain update cannot know about.
pub trait StepHooks {
    fn adjust_gradient(&mut self, _signal: &Signal, _grad: &mut GradientTensor) {}
    fn after_update(&mut self, _signal: &mut Signal) -> Result<(), SignalError> {
        Ok(())
    }
}

/// The no-op hook set used by [`optimize_signal`].
pub struct NoHooks;

impl StepHooks for NoHooks {}

/// Maximize the smooth robustness of `f` at sample `n` over the
/// signal's values. Returns the optimized signal and the step trace.
pub fn optimize_signal(
    s: &Signal,
    f: &Formula,
    n: usize,
    cfg: &OptimizerConfig,
) -> Result<(Signal, OptimizationTrace), OptimizeError> {
    optimize_signal_with(s, f, n, cfg, &mut NoHooks)
}

/// [`optimize_signal`] with custom [`StepHooks`].
pub fn optimize_signal_with(
    s: &Signal,
    f: &Formula,
    n: usize,
    cfg: &OptimizerConfig,
    hooks: &mut dyn StepHooks,
) -> Result<(Signal, OptimizationTrace), OptimizeError> {
    cfg.validate()?;
    let rows = s.sample_count();
    let cols = s.width();
    cfg.pin_mask.validate(rows, cols)?;

    let mut sig = s.clone();
    let mut m = vec![0.0; rows * cols];
    let mut v = vec![0.0; rows * cols];
    let mut steps = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let gamma = cfg.gamma_at(step);
        let (smooth, mut grad) = gradient(&sig, f, n, gamma)?;
        hooks.adjust_gradient(&sig, &mut grad);
        if !smooth.is_finite() || !grad.is_finite() {
            return Err(OptimizeError::NonFinite { step });
        }
        let hard = rstar(&sig, f, n, 0.0)?;
        steps.push(StepRecord { step, gamma, smooth, hard });

        let t = (step + 1) as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);
        for k in 0..rows {
            for i in 0..cols {
                if cfg.pin_mask.is_pinned(k, i) {
                    continue;
                }
                let e = k * cols + i;
                let g = grad.get(k, i);
                m[e] = cfg.beta1 * m[e] + (1.0 - cfg.beta1) * g;
                v[e] = cfg.beta2 * v[e] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[e] / bias1;
                let v_hat = v[e] / bias2;
                let update = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                sig.set_value(k, i, sig.value(k, i) + update)?;
            }
        }
        hooks.after_update(&mut sig)?;
    }

    let final_smooth = rstar(&sig, f, n, cfg.gamma_at(cfg.steps.saturating_sub(1)))?;
    let final_hard = rstar(&sig, f, n, 0.0)?;
    Ok((sig, OptimizationTrace { steps, final_smooth, final_hard }))
}
