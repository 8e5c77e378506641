//! Patient-room delivery case study.
//!
//! A service robot in a hospital room must leave its dock, pick up
//! supplies at an access point, attend the bedside, and return to dock,
//! all within one horizon, while staying out of furniture and under a
//! speed limit. The scenario is data: room regions, a route through
//! them, timing, and optimizer settings load from TOML (a default is
//! compiled in). From that data this module builds the constraint
//! formula, synthesizes a deliberately infeasible straight-line
//! trajectory, and repairs it by gradient ascent on smooth robustness.
//!
//! The trajectory signal has three variables per sample: position `x`,
//! `y` and speed `v`. In the default `derived` speed mode, `v` is not a
//! free variable: it is recomputed from consecutive positions after
//! every update, and its robustness gradient is folded back into the
//! positions through the chain rule, so the optimizer cannot cheat by
//! reporting a speed the path does not imply.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::formula::Formula;
use crate::optimize::{
    optimize_signal_with, GammaSchedule, OptimizationTrace, OptimizeError, OptimizerConfig,
    StepHooks,
};
use crate::robustness::{rstar, GradientTensor, RobustnessError};
use crate::semantics::{eval_estar, EvalError};
use crate::signal::{save_signal, Signal, SignalError};

/// The scenario shipped with the crate.
pub const DEFAULT_SCENARIO_TOML: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid scenario: {message}")]
    Invalid { message: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Robustness(#[from] RobustnessError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("report serialization: {0}")]
    Json(#[from] serde_json::Error),
}

fn invalid(message: impl Into<String>) -> CaseStudyError {
    CaseStudyError::Invalid { message: message.into() }
}

/// Axis-aligned room feature. Coordinates are meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Rectangle { xmin: f64, xmax: f64, ymin: f64, ymax: f64 },
    Circle { cx: f64, cy: f64, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Rectangle { xmin, xmax, ymin, ymax } => {
                xmin <= x && x <= xmax && ymin <= y && y <= ymax
            }
            Region::Circle { cx, cy, radius } => {
                (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius
            }
        }
    }

    pub fn center(&self) -> (f64, f64) {
        match *self {
            Region::Rectangle { xmin, xmax, ymin, ymax } => {
                (0.5 * (xmin + xmax), 0.5 * (ymin + ymax))
            }
            Region::Circle { cx, cy, .. } => (cx, cy),
        }
    }

    /// Predicate "the robot is strictly inside this region", over the
    /// trajectory variables x (index 0) and y (index 1).
    pub fn inside_formula(&self) -> Formula {
        let x = || Expr::var(0, "x");
        let y = || Expr::var(1, "y");
        match *self {
            Region::Rectangle { xmin, xmax, ymin, ymax } => {
                let gt = |e: Expr, c: f64| Formula::atom(e, c);
                let horiz = Formula::and(
                    gt(x(), xmin),
                    gt(Expr::neg(x()), -xmax),
                );
                let vert = Formula::and(
                    gt(y(), ymin),
                    gt(Expr::neg(y()), -ymax),
                );
                Formula::and(horiz, vert)
            }
            Region::Circle { cx, cy, radius } => {
                let dist2 = Expr::add(
                    Expr::pow(Expr::sub(x(), Expr::Constant(cx)), 2),
                    Expr::pow(Expr::sub(y(), Expr::Constant(cy)), 2),
                );
                Formula::atom(Expr::neg(dist2), -radius * radius)
            }
        }
    }
}

/// Whether the speed column is a free optimization variable or derived
/// from the positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedMode {
    Derived,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub regions: BTreeMap<String, Region>,
    /// Region names in visiting order; the first is the starting
    /// position, every later one is a target.
    pub route: Vec<String>,
    pub horizon: f64,
    pub dwell: f64,
    pub speed_limit: f64,
    pub sample_count: usize,
    /// Waypoint index pair `(i, i+1)` of the leg to sample densely.
    pub dense_segment: (usize, usize),
    pub dense_multiplier: f64,
    pub optimizer: OptimizerConfig,
    pub speed_mode: SpeedMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    regions: BTreeMap<String, RegionFile>,
    waypoints: WaypointsFile,
    timing: TimingFile,
    optimizer: OptimizerFile,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RegionFile {
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WaypointsFile {
    route: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingFile {
    horizon: f64,
    dwell: f64,
    speed_limit: f64,
    sample_count: usize,
    dense_segment: [usize; 2],
    dense_multiplier: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerFile {
    steps: usize,
    learning_rate: f64,
    gamma: f64,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
    gamma_floor: Option<f64>,
    speed_mode: SpeedMode,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, CaseStudyError> {
        let file: ScenarioFile = toml::from_str(text)?;
        let defaults = OptimizerConfig::default();
        let opt = &file.optimizer;
        let scenario = Scenario {
            regions: file
                .regions
                .into_iter()
                .map(|(name, r)| {
                    let region = match r {
                        RegionFile::Rectangle { min, max } => Region::Rectangle {
                            xmin: min[0],
                            xmax: max[0],
                            ymin: min[1],
                            ymax: max[1],
                        },
                        RegionFile::Circle { center, radius } => {
                            Region::Circle { cx: center[0], cy: center[1], radius }
                        }
                    };
                    (name, region)
                })
                .collect(),
            route: file.waypoints.route,
            horizon: file.timing.horizon,
            dwell: file.timing.dwell,
            speed_limit: file.timing.speed_limit,
            sample_count: file.timing.sample_count,
            dense_segment: (file.timing.dense_segment[0], file.timing.dense_segment[1]),
            dense_multiplier: file.timing.dense_multiplier,
            optimizer: OptimizerConfig {
                steps: opt.steps,
                learning_rate: opt.learning_rate,
                gamma: opt.gamma,
                beta1: opt.beta1.unwrap_or(defaults.beta1),
                beta2: opt.beta2.unwrap_or(defaults.beta2),
                epsilon: opt.epsilon.unwrap_or(defaults.epsilon),
                schedule: match opt.gamma_floor {
                    Some(floor) => GammaSchedule::LinearTo { floor },
                    None => GammaSchedule::Constant,
                },
                ..defaults
            },
            speed_mode: opt.speed_mode,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, CaseStudyError> {
        Scenario::from_toml(&fs::read_to_string(path)?)
    }

    /// The compiled-in default scenario.
    pub fn bundled() -> Scenario {
        Scenario::from_toml(DEFAULT_SCENARIO_TOML).expect("bundled scenario must be valid")
    }

    fn validate(&self) -> Result<(), CaseStudyError> {
        for (name, region) in &self.regions {
            match *region {
                Region::Rectangle { xmin, xmax, ymin, ymax } => {
                    let ok = [xmin, xmax, ymin, ymax].iter().all(|c| c.is_finite())
                        && xmin < xmax
                        && ymin < ymax;
                    if !ok {
                        return Err(invalid(format!("rectangle {name} is degenerate")));
                    }
                }
                Region::Circle { cx, cy, radius } => {
                    if !(cx.is_finite() && cy.is_finite() && radius.is_finite() && radius > 0.0) {
                        return Err(invalid(format!("circle {name} is degenerate")));
                    }
                }
            }
        }
        if self.route.len() < 2 {
            return Err(invalid("route needs at least a start and one target"));
        }
        for name in &self.route {
            if !self.regions.contains_key(name) {
                return Err(invalid(format!("route names unknown region {name}")));
            }
        }
        for pair in self.route.windows(2) {
            if pair[0] == pair[1] {
                return Err(invalid(format!("route repeats {} consecutively", pair[0])));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.dwell.is_finite() && self.dwell >= 0.0 && self.dwell < self.horizon) {
            return Err(invalid(format!("dwell must lie in [0, horizon), got {}", self.dwell)));
        }
        if !(self.speed_limit.is_finite() && self.speed_limit > 0.0) {
            return Err(invalid(format!("speed limit must be positive, got {}", self.speed_limit)));
        }
        if self.sample_count < 2 {
            return Err(invalid("need at least two samples"));
        }
        let (a, b) = self.dense_segment;
        if b != a + 1 || b >= self.route.len() {
            return Err(invalid(format!("dense segment ({a}, {b}) is not a route leg")));
        }
        if !(self.dense_multiplier.is_finite() && self.dense_multiplier >= 1.0) {
            return Err(invalid(format!(
                "dense multiplier must be at least 1, got {}",
                self.dense_multiplier
            )));
        }
        let waypoints = self.waypoints();
        for (w, name) in waypoints.iter().zip(&self.route) {
            for (oname, region) in self.obstacles() {
                if region.contains(w.0, w.1) {
                    return Err(invalid(format!("waypoint {name} lies inside obstacle {oname}")));
                }
            }
        }
        Ok(())
    }

    /// Route waypoints as coordinates (region centers).
    pub fn waypoints(&self) -> Vec<(f64, f64)> {
        self.route.iter().map(|name| self.regions[name].center()).collect()
    }

    /// Regions that are not route targets; the robot must stay out of
    /// these at all times.
    pub fn obstacles(&self) -> impl Iterator<Item = (&str, &Region)> {
        self.regions
            .iter()
            .filter(|(name, _)| !self.route.iter().any(|r| r == *name))
            .map(|(name, region)| (name.as_str(), region))
    }
}

/// The visit sequence: reach each target in route order, hold it for
/// the dwell time, and remain in the final target through the horizon.
pub fn sequence_formula(sc: &Scenario) -> Formula {
    let h = sc.horizon;
    let last = sc.route.len() - 1;
    let mut inner = Formula::eventually(
        0.0,
        h,
        Formula::always(0.0, h, sc.regions[&sc.route[last]].inside_formula()),
    );
    for i in (1..last).rev() {
        let hold = Formula::always(0.0, sc.dwell, sc.regions[&sc.route[i]].inside_formula());
        inner = Formula::eventually(0.0, h, Formula::and(hold, inner));
    }
    inner
}

/// The full mission constraint: speed limit, obstacle avoidance for
/// every non-target region, and the visit sequence, conjoined.
pub fn build_constraint(sc: &Scenario) -> Formula {
    let h = sc.horizon;
    let speed = Formula::always(
        0.0,
        h,
        Formula::atom(Expr::neg(Expr::var(2, "v")), -sc.speed_limit),
    );
    let mut f = speed;
    for (_, region) in sc.obstacles() {
        let avoid = Formula::always(0.0, h, Formula::not(region.inside_formula()));
        f = Formula::and(f, avoid);
    }
    Formula::and(f, sequence_formula(sc))
}

/// Straight-line route trajectory. Legs get time proportional to their
/// length; sample times are drawn through a piecewise-linear warp that
/// concentrates `dense_multiplier` times more samples on the configured
/// leg. The speed column is derived from consecutive positions.
pub fn initial_trajectory(sc: &Scenario) -> Result<Signal, CaseStudyError> {
    let wps = sc.waypoints();
    let lengths: Vec<f64> = wps
        .windows(2)
        .map(|p| ((p[1].0 - p[0].0).powi(2) + (p[1].1 - p[0].1).powi(2)).sqrt())
        .collect();
    let total: f64 = lengths.iter().sum();
    if total <= 0.0 {
        return Err(invalid("route has zero length"));
    }
    for (i, len) in lengths.iter().enumerate() {
        if *len == 0.0 {
            return Err(invalid(format!("route leg {i} has zero length")));
        }
    }

    // Absolute time at each waypoint.
    let mut bounds = Vec::with_capacity(wps.len());
    bounds.push(0.0);
    let mut acc = 0.0;
    for len in &lengths {
        acc += sc.horizon * len / total;
        bounds.push(acc);
    }
    *bounds.last_mut().unwrap() = sc.horizon;

    // Time warp: u advances dense_multiplier times faster inside the
    // dense leg, so equal steps in u put more samples there.
    let (da, db) = (bounds[sc.dense_segment.0], bounds[sc.dense_segment.1]);
    let m = sc.dense_multiplier;
    let u_total = sc.horizon + (m - 1.0) * (db - da);
    let unwarp = |u: f64| -> f64 {
        if u <= da {
            u
        } else if u <= da + m * (db - da) {
            da + (u - da) / m
        } else {
            db + (u - da - m * (db - da))
        }
    };

    let n = sc.sample_count;
    let mut times = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * 3);
    let mut leg = 0;
    for j in 0..n {
        let u = u_total * j as f64 / (n - 1) as f64;
        let t = unwarp(u);
        times.push(t);
        while leg + 2 < bounds.len() && t > bounds[leg + 1] {
            leg += 1;
        }
        let span = bounds[leg + 1] - bounds[leg];
        let frac = ((t - bounds[leg]) / span).clamp(0.0, 1.0);
        let (x0, y0) = wps[leg];
        let (x1, y1) = wps[leg + 1];
        values.push(x0 + frac * (x1 - x0));
        values.push(y0 + frac * (y1 - y0));
        values.push(0.0); // speed filled below
    }

    let mut signal = Signal::new(
        vec!["x".into(), "y".into(), "v".into()],
        times,
        values,
    )?;
    recompute_speed(&mut signal)?;
    Ok(signal)
}

/// Rewrite the speed column as finite-difference speed of the position
/// columns; the last sample copies its predecessor.
fn recompute_speed(s: &mut Signal) -> Result<(), SignalError> {
    let n = s.sample_count();
    for j in 0..n - 1 {
        let dx = s.value(j + 1, 0) - s.value(j, 0);
        let dy = s.value(j + 1, 1) - s.value(j, 1);
        let dt = s.times()[j + 1] - s.times()[j];
        s.set_value(j, 2, (dx * dx + dy * dy).sqrt() / dt)?;
    }
    s.set_value(n - 1, 2, s.value(n - 2, 2))
}

/// Step hooks implementing the derived speed mode: the speed column's
/// gradient is folded into the positions that define it, and the column
/// itself is recomputed after every update.
pub struct DerivedSpeed;

impl StepHooks for DerivedSpeed {
    // Indexing is clearer than iterator windows for the j/j+1 stencil.
    #[allow(clippy::needless_range_loop)]
    fn adjust_gradient(&mut self, s: &Signal, g: &mut GradientTensor) {
        let n = s.sample_count();
        let mut gv: Vec<f64> = (0..n).map(|j| g.get(j, 2)).collect();
        // The tail sample's speed is a copy of its predecessor's.
        gv[n - 2] += gv[n - 1];
        for j in 0..n - 1 {
            let dx = s.value(j + 1, 0) - s.value(j, 0);
            let dy = s.value(j + 1, 1) - s.value(j, 1);
            let dist = (dx * dx + dy * dy).sqrt();
            if dist <= 1e-12 {
                // Speed is not differentiable at coincident samples;
                // drop the contribution rather than divide by zero.
                continue;
            }
            let dt = s.times()[j + 1] - s.times()[j];
            let w = gv[j] / (dist * dt);
            g.add(j + 1, 0, w * dx);
            g.add(j, 0, -w * dx);
            g.add(j + 1, 1, w * dy);
            g.add(j, 1, -w * dy);
        }
        for j in 0..n {
            g.set(j, 2, 0.0);
        }
    }

    fn after_update(&mut self, s: &mut Signal) -> Result<(), SignalError> {
        recompute_speed(s)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CaseStudyReport {
    pub initial_robustness: f64,
    pub final_robustness: f64,
    pub satisfied: bool,
    pub steps_run: usize,
    pub gamma: f64,
    pub wall_time_seconds: f64,
}

pub struct CaseStudyOutcome {
    pub report: CaseStudyReport,
    pub constraint: Formula,
    pub initial: Signal,
    pub optimized: Signal,
    pub trace: OptimizationTrace,
}

/// Build the mission, synthesize the initial trajectory, and optimize.
/// The starting position is pinned; everything else may move.
pub fn run_case_study(sc: &Scenario) -> Result<CaseStudyOutcome, CaseStudyError> {
    let started = Instant::now();
    let constraint = build_constraint(sc);
    let initial = initial_trajectory(sc)?;
    let mut cfg = sc.optimizer.clone();
    cfg.pin_mask.pin(0, 0);
    cfg.pin_mask.pin(0, 1);
    let (optimized, trace) = match sc.speed_mode {
        SpeedMode::Derived => {
            optimize_signal_with(&initial, &constraint, 0, &cfg, &mut DerivedSpeed)?
        }
        SpeedMode::Free => {
            cfg.pin_mask.pin(0, 2);
            crate::optimize::optimize_signal(&initial, &constraint, 0, &cfg)?
        }
    };
    let initial_robustness = rstar(&initial, &constraint, 0, 0.0)?;
    let satisfied = eval_estar(&optimized, &constraint, 0)?.0;
    let report = CaseStudyReport {
        initial_robustness,
        final_robustness: trace.final_hard,
        satisfied,
        steps_run: cfg.steps,
        gamma: cfg.gamma_at(cfg.steps - 1),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(CaseStudyOutcome { report, constraint, initial, optimized, trace })
}

/// Write `initial.csv`, `final.csv`, `trace.csv`, and `report.json`
/// into `dir`, creating it if needed.
pub fn write_outputs(outcome: &CaseStudyOutcome, dir: &Path) -> Result<(), CaseStudyError> {
    fs::create_dir_all(dir)?;
    save_signal(&outcome.initial, dir.join("initial.csv"))?;
    save_signal(&outcome.optimized, dir.join("final.csv"))?;
    let mut trace = String::from("step,smooth_robustness,hard_robustness\n");
    for rec in &outcome.trace.steps {
        trace.push_str(&format!("{},{},{}\n", rec.step, rec.smooth, rec.hard));
    }
    fs::write(dir.join("trace.csv"), trace)?;
    let mut json = serde_json::to_string_pretty(&outcome.report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}
