//! Smooth robustness and its exact gradients.
//!
//! The quantitative semantics replaces the boolean connectives of
//! [`crate::semantics`] with soft minima and maxima built from
//! log-sum-exp: `smooth_max(a, b) = max(a, b) + γ·ln(1 + e^{-|a-b|/γ})`.
//! The sharpness parameter γ interpolates between the hard semantics
//! (γ = 0, exact min/max) and an everywhere-differentiable surrogate
//! (γ > 0). The recursion in [`rstar`] mirrors the boolean evaluator
//! clause for clause, including the window arithmetic and the base-case
//! guard, so the two agree about which samples participate.
//!
//! Derivatives are computed analytically, not by automatic
//! differentiation: every soft min/max is a weighted average of its
//! arguments with sigmoid weights, so the chain rule turns the same
//! recursion into a gradient computation. Two independent routes exist:
//! [`drstar`] differentiates with respect to a single signal entry by
//! carrying a scalar tangent through the recursion, and [`gradient`]
//! propagates whole tensors in one pass. They share nothing beyond the
//! weight formulas and are tested against each other.

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{d_expr, eval_expr, ExprError};
use crate::formula::{Formula, Window};
use crate::semantics::{base_guard, check_entry, delta, EvalError, TemporalVisit};
use crate::signal::Signal;

#[derive(Debug, Error)]
pub enum RobustnessError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("gamma must be finite and nonnegative, got {gamma}")]
    InvalidGamma { gamma: f64 },
    #[error("gradients require strictly positive gamma, got {gamma}")]
    NonPositiveGamma { gamma: f64 },
    #[error("variable index {var} out of range for signal of width {width}")]
    VarOutOfRange { var: usize, width: usize },
}

impl From<ExprError> for RobustnessError {
    fn from(e: ExprError) -> Self {
        RobustnessError::Eval(EvalError::Expr(e))
    }
}

/// Soft maximum. For γ ≤ 0 this is the exact maximum; for γ > 0 it is
/// the two-argument log-sum-exp `γ·ln(e^{a/γ} + e^{b/γ})`, evaluated in
/// the overflow-free form `max(a,b) + γ·ln(1 + e^{-|a-b|/γ})`.
///
/// The smooth value always lies in `[max(a,b), max(a,b) + γ·ln 2]`.
pub fn smooth_max(gamma: f64, a: f64, b: f64) -> f64 {
    if gamma <= 0.0 {
        a.max(b)
    } else {
        a.max(b) + gamma * (-(a - b).abs() / gamma).exp().ln_1p()
    }
}

/// Soft minimum, the dual of [`smooth_max`]:
/// `smooth_min(a, b) = -smooth_max(-a, -b)`.
pub fn smooth_min(gamma: f64, a: f64, b: f64) -> f64 {
    -smooth_max(gamma, -a, -b)
}

/// Blend weights of the soft maximum: returns `(value, wa, wb)` with
/// `wa + wb = 1` and `d smooth_max = wa·da + wb·db`. Requires γ > 0.
fn max_mix(gamma: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let wa = 1.0 / (1.0 + ((b - a) / gamma).exp());
    (smooth_max(gamma, a, b), wa, 1.0 - wa)
}

/// Blend weights of the soft minimum; the smaller argument gets the
/// larger weight. Requires γ > 0.
fn min_mix(gamma: f64, a: f64, b: f64) -> (f64, f64, f64) {
    let wa = 1.0 / (1.0 + ((a - b) / gamma).exp());
    (smooth_min(gamma, a, b), wa, 1.0 - wa)
}

/// Derivative of [`smooth_max`] given tangents `da`, `db` of its
/// arguments. For γ ≤ 0 the subgradient convention is: follow the
/// strict winner, average on ties.
pub fn d_smooth_max(gamma: f64, a: f64, b: f64, da: f64, db: f64) -> f64 {
    if gamma <= 0.0 {
        if a > b {
            da
        } else if b > a {
            db
        } else {
            0.5 * (da + db)
        }
    } else {
        let (_, wa, wb) = max_mix(gamma, a, b);
        wa * da + wb * db
    }
}

/// Derivative of [`smooth_min`], dual to [`d_smooth_max`].
pub fn d_smooth_min(gamma: f64, a: f64, b: f64, da: f64, db: f64) -> f64 {
    if gamma <= 0.0 {
        if a < b {
            da
        } else if b < a {
            db
        } else {
            0.5 * (da + db)
        }
    } else {
        let (_, wa, wb) = min_mix(gamma, a, b);
        wa * da + wb * db
    }
}

fn check_gamma(gamma: f64) -> Result<(), RobustnessError> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(RobustnessError::InvalidGamma { gamma })
    }
}

fn check_gamma_positive(gamma: f64) -> Result<(), RobustnessError> {
    check_gamma(gamma)?;
    if gamma > 0.0 {
        Ok(())
    } else {
        Err(RobustnessError::NonPositiveGamma { gamma })
    }
}

struct Rob<'a> {
    s: &'a Signal,
    gamma: f64,
    trace: Option<&'a mut Vec<TemporalVisit>>,
    /// Value cache keyed by (temporal node address, position). A
    /// temporal operator always enters the recursion with the window
    /// written in the formula, so the pair determines the value; the
    /// cache only short-cuts recomputation, never changes a result.
    /// Disabled while tracing so the recorded walk stays complete.
    memo: HashMap<(usize, usize), f64>,
}

impl Rob<'_> {
    fn visit(&mut self, position: usize, window: Window, base: bool) {
        if let Some(trace) = self.trace.as_deref_mut() {
            trace.push(TemporalVisit { position, window, base });
        }
    }

    fn cached(
        &mut self,
        f: &Formula,
        n: usize,
        compute: impl FnOnce(&mut Self) -> Result<f64, RobustnessError>,
    ) -> Result<f64, RobustnessError> {
        if self.trace.is_some() {
            return compute(self);
        }
        let key = (f as *const Formula as usize, n);
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        let v = compute(self)?;
        self.memo.insert(key, v);
        Ok(v)
    }

    fn rob(&mut self, f: &Formula, n: usize) -> Result<f64, RobustnessError> {
        match f {
            Formula::Atom { f, c } => Ok(eval_expr(f, self.s.sample(n))? - c),
            Formula::Not(a) => Ok(-self.rob(a, n)?),
            Formula::And(a, b) => {
                let ra = self.rob(a, n)?;
                let rb = self.rob(b, n)?;
                Ok(smooth_min(self.gamma, ra, rb))
            }
            Formula::Always { window, body } => {
                self.cached(f, n, |me| me.always(*window, body, n))
            }
            Formula::Eventually { window, body } => {
                self.cached(f, n, |me| me.eventually(*window, body, n))
            }
            Formula::Until { window, lhs, rhs } => {
                self.cached(f, n, |me| me.until(*window, lhs, rhs, n))
            }
        }
    }

    /// The conjunction the Until base clause reads its operands
    /// through, computed without materializing an And node.
    fn conj(&mut self, lhs: &Formula, rhs: &Formula, n: usize) -> Result<f64, RobustnessError> {
        let rl = self.rob(lhs, n)?;
        let rr = self.rob(rhs, n)?;
        Ok(smooth_min(self.gamma, rl, rr))
    }

    fn always(&mut self, w: Window, body: &Formula, n: usize) -> Result<f64, RobustnessError> {
        let base = base_guard(self.s, w, n);
        self.visit(n, w, base);
        let inner = self.rob(body, n)?;
        if base {
            Ok(smooth_min(self.gamma, -w.lo, inner))
        } else {
            let here = smooth_max(self.gamma, w.lo, inner);
            let tail = self.always(w.shift(delta(self.s, n)), body, n + 1)?;
            Ok(smooth_min(self.gamma, here, tail))
        }
    }

    fn eventually(&mut self, w: Window, body: &Formula, n: usize) -> Result<f64, RobustnessError> {
        let base = base_guard(self.s, w, n);
        self.visit(n, w, base);
        let inner = self.rob(body, n)?;
        if base {
            Ok(smooth_min(self.gamma, -w.lo, inner))
        } else {
            let here = smooth_min(self.gamma, -w.lo, inner);
            let tail = self.eventually(w.shift(delta(self.s, n)), body, n + 1)?;
            Ok(smooth_max(self.gamma, here, tail))
        }
    }

    fn until(
        &mut self,
        w: Window,
        lhs: &Formula,
        rhs: &Formula,
        n: usize,
    ) -> Result<f64, RobustnessError> {
        let base = base_guard(self.s, w, n);
        self.visit(n, w, base);
        if base {
            let rc = self.conj(lhs, rhs, n)?;
            Ok(smooth_min(self.gamma, -w.lo, rc))
        } else {
            let rl = self.rob(lhs, n)?;
            let carry = smooth_max(self.gamma, w.lo, rl);
            let tail = self.until(w.shift(delta(self.s, n)), lhs, rhs, n + 1)?;
            let via_tail = smooth_min(self.gamma, carry, tail);
            let rc = self.conj(lhs, rhs, n)?;
            let here = smooth_min(self.gamma, -w.lo, rc);
            Ok(smooth_max(self.gamma, via_tail, here))
        }
    }
}

/// Smooth robustness of `f` at sample `n`. γ = 0 gives the hard
/// semantics (exact min/max over the same recursion).
pub fn rstar(s: &Signal, f: &Formula, n: usize, gamma: f64) -> Result<f64, RobustnessError> {
    check_entry(s, f, n)?;
    check_gamma(gamma)?;
    let mut r = Rob { s, gamma, trace: None, memo: HashMap::new() };
    r.rob(f, n)
}

/// Like [`rstar`], additionally recording every temporal chain step.
/// The visit sequence matches [`crate::semantics::eval_estar_traced`]
/// except that the boolean evaluator may stop a chain early once its
/// result is decided.
pub fn rstar_traced(
    s: &Signal,
    f: &Formula,
    n: usize,
    gamma: f64,
) -> Result<(f64, Vec<TemporalVisit>), RobustnessError> {
    check_entry(s, f, n)?;
    check_gamma(gamma)?;
    let mut visits = Vec::new();
    let mut r = Rob { s, gamma, trace: Some(&mut visits), memo: HashMap::new() };
    let value = r.rob(f, n)?;
    Ok((value, visits))
}

/// Scalar-tangent recursion: robustness value paired with its
/// derivative with respect to signal entry (`k`, `var`).
struct Drob<'a> {
    s: &'a Signal,
    gamma: f64,
    k: usize,
    var: usize,
}

impl Drob<'_> {
    fn rob(&self, f: &Formula, n: usize) -> Result<(f64, f64), RobustnessError> {
        let g = self.gamma;
        match f {
            Formula::Atom { f, c } => {
                let v = eval_expr(f, self.s.sample(n))? - c;
                let d = if n == self.k { d_expr(f, self.s.sample(n), self.var)? } else { 0.0 };
                Ok((v, d))
            }
            Formula::Not(a) => {
                let (v, d) = self.rob(a, n)?;
                Ok((-v, -d))
            }
            Formula::And(a, b) => {
                let (va, da) = self.rob(a, n)?;
                let (vb, db) = self.rob(b, n)?;
                Ok((smooth_min(g, va, vb), d_smooth_min(g, va, vb, da, db)))
            }
            Formula::Always { window, body } => self.always(*window, body, n),
            Formula::Eventually { window, body } => self.eventually(*window, body, n),
            Formula::Until { window, lhs, rhs } => self.until(*window, lhs, rhs, n),
        }
    }

    fn conj(&self, lhs: &Formula, rhs: &Formula, n: usize) -> Result<(f64, f64), RobustnessError> {
        let g = self.gamma;
        let (vl, dl) = self.rob(lhs, n)?;
        let (vr, dr) = self.rob(rhs, n)?;
        Ok((smooth_min(g, vl, vr), d_smooth_min(g, vl, vr, dl, dr)))
    }

    fn always(&self, w: Window, body: &Formula, n: usize) -> Result<(f64, f64), RobustnessError> {
        let g = self.gamma;
        let (vi, di) = self.rob(body, n)?;
        if base_guard(self.s, w, n) {
            Ok((smooth_min(g, -w.lo, vi), d_smooth_min(g, -w.lo, vi, 0.0, di)))
        } else {
            let vh = smooth_max(g, w.lo, vi);
            let dh = d_smooth_max(g, w.lo, vi, 0.0, di);
            let (vt, dt) = self.always(w.shift(delta(self.s, n)), body, n + 1)?;
            Ok((smooth_min(g, vh, vt), d_smooth_min(g, vh, vt, dh, dt)))
        }
    }

    fn eventually(&self, w: Window, body: &Formula, n: usize) -> Result<(f64, f64), RobustnessError> {
        let g = self.gamma;
        let (vi, di) = self.rob(body, n)?;
        if base_guard(self.s, w, n) {
            Ok((smooth_min(g, -w.lo, vi), d_smooth_min(g, -w.lo, vi, 0.0, di)))
        } else {
            let vh = smooth_min(g, -w.lo, vi);
            let dh = d_smooth_min(g, -w.lo, vi, 0.0, di);
            let (vt, dt) = self.eventually(w.shift(delta(self.s, n)), body, n + 1)?;
            Ok((smooth_max(g, vh, vt), d_smooth_max(g, vh, vt, dh, dt)))
        }
    }

    fn until(
        &self,
        w: Window,
        lhs: &Formula,
        rhs: &Formula,
        n: usize,
    ) -> Result<(f64, f64), RobustnessError> {
        let g = self.gamma;
        if base_guard(self.s, w, n) {
            let (vc, dc) = self.conj(lhs, rhs, n)?;
            Ok((smooth_min(g, -w.lo, vc), d_smooth_min(g, -w.lo, vc, 0.0, dc)))
        } else {
            let (vl, dl) = self.rob(lhs, n)?;
            let vcarry = smooth_max(g, w.lo, vl);
            let dcarry = d_smooth_max(g, w.lo, vl, 0.0, dl);
            let (vt, dt) = self.until(w.shift(delta(self.s, n)), lhs, rhs, n + 1)?;
            let v1 = smooth_min(g, vcarry, vt);
            let d1 = d_smooth_min(g, vcarry, vt, dcarry, dt);
            let (vc, dc) = self.conj(lhs, rhs, n)?;
            let v2 = smooth_min(g, -w.lo, vc);
            let d2 = d_smooth_min(g, -w.lo, vc, 0.0, dc);
            Ok((smooth_max(g, v1, v2), d_smooth_max(g, v1, v2, d1, d2)))
        }
    }
}

/// Exact partial derivative of the smooth robustness with respect to
/// the single signal entry at sample `k`, variable `var`. Requires
/// γ > 0; at γ = 0 the semantics is piecewise and has no gradient here.
pub fn drstar(
    s: &Signal,
    f: &Formula,
    n: usize,
    gamma: f64,
    k: usize,
    var: usize,
) -> Result<f64, RobustnessError> {
    check_entry(s, f, n)?;
    check_gamma_positive(gamma)?;
    if k >= s.sample_count() {
        return Err(EvalError::Index { n: k, len: s.sample_count() }.into());
    }
    if var >= s.width() {
        return Err(RobustnessError::VarOutOfRange { var, width: s.width() });
    }
    let d = Drob { s, gamma, k, var };
    Ok(d.rob(f, n)?.1)
}

/// Dense gradient of the robustness with respect to every signal entry,
/// laid out row-major: `entry(k, i)` is the partial with respect to
/// variable `i` at sample `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTensor {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl GradientTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GradientTensor { rows, cols, entries: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        assert!(k < self.rows && i < self.cols);
        self.entries[k * self.cols + i]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn set(&mut self, k: usize, i: usize, value: f64) {
        assert!(k < self.rows && i < self.cols);
        self.entries[k * self.cols + i] = value;
    }

    pub fn add(&mut self, k: usize, i: usize, delta: f64) {
        assert!(k < self.rows && i < self.cols);
        self.entries[k * self.cols + i] += delta;
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    /// CSV rendering with the same column layout as the signal the
    /// gradient was taken against: a time column followed by one column
    /// of partials per signal variable.
    pub fn render_csv(&self, s: &Signal) -> String {
        assert_eq!(self.rows, s.sample_count());
        assert_eq!(self.cols, s.width());
        let mut out = String::from("t");
        for name in s.names() {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for k in 0..self.rows {
            out.push_str(&format!("{}", s.times()[k]));
            for i in 0..self.cols {
                out.push_str(&format!(",{}", self.get(k, i)));
            }
            out.push('\n');
        }
        out
    }
}

/// Sparse-to-dense accumulator for the batched gradient pass. Most of
/// the recursion touches a single sample (atoms and the propositional
/// operators over them), so gradients stay in the one-row form until a
/// temporal operator mixes rows.
#[derive(Clone)]
enum Grad {
    Zero,
    Row { row: usize, partials: Vec<f64> },
    Dense(Vec<f64>),
}

struct BGrad<'a> {
    s: &'a Signal,
    gamma: f64,
    cols: usize,
    len: usize,
    /// Same caching scheme as the value recursion: a temporal node's
    /// (value, gradient) at a position is reused instead of recomputed.
    memo: HashMap<(usize, usize), (f64, Grad)>,
}

impl BGrad<'_> {
    fn scale(&self, g: Grad, w: f64) -> Grad {
        match g {
            Grad::Zero => Grad::Zero,
            Grad::Row { row, mut partials } => {
                for p in &mut partials {
                    *p *= w;
                }
                Grad::Row { row, partials }
            }
            Grad::Dense(mut d) => {
                for p in &mut d {
                    *p *= w;
                }
                Grad::Dense(d)
            }
        }
    }

    fn to_dense(&self, g: Grad, w: f64) -> Vec<f64> {
        match g {
            Grad::Zero => vec![0.0; self.len],
            Grad::Row { row, partials } => {
                let mut d = vec![0.0; self.len];
                for (i, p) in partials.iter().enumerate() {
                    d[row * self.cols + i] = w * p;
                }
                d
            }
            Grad::Dense(mut d) => {
                if w != 1.0 {
                    for p in &mut d {
                        *p *= w;
                    }
                }
                d
            }
        }
    }

    fn add_into(&self, d: &mut [f64], g: Grad, w: f64) {
        match g {
            Grad::Zero => {}
            Grad::Row { row, partials } => {
                for (i, p) in partials.iter().enumerate() {
                    d[row * self.cols + i] += w * p;
                }
            }
            Grad::Dense(e) => {
                for (x, y) in d.iter_mut().zip(&e) {
                    *x += w * y;
                }
            }
        }
    }

    /// `wa·ga + wb·gb`, reusing an existing dense buffer when possible.
    fn mix(&self, wa: f64, ga: Grad, wb: f64, gb: Grad) -> Grad {
        match (ga, gb) {
            (Grad::Zero, g) => self.scale(g, wb),
            (g, Grad::Zero) => self.scale(g, wa),
            (Grad::Row { row: ra, partials: mut pa }, Grad::Row { row: rb, partials: pb })
                if ra == rb =>
            {
                for (x, y) in pa.iter_mut().zip(&pb) {
                    *x = wa * *x + wb * *y;
                }
                Grad::Row { row: ra, partials: pa }
            }
            (ga, gb) => {
                let dense_b = matches!(gb, Grad::Dense(_)) && !matches!(ga, Grad::Dense(_));
                let (base, wbase, other, wother) =
                    if dense_b { (gb, wb, ga, wa) } else { (ga, wa, gb, wb) };
                let mut d = self.to_dense(base, wbase);
                self.add_into(&mut d, other, wother);
                Grad::Dense(d)
            }
        }
    }

    fn cached(
        &mut self,
        f: &Formula,
        n: usize,
        compute: impl FnOnce(&mut Self) -> Result<(f64, Grad), RobustnessError>,
    ) -> Result<(f64, Grad), RobustnessError> {
        let key = (f as *const Formula as usize, n);
        if let Some((v, g)) = self.memo.get(&key) {
            return Ok((*v, g.clone()));
        }
        let (v, g) = compute(self)?;
        self.memo.insert(key, (v, g.clone()));
        Ok((v, g))
    }

    fn grad(&mut self, f: &Formula, n: usize) -> Result<(f64, Grad), RobustnessError> {
        let g = self.gamma;
        match f {
            Formula::Atom { f, c } => {
                let sample = self.s.sample(n);
                let v = eval_expr(f, sample)? - c;
                let mut partials = vec![0.0; self.cols];
                let mut any = false;
                for (i, p) in partials.iter_mut().enumerate() {
                    *p = d_expr(f, sample, i)?;
                    any |= *p != 0.0;
                }
                let grad = if any { Grad::Row { row: n, partials } } else { Grad::Zero };
                Ok((v, grad))
            }
            Formula::Not(a) => {
                let (v, ga) = self.grad(a, n)?;
                Ok((-v, self.scale(ga, -1.0)))
            }
            Formula::And(a, b) => {
                let (va, ga) = self.grad(a, n)?;
                let (vb, gb) = self.grad(b, n)?;
                let (v, wa, wb) = min_mix(g, va, vb);
                Ok((v, self.mix(wa, ga, wb, gb)))
            }
            Formula::Always { window, body } => {
                self.cached(f, n, |me| me.always(*window, body, n))
            }
            Formula::Eventually { window, body } => {
                self.cached(f, n, |me| me.eventually(*window, body, n))
            }
            Formula::Until { window, lhs, rhs } => {
                self.cached(f, n, |me| me.until(*window, lhs, rhs, n))
            }
        }
    }

    fn conj(&mut self, lhs: &Formula, rhs: &Formula, n: usize) -> Result<(f64, Grad), RobustnessError> {
        let (vl, gl) = self.grad(lhs, n)?;
        let (vr, gr) = self.grad(rhs, n)?;
        let (v, wl, wr) = min_mix(self.gamma, vl, vr);
        Ok((v, self.mix(wl, gl, wr, gr)))
    }

    fn always(&mut self, w: Window, body: &Formula, n: usize) -> Result<(f64, Grad), RobustnessError> {
        let g = self.gamma;
        let (vi, gi) = self.grad(body, n)?;
        if base_guard(self.s, w, n) {
            let (v, _, wi) = min_mix(g, -w.lo, vi);
            Ok((v, self.scale(gi, wi)))
        } else {
            let (vh, _, wi) = max_mix(g, w.lo, vi);
            let gh = self.scale(gi, wi);
            let (vt, gt) = self.always(w.shift(delta(self.s, n)), body, n + 1)?;
            let (v, wh, wt) = min_mix(g, vh, vt);
            Ok((v, self.mix(wh, gh, wt, gt)))
        }
    }

    fn eventually(
        &mut self,
        w: Window,
        body: &Formula,
        n: usize,
    ) -> Result<(f64, Grad), RobustnessError> {
        let g = self.gamma;
        let (vi, gi) = self.grad(body, n)?;
        if base_guard(self.s, w, n) {
            let (v, _, wi) = min_mix(g, -w.lo, vi);
            Ok((v, self.scale(gi, wi)))
        } else {
            let (vh, _, wi) = min_mix(g, -w.lo, vi);
            let gh = self.scale(gi, wi);
            let (vt, gt) = self.eventually(w.shift(delta(self.s, n)), body, n + 1)?;
            let (v, wh, wt) = max_mix(g, vh, vt);
            Ok((v, self.mix(wh, gh, wt, gt)))
        }
    }

    fn until(
        &mut self,
        w: Window,
        lhs: &Formula,
        rhs: &Formula,
        n: usize,
    ) -> Result<(f64, Grad), RobustnessError> {
        let g = self.gamma;
        if base_guard(self.s, w, n) {
            let (vc, gc) = self.conj(lhs, rhs, n)?;
            let (v, _, wc) = min_mix(g, -w.lo, vc);
            Ok((v, self.scale(gc, wc)))
        } else {
            let (vl, gl) = self.grad(lhs, n)?;
            let (vcarry, _, wl) = max_mix(g, w.lo, vl);
            let gcarry = self.scale(gl, wl);
            let (vt, gt) = self.until(w.shift(delta(self.s, n)), lhs, rhs, n + 1)?;
            let (v1, w1c, w1t) = min_mix(g, vcarry, vt);
            let g1 = self.mix(w1c, gcarry, w1t, gt);
            let (vc, gc) = self.conj(lhs, rhs, n)?;
            let (v2, _, w2c) = min_mix(g, -w.lo, vc);
            let g2 = self.scale(gc, w2c);
            let (v, wa, wb) = max_mix(g, v1, v2);
            Ok((v, self.mix(wa, g1, wb, g2)))
        }
    }
}

/// Robustness together with its full gradient, computed in a single
/// recursion pass. Requires γ > 0.
pub fn gradient(
    s: &Signal,
    f: &Formula,
    n: usize,
    gamma: f64,
) -> Result<(f64, GradientTensor), RobustnessError> {
    check_entry(s, f, n)?;
    check_gamma_positive(gamma)?;
    let rows = s.sample_count();
    let cols = s.width();
    let mut b = BGrad { s, gamma, cols, len: rows * cols, memo: HashMap::new() };
    let (value, grad) = b.grad(f, n)?;
    let entries = b.to_dense(grad, 1.0);
    Ok((value, GradientTensor { rows, cols, entries }))
}

/// Same result as [`gradient`], assembled entry by entry from
/// [`drstar`]. Quadratically slower; exists as an independent route for
/// cross-checking the batched pass.
pub fn gradient_per_variable(
    s: &Signal,
    f: &Formula,
    n: usize,
    gamma: f64,
) -> Result<(f64, GradientTensor), RobustnessError> {
    check_entry(s, f, n)?;
    check_gamma_positive(gamma)?;
    let rows = s.sample_count();
    let cols = s.width();
    let mut t = GradientTensor::zeros(rows, cols);
    for k in 0..rows {
        for i in 0..cols {
            t.entries[k * cols + i] = drstar(s, f, n, gamma, k, i)?;
        }
    }
    let value = rstar(s, f, n, gamma)?;
    Ok((value, t))
}
