//! Seeded random-instance generators shared by the integration suites.
//!
//! Signal values, atom constants, and window bounds all live on a 0.25
//! grid. Grid points and their sums are exact in binary floating point,
//! so boolean comparisons against the reference oracle never hinge on
//! rounding.

#![allow(dead_code)]

use gradstl::expr::Expr;
use gradstl::formula::Formula;
use gradstl::signal::Signal;
use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const VAR_NAMES: [&str; 3] = ["x", "y", "z"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random multiple of 0.25 with `lo <= k <= hi` quarters.
pub fn grid(r: &mut ChaCha8Rng, lo: i32, hi: i32) -> f64 {
    f64::from(r.random_range(lo..=hi)) * 0.25
}

pub fn arb_signal(r: &mut ChaCha8Rng, max_samples: usize, max_width: usize) -> Signal {
    arb_signal_scaled(r, max_samples, max_width, 40)
}

/// Like [`arb_signal`] with values confined to `quarters` grid steps
/// around zero. Derivative suites use a small range so polynomial atoms
/// stay well conditioned for finite differencing.
pub fn arb_signal_scaled(
    r: &mut ChaCha8Rng,
    max_samples: usize,
    max_width: usize,
    quarters: i32,
) -> Signal {
    let width = r.random_range(1..=max_width);
    let samples = r.random_range(1..=max_samples);
    let names = VAR_NAMES[..width].iter().map(|n| n.to_string()).collect();
    let mut t = grid(r, 0, 8);
    let mut times = Vec::with_capacity(samples);
    for _ in 0..samples {
        times.push(t);
        t += grid(r, 1, 8);
    }
    let values = (0..samples * width).map(|_| grid(r, -quarters, quarters)).collect();
    Signal::new(names, times, values).unwrap()
}

#[derive(Clone, Copy)]
pub struct FormulaCfg {
    /// Maximum AST depth, atoms included.
    pub max_depth: usize,
    /// Give every `G` window a zero lower bound. The adaptive-window
    /// semantics reads an empty `G` window that has slid past the end
    /// of the signal as unsatisfied, while the interval oracle reads it
    /// as vacuously true; anchoring the window at the evaluation point
    /// keeps it non-empty and the two semantics comparable.
    pub zero_lo_always: bool,
    pub allow_until: bool,
    /// Draw polynomial atom expressions instead of plain variables.
    pub poly_atoms: bool,
}

impl Default for FormulaCfg {
    fn default() -> FormulaCfg {
        FormulaCfg {
            max_depth: 3,
            zero_lo_always: true,
            allow_until: true,
            poly_atoms: false,
        }
    }
}

pub fn arb_formula(r: &mut ChaCha8Rng, width: usize, cfg: FormulaCfg) -> Formula {
    node(r, width, cfg.max_depth, cfg)
}

fn node(r: &mut ChaCha8Rng, width: usize, depth: usize, cfg: FormulaCfg) -> Formula {
    if depth <= 1 {
        return atom(r, width, cfg);
    }
    match r.random_range(0..10u32) {
        0..=2 => atom(r, width, cfg),
        3 => Formula::not(node(r, width, depth - 1, cfg)),
        4 | 5 => Formula::and(node(r, width, depth - 1, cfg), node(r, width, depth - 1, cfg)),
        6 => {
            let lo = if cfg.zero_lo_always { 0.0 } else { grid(r, 0, 8) };
            let hi = lo + grid(r, 0, 16);
            Formula::always(lo, hi, node(r, width, depth - 1, cfg))
        }
        7 | 8 => {
            let lo = grid(r, 0, 8);
            let hi = lo + grid(r, 0, 16);
            Formula::eventually(lo, hi, node(r, width, depth - 1, cfg))
        }
        _ => {
            let lo = grid(r, 0, 8);
            let hi = lo + grid(r, 0, 16);
            if cfg.allow_until {
                Formula::until(
                    lo,
                    hi,
                    node(r, width, depth - 1, cfg),
                    node(r, width, depth - 1, cfg),
                )
            } else {
                Formula::eventually(lo, hi, node(r, width, depth - 1, cfg))
            }
        }
    }
}

fn atom(r: &mut ChaCha8Rng, width: usize, cfg: FormulaCfg) -> Formula {
    if cfg.poly_atoms {
        let c = grid(r, -8, 8);
        Formula::atom(poly(r, width, 2), c)
    } else {
        let c = grid(r, -40, 40);
        let v = var(r, width);
        let f = if r.random_bool(0.5) { Expr::neg(v) } else { v };
        Formula::atom(f, c)
    }
}

fn var(r: &mut ChaCha8Rng, width: usize) -> Expr {
    let i = r.random_range(0..width);
    Expr::var(i, VAR_NAMES[i])
}

/// A small polynomial over the signal variables: sums, differences,
/// products, and integer powers only, so it is defined and smooth on
/// every sample.
fn poly(r: &mut ChaCha8Rng, width: usize, depth: usize) -> Expr {
    if depth == 0 {
        return if r.random_bool(0.8) {
            var(r, width)
        } else {
            Expr::Constant(grid(r, -8, 8))
        };
    }
    match r.random_range(0..6u32) {
        0 => var(r, width),
        1 => Expr::neg(poly(r, width, depth - 1)),
        2 => Expr::add(poly(r, width, depth - 1), poly(r, width, depth - 1)),
        3 => Expr::sub(poly(r, width, depth - 1), poly(r, width, depth - 1)),
        4 => Expr::mul(poly(r, width, depth - 1), poly(r, width, depth - 1)),
        _ => Expr::pow(poly(r, width, depth - 1), r.random_range(2..=3)),
    }
}

/// One random evaluation instance: a signal, a formula over its
/// variables, and a start position.
pub fn arb_instance(r: &mut ChaCha8Rng, cfg: FormulaCfg) -> (Signal, Formula, usize) {
    let s = arb_signal(r, 8, 2);
    let f = arb_formula(r, s.width(), cfg);
    let n = r.random_range(0..s.sample_count());
    (s, f, n)
}

/// The fixed instance set used by the oracle-agreement and sign
/// suites. Regenerating from the same seed keeps the two suites on
/// identical instances.
pub fn standard_instances(count: usize) -> Vec<(Signal, Formula, usize)> {
    let mut r = rng(0x5eed_0001);
    (0..count).map(|_| arb_instance(&mut r, FormulaCfg::default())).collect()
}

/// An instance with polynomial atoms over a small-valued signal, sized
/// so that central finite differences of the robustness stay far above
/// cancellation noise.
pub fn arb_derivative_instance(r: &mut ChaCha8Rng) -> (Signal, Formula, usize) {
    let cfg = FormulaCfg {
        zero_lo_always: false,
        poly_atoms: true,
        ..FormulaCfg::default()
    };
    let s = arb_signal_scaled(r, 8, 2, 8);
    let f = arb_formula(r, s.width(), cfg);
    let n = r.random_range(0..s.sample_count());
    (s, f, n)
}
