//! STL constraint syntax: the formula AST, a text-format parser, a
//! pretty-printer, and structural metrics.
//!
//! The constraint language is
//!
//! ```text
//! ρ ::= {f > c}  |  !ρ  |  ρ & ρ  |  G[x,y]ρ  |  F[x,y]ρ  |  ρ U[x,y] ρ
//! ```
//!
//! with `G` read "always", `F` "eventually", and `U` "until". Disjunction
//! `|` is accepted by the parser as sugar for `!(!a & !b)` and never
//! appears in the AST. Windows `[x,y]` are in seconds, relative to the
//! evaluation point, and must satisfy `0 <= x <= y` in source text;
//! negative bounds arise only internally while the evaluator shifts a
//! window across samples.

mod parse;

pub use parse::{parse_formula, ParseError};

use std::fmt::Write as _;

use crate::expr::Expr;

/// A relative temporal window `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Window {
        Window { lo, hi }
    }

    /// Shift both bounds earlier by `dt`, the step the temporal recursion
    /// takes when it advances one sample.
    pub fn shift(self, dt: f64) -> Window {
        Window {
            lo: self.lo - dt,
            hi: self.hi - dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    /// `{f > c}`: strict comparison of an expression against a constant.
    Atom { f: Expr, c: f64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Always {
        window: Window,
        body: Box<Formula>,
    },
    Eventually {
        window: Window,
        body: Box<Formula>,
    },
    Until {
        window: Window,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
}

#[allow(clippy::should_implement_trait)]
impl Formula {
    pub fn atom(f: Expr, c: f64) -> Formula {
        Formula::Atom { f, c }
    }

    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn always(lo: f64, hi: f64, body: Formula) -> Formula {
        Formula::Always {
            window: Window::new(lo, hi),
            body: Box::new(body),
        }
    }

    pub fn eventually(lo: f64, hi: f64, body: Formula) -> Formula {
        Formula::Eventually {
            window: Window::new(lo, hi),
            body: Box::new(body),
        }
    }

    pub fn until(lo: f64, hi: f64, lhs: Formula, rhs: Formula) -> Formula {
        Formula::Until {
            window: Window::new(lo, hi),
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Number of sub-formulas, the current node included.
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom { .. } => 1,
            Formula::Not(a) | Formula::Always { body: a, .. } | Formula::Eventually { body: a, .. } => {
                1 + a.size()
            }
            Formula::And(a, b) | Formula::Until { lhs: a, rhs: b, .. } => 1 + a.size() + b.size(),
        }
    }

    /// Depth of the formula tree; an atom has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom { .. } => 1,
            Formula::Not(a) | Formula::Always { body: a, .. } | Formula::Eventually { body: a, .. } => {
                1 + a.depth()
            }
            Formula::And(a, b) | Formula::Until { lhs: a, rhs: b, .. } => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// Largest number of temporal operators on any root-to-leaf path.
    pub fn temporal_nesting(&self) -> usize {
        match self {
            Formula::Atom { .. } => 0,
            Formula::Not(a) => a.temporal_nesting(),
            Formula::And(a, b) => a.temporal_nesting().max(b.temporal_nesting()),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => {
                1 + body.temporal_nesting()
            }
            Formula::Until { lhs, rhs, .. } => 1 + lhs.temporal_nesting().max(rhs.temporal_nesting()),
        }
    }

    /// Total number of temporal operators anywhere in the formula.
    pub fn temporal_op_count(&self) -> usize {
        match self {
            Formula::Atom { .. } => 0,
            Formula::Not(a) => a.temporal_op_count(),
            Formula::And(a, b) => a.temporal_op_count() + b.temporal_op_count(),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => {
                1 + body.temporal_op_count()
            }
            Formula::Until { lhs, rhs, .. } => {
                1 + lhs.temporal_op_count() + rhs.temporal_op_count()
            }
        }
    }

    /// Visit every atom in the formula.
    pub fn for_each_atom<'a>(&'a self, visit: &mut impl FnMut(&'a Expr, f64)) {
        match self {
            Formula::Atom { f, c } => visit(f, *c),
            Formula::Not(a) | Formula::Always { body: a, .. } | Formula::Eventually { body: a, .. } => {
                a.for_each_atom(visit)
            }
            Formula::And(a, b) | Formula::Until { lhs: a, rhs: b, .. } => {
                a.for_each_atom(visit);
                b.for_each_atom(visit);
            }
        }
    }
}

/// Disjunction through De Morgan: `a | b` as `!(!a & !b)`.
pub fn derived_or(a: Formula, b: Formula) -> Formula {
    Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
}

// Precedence levels used by the printer; higher binds tighter. They mirror
// the grammar: | (never printed) < & < U < prefix unary < primary.
const LVL_AND: u8 = 2;
const LVL_UNTIL: u8 = 3;
const LVL_UNARY: u8 = 4;
const LVL_PRIMARY: u8 = 5;

fn formula_level(f: &Formula) -> u8 {
    match f {
        Formula::Atom { .. } => LVL_PRIMARY,
        Formula::Not(_) | Formula::Always { .. } | Formula::Eventually { .. } => LVL_UNARY,
        Formula::Until { .. } => LVL_UNTIL,
        Formula::And(_, _) => LVL_AND,
    }
}

/// Render a formula so that [`parse_formula`] reproduces the identical AST.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

fn write_child(out: &mut String, f: &Formula, min_level: u8) {
    if formula_level(f) < min_level {
        out.push('(');
        write_formula(out, f);
        out.push(')');
    } else {
        write_formula(out, f);
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::Atom { f, c } => {
            out.push('{');
            write_expr(out, f, ELVL_SUM);
            let _ = write!(out, " > {c}");
            out.push('}');
        }
        Formula::Not(a) => {
            out.push('!');
            write_child(out, a, LVL_UNARY);
        }
        Formula::And(a, b) => {
            // `&` chains are left-associative, so a left And child may stay
            // bare while a right one needs parentheses.
            write_child(out, a, LVL_AND);
            out.push_str(" & ");
            write_child(out, b, LVL_AND + 1);
        }
        Formula::Always { window, body } => {
            let _ = write!(out, "G[{},{}] ", window.lo, window.hi);
            write_child(out, body, LVL_UNARY);
        }
        Formula::Eventually { window, body } => {
            let _ = write!(out, "F[{},{}] ", window.lo, window.hi);
            write_child(out, body, LVL_UNARY);
        }
        Formula::Until { window, lhs, rhs } => {
            write_child(out, lhs, LVL_UNTIL);
            let _ = write!(out, " U[{},{}] ", window.lo, window.hi);
            write_child(out, rhs, LVL_UNARY);
        }
    }
}

// Expression precedence: + - < * / < unary - < ^ < primary.
const ELVL_SUM: u8 = 1;
const ELVL_TERM: u8 = 2;
const ELVL_UNARY: u8 = 3;
const ELVL_POW: u8 = 4;
const ELVL_PRIMARY: u8 = 5;

fn expr_level(e: &Expr) -> u8 {
    match e {
        Expr::Add(_, _) | Expr::Sub(_, _) => ELVL_SUM,
        Expr::Mul(_, _) | Expr::Div(_, _) => ELVL_TERM,
        Expr::Neg(_) => ELVL_UNARY,
        // A negative literal prints with its sign, which the parser reads
        // at the unary level.
        Expr::Constant(c) if *c < 0.0 => ELVL_UNARY,
        Expr::PowInt(_, _) => ELVL_POW,
        Expr::Constant(_) | Expr::Var { .. } | Expr::Sqrt(_) => ELVL_PRIMARY,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_level: u8) {
    if expr_level(e) < min_level {
        out.push('(');
        write_expr_bare(out, e);
        out.push(')');
    } else {
        write_expr_bare(out, e);
    }
}

fn write_expr_bare(out: &mut String, e: &Expr) {
    match e {
        Expr::Constant(c) => {
            let _ = write!(out, "{c}");
        }
        Expr::Var { name, .. } => out.push_str(name),
        Expr::Neg(a) => {
            out.push('-');
            // `-` directly in front of a literal would fold into a signed
            // constant on reparse, so keep the operand parenthesized.
            if matches!(**a, Expr::Constant(_)) {
                out.push('(');
                write_expr_bare(out, a);
                out.push(')');
            } else {
                write_expr(out, a, ELVL_UNARY);
            }
        }
        Expr::Add(a, b) => {
            write_expr(out, a, ELVL_SUM);
            out.push_str(" + ");
            write_expr(out, b, ELVL_TERM);
        }
        Expr::Sub(a, b) => {
            write_expr(out, a, ELVL_SUM);
            out.push_str(" - ");
            write_expr(out, b, ELVL_TERM);
        }
        Expr::Mul(a, b) => {
            write_expr(out, a, ELVL_TERM);
            out.push_str(" * ");
            write_expr(out, b, ELVL_UNARY);
        }
        Expr::Div(a, b) => {
            write_expr(out, a, ELVL_TERM);
            out.push_str(" / ");
            write_expr(out, b, ELVL_UNARY);
        }
        Expr::PowInt(a, n) => {
            write_expr(out, a, ELVL_PRIMARY);
            let _ = write!(out, "^{n}");
        }
        Expr::Sqrt(a) => {
            out.push_str("sqrt(");
            write_expr_bare(out, a);
            out.push(')');
        }
    }
}
