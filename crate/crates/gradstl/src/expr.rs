//! Real-valued expression trees over the state variables of a signal.
//!
//! An [`Expr`] is the left-hand side of an atomic predicate `{ f > c }`:
//! a closed-form function of one sample of the signal. Expressions are
//! evaluated exactly ([`eval_expr`]) and differentiated structurally
//! ([`d_expr`]), so gradients are exact up to floating-point rounding,
//! not finite-difference estimates.

use thiserror::Error;

/// Expression over the state variables of a single sample.
///
/// Variables are stored with both their column index and their name: the
/// index makes evaluation an array lookup, the name makes printing and
/// cross-signal validation possible.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    Var { index: usize, name: String },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power with repeated-multiplication semantics; `e^0` is 1
    /// for every base, including 0.
    PowInt(Box<Expr>, u32),
    Sqrt(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of negative value {value}")]
    SqrtOfNegative { value: f64 },
    #[error("derivative undefined: square root argument is zero and depends on the variable")]
    NotDifferentiable,
    #[error("unbound variable `{name}` (index {index}, sample width {width})")]
    UnboundVariable {
        index: usize,
        name: String,
        width: usize,
    },
}

// Constructor helpers, not operator overloads: they take ownership and
// wrap in Box, which the std operator traits cannot express as tersely.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn var(index: usize, name: impl Into<String>) -> Expr {
        Expr::Var {
            index,
            name: name.into(),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn pow(a: Expr, n: u32) -> Expr {
        Expr::PowInt(Box::new(a), n)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Box::new(a))
    }

    /// Does the expression mention state variable `var`?
    pub fn mentions(&self, var: usize) -> bool {
        match self {
            Expr::Constant(_) => false,
            Expr::Var { index, .. } => *index == var,
            Expr::Neg(e) | Expr::Sqrt(e) | Expr::PowInt(e, _) => e.mentions(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.mentions(var) || b.mentions(var)
            }
        }
    }

    /// Check every variable reference against a signal's column names.
    pub fn check_bound(&self, names: &[String]) -> Result<(), ExprError> {
        match self {
            Expr::Constant(_) => Ok(()),
            Expr::Var { index, name } => {
                if *index < names.len() && names[*index] == *name {
                    Ok(())
                } else {
                    Err(ExprError::UnboundVariable {
                        index: *index,
                        name: name.clone(),
                        width: names.len(),
                    })
                }
            }
            Expr::Neg(e) | Expr::Sqrt(e) | Expr::PowInt(e, _) => e.check_bound(names),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.check_bound(names)?;
                b.check_bound(names)
            }
        }
    }
}

fn powi(base: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= base;
    }
    acc
}

/// Evaluate an expression on one sample (a slice of state-variable values).
pub fn eval_expr(e: &Expr, sample: &[f64]) -> Result<f64, ExprError> {
    match e {
        Expr::Constant(c) => Ok(*c),
        Expr::Var { index, name } => {
            sample
                .get(*index)
                .copied()
                .ok_or_else(|| ExprError::UnboundVariable {
                    index: *index,
                    name: name.clone(),
                    width: sample.len(),
                })
        }
        Expr::Neg(a) => Ok(-eval_expr(a, sample)?),
        Expr::Add(a, b) => Ok(eval_expr(a, sample)? + eval_expr(b, sample)?),
        Expr::Sub(a, b) => Ok(eval_expr(a, sample)? - eval_expr(b, sample)?),
        Expr::Mul(a, b) => Ok(eval_expr(a, sample)? * eval_expr(b, sample)?),
        Expr::Div(a, b) => {
            let d = eval_expr(b, sample)?;
            if d == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            Ok(eval_expr(a, sample)? / d)
        }
        Expr::PowInt(a, n) => Ok(powi(eval_expr(a, sample)?, *n)),
        Expr::Sqrt(a) => {
            let v = eval_expr(a, sample)?;
            if v < 0.0 {
                return Err(ExprError::SqrtOfNegative { value: v });
            }
            Ok(v.sqrt())
        }
    }
}

/// Partial derivative of `e` with respect to state variable `var`,
/// evaluated at `sample`.
///
/// The usual sum, product, quotient, and chain rules, applied to the tree
/// structure. `d(e^n) = n * e^(n-1) * de` with `0^0 = 1`, so `d(e^0) = 0`.
/// A square root whose argument is zero has no derivative when the
/// argument depends on `var`; that is reported as an error rather than
/// silently producing an infinity.
pub fn d_expr(e: &Expr, sample: &[f64], var: usize) -> Result<f64, ExprError> {
    match e {
        Expr::Constant(_) => Ok(0.0),
        Expr::Var { index, name } => {
            if *index >= sample.len() {
                return Err(ExprError::UnboundVariable {
                    index: *index,
                    name: name.clone(),
                    width: sample.len(),
                });
            }
            Ok(if *index == var { 1.0 } else { 0.0 })
        }
        Expr::Neg(a) => Ok(-d_expr(a, sample, var)?),
        Expr::Add(a, b) => Ok(d_expr(a, sample, var)? + d_expr(b, sample, var)?),
        Expr::Sub(a, b) => Ok(d_expr(a, sample, var)? - d_expr(b, sample, var)?),
        Expr::Mul(a, b) => {
            let (av, bv) = (eval_expr(a, sample)?, eval_expr(b, sample)?);
            Ok(d_expr(a, sample, var)? * bv + av * d_expr(b, sample, var)?)
        }
        Expr::Div(a, b) => {
            let bv = eval_expr(b, sample)?;
            if bv == 0.0 {
                return Err(ExprError::DivisionByZero);
            }
            let av = eval_expr(a, sample)?;
            let (da, db) = (d_expr(a, sample, var)?, d_expr(b, sample, var)?);
            Ok((da * bv - av * db) / (bv * bv))
        }
        Expr::PowInt(a, n) => {
            if *n == 0 {
                return Ok(0.0);
            }
            let av = eval_expr(a, sample)?;
            let da = d_expr(a, sample, var)?;
            Ok(*n as f64 * powi(av, *n - 1) * da)
        }
        Expr::Sqrt(a) => {
            let av = eval_expr(a, sample)?;
            if av < 0.0 {
                return Err(ExprError::SqrtOfNegative { value: av });
            }
            if av == 0.0 {
                if a.mentions(var) {
                    return Err(ExprError::NotDifferentiable);
                }
                return Ok(0.0);
            }
            Ok(d_expr(a, sample, var)? / (2.0 * av.sqrt()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0, "x")
    }

    fn y() -> Expr {
        Expr::var(1, "y")
    }

    #[test]
    fn affine_eval() {
        let e = Expr::sub(x(), Expr::Constant(3.5));
        assert_eq!(eval_expr(&e, &[2.0]).unwrap(), -1.5);
    }

    #[test]
    fn norm_eval_and_derivative() {
        let e = Expr::sqrt(Expr::add(Expr::pow(x(), 2), Expr::pow(y(), 2)));
        let sample = [3.0, 4.0];
        assert_eq!(eval_expr(&e, &sample).unwrap(), 5.0);
        let dx = d_expr(&e, &sample, 0).unwrap();
        assert!((dx - 0.6).abs() < 1e-15, "dx = {dx}");
        let dy = d_expr(&e, &sample, 1).unwrap();
        assert!((dy - 0.8).abs() < 1e-15, "dy = {dy}");
    }

    #[test]
    fn square_derivative() {
        let e = Expr::pow(x(), 2);
        assert_eq!(d_expr(&e, &[3.0], 0).unwrap(), 6.0);
    }

    #[test]
    fn constants_and_absent_variables_have_zero_derivative() {
        assert_eq!(d_expr(&Expr::Constant(7.25), &[1.0], 0).unwrap(), 0.0);
        assert_eq!(d_expr(&x(), &[1.0, 2.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = Expr::div(x(), y());
        assert_eq!(
            eval_expr(&e, &[1.0, 0.0]).unwrap_err(),
            ExprError::DivisionByZero
        );
        assert_eq!(
            d_expr(&e, &[1.0, 0.0], 0).unwrap_err(),
            ExprError::DivisionByZero
        );
    }

    #[test]
    fn sqrt_of_negative_is_an_error() {
        let e = Expr::sqrt(x());
        assert!(matches!(
            eval_expr(&e, &[-1.0]),
            Err(ExprError::SqrtOfNegative { .. })
        ));
    }

    #[test]
    fn sqrt_at_zero_depends_on_variable_membership() {
        let e = Expr::sqrt(x());
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 0.0);
        assert_eq!(d_expr(&e, &[0.0], 0).unwrap_err(), ExprError::NotDifferentiable);
        // The argument does not mention y, so the derivative is plain 0.
        assert_eq!(d_expr(&e, &[0.0], 1).unwrap(), 0.0);
    }

    #[test]
    fn zero_to_the_zero_is_one_with_zero_derivative() {
        let e = Expr::pow(x(), 0);
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 1.0);
        assert_eq!(d_expr(&e, &[0.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn power_rule() {
        let e = Expr::pow(x(), 3);
        assert_eq!(eval_expr(&e, &[2.0]).unwrap(), 8.0);
        assert_eq!(d_expr(&e, &[2.0], 0).unwrap(), 12.0);
        assert_eq!(d_expr(&Expr::pow(x(), 1), &[5.0], 0).unwrap(), 1.0);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let e = Expr::var(3, "w");
        assert!(matches!(
            eval_expr(&e, &[1.0, 2.0]),
            Err(ExprError::UnboundVariable { index: 3, width: 2, .. })
        ));
        assert!(e.check_bound(&["x".into(), "y".into()]).is_err());
        assert!(x().check_bound(&["x".into(), "y".into()]).is_ok());
        // Name mismatch at the right index is also a binding error.
        assert!(x().check_bound(&["v".into()]).is_err());
    }

    #[test]
    fn quotient_rule() {
        // d/dx (x / (x + 1)) = 1 / (x + 1)^2
        let e = Expr::div(x(), Expr::add(x(), Expr::Constant(1.0)));
        let d = d_expr(&e, &[3.0], 0).unwrap();
        assert!((d - 1.0 / 16.0).abs() < 1e-15);
    }
}
