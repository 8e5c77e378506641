//! GradSTL: a differentiable signal temporal logic engine.
//!
//! The crate evaluates STL constraints over finite, non-uniformly sampled
//! signals in three related ways:
//!
//! * boolean satisfaction with an adaptive temporal window
//!   ([`semantics::eval_estar`]),
//! * smooth robustness, where min/max are replaced by log-sum-exp
//!   softenings controlled by a parameter gamma ([`robustness::rstar`]),
//! * exact derivatives of that smooth robustness with respect to any
//!   signal entry ([`robustness::drstar`], [`robustness::gradient`]).
//!
//! On top of the gradients sits a small Adam-based optimizer that repairs
//! a signal until it satisfies a constraint ([`optimize`]), and a
//! ready-made medical-robot routing scenario ([`casestudy`]). The
//! `gradstl` binary exposes all of it on the command line.

pub mod casestudy;
pub mod expr;
pub mod formula;
pub mod optimize;
pub mod robustness;
pub mod semantics;
pub mod signal;
