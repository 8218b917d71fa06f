//! Upper and lower expectations over nested-bound credal sets, with
//! convergence harnesses and law-of-large-numbers experiments.

pub mod cli;
pub mod domain;
pub mod engine;
pub mod error;
pub mod expr;
pub mod format;
pub mod independence;
pub mod limits;
pub mod lln;
pub mod search;
pub mod tol;

pub use domain::{build_domain, tail_truncation, BoundPair, CredalDomain, DomainSpec, Interval, SimplexPolicy, ThetaVector};
pub use engine::{lower_expectation, upper_expectation, Method, RandomVariable, SublinearResult};
pub use error::{Error, Result};
pub use expr::{eval_expr, parse_expr, Expr};
