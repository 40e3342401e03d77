//! Discrete and continuous models of pooled-income investment schemes.
//!
//! Three demographic laws (geometric, quasi-logistic, SIR-type) drive one
//! capital budget recursion. Every closed form in this crate has a
//! step-by-step counterpart it can be checked against:
//! [`capital::budget_recursion_oracle`] for capital, and the plain
//! recursions in the test suite for the population paths.

pub mod api;
pub mod capital;
pub mod commands;
pub mod continuum;
pub mod criticality;
pub mod demography;
pub mod error;
pub mod export;
pub mod linrec;
pub mod numeric;
pub mod recurrent;
pub mod scenario;
pub mod timing;

pub use error::{ModelError, Result, Violation};
pub use timing::Timing;
