//! Noise-reinforced Bessel processes of dimension `d ∈ (0, 2)`: closed forms,
//! exact path sampling, local times, the inverse local time as a self-similar
//! Markov process, and a Monte Carlo harness that checks them against each
//! other.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod container;
pub mod error;
pub mod harness;
pub mod localtime;
pub mod pathsim;
pub mod quad;
pub mod specfun;
pub mod ssmp;

pub use error::{Error, Result};
pub use specfun::{Params, TestFunction};
