//! Bell inequalities for n-party correlation functions and the
//! communication-complexity problems they induce.
//!
//! The crate covers both sides of the comparison:
//!
//! - [`qsim`] simulates n-qubit states, dichotomic observables, correlation
//!   functions and measurement sampling;
//! - [`inequalities`] builds weight functions (general, WWZB, Mermin,
//!   Ardehali), computes exact local-hidden-variable bounds by enumeration,
//!   and optimizes measurement settings;
//! - [`ccp`] turns a weight function into a distributed one-bit-broadcast
//!   guessing problem and computes exact classical and quantum success
//!   probabilities, including the advantage-iff-violation equivalence;
//! - [`montecarlo`] runs the protocol round by round with seeded,
//!   reproducible sampling;
//! - [`continuum`] evaluates the functional (continuous-settings) Bell
//!   inequality by quadrature.

pub mod ccp;
pub mod continuum;
pub mod error;
pub mod inequalities;
pub mod montecarlo;
pub mod qsim;

mod bits;

pub use error::{Error, Result};
