//! Exact simulation of one-dimensional diffusions with discontinuous
//! coefficients by a random walk on skew Brownian motion.
//!
//! The generator `L = (ρ/2) d/dx (a d/dx) + b d/dx` is approximated by
//! piecewise-constant coefficients. In natural scale the approximating process
//! is a Brownian motion that is skewed at finitely many knots, and every step of
//! the walk draws an exact exit time and exit point (or survived position) of
//! a Brownian motion on a small interval.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod exit_law;
pub mod expr;
pub mod oracles;
pub mod quad;
pub mod stats;
pub mod stepper;
pub mod walk;

pub use coefficients::{Boundary, Coefficients, Piece, Profile};
pub use error::{Error, Result};
pub use exit_law::{ExitLaw, Side};
pub use walk::{Simulator, SimulatorOptions};
