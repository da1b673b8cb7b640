//! Finite-difference solver and verification harness for the 2D
//! variable-density hydrostatic primitive equations with density-dependent
//! viscosity on the x-periodic channel [0,L] x (0,1).
//!
//! The building blocks are: a saddle-point hydrostatic Stokes kernel with
//! variable viscosity (`hstokes`), an upwind transport step for the density
//! with an optional x-diffusion regularization (`transport`), a semi-implicit
//! momentum stepper with an energy ledger (`momentum`), and the outer Picard
//! linearization iteration with contraction, continuation, and stability
//! diagnostics (`picard`). The `norms` module provides the discrete norms and
//! blow-up functionals used throughout; `config`, `snapshot`, and `csvout`
//! handle run orchestration and deterministic output.

pub mod error;
pub mod grid;
pub mod norms;
pub mod hstokes;
pub mod transport;
pub mod momentum;
pub mod picard;
pub mod config;
pub mod snapshot;
pub mod csvout;

pub use error::{Error, Result};
