//! Numerical laboratory for the harmonically trapped Calogero model and its
//! matrix-model reduction.
//!
//! The crate is organised around one shared parameter/record layer (`params`,
//! `noise`, `config`, `report`) and six physics modules:
//!
//! - [`matrix`]: finite-N matrix model — constraint/gauge residuals, exact
//!   rotation, diagonal-gauge embedding, conserved quantities, the
//!   Lagrange-multiplier solver, and symmetrized-trace evaluation.
//! - [`calogero`]: direct N-body integration of the Calogero system, used as
//!   an independent oracle for the matrix model.
//! - [`hydro`]: Wigner phase-space fields, droplet density, linearized
//!   velocity/vorticity hydrodynamics, and Kirchhoff point vortices.
//! - [`fock`]: level-truncated bosonic Fock space — I1, I2, Virasoro
//!   generators, spectrum matching.
//! - [`jack`]: exact-rational Jack polynomial oracle and its Fock embedding.
//! - [`langevin`]: stochastic-quantization simulators with exact stationary
//!   oracles.
//!
//! [`acceptance`] bundles the end-to-end verification suite shared by the CLI
//! `verify-all` subcommand and the integration tests.

pub mod acceptance;
pub mod calogero;
pub mod config;
pub mod fock;
pub mod hydro;
pub mod jack;
pub mod langevin;
pub mod matrix;
pub mod noise;
pub mod ode;
pub mod params;
pub mod report;

pub use config::Config;
pub use noise::NoiseStream;
pub use params::{NumericConfig, PhysParams};
pub use report::{Observable, RunRecord};

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;
/// Dense real matrix.
pub type RMat = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RVec = nalgebra::DVector<f64>;
