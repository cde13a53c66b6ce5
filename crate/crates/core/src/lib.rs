//! Geometric phases and holonomic gates for finite-dimensional parametric
//! Hamiltonians.
//!
//! The crate computes Abelian and non-Abelian, adiabatic and non-adiabatic
//! geometric phases for small driven quantum systems and synthesizes the
//! corresponding quantum gates. Every analytic route is validated against an
//! independent time-ordered Schroedinger propagator ([`propagator`]).
//!
//! Modules:
//! - [`models`]: parametric Hamiltonians and loop generators
//! - [`abelian`]: Berry connection in uniform coordinates, closed forms
//! - [`nonabelian`]: degenerate-level matrix connection and holonomy
//! - [`nonadiabatic`]: exact rotating-frame spin dynamics and the two-qubit
//!   diagonal gate
//! - [`quadrupole`]: spin-3/2 quadrupole pipeline and its two-qubit
//!   evolution operator
//! - [`propagator`]: brute-force Schroedinger integrator (the oracle)
//! - [`job`]: declarative job configs, used by the CLI and the Python
//!   bindings

pub mod abelian;
pub mod error;
pub mod export;
pub mod job;
pub mod linalg;
pub mod models;
pub mod nonabelian;
pub mod nonadiabatic;
pub mod propagator;
pub mod quadrupole;

pub use error::{Error, Result};
pub use linalg::{C64, CMatrix, CVector};
