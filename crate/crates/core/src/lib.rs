//! Multiscale Petrov-Galerkin finite elements (localized orthogonal
//! decomposition) for the 2D heterogeneous Helmholtz equation, with a
//! coefficient-stability auditor and a convergence experiment harness.

pub mod assembly;
pub mod coefficients;
pub mod corrector;
pub mod error;
pub mod experiment;
pub mod interpolation;
pub mod linalg;
pub mod mesh;
pub mod pgsolve;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};
pub use linalg::c64;
