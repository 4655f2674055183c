//! Structured-grid simulator for the coupled Cahn–Hilliard–Biot system.
//!
//! The unknowns are the phase field `φ`, the displacement `u` and the fluid
//! content `θ` on a uniform rectangle. Each time window freezes the
//! highest-order operators at a linearization point and iterates the
//! resulting fixed-point map (Picard) until it contracts to a tolerance.
//!
//! Modules, bottom up:
//!
//! - [`mesh`]: grid, nodal fields, zero-flux Laplacians, strain and divergence
//! - [`materials`]: phase-dependent coefficients and the elastic energy
//! - [`linalg`]: weighted conjugate gradients and banded factorizations
//! - [`solvers`]: elasticity and scalar elliptic solves
//! - [`biot`]: the pressure/fluid-content operators and the fluid operator
//! - [`coupled`]: derived fields and the nonlinear right-hand sides
//! - [`stepper`]: linear substeps, Picard windows, time loop
//! - [`oracle`]: dense reference assembly for verification
//! - [`diagnostics`]: energies, residuals, convergence studies
//! - [`config`], [`output`]: run configuration and file output

pub mod biot;
pub mod config;
pub mod coupled;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod solvers;
pub mod stepper;

pub use error::{Error, Result, SolverFailure};
