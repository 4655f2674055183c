//! Sparse-free linear algebra kernels used by the solvers.

mod band;
mod cg;

pub use band::{BandLdl, SymBand};
pub use cg::{jacobi, pcg, CgOptions, CgOutcome};
