//! Multiscale Landau–Lifshitz–Gilbert toolkit: periodic cell problems,
//! homogenized coefficients, stray fields, a norm-preserving LLG integrator,
//! two-scale correctors and convergence sweeps over ε.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cellsolve;
pub mod config;
pub mod container;
pub mod correctors;
pub mod divform;
pub mod error;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod llg;
pub mod material;
pub mod reduce;
pub mod solver;
pub mod spectral;
pub mod strayfield;

pub use error::{Error, Result};
