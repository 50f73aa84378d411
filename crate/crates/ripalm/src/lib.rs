//! ripALM: a relative-type inexact proximal augmented Lagrangian solver for
//! linearly constrained convex optimization, with a semismooth Newton
//! subsolver, problem bindings for quadratically regularized optimal
//! transport and basis pursuit denoising, first-order baselines, and KKT
//! self-certification.
//!
//! The crate is organized around the generic dual template
//! `min_y f*(A^T y) - b^T y`: [`solver`] runs the outer loop against a
//! [`solver::ProblemOracle`], [`ssn`] provides the inner Newton method, and
//! [`qrot`] / [`bpdn`] supply the two concrete bindings with their structured
//! generalized Jacobians, residuals, and instance generators. [`baselines`]
//! holds the dual ADMM references and the Sinkhorn-based warm start.

pub mod baselines;
pub mod bpdn;
pub mod io;
pub mod numerics;
pub mod qrot;
pub mod solver;
pub mod ssn;

pub use numerics::{DenseMatrix, DenseVector};
pub use solver::{
    default_schedules, InitialPoint, KktResiduals, RipalmConfig, Schedule, SolveReport,
    SolveStatus,
};
pub use ssn::SsnConfig;
