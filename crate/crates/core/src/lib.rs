//! Markovian simulation of long-memory Gaussian processes.
//!
//! A kernel `h` that is the Laplace transform of a positive measure `μ`,
//! `h(u) = ∫ e^{-ux} μ(dx)`, turns the Volterra integral
//! `V(t) = ∫₀ᵗ h(t-s) dB_s` into a linear functional `∫ Y_t^x μ(dx)` of a
//! family of Ornstein-Uhlenbeck processes driven by the same Brownian motion.
//! Discretizing `μ` on a geometric grid leaves a finite bank of OU processes
//! whose weighted sum approximates `V`, and whose state is the entire memory
//! of the simulation.
//!
//! Modules:
//! - [`kernel`]: power-law and atomic spectral measures, admissibility, `‖h‖₂`.
//! - [`partition`]: geometric partitions of the spectral axis into nodes and weights.
//! - [`engine`]: the streaming OU-bank simulator (exact and Euler updates).
//! - [`oracle`]: closed-form covariances, certified L2 error, Cholesky sampler.
//! - [`ergodic`]: time averages of `φ(V/a)` against Gaussian expectations.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod ergodic;
pub mod error;
pub mod format;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod partition;
pub mod quad;
pub mod special;

pub use engine::{
    simulate_path, MarkovState, PathConfig, PathSample, Scheme, Simulator, StepKernel,
};
pub use ergodic::{ergodic_experiment, time_average, ErgodicConfig, ErgodicResult, Phi};
pub use error::{Error, Result};
pub use kernel::{AdmissibilityReport, HurstKernelParams, SpectralMeasure};
pub use oracle::{CovarianceGrid, ErrorReport};
pub use partition::{GeometricPartition, NodeRule, PartitionBuilder};
