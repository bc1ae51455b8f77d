//! Exact finite-N computation for the p-spin Curie-Weiss model.
//!
//! The model on `{-1, 1}^N` has Gibbs weight `exp(N (beta * m^p + h * m))` where
//! `m` is the average magnetization. Everything here is a pure function of its
//! inputs and builds with `alloc` only; IO, threading and the command line live
//! in the companion `pspin-cw` crate.
//!
//! Module map:
//!
//! * [`model`]: partition function, law of the average magnetization, moments.
//! * [`hfunc`]: the variational function `H`, its maximizers and the
//!   classification of parameter points.
//! * [`limit`]: limiting distributions of the magnetization and of the
//!   maximum-likelihood estimates.
//! * [`sampler`]: exact sampling through the magnetization law.
//! * [`estimate`]: marginal ML estimates of `h` and `beta` and their confidence
//!   intervals.
//! * [`ks`]: Kolmogorov-Smirnov distances against laws with atoms.

#![cfg_attr(not(test), no_std)]
#![deny(rustdoc::broken_intra_doc_links)]

extern crate alloc;

pub mod error;
pub mod estimate;
pub mod hfunc;
pub mod ks;
pub mod limit;
pub mod model;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use estimate::{ci_beta, ci_h, mle_beta, mle_h, ConfidenceInterval, EstimateReport, Existence};
pub use hfunc::{
    analyze, beta_tilde, critical_curve, entropy, h_derivatives, special_point, AnalysisConfig,
    HAnalysis, PointClass,
};
pub use limit::{LimitLaw, Scale, ScaledLaw};
pub use model::{log_partition, magnetization_law, moment, Lattice, MagnetizationLaw, ModelParams};
pub use rng::{RngStream, StreamRng};
