//! Command-line tools and experiments for the p-spin Curie-Weiss model, built
//! on [`pspin_cw_core`].
//!
//! [`experiments`] compares exact and sampled finite-N statistics with their
//! limit laws and writes CSV/JSON artifacts; [`cli`] is the `pspin-cw` binary.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod format;

pub use error::{Error, Result};
pub use experiments::{
    phase_diagram, run_coverage, run_histogram, ComparisonReport, CoverageOutcome, ExperimentSpec, HistogramOptions,
    HistogramOutcome, PhaseDiagram, PhaseDiagramSpec, RunConfig, Statistic,
};
