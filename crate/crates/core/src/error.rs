use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("argument outside the domain of {function}: {value}")]
    Domain { function: &'static str, value: f64 },

    #[error("point is classified {found}, operation requires {expected}")]
    Classification { expected: &'static str, found: &'static str },

    #[error("unstable root count for H': {coarse} roots at the base grid, {fine} at the refined grid")]
    UnstableRootCount { coarse: usize, fine: usize },

    #[error("{0} failed to converge")]
    NoConvergence(&'static str),

    #[error("could not bracket a root for {0}")]
    Bracketing(&'static str),

    #[error("plug-in variance is invalid: H''(sigma_bar) = {0} is not negative")]
    PlugInVariance(f64),

    #[error("system size {n} exceeds the cap {cap}")]
    SizeCap { n: usize, cap: usize },
}
