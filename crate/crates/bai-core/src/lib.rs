//! Fixed-confidence best arm identification for Gaussian bandits with
//! unknown variances.
//!
//! The crate provides the full simulation stack for the problem of finding
//! the arm with the largest mean among `K` Gaussian arms when neither the
//! means nor the variances are known:
//!
//! - [`specfn`]: special functions (Lambert-branch transforms inverting
//!   `y - ln y`, Student quantiles, Riemann zeta, real cubic roots),
//! - [`model`]: bandit instances, Gaussian KL divergence and the
//!   transportation costs for known and unknown variances,
//! - [`oracle`]: characteristic times and optimal/`beta`-optimal allocations,
//! - [`stats`]: streaming per-arm statistics and the GLR / EV-GLR statistics,
//! - [`thresholds`]: calibrated stopping-threshold families with their
//!   initial-time gates,
//! - [`samplers`]: sampling rules (Track-and-Stop with C-tracking, Top Two,
//!   uniform, fixed-weights, FHN2 elimination baseline),
//! - [`engine`]: deterministic episode execution and batch aggregation,
//! - [`validation`]: Monte Carlo falsification of the time-uniform
//!   concentration inequalities backing the thresholds.

pub mod engine;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod specfn;
pub mod stats;
pub mod thresholds;
pub mod validation;

/// Errors surfaced by the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The instance has no unique best arm.
    #[error("tied means: no unique best arm")]
    TiedMeans,
    /// A requested value lies outside the attainable range of a function.
    #[error("range error: {0}")]
    Range(String),
    /// A bracketed search failed to enclose or locate its root.
    #[error("bracket failure: {0}")]
    BracketFailure(String),
    /// Not enough samples to evaluate a statistic (count < 2 or zero variance).
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A threshold was evaluated before its initial-time gate.
    #[error("gate violation: {0}")]
    GateViolation(String),
    /// A numerical solver failed to certify its solution.
    #[error("solver failure: {0}")]
    SolverFailure(String),
    /// Invalid run or experiment configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Formats a float with 17 significant digits, enough for a lossless
/// `f64` round trip through text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
