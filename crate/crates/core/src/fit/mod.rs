//! Fitting of the empirical latency, throughput and overhead models from
//! microbenchmark measurements, plus generation of the benchmarks themselves.

mod exponential;
mod linear;
mod microbench;
mod peakwarps;
mod piecewise;
mod series;

use thiserror::Error;

pub use exponential::{fit_exponential, fit_exponential_with, ExpFit, ExpFitOptions};
pub use linear::{fit_linear, LinearFit};
pub use microbench::{avg_latency_from_timing, generate_microbench, MicrobenchKind};
pub use peakwarps::{default_peakwarp_epsilon, detect_peakwarps, PEAKWARP_EPSILON_FRACTION};
pub use piecewise::{fit_piecewise_linear, PiecewiseFit, MIN_SEGMENT_POINTS};
pub use series::MeasurementSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("all x values are equal")]
    DegenerateX,
    #[error("infeasible segmentation: {0}")]
    Infeasible(String),
    #[error("exponential fit needs strictly positive y values")]
    NonPositiveY,
    #[error("measurement csv: {0}")]
    Csv(String),
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unknown microbenchmark kind `{0}`")]
    UnknownKind(String),
}
