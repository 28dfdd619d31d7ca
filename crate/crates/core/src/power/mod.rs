//! Mean-power inference from a serialized tree ensemble and the energy
//! estimate `E = P * t_kernel`.

mod ensemble;

use serde::Serialize;
use thiserror::Error;

use crate::sched::PenaltyBreakdown;
use crate::Scalar;

pub use ensemble::{
    load_ensemble, Importance, Node, Scaling, TestVector, TestVectors, Tree, TreeEnsemble,
    ENSEMBLE_SCHEMA_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("ensemble schema violation at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("feature manifest names unknown features: {}", unknown.join(", "))]
    ManifestMismatch { unknown: Vec<String> },
    #[error("feature `{0}` is missing from the input")]
    MissingFeature(String),
    #[error("input row has {got} values, manifest has {expected}")]
    RowLength { expected: usize, got: usize },
    #[error("asked for the top {k} features of {available}")]
    TopK { k: usize, available: usize },
    #[error("{0} must be nonnegative")]
    Negative(&'static str),
}

/// Energy in microjoules from time in microseconds and power in watts.
pub fn predict_energy<T: Scalar>(t_kernel_us: T, power_w: T) -> Result<T, PowerError> {
    if !(t_kernel_us >= T::zero()) {
        return Err(PowerError::Negative("kernel time"));
    }
    if !(power_w >= T::zero()) {
        return Err(PowerError::Negative("power"));
    }
    Ok(t_kernel_us * power_w)
}

/// Time, power and energy of one launch, side by side.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct EnergyReport<T> {
    pub profile: String,
    pub kernel: String,
    pub n_blocks: u64,
    pub threads_per_block: u64,
    pub t_kernel_us: T,
    /// Absent when no power model was supplied.
    pub power_w: Option<T>,
    pub energy_uj: Option<T>,
    pub d_kernel_cycles: T,
    pub d_total_cycles: T,
    pub waves: u64,
    pub penalties: PenaltyBreakdown<T>,
    pub importances: Vec<Importance<T>>,
}
