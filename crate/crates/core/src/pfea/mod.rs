//! Power-model features: instruction mix, latency totals, memory penalties,
//! issue cycles and occupancy of one kernel launch.

mod extract;
mod features;

use thiserror::Error;

use crate::sched::SchedError;

pub use extract::{extract_features, inst_issue_cycles, theoretical_occupancy};
pub use features::{
    features_from_csv, features_to_csv, Feature, FeatureVector, N_FEATURES, POWER_COLUMN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PfeaError {
    #[error(transparent)]
    Schedule(#[from] SchedError),
    #[error("block of {block_size} threads exceeds the {max} threads an SM holds")]
    BlockSize { block_size: u64, max: u64 },
    #[error("no block fits on an SM with the given registers and shared memory")]
    NoResidentBlock,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature csv: {0}")]
    Csv(String),
}
