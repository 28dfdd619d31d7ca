//! Execution-time model: list scheduling with resource reservation per basic
//! block, longest-path composition over the CFG, wave replay and additive
//! memory and launch penalties.

mod block;
mod kernel;
mod penalty;
mod reservation;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::ArchProfile;
use crate::Scalar;

pub use block::{batched_duration, schedule_block, schedule_dag, BlockSchedule, DagNode, DagSchedule};
pub use kernel::{
    loop_multipliers, schedule_cfg, schedule_kernel, wave_plan, CfgSchedule, PenaltyBreakdown,
    ScheduleResult, WavePlan,
};
pub use penalty::{cm_penalty, gm_penalty, sm_penalty, Penalty};
pub use reservation::ReservationTable;
pub use trace::{trace_csv, TraceRow};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchedError {
    #[error("invalid launch configuration: {0}")]
    InvalidLaunch(String),
    #[error("loop `{label}` has no iteration count; pass it with --loops {label}=N")]
    MissingLoopCount { label: String },
    #[error("iteration count given for `{label}`, which heads no loop")]
    UnknownLoop { label: String },
    #[error(
        "kernel is unschedulable: {limit} allows {cap} threads per SM, below one block of {threads_per_block}"
    )]
    Unschedulable {
        limit: String,
        cap: u64,
        threads_per_block: u64,
    },
}

/// Whether to honour the profile's per-unit issue gaps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    #[default]
    Profile,
    /// Reservations end exactly at `start + duration`.
    Strict,
}

/// Launch parameters of one kernel invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaunchConfig {
    pub n_blocks: u64,
    pub threads_per_block: u64,
    /// Iteration counts by loop header label; override the graph's own.
    #[serde(default)]
    pub loops: BTreeMap<String, u64>,
    #[serde(default)]
    pub regs_per_thread: u32,
    #[serde(default)]
    pub shared_bytes_per_block: u64,
}

impl LaunchConfig {
    pub fn new(n_blocks: u64, threads_per_block: u64) -> Self {
        LaunchConfig {
            n_blocks,
            threads_per_block,
            loops: BTreeMap::new(),
            regs_per_thread: 0,
            shared_bytes_per_block: 0,
        }
    }

    pub fn with_loop(mut self, label: &str, n_loop: u64) -> Self {
        self.loops.insert(label.to_string(), n_loop);
        self
    }

    pub fn with_resources(mut self, regs_per_thread: u32, shared_bytes_per_block: u64) -> Self {
        self.regs_per_thread = regs_per_thread;
        self.shared_bytes_per_block = shared_bytes_per_block;
        self
    }

    pub fn total_threads(&self) -> u64 {
        self.n_blocks.saturating_mul(self.threads_per_block)
    }

    pub(crate) fn total_threads_scalar<T: Scalar>(&self) -> T {
        T::from_count(self.total_threads())
    }

    pub fn validate<T: Scalar>(&self, p: &ArchProfile<T>) -> Result<(), SchedError> {
        if self.n_blocks == 0 {
            return Err(SchedError::InvalidLaunch("number of blocks must be >= 1".into()));
        }
        if self.threads_per_block == 0 {
            return Err(SchedError::InvalidLaunch("threads per block must be >= 1".into()));
        }
        let max = p.attributes.max_threads_per_sm as u64;
        if self.threads_per_block > max {
            return Err(SchedError::InvalidLaunch(format!(
                "{} threads per block exceeds the {max} threads an SM holds",
                self.threads_per_block
            )));
        }
        if let Some((label, _)) = self.loops.iter().find(|(_, &n)| n == 0) {
            return Err(SchedError::InvalidLaunch(format!(
                "loop `{label}` needs an iteration count >= 1"
            )));
        }
        Ok(())
    }
}
