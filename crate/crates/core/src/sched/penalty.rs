use serde::Serialize;

use crate::arch::{ArchProfile, MemorySpace};
use crate::Scalar;

use super::LaunchConfig;

/// A penalty in cycles, with a flag set when the throughput floor was hit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Penalty<T> {
    pub cycles: T,
    pub throughput_clamped: bool,
}

impl<T: Scalar> Penalty<T> {
    fn zero() -> Self {
        Penalty {
            cycles: T::zero(),
            throughput_clamped: false,
        }
    }
}

/// `(nB * nT_b / R[LSU]) * (access_sz / TP_gm(nGM)) * nGM`.
pub fn gm_penalty<T: Scalar>(p: &ArchProfile<T>, lc: &LaunchConfig, n_gm: T) -> Penalty<T> {
    if n_gm == T::zero() {
        return Penalty::zero();
    }
    let accesses = lc.total_threads_scalar::<T>() / T::from_count(p.resources.lsu as u64);
    let tp = p.mem_throughput(MemorySpace::Global, n_gm);
    let access = T::from_count(p.attributes.access_size_bytes as u64);
    Penalty {
        cycles: accesses * (access / tp.value) * n_gm,
        throughput_clamped: tp.clamped,
    }
}

/// `(nB * nT_b / (R[LSU] * nSM)) * (access_sz / TP_sm(nShM)) * nShM`.
pub fn sm_penalty<T: Scalar>(p: &ArchProfile<T>, lc: &LaunchConfig, n_shm: T) -> Penalty<T> {
    if n_shm == T::zero() {
        return Penalty::zero();
    }
    let per_sm = T::from_count(p.resources.lsu as u64 * p.attributes.sm_count as u64);
    let accesses = lc.total_threads_scalar::<T>() / per_sm;
    let tp = p.mem_throughput(MemorySpace::Shared, n_shm);
    let access = T::from_count(p.attributes.access_size_bytes as u64);
    Penalty {
        cycles: accesses * (access / tp.value) * n_shm,
        throughput_clamped: tp.clamped,
    }
}

/// `(nT_b * nB * nGM) / (waves * L2_sz / access_sz) * L_gm(stride)`.
pub fn cm_penalty<T: Scalar>(p: &ArchProfile<T>, lc: &LaunchConfig, n_gm: T, waves: u64) -> T {
    if n_gm == T::zero() || waves == 0 {
        return T::zero();
    }
    let lines = T::from_count(waves) * T::from_count(p.attributes.l2_bytes)
        / T::from_count(p.attributes.access_size_bytes as u64);
    let latency = p.global_mem_latency(lc.n_blocks, lc.threads_per_block);
    lc.total_threads_scalar::<T>() * n_gm / lines * latency
}
