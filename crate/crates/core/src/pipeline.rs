//! End-to-end prediction for one launch: schedule, features, power, energy.

use thiserror::Error;

use crate::arch::ArchProfile;
use crate::pfea::{extract_features, FeatureVector, PfeaError};
use crate::power::{predict_energy, EnergyReport, PowerError, TreeEnsemble};
use crate::ptx::{KernelGraph, PtxError};
use crate::sched::{schedule_kernel, LaunchConfig, SchedError, ScheduleMode, ScheduleResult};
use crate::Scalar;

/// A failure tagged with the stage that produced it.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("parse: {0}")]
    Parse(#[from] PtxError),
    #[error("schedule: {0}")]
    Schedule(#[from] SchedError),
    #[error("features: {0}")]
    Features(#[from] PfeaError),
    #[error("power: {0}")]
    Power(#[from] PowerError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T> {
    pub schedule: ScheduleResult<T>,
    pub features: FeatureVector<T>,
    pub report: EnergyReport<T>,
}

pub fn predict<T: Scalar>(
    p: &ArchProfile<T>,
    k: &KernelGraph,
    lc: &LaunchConfig,
    mode: ScheduleMode,
    model: Option<&TreeEnsemble<T>>,
    top_k: usize,
) -> Result<Prediction<T>, PipelineError> {
    let schedule = schedule_kernel(p, k, lc, mode)?;
    let features = extract_features(p, k, lc)?;
    let (power_w, energy_uj, importances) = match model {
        Some(e) => {
            let w = e.predict_power(&features)?;
            let w = w.max(T::zero());
            let energy = predict_energy(schedule.t_kernel_us, w)?;
            let k = top_k.min(e.feature_manifest.len());
            (Some(w), Some(energy), e.importance_report(k)?)
        }
        None => (None, None, Vec::new()),
    };
    let report = EnergyReport {
        profile: p.name.clone(),
        kernel: k.name.clone(),
        n_blocks: lc.n_blocks,
        threads_per_block: lc.threads_per_block,
        t_kernel_us: schedule.t_kernel_us,
        power_w,
        energy_uj,
        d_kernel_cycles: schedule.d_kernel,
        d_total_cycles: schedule.d_total,
        waves: schedule.waves,
        penalties: schedule.penalties.clone(),
        importances,
    };
    Ok(Prediction {
        schedule,
        features,
        report,
    })
}
