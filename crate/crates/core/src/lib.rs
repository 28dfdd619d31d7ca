//! Static execution-time, power and energy estimation for CUDA kernels.
//!
//! The pipeline reads PTX into a [`ptx::KernelGraph`], schedules it against an
//! [`arch::ArchProfile`] to predict time, extracts the power-model feature
//! vector and evaluates a serialized tree ensemble for mean power.

// NaN must fail the `!(x > 0)` style guards, which `<=` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arch;
pub mod fit;
pub mod pfea;
pub mod pipeline;
pub mod power;
pub mod ptx;
pub mod sched;
mod scalar;

pub use scalar::{approx_eq, Scalar};

pub type Profile = arch::ArchProfile<f64>;
pub type Profile32 = arch::ArchProfile<f32>;
pub type ScheduleReport = sched::ScheduleResult<f64>;
pub type Features = pfea::FeatureVector<f64>;
pub type Ensemble = power::TreeEnsemble<f64>;
pub type Report = power::EnergyReport<f64>;
pub type Series = fit::MeasurementSeries<f64>;
