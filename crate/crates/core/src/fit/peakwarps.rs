use crate::Scalar;

use super::{FitError, MeasurementSeries};

/// Default tolerance as a fraction of the peak throughput.
pub const PEAKWARP_EPSILON_FRACTION: f64 = 0.02;

/// `PEAKWARP_EPSILON_FRACTION` of the largest throughput in `d`.
pub fn default_peakwarp_epsilon<T: Scalar>(d: &MeasurementSeries<T>) -> T {
    let max = d.y().iter().copied().fold(T::neg_infinity(), T::max);
    max.abs() * T::lit(PEAKWARP_EPSILON_FRACTION)
}

/// Smallest warp count whose throughput lies within `epsilon` of the maximum.
pub fn detect_peakwarps<T: Scalar>(d: &MeasurementSeries<T>, epsilon: T) -> Result<T, FitError> {
    if d.is_empty() {
        return Err(FitError::Precondition("empty throughput series".into()));
    }
    if !(epsilon > T::zero()) {
        return Err(FitError::Precondition(format!("epsilon must be positive, got {epsilon}")));
    }
    let max = d.y().iter().copied().fold(T::neg_infinity(), T::max);
    let i = d
        .y()
        .iter()
        .position(|&y| y >= max - epsilon)
        .expect("the maximum itself qualifies");
    Ok(d.x()[i])
}
