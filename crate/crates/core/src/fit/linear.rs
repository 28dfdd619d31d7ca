use crate::arch::LinearOverheadModel;
use crate::Scalar;

use super::{FitError, MeasurementSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFit<T> {
    pub model: LinearOverheadModel<T>,
    pub r2: T,
    pub rmse: T,
    pub rss: T,
}

/// Two-pass ordinary least squares over `x[i..j]`, `y[i..j]`.
pub(crate) fn ols<T: Scalar>(x: &[T], y: &[T]) -> Option<(T, T)> {
    let n = T::from_count(x.len() as u64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if !(sxx > T::zero()) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// `1 - rss / tss`, taken as 1 for an exact fit of constant data.
pub(crate) fn r_squared<T: Scalar>(y: &[T], rss: T) -> T {
    let n = T::from_count(y.len() as u64);
    let my = y.iter().copied().sum::<T>() / n;
    let tss: T = y.iter().map(|&v| (v - my) * (v - my)).sum();
    if tss > T::zero() {
        T::one() - rss / tss
    } else if rss == T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

pub fn fit_linear<T: Scalar>(s: &MeasurementSeries<T>) -> Result<LinearFit<T>, FitError> {
    if s.len() < 2 {
        return Err(FitError::TooFewPoints { need: 2, got: s.len() });
    }
    let (slope, intercept) = ols(s.x(), s.y()).ok_or(FitError::DegenerateX)?;
    let model = LinearOverheadModel { slope, intercept };
    let rss: T = s
        .x()
        .iter()
        .zip(s.y())
        .map(|(&x, &y)| {
            let r = y - model.eval(x);
            r * r
        })
        .sum();
    Ok(LinearFit {
        model,
        r2: r_squared(s.y(), rss),
        rmse: (rss / T::from_count(s.len() as u64)).sqrt(),
        rss,
    })
}
