use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearSegment<T> {
    pub slope: T,
    pub intercept: T,
}

impl<T: Scalar> LinearSegment<T> {
    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.slope * x + self.intercept
    }
}

/// Piecewise linear function with left-closed, right-open segments.
/// `segments[i]` covers `[breakpoints[i-1], breakpoints[i])`; the first
/// segment extends to minus infinity and the last to plus infinity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PiecewiseLinearModel<T> {
    pub breakpoints: Vec<T>,
    pub segments: Vec<LinearSegment<T>>,
}

impl<T: Scalar> PiecewiseLinearModel<T> {
    pub fn new(breakpoints: Vec<T>, segments: Vec<LinearSegment<T>>) -> Result<Self, String> {
        let m = PiecewiseLinearModel {
            breakpoints,
            segments,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), String> {
        if self.segments.len() != self.breakpoints.len() + 1 {
            return Err(format!(
                "{} breakpoints need {} segments, found {}",
                self.breakpoints.len(),
                self.breakpoints.len() + 1,
                self.segments.len()
            ));
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("breakpoints must be strictly increasing".into());
        }
        let finite = |v: T| v.is_finite();
        if !self.breakpoints.iter().copied().all(finite)
            || !self
                .segments
                .iter()
                .all(|s| finite(s.slope) && finite(s.intercept))
        {
            return Err("coefficients must be finite".into());
        }
        Ok(())
    }

    /// Index of the segment owning `x`.
    pub fn segment_index(&self, x: T) -> usize {
        self.breakpoints.partition_point(|b| *b <= x)
    }

    pub fn eval(&self, x: T) -> T {
        self.segments[self.segment_index(x)].eval(x)
    }
}

/// Saturating growth `a * (b - exp(-c * x))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExpGrowthModel<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Scalar> ExpGrowthModel<T> {
    pub fn eval(&self, x: T) -> T {
        self.a * (self.b - (-self.c * x).exp())
    }

    /// Limit as `x` grows without bound.
    pub fn asymptote(&self) -> T {
        self.a * self.b
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.a > T::zero() && self.a.is_finite()) {
            return Err(format!("a must be positive, got {}", self.a));
        }
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(format!("c must be positive, got {}", self.c));
        }
        if !self.b.is_finite() {
            return Err("b must be finite".into());
        }
        Ok(())
    }
}

/// `slope * x + intercept`, in microseconds against `nB * nT_b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearOverheadModel<T> {
    pub slope: T,
    pub intercept: T,
}

impl<T: Scalar> LinearOverheadModel<T> {
    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.slope * x + self.intercept
    }

    pub fn check(&self) -> Result<(), String> {
        if !self.slope.is_finite() || !self.intercept.is_finite() {
            return Err("coefficients must be finite".into());
        }
        if self.intercept < T::zero() {
            return Err(format!("intercept must be >= 0, got {}", self.intercept));
        }
        Ok(())
    }
}
