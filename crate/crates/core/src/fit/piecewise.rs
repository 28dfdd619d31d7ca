use crate::arch::{LinearSegment, PiecewiseLinearModel};
use crate::Scalar;

use super::linear::{ols, r_squared};
use super::{FitError, MeasurementSeries};

/// Smallest number of points a segment may hold.
pub const MIN_SEGMENT_POINTS: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseFit<T> {
    pub model: PiecewiseLinearModel<T>,
    pub r2: T,
    pub rss: T,
    /// Half-open point index ranges, one per segment.
    pub ranges: Vec<(usize, usize)>,
}

/// OLS residual sum of squares for every run `[i, j)` of at least
/// `MIN_SEGMENT_POINTS` points, built with running centered moments.
fn segment_costs<T: Scalar>(x: &[T], y: &[T]) -> Vec<Vec<T>> {
    let n = x.len();
    let mut cost = vec![vec![T::infinity(); n + 1]; n + 1];
    for (i, row) in cost.iter_mut().enumerate().take(n) {
        let (mut mx, mut my) = (T::zero(), T::zero());
        let (mut cxx, mut cxy, mut cyy) = (T::zero(), T::zero(), T::zero());
        for j in i..n {
            let k = T::from_count((j - i + 1) as u64);
            let dx = x[j] - mx;
            let dy = y[j] - my;
            mx += dx / k;
            my += dy / k;
            cxx += dx * (x[j] - mx);
            cxy += dx * (y[j] - my);
            cyy += dy * (y[j] - my);
            if j + 1 - i >= MIN_SEGMENT_POINTS {
                let rss = if cxx > T::zero() { cyy - cxy * cxy / cxx } else { cyy };
                row[j + 1] = rss.max(T::zero());
            }
        }
    }
    cost
}

/// Breakpoints minimizing total residual sum of squares, found exactly by
/// dynamic programming over the observed `x` values. Each breakpoint is the
/// first `x` of the segment to its right.
pub fn fit_piecewise_linear<T: Scalar>(
    s: &MeasurementSeries<T>,
    n_segments: usize,
) -> Result<PiecewiseFit<T>, FitError> {
    let n = s.len();
    if n_segments == 0 {
        return Err(FitError::Infeasible("need at least one segment".into()));
    }
    let need = n_segments * MIN_SEGMENT_POINTS;
    if n < need {
        return Err(FitError::Infeasible(format!(
            "{n_segments} segments need at least {need} points, got {n}"
        )));
    }
    let (x, y) = (s.x(), s.y());
    let cost = segment_costs(x, y);

    // best[k][j]: minimal cost of covering the first j points with k segments
    let mut best = vec![vec![T::infinity(); n + 1]; n_segments + 1];
    let mut cut = vec![vec![0usize; n + 1]; n_segments + 1];
    best[0][0] = T::zero();
    for k in 1..=n_segments {
        for j in (k * MIN_SEGMENT_POINTS)..=n {
            for i in ((k - 1) * MIN_SEGMENT_POINTS)..=(j - MIN_SEGMENT_POINTS) {
                let c = best[k - 1][i] + cost[i][j];
                if c < best[k][j] {
                    best[k][j] = c;
                    cut[k][j] = i;
                }
            }
        }
    }

    let mut ranges = Vec::with_capacity(n_segments);
    let mut j = n;
    for k in (1..=n_segments).rev() {
        let i = cut[k][j];
        ranges.push((i, j));
        j = i;
    }
    ranges.reverse();

    let mut segments = Vec::with_capacity(n_segments);
    let mut rss = T::zero();
    for &(i, j) in &ranges {
        let (slope, intercept) = ols(&x[i..j], &y[i..j]).ok_or(FitError::DegenerateX)?;
        let seg = LinearSegment { slope, intercept };
        rss += x[i..j]
            .iter()
            .zip(&y[i..j])
            .map(|(&xv, &yv)| (yv - seg.eval(xv)) * (yv - seg.eval(xv)))
            .sum::<T>();
        segments.push(seg);
    }
    let breakpoints = ranges[1..].iter().map(|&(i, _)| x[i]).collect();
    let model = PiecewiseLinearModel::new(breakpoints, segments).map_err(FitError::Infeasible)?;
    Ok(PiecewiseFit {
        model,
        r2: r_squared(y, rss),
        rss,
        ranges,
    })
}
