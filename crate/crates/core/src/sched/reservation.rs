use crate::ptx::Resource;
use crate::Scalar;

/// Per-resource occupancy as sorted, disjoint half-open intervals.
#[derive(Clone, Debug, Default)]
pub struct ReservationTable<T> {
    spans: [Vec<(T, T)>; 5],
}

fn slot(r: Resource) -> usize {
    Resource::ALL
        .iter()
        .position(|x| *x == r)
        .expect("resource is listed")
}

impl<T: Scalar> ReservationTable<T> {
    pub fn new() -> Self {
        ReservationTable {
            spans: Default::default(),
        }
    }

    /// Earliest `t1 >= ready` with `[t1, t1 + len)` free on `r`.
    pub fn earliest_fit(&self, r: Resource, ready: T, len: T) -> T {
        let mut t = ready;
        if len <= T::zero() {
            return t;
        }
        for &(s, e) in &self.spans[slot(r)] {
            if e <= t {
                continue;
            }
            if s >= t + len {
                break;
            }
            t = e;
        }
        t
    }

    /// Marks `[start, start + len)` busy. The span must be free.
    pub fn reserve(&mut self, r: Resource, start: T, len: T) {
        if len <= T::zero() {
            return;
        }
        let spans = &mut self.spans[slot(r)];
        let end = start + len;
        let at = spans.partition_point(|&(s, _)| s < start);
        debug_assert!(at == 0 || spans[at - 1].1 <= start, "overlapping reservation");
        debug_assert!(at == spans.len() || end <= spans[at].0, "overlapping reservation");
        spans.insert(at, (start, end));
    }

    /// Busy spans for `r`, sorted by start.
    pub fn spans(&self, r: Resource) -> &[(T, T)] {
        &self.spans[slot(r)]
    }
}
