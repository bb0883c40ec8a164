use std::cmp::Ordering;

use serde::Serialize;

/// A point `(t, j)` of a hybrid time domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridTime {
    pub t: f64,
    pub j: usize,
}

impl HybridTime {
    pub const ZERO: HybridTime = HybridTime { t: 0.0, j: 0 };

    pub fn new(t: f64, j: usize) -> Self {
        debug_assert!(t >= 0.0);
        Self { t, j }
    }
}

/// Product order: `(t, j) ≤ (t', j')` iff `t ≤ t'` and `j ≤ j'`.
impl PartialOrd for HybridTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let t = self.t.partial_cmp(&other.t)?;
        let j = self.j.cmp(&other.j);
        match (t, j) {
            (Ordering::Equal, j) => Some(j),
            (t, Ordering::Equal) => Some(t),
            (t, j) if t == j => Some(t),
            _ => None,
        }
    }
}
