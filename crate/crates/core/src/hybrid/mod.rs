//! Generic machinery for hybrid systems whose flows are decoupled affine
//! laws and whose jump sets are axis-aligned threshold levels.
//!
//! A system is described by [`HybridSystem`]: per mode it provides the
//! affine gains of each axis and a list of [`Guard`]s. Each guard carries a
//! switching function `η` that is nonpositive on the flow set and zero on
//! the jump set. Flows are evaluated in closed form and guard crossings are
//! located with the logarithmic crossing-time formula, so there is no
//! stepping error anywhere in [`simulate`].

mod arc;
mod flow;
mod simulate;
mod time;

use std::fmt::Debug;

use serde::Serialize;
use thiserror::Error;

pub use arc::{classify_arc, ArcClassification, ArcStatus, FlowSegment, HybridArc, Jump, SegmentPath, Termination};
pub use flow::{flow_exact, time_to_level, AxisGain, Point};
pub use simulate::{simulate, Budget, JumpPolicy};
pub use time::HybridTime;

/// Absolute tolerance on `η = 0` membership.
pub const EPS_EVENT: f64 = 1e-12;
/// Number of jumps inside [`EPS_ZENO`] seconds that flags an arc as Zeno.
pub const J_ZENO: usize = 10;
pub const EPS_ZENO: f64 = 1e-9;
/// Upper bound on arcs produced by [`JumpPolicy::Both`].
pub const MAX_BRANCHES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("decay rate on axis {axis} must be positive, got {gamma}")]
    NonPositiveDecay { axis: usize, gamma: f64 },
    #[error("flow duration must be nonnegative, got {0}")]
    NegativeDuration(f64),
    #[error("initial state lies outside C ∪ D (η = {eta:e} on guard {guard})")]
    OutsideDomain { guard: usize, eta: f64 },
    #[error("budget must be positive (t_max = {t_max}, j_max = {j_max})")]
    InvalidBudget { t_max: f64, j_max: usize },
    #[error("state is not in the jump set")]
    NotInJumpSet,
}

/// Direction in which a guard's axis crosses its level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Crossing {
    /// Flow is allowed while `x[axis] ≤ level`.
    Rising,
    /// Flow is allowed while `x[axis] ≥ level`.
    Falling,
}

/// A threshold guard `η(x) ≤ 0` on a single axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Guard {
    pub axis: usize,
    pub level: f64,
    pub crossing: Crossing,
}

impl Guard {
    pub fn eta(&self, x: Point) -> f64 {
        match self.crossing {
            Crossing::Rising => x[self.axis] - self.level,
            Crossing::Falling => self.level - x[self.axis],
        }
    }
}

/// Data of a hybrid system with affine flows and threshold guards.
///
/// Guard `i` of a mode fires the jump `successor(mode, i)`; the flow set is
/// `{η_i ≤ 0 ∀i}` and the jump set is the part of it where some `η_i = 0`.
pub trait HybridSystem {
    type Mode: Copy + Eq + Debug;

    fn gains(&self, mode: Self::Mode) -> [AxisGain; 2];

    fn guards(&self, mode: Self::Mode) -> Vec<Guard>;

    fn successor(&self, mode: Self::Mode, guard: usize) -> Self::Mode;

    fn in_flow_set(&self, x: Point, mode: Self::Mode) -> bool {
        self.guards(mode).iter().all(|g| g.eta(x) <= EPS_EVENT)
    }

    /// Indices of guards whose switching function is zero at `x`.
    fn active_guards(&self, x: Point, mode: Self::Mode) -> Vec<usize> {
        self.guards(mode)
            .iter()
            .enumerate()
            .filter(|(_, g)| g.eta(x).abs() <= EPS_EVENT)
            .map(|(i, _)| i)
            .collect()
    }

    fn in_jump_set(&self, x: Point, mode: Self::Mode) -> bool {
        self.in_flow_set(x, mode) && !self.active_guards(x, mode).is_empty()
    }

    /// All successors `G(x, mode)`, one per active guard, in guard order.
    fn jump_targets(&self, x: Point, mode: Self::Mode) -> Result<Vec<(usize, Self::Mode)>, HybridError> {
        if !self.in_jump_set(x, mode) {
            return Err(HybridError::NotInJumpSet);
        }
        Ok(self
            .active_guards(x, mode)
            .into_iter()
            .map(|i| (i, self.successor(mode, i)))
            .collect())
    }
}
