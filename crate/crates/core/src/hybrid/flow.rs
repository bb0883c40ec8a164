//! Closed-form flow of decoupled affine dynamics `ẋ_i = k_i − γ_i x_i`.

use serde::Serialize;

use super::HybridError;

/// A point in the continuous state space.
pub type Point = [f64; 2];

/// Per-axis affine law `ẋ = k_eff − γ x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisGain {
    pub k_eff: f64,
    pub gamma: f64,
}

impl AxisGain {
    pub const fn new(k_eff: f64, gamma: f64) -> Self {
        Self { k_eff, gamma }
    }

    /// The rest point `k_eff / γ` the axis decays toward.
    pub fn rest_point(&self) -> f64 {
        self.k_eff / self.gamma
    }

    /// Exact value after flowing for `s` from `x0`.
    pub fn advance(&self, x0: f64, s: f64) -> f64 {
        let u = self.rest_point();
        u + (-self.gamma * s).exp() * (x0 - u)
    }

    /// Right-hand side of the axis ODE.
    pub fn rate(&self, x: f64) -> f64 {
        self.k_eff - self.gamma * x
    }
}

/// State after flowing for `s` under `gains`: `u + e^{−Γs}(x0 − u)`.
pub fn flow_exact(x0: Point, gains: &[AxisGain; 2], s: f64) -> Result<Point, HybridError> {
    for (axis, g) in gains.iter().enumerate() {
        if !(g.gamma > 0.0) || !g.gamma.is_finite() {
            return Err(HybridError::NonPositiveDecay { axis, gamma: g.gamma });
        }
    }
    if !(s >= 0.0) {
        return Err(HybridError::NegativeDuration(s));
    }
    Ok([gains[0].advance(x0[0], s), gains[1].advance(x0[1], s)])
}

/// Smallest `s ≥ 0` at which a single axis starting at `x0` reaches `level`.
///
/// Returns `None` when the level lies beyond the rest point (or on it, since
/// the rest point is only approached asymptotically).
pub fn time_to_level(x0: f64, gain: AxisGain, level: f64) -> Option<f64> {
    debug_assert!(gain.gamma > 0.0);
    if x0 == level {
        return Some(0.0);
    }
    if !(gain.gamma > 0.0) {
        return None;
    }
    let u = gain.rest_point();
    let from = x0 - u;
    let to = level - u;
    // level must sit strictly between x0 and u
    if from == 0.0 || to == 0.0 || from.signum() != to.signum() || to.abs() > from.abs() {
        return None;
    }
    Some((from / to).ln() / gain.gamma)
}
