//! The two-gene network with binary hysteresis as a hybrid system.
//!
//! Gene 1 is repressed by protein 2 and gene 2 is activated by protein 1.
//! The logic variable `q_i` records whether protein `i` last crossed the
//! upper switching level `θ_i + h_i` (set) or the lower one `θ_i − h_i`
//! (cleared).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{
    self, AxisGain, Budget, Crossing, Guard, HybridArc, HybridError, HybridSystem, JumpPolicy, Point,
    EPS_EVENT,
};

/// Rate, threshold and hysteresis constants of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub k1: f64,
    pub k2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub h1: f64,
    pub h2: f64,
    pub theta1_max: f64,
    pub theta2_max: f64,
}

impl NetworkParams {
    /// Builds a parameter set with the maximal concentrations defaulted to
    /// `10·max(θ1, θ2)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(k1: f64, k2: f64, gamma1: f64, gamma2: f64, theta1: f64, theta2: f64, h1: f64, h2: f64) -> Self {
        let theta_max = default_theta_max(theta1, theta2);
        Self { k1, k2, gamma1, gamma2, theta1, theta2, h1, h2, theta1_max: theta_max, theta2_max: theta_max }
    }

    /// Thresholds 0.6 and 0.5 with equal rates and hysteresis on both genes.
    pub fn symmetric(k1: f64, k2: f64, gamma: f64, h: f64) -> Self {
        Self::new(k1, k2, gamma, gamma, 0.6, 0.5, h, h)
    }

    /// The reference oscillating configuration: `k = γ = 1`, `h = 0.01`.
    pub fn nominal() -> Self {
        Self::symmetric(1.0, 1.0, 1.0, 0.01)
    }

    /// Steady value `k1/γ1` of protein 1 while gene 1 is expressed.
    pub fn u1(&self) -> f64 {
        self.k1 / self.gamma1
    }

    pub fn u2(&self) -> f64 {
        self.k2 / self.gamma2
    }

    pub fn gains(&self, q: Mode) -> [AxisGain; 2] {
        let s1 = if q.q2 { 0.0 } else { 1.0 };
        let s2 = if q.q1 { 1.0 } else { 0.0 };
        [AxisGain::new(self.k1 * s1, self.gamma1), AxisGain::new(self.k2 * s2, self.gamma2)]
    }

    /// Level at which `q_gene` toggles when currently at `on`.
    pub fn switching_level(&self, gene: usize, on: bool) -> f64 {
        let (theta, h) = if gene == 0 { (self.theta1, self.h1) } else { (self.theta2, self.h2) };
        if on {
            theta - h
        } else {
            theta + h
        }
    }
}

pub fn default_theta_max(theta1: f64, theta2: f64) -> f64 {
    10.0 * theta1.max(theta2)
}

/// One broken admissibility constraint.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamViolation {
    #[error("{name} = {value} is not finite")]
    NotFinite { name: &'static str, value: f64 },
    #[error("rates strictly positive: {name} = {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("thresholds strictly positive: {name} = {value}")]
    NonPositiveThreshold { name: &'static str, value: f64 },
    #[error("hysteresis strictly positive: {name} = {value}")]
    NonPositiveHysteresis { name: &'static str, value: f64 },
    #[error("θ{gene} − h{gene} > 0 violated ({value})")]
    LowerLevelNonPositive { gene: usize, value: f64 },
    #[error("θ{gene} + h{gene} < θ{gene}max violated ({upper} ≥ {max})")]
    UpperLevelAboveMax { gene: usize, upper: f64, max: f64 },
}

impl ParamViolation {
    /// True for `h_i = 0`, the hysteresis-free limit. Dynamics stay defined
    /// but chatter on the threshold.
    pub fn is_zero_hysteresis(&self) -> bool {
        matches!(self, ParamViolation::NonPositiveHysteresis { value, .. } if *value == 0.0)
    }
}

/// Checks every admissibility constraint and returns all violations.
pub fn validate_params(p: &NetworkParams) -> Result<(), Vec<ParamViolation>> {
    let fields = [
        ("k1", p.k1),
        ("k2", p.k2),
        ("gamma1", p.gamma1),
        ("gamma2", p.gamma2),
        ("theta1", p.theta1),
        ("theta2", p.theta2),
        ("h1", p.h1),
        ("h2", p.h2),
        ("theta1_max", p.theta1_max),
        ("theta2_max", p.theta2_max),
    ];
    let mut out: Vec<ParamViolation> = fields
        .iter()
        .filter(|(_, v)| !v.is_finite())
        .map(|&(name, value)| ParamViolation::NotFinite { name, value })
        .collect();
    if !out.is_empty() {
        return Err(out);
    }
    for &(name, value) in &fields[..4] {
        if value <= 0.0 {
            out.push(ParamViolation::NonPositiveRate { name, value });
        }
    }
    for &(name, value) in [fields[4], fields[5], fields[8], fields[9]].iter() {
        if value <= 0.0 {
            out.push(ParamViolation::NonPositiveThreshold { name, value });
        }
    }
    for &(name, value) in &fields[6..8] {
        if value <= 0.0 {
            out.push(ParamViolation::NonPositiveHysteresis { name, value });
        }
    }
    for (gene, theta, h, max) in [(1, p.theta1, p.h1, p.theta1_max), (2, p.theta2, p.h2, p.theta2_max)] {
        if theta - h <= 0.0 {
            out.push(ParamViolation::LowerLevelNonPositive { gene, value: theta - h });
        }
        if theta + h >= max {
            out.push(ParamViolation::UpperLevelAboveMax { gene, upper: theta + h, max });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Expression logic `(q1, q2)`. Serializes as `[q1, q2]` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "[u8; 2]")]
pub struct Mode {
    pub q1: bool,
    pub q2: bool,
}

impl Mode {
    /// Modes in the order the oscillation visits them.
    pub const CYCLE: [Mode; 4] = [Mode::new(false, false), Mode::new(true, false), Mode::new(true, true), Mode::new(false, true)];

    pub const fn new(q1: bool, q2: bool) -> Self {
        Self { q1, q2 }
    }

    pub fn from_bits(q1: u8, q2: u8) -> Option<Self> {
        match (q1, q2) {
            (0 | 1, 0 | 1) => Some(Self::new(q1 == 1, q2 == 1)),
            _ => None,
        }
    }

    pub fn bits(self) -> (u8, u8) {
        (self.q1 as u8, self.q2 as u8)
    }

    /// Position in [`Mode::CYCLE`].
    pub fn cycle_index(self) -> usize {
        match (self.q1, self.q2) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    pub fn next_in_cycle(self) -> Mode {
        Mode::CYCLE[(self.cycle_index() + 1) % 4]
    }

    fn toggled(self, gene: usize) -> Mode {
        if gene == 0 {
            Mode::new(!self.q1, self.q2)
        } else {
            Mode::new(self.q1, !self.q2)
        }
    }
}

impl From<Mode> for [u8; 2] {
    fn from(q: Mode) -> Self {
        [q.q1 as u8, q.q2 as u8]
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.bits();
        write!(f, "({a},{b})")
    }
}

/// `z = (x1, x2, q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct HybridState {
    pub x: Point,
    pub q: Mode,
}

impl HybridState {
    pub fn new(x1: f64, x2: f64, q1: bool, q2: bool) -> Self {
        Self { x: [x1, x2], q: Mode::new(q1, q2) }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    x1: f64,
    x2: f64,
    q1: u8,
    q2: u8,
}

impl From<HybridState> for StateRecord {
    fn from(z: HybridState) -> Self {
        let (q1, q2) = z.q.bits();
        Self { x1: z.x[0], x2: z.x[1], q1, q2 }
    }
}

impl TryFrom<StateRecord> for HybridState {
    type Error = String;

    fn try_from(r: StateRecord) -> Result<Self, String> {
        let q = Mode::from_bits(r.q1, r.q2).ok_or_else(|| format!("q1, q2 must be 0 or 1, got {}, {}", r.q1, r.q2))?;
        Ok(Self { x: [r.x1, r.x2], q })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameters: {}", join_violations(.0))]
    InvalidParams(Vec<ParamViolation>),
    #[error("concentrations must be nonnegative, got ({0}, {1})")]
    NegativeConcentration(f64, f64),
    #[error("state is not in the jump set D")]
    NotInJumpSet,
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

fn join_violations(v: &[ParamViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// `η1(x1, q1) = (2q1 − 1)(−x1 + θ1 + (1 − 2q1)h1)`.
pub fn eta1(x1: f64, q1: bool, p: &NetworkParams) -> f64 {
    let s = if q1 { 1.0 } else { -1.0 };
    s * (-x1 + p.theta1 - s * p.h1)
}

/// `η2(x2, q2) = (2q2 − 1)(−x2 + θ2 + (1 − 2q2)h2)`.
pub fn eta2(x2: f64, q2: bool, p: &NetworkParams) -> f64 {
    let s = if q2 { 1.0 } else { -1.0 };
    s * (-x2 + p.theta2 - s * p.h2)
}

/// `F(z) = (k1(1−q2) − γ1x1, k2q1 − γ2x2, 0, 0)`.
pub fn flow_map(z: &HybridState, p: &NetworkParams) -> [f64; 4] {
    let g = p.gains(z.q);
    [g[0].rate(z.x[0]), g[1].rate(z.x[1]), 0.0, 0.0]
}

pub fn in_flow_set(z: &HybridState, p: &NetworkParams) -> bool {
    eta1(z.x[0], z.q.q1, p) <= EPS_EVENT && eta2(z.x[1], z.q.q2, p) <= EPS_EVENT
}

pub fn in_jump_set(z: &HybridState, p: &NetworkParams) -> bool {
    in_flow_set(z, p) && (eta1(z.x[0], z.q.q1, p).abs() <= EPS_EVENT || eta2(z.x[1], z.q.q2, p).abs() <= EPS_EVENT)
}

/// `G(z)`: toggles `q_i` for every `i` with `η_i = 0`. Two successors at the
/// double boundary, `g1` first.
pub fn jump_map(z: &HybridState, p: &NetworkParams) -> Result<Vec<HybridState>, ModelError> {
    if !in_jump_set(z, p) {
        return Err(ModelError::NotInJumpSet);
    }
    let mut out = Vec::with_capacity(2);
    if eta1(z.x[0], z.q.q1, p).abs() <= EPS_EVENT {
        out.push(HybridState { x: z.x, q: z.q.toggled(0) });
    }
    if eta2(z.x[1], z.q.q2, p).abs() <= EPS_EVENT {
        out.push(HybridState { x: z.x, q: z.q.toggled(1) });
    }
    Ok(out)
}

/// The network as a [`HybridSystem`]; guard `i` toggles `q_{i+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneNetwork {
    pub params: NetworkParams,
}

impl GeneNetwork {
    /// Wraps validated parameters.
    pub fn new(params: NetworkParams) -> Result<Self, ModelError> {
        validate_params(&params).map_err(ModelError::InvalidParams)?;
        Ok(Self { params })
    }

    /// Wraps parameters without validation, for degenerate studies such as
    /// `h = 0`.
    pub fn new_unchecked(params: NetworkParams) -> Self {
        Self { params }
    }

    pub fn simulate(&self, z0: HybridState, budget: Budget, policy: JumpPolicy) -> Result<Vec<HybridArc<Mode>>, ModelError> {
        if !(z0.x[0] >= 0.0 && z0.x[1] >= 0.0) {
            return Err(ModelError::NegativeConcentration(z0.x[0], z0.x[1]));
        }
        Ok(hybrid::simulate(self, z0.x, z0.q, budget, policy)?)
    }

    /// Single arc under a deterministic policy.
    pub fn simulate_one(&self, z0: HybridState, budget: Budget) -> Result<HybridArc<Mode>, ModelError> {
        let mut arcs = self.simulate(z0, budget, JumpPolicy::PreferQ1)?;
        Ok(arcs.swap_remove(0))
    }
}

impl HybridSystem for GeneNetwork {
    type Mode = Mode;

    fn gains(&self, mode: Mode) -> [AxisGain; 2] {
        self.params.gains(mode)
    }

    fn guards(&self, mode: Mode) -> Vec<Guard> {
        [mode.q1, mode.q2]
            .into_iter()
            .enumerate()
            .map(|(axis, on)| Guard {
                axis,
                level: self.params.switching_level(axis, on),
                crossing: if on { Crossing::Falling } else { Crossing::Rising },
            })
            .collect()
    }

    fn successor(&self, mode: Mode, guard: usize) -> Mode {
        mode.toggled(guard)
    }
}
