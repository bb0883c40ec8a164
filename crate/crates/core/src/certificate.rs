//! Contraction certificate for the oscillating regime with `γ1 = γ2`.
//!
//! A shadow point `ζ` rides on the line extending the cycle piece of the
//! current mode and flows with the same affine law as `x`. Between jumps
//! `|x − ζ|` therefore shrinks exactly like `e^{−γt}`. At a jump `ζ` is moved
//! to the projection of `x` onto the next mode's line, which does not
//! increase the distance when the slope condition holds.

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, piece_line, AnalysisError, Line, LimitCycle, StabilityCheck};
use crate::hybrid::{Budget, HybridArc, HybridTime, Point};
use crate::model::{GeneNetwork, HybridState, Mode, ModelError, NetworkParams};

/// Interior samples per flow segment; both endpoints are added.
pub const SAMPLES_PER_SEGMENT: usize = 100;
/// Slack for `dist_post ≤ dist_pre` at jumps.
pub const JUMP_TOL: f64 = 1e-12;
/// Relative slack for the exponential bound, plus an absolute floor for
/// distances that have decayed to coordinate rounding.
const BOUND_REL_TOL: f64 = 1e-9;
const BOUND_ABS_TOL: f64 = 1e-12;

/// State of the augmented system `(x, q, ζ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowState {
    pub x: Point,
    pub q: Mode,
    pub zeta: Point,
}

impl ShadowState {
    /// Places `ζ` at the projection of `x` onto the line of its mode.
    pub fn projected(z: HybridState, cycle: &LimitCycle) -> Result<Self, CertificateError> {
        let zeta = line_of_mode(z.q, cycle)?.project(z.x);
        Ok(Self { x: z.x, q: z.q, zeta })
    }

    pub fn dist(&self) -> f64 {
        dist(self.x, self.zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Violation {
    /// The projected shadow is farther from `x` than the pre-jump shadow.
    JumpIncrease { pre: f64, post: f64 },
    /// `dist(x, ζ)` exceeds `e^{−γt}·dist₀`.
    BoundExceeded { dist: f64, bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("slope condition unmet (margins {:.6}, {:.6})", .0.margin1, .0.margin3)]
    ConditionUnmet(StabilityCheck),
    #[error("mode {post} is not a jump successor of {pre}")]
    NotSuccessor { pre: Mode, post: Mode },
    #[error("certificate violated{}: {violation:?}", at_suffix(.at))]
    Violation { at: Option<HybridTime>, violation: Violation },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertSample {
    pub t: f64,
    pub j: usize,
    /// `|x − ζ|`.
    pub dist: f64,
    /// Distance from `x` to the line of the current mode.
    pub d_stilde: f64,
    /// `e^{−γt}·dist₀`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateTrace {
    pub samples: Vec<CertSample>,
    pub arc: HybridArc<Mode>,
    pub check: StabilityCheck,
    pub dist0: f64,
}

impl CertificateTrace {
    pub fn final_sample(&self) -> CertSample {
        *self.samples.last().expect("trace is never empty")
    }
}

fn at_suffix(at: &Option<HybridTime>) -> String {
    at.map(|h| format!(" at (t = {}, j = {})", h.t, h.j)).unwrap_or_default()
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// The line extending the cycle piece of mode `q`.
pub fn line_of_mode(q: Mode, cycle: &LimitCycle) -> Result<Line, CertificateError> {
    Ok(piece_line(cycle, q)?)
}

/// Distance from `(x, q)` to the extended set: point-to-line for mode `q`.
pub fn dist_to_stilde(x: Point, q: Mode, cycle: &LimitCycle) -> Result<f64, CertificateError> {
    Ok(line_of_mode(q, cycle)?.distance(x))
}

/// Jump of the shadow state: the projection of `x` onto the `q_post` line.
///
/// Fails when the projection is farther from `x` than `ζ_pre`.
pub fn shadow_jump(x: Point, q_pre: Mode, q_post: Mode, zeta_pre: Point, cycle: &LimitCycle) -> Result<Point, CertificateError> {
    if (q_pre.q1 != q_post.q1) == (q_pre.q2 != q_post.q2) {
        return Err(CertificateError::NotSuccessor { pre: q_pre, post: q_post });
    }
    let zeta_post = line_of_mode(q_post, cycle)?.project(x);
    check_jump(x, zeta_pre, zeta_post).map_err(|violation| CertificateError::Violation { at: None, violation })
}

fn check_jump(x: Point, zeta_pre: Point, zeta_post: Point) -> Result<Point, Violation> {
    let (pre, post) = (dist(x, zeta_pre), dist(x, zeta_post));
    if post <= pre + JUMP_TOL {
        Ok(zeta_post)
    } else {
        Err(Violation::JumpIncrease { pre, post })
    }
}

/// Co-simulates `(x, q, ζ)` from `z0` over `[0, t_max]` and checks the
/// certificate at every sample.
pub fn run_certificate(z0: HybridState, p: &NetworkParams, t_max: f64) -> Result<CertificateTrace, CertificateError> {
    let cycle = analysis::compute_limit_cycle(p)?;
    let check = analysis::stability_of(&analysis::slopes(&cycle)?);
    if !check.holds {
        return Err(CertificateError::ConditionUnmet(check));
    }
    let arc = GeneNetwork::new(*p)?.simulate_one(z0, Budget::horizon(t_max))?;
    let gamma = p.gamma1;
    let shadow = ShadowState::projected(z0, &cycle)?;
    let dist0 = shadow.dist();
    let mut zeta = shadow.zeta;
    let mut samples = Vec::with_capacity(arc.segments.len() * (SAMPLES_PER_SEGMENT + 2));

    for seg in &arc.segments {
        let line = line_of_mode(seg.mode, &cycle)?;
        let gains = p.gains(seg.mode);
        let n = if seg.duration() > 0.0 { SAMPLES_PER_SEGMENT + 1 } else { 0 };
        for i in 0..=n {
            let t = if i == n { seg.t_end } else { seg.t_start + seg.duration() * i as f64 / n as f64 };
            let s = t - seg.t_start;
            let x = seg.state_at(t);
            let z = [gains[0].advance(zeta[0], s), gains[1].advance(zeta[1], s)];
            let sample = CertSample { t, j: seg.j, dist: dist(x, z), d_stilde: line.distance(x), bound: (-gamma * t).exp() * dist0 };
            if sample.dist > sample.bound * (1.0 + BOUND_REL_TOL) + BOUND_ABS_TOL {
                return Err(CertificateError::Violation {
                    at: Some(HybridTime::new(t, seg.j)),
                    violation: Violation::BoundExceeded { dist: sample.dist, bound: sample.bound },
                });
            }
            samples.push(sample);
        }
        let s = seg.duration();
        zeta = [gains[0].advance(zeta[0], s), gains[1].advance(zeta[1], s)];
        if let Some(jump) = arc.jumps.get(seg.j) {
            let post = line_of_mode(jump.post, &cycle)?.project(jump.x);
            zeta = check_jump(jump.x, zeta, post)
                .map_err(|violation| CertificateError::Violation { at: Some(jump.time), violation })?;
        }
    }
    Ok(CertificateTrace { samples, arc, check, dist0 })
}
