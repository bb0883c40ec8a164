use serde::Serialize;

use super::{AxisGain, HybridTime, Point};

/// How the state evolves inside a flow segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentPath {
    /// Closed-form affine flow.
    Exact { gains: [AxisGain; 2] },
    /// Numerically integrated flow, sampled at increasing times that include
    /// both segment endpoints. Values between samples are interpolated.
    Sampled { times: Vec<f64>, states: Vec<Point> },
}

/// The piece of an arc with jump index `j`, flowing over `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSegment<M> {
    pub j: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub mode: M,
    pub x_start: Point,
    pub x_end: Point,
    pub path: SegmentPath,
}

impl<M> FlowSegment<M> {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Continuous state at time `t ∈ [t_start, t_end]` (clamped).
    pub fn state_at(&self, t: f64) -> Point {
        let t = t.clamp(self.t_start, self.t_end);
        match &self.path {
            SegmentPath::Exact { gains } => {
                if t == self.t_end {
                    return self.x_end;
                }
                let s = t - self.t_start;
                [gains[0].advance(self.x_start[0], s), gains[1].advance(self.x_start[1], s)]
            }
            SegmentPath::Sampled { times, states } => {
                let idx = times.partition_point(|&u| u < t);
                if idx == 0 {
                    return states[0];
                }
                if idx >= times.len() {
                    return states[states.len() - 1];
                }
                let (t0, t1) = (times[idx - 1], times[idx]);
                let (a, b) = (states[idx - 1], states[idx]);
                if t1 == t0 {
                    return b;
                }
                let w = (t - t0) / (t1 - t0);
                [a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])]
            }
        }
    }
}

/// An instantaneous jump at hybrid time `time` (pre-jump index).
#[derive(Debug, Clone, PartialEq)]
pub struct Jump<M> {
    pub time: HybridTime,
    pub guard: usize,
    pub x: Point,
    pub pre: M,
    pub post: M,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    ReachedTimeBudget,
    ReachedJumpBudget,
    ZenoSuspected,
    LeftDomain,
}

/// A computed solution: one flow segment per jump index, separated by jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc<M> {
    pub segments: Vec<FlowSegment<M>>,
    pub jumps: Vec<Jump<M>>,
    pub termination: Termination,
}

impl<M: Copy + PartialEq> HybridArc<M> {
    pub fn initial_state(&self) -> (Point, M) {
        let s = &self.segments[0];
        (s.x_start, s.mode)
    }

    pub fn final_state(&self) -> (Point, M) {
        let s = self.segments.last().expect("arc has at least one segment");
        (s.x_end, s.mode)
    }

    pub fn end_time(&self) -> HybridTime {
        let s = self.segments.last().expect("arc has at least one segment");
        HybridTime::new(s.t_end, s.j)
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    /// State at `(t, j)`, or `None` when the point is outside the domain.
    pub fn state_at(&self, t: f64, j: usize) -> Option<(Point, M)> {
        let seg = self.segments.get(j)?;
        (seg.t_start <= t && t <= seg.t_end).then(|| (seg.state_at(t), seg.mode))
    }

    /// State at flow time `t` using the largest `j` with `(t, j)` in the domain.
    pub fn state_at_time(&self, t: f64) -> Option<(Point, M)> {
        let idx = self.segments.partition_point(|s| s.t_start <= t);
        let seg = self.segments.get(idx.checked_sub(1)?)?;
        (t <= seg.t_end).then(|| (seg.state_at(t), seg.mode))
    }

    /// Checks the hybrid time domain structure and jump bookkeeping.
    pub fn check_domain(&self) -> Result<(), String> {
        if self.segments.is_empty() {
            return Err("arc has no segments".into());
        }
        if self.segments.len() != self.jumps.len() + 1 {
            return Err(format!(
                "{} segments but {} jumps",
                self.segments.len(),
                self.jumps.len()
            ));
        }
        if self.segments[0].t_start != 0.0 {
            return Err("domain does not start at t = 0".into());
        }
        for (j, seg) in self.segments.iter().enumerate() {
            if seg.j != j {
                return Err(format!("segment {j} carries index {}", seg.j));
            }
            if !(seg.t_end >= seg.t_start) {
                return Err(format!("segment {j} runs backwards"));
            }
        }
        for (k, jump) in self.jumps.iter().enumerate() {
            let (before, after) = (&self.segments[k], &self.segments[k + 1]);
            if jump.time.j != k || jump.time.t != before.t_end || after.t_start != before.t_end {
                return Err(format!("jump {k} is not instantaneous at the segment junction"));
            }
            if before.x_end != jump.x || after.x_start != jump.x {
                return Err(format!("jump {k} moves the continuous state"));
            }
            if before.mode != jump.pre || after.mode != jump.post {
                return Err(format!("jump {k} modes do not match adjacent segments"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ArcStatus {
    /// The arc exhausted its budget without blocking.
    CompleteWithinBudget,
    ZenoSuspected,
    /// The arc stopped at a point where it can neither flow nor jump.
    MaximalBlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ArcClassification {
    /// The domain contains at least two points.
    pub nontrivial: bool,
    pub status: ArcStatus,
}

pub fn classify_arc<M: Copy + PartialEq>(arc: &HybridArc<M>) -> ArcClassification {
    let nontrivial = !arc.jumps.is_empty() || arc.segments.iter().any(|s| s.t_end > s.t_start);
    let status = match arc.termination {
        Termination::ReachedTimeBudget | Termination::ReachedJumpBudget => ArcStatus::CompleteWithinBudget,
        Termination::ZenoSuspected => ArcStatus::ZenoSuspected,
        Termination::LeftDomain => ArcStatus::MaximalBlocked,
    };
    ArcClassification { nontrivial, status }
}
