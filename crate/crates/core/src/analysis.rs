//! Equilibrium classification, the limit cycle of the oscillating regime and
//! the slope condition used by the stability certificate.

use serde::Serialize;
use thiserror::Error;

use crate::hybrid::Point;
use crate::model::{validate_params, HybridState, Mode, NetworkParams, ParamViolation};

/// Tolerance for point-on-cycle tests.
pub const EPS_GEOM: f64 = 1e-9;
/// Maximal disagreement between the closed-form and bisection vertex.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Negative radicands above this are treated as rounding noise.
const RADICAND_NOISE: f64 = -1e-12;
const BISECTION_ITERS: usize = 200;
const BRACKET_FLOOR: f64 = 1e-12;

/// Parameter regimes. Every inequality is strict; parameters on a region
/// boundary are reported as `Boundary`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    /// `θ1+h1 < u1 < θ1max`, `0 < u2 < θ2+h2`: only `z1*`.
    Case1,
    /// `0 < u1 < θ1−h1`: only `z2*`.
    Case2,
    /// `θ1−h1 < u1 < θ1+h1`, `u2 < θ2+h2`: both equilibria.
    Case3,
    /// `θ1−h1 < u1 < θ1+h1`, `θ2+h2 < u2 < θ2max`: only `z2*`.
    Case4,
    /// `θ1+h1 < u1 < θ1max`, `θ2+h2 < u2 < θ2max`: a limit cycle.
    Case5,
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriaReport {
    pub case: Case,
    pub points: Vec<HybridState>,
    pub limit_cycle: Option<LimitCycle>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("invalid parameters: {0:?}")]
    InvalidParams(Vec<ParamViolation>),
    #[error("parameters are in {0:?}, not the oscillating regime")]
    NotOscillating(Case),
    #[error("ρ{stage} is undefined at r = {r}")]
    RhoDomain { stage: usize, r: f64 },
    #[error("no sign change of ρ(r) − r on [{lo}, {hi}] (values {g_lo}, {g_hi})")]
    NoBracket { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },
    #[error("negative radicand {0} in the closed-form vertex")]
    NegativeRadicand(f64),
    #[error("closed-form vertex {closed} disagrees with fixed point {bisection}")]
    ClosedFormMismatch { closed: f64, bisection: f64 },
    #[error("slopes need γ1 = γ2 (got {gamma1}, {gamma2})")]
    UnequalDecay { gamma1: f64, gamma2: f64 },
    #[error("segment S{0} is degenerate; its slope is undefined")]
    SlopeUndefined(usize),
}

/// The periodic orbit of the oscillating regime.
///
/// Vertex `p_i` is where the orbit enters mode `Mode::CYCLE[i]`; flowing from
/// it for `times[i]` reaches `p_{i+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycle {
    pub params: NetworkParams,
    pub vertices: [Point; 4],
    pub times: [f64; 4],
    pub period: f64,
    /// `m1..m4`, present when `γ1 = γ2` so each piece is a straight segment.
    pub slopes: Option<[f64; 4]>,
}

impl LimitCycle {
    /// Point reached after flowing `s` along piece `i` (mode `Mode::CYCLE[i]`).
    pub fn arc_point(&self, i: usize, s: f64) -> Point {
        let g = self.params.gains(Mode::CYCLE[i]);
        let v = self.vertices[i];
        [g[0].advance(v[0], s), g[1].advance(v[1], s)]
    }

    /// Distance from `x` to the piece of the orbit belonging to mode `q`.
    ///
    /// Straight pieces use the point-to-segment distance. Curved pieces are
    /// inverted through each axis's exponential and the closer candidate wins.
    pub fn residual(&self, x: Point, q: Mode) -> f64 {
        let i = q.cycle_index();
        let (a, b) = (self.vertices[i], self.vertices[(i + 1) % 4]);
        if self.slopes.is_some() {
            return segment_distance(x, a, b);
        }
        let g = self.params.gains(q);
        let mut best = dist(x, a).min(dist(x, b));
        for axis in 0..2 {
            let u = g[axis].rest_point();
            let ratio = (a[axis] - u) / (x[axis] - u);
            if ratio > 0.0 && ratio.is_finite() {
                let s = (ratio.ln() / g[axis].gamma).clamp(0.0, self.times[i]);
                best = best.min(dist(x, self.arc_point(i, s)));
            }
        }
        best
    }

    /// Bounding box `[min, max]` of the vertices.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}

/// A line `x2 = slope·x1 + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub fn through(p: Point, slope: f64) -> Self {
        Self { slope, intercept: p[1] - slope * p[0] }
    }

    /// Euclidean distance from `x` to the line.
    pub fn distance(&self, x: Point) -> f64 {
        (self.slope * x[0] + self.intercept - x[1]).abs() / self.slope.hypot(1.0)
    }

    /// Orthogonal projection of `x` onto the line.
    pub fn project(&self, x: Point) -> Point {
        let m = self.slope;
        let r = (m * x[0] + self.intercept - x[1]) / (m * m + 1.0);
        [x[0] - m * r, x[1] + r]
    }

    /// Unit normal pointing toward increasing `x2 − slope·x1`.
    pub fn unit_normal(&self) -> Point {
        let n = self.slope.hypot(1.0);
        [-self.slope / n, 1.0 / n]
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(x: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    if len2 == 0.0 {
        return dist(x, a);
    }
    let s = (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    dist(x, [a[0] + s * d[0], a[1] + s * d[1]])
}

fn between(lo: f64, v: f64, hi: f64) -> bool {
    lo < v && v < hi
}

/// Parameter regime of `p` without validation.
pub fn case_of(p: &NetworkParams) -> Case {
    let (u1, u2) = (p.u1(), p.u2());
    let (lo1, hi1, hi2) = (p.theta1 - p.h1, p.theta1 + p.h1, p.theta2 + p.h2);
    if between(hi1, u1, p.theta1_max) && between(0.0, u2, hi2) {
        Case::Case1
    } else if between(0.0, u1, lo1) {
        Case::Case2
    } else if between(lo1, u1, hi1) && u2 < hi2 {
        Case::Case3
    } else if between(lo1, u1, hi1) && between(hi2, u2, p.theta2_max) {
        Case::Case4
    } else if between(hi1, u1, p.theta1_max) && between(hi2, u2, p.theta2_max) {
        Case::Case5
    } else {
        Case::Boundary
    }
}

/// Classifies the parameters and lists the equilibria of their regime.
pub fn classify_equilibria(p: &NetworkParams) -> Result<EquilibriaReport, AnalysisError> {
    validate_params(p).map_err(AnalysisError::InvalidParams)?;
    let case = case_of(p);
    let z1 = HybridState::new(p.u1(), p.u2(), true, false);
    let z2 = HybridState::new(p.u1(), 0.0, false, false);
    let (points, limit_cycle) = match case {
        Case::Case1 => (vec![z1], None),
        Case::Case2 | Case::Case4 => (vec![z2], None),
        Case::Case3 => (vec![z1, z2], None),
        Case::Case5 => (Vec::new(), Some(compute_limit_cycle(p)?)),
        Case::Boundary => (Vec::new(), None),
    };
    Ok(EquilibriaReport { case, points, limit_cycle })
}

fn power_stage(stage: usize, r: f64, base: f64, exponent: f64) -> Result<f64, AnalysisError> {
    let v = base.powf(exponent);
    if base > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(AnalysisError::RhoDomain { stage, r })
    }
}

/// `p1(2)` as a function of `p0(1) = r`, flowing in mode (0,0).
pub fn rho1(r: f64, p: &NetworkParams) -> Result<f64, AnalysisError> {
    let u1 = p.u1();
    let base = (u1 - p.theta1 - p.h1) / (u1 - r);
    Ok((p.theta2 - p.h2) * power_stage(1, r, base, p.gamma2 / p.gamma1)?)
}

/// `p2(1)` as a function of `p1(2) = r`, flowing in mode (1,0).
pub fn rho2(r: f64, p: &NetworkParams) -> Result<f64, AnalysisError> {
    let (u1, u2) = (p.u1(), p.u2());
    let base = (u2 - p.theta2 - p.h2) / (u2 - r);
    Ok(u1 - (u1 - p.theta1 - p.h1) * power_stage(2, r, base, p.gamma1 / p.gamma2)?)
}

/// `p3(2)` as a function of `p2(1) = r`, flowing in mode (1,1).
pub fn rho3(r: f64, p: &NetworkParams) -> Result<f64, AnalysisError> {
    let u2 = p.u2();
    let base = (p.theta1 - p.h1) / r;
    Ok(u2 - (u2 - p.theta2 - p.h2) * power_stage(3, r, base, p.gamma2 / p.gamma1)?)
}

/// `p0(1)` of the next turn as a function of `p3(2) = r`, flowing in mode (0,1).
pub fn rho4(r: f64, p: &NetworkParams) -> Result<f64, AnalysisError> {
    let base = (p.theta2 - p.h2) / r;
    Ok((p.theta1 - p.h1) * power_stage(4, r, base, p.gamma1 / p.gamma2)?)
}

/// First-return map `ρ4∘ρ3∘ρ2∘ρ1` on the section `x2 = θ2 − h2`, mode (0,0).
pub fn rho_map(r: f64, p: &NetworkParams) -> Result<f64, AnalysisError> {
    rho4(rho3(rho2(rho1(r, p)?, p)?, p)?, p)
}

/// Fixed point of [`rho_map`] by bisection on `ρ(r) − r` over `(0, θ1 − h1]`.
pub fn rho_fixed_point(p: &NetworkParams) -> Result<f64, AnalysisError> {
    let hi0 = p.theta1 - p.h1;
    let lo0 = BRACKET_FLOOR * hi0;
    let g = |r: f64| rho_map(r, p).map(|v| v - r);
    let (g_lo, g_hi) = (g(lo0)?, g(hi0)?);
    if g_hi == 0.0 {
        return Ok(hi0);
    }
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(AnalysisError::NoBracket { lo: lo0, hi: hi0, g_lo, g_hi });
    }
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn noisy_sqrt(v: f64) -> Result<f64, AnalysisError> {
    if v >= 0.0 {
        Ok(v.sqrt())
    } else if v >= RADICAND_NOISE {
        Ok(0.0)
    } else {
        Err(AnalysisError::NegativeRadicand(v))
    }
}

/// Closed-form `p0(1)` for `γ1 = γ2`.
pub fn closed_form_p0(p: &NetworkParams) -> Result<f64, AnalysisError> {
    if p.gamma1 != p.gamma2 {
        return Err(AnalysisError::UnequalDecay { gamma1: p.gamma1, gamma2: p.gamma2 });
    }
    let NetworkParams { k1, k2, theta1: t1, theta2: t2, h1, h2, .. } = *p;
    let g = p.gamma1;
    let d1 = 2.0 * h1 * k2 * k2 * g + h2 * k1 * k2 * g + k1 * k2 * g * t2
        - 2.0 * h1 * h2 * k2 * g * g
        - 2.0 * h1 * k2 * g * g * t2;
    let d2 = k1 * k2 * g * t1 * t2;
    let d3 = h2 * k1 * k2 * g * t1;
    let d4 = h1 * k1 * k2 * g * t2;
    let d5 = h1 * h2 * k1 * k2 * g;
    let d7 = h2 * k1 * k1 * k2;
    let d8 = h1 * k1 * k2 * k2;
    let g2 = g * g;
    let g3 = g2 * g;
    let radicand = 2.0 * h1 * h1 * h2 * h2 * g3 - 2.0 * h1 * h1 * h2 * k2 * g2 + 2.0 * h1 * h1 * k2 * g2 * t2
        - 2.0 * h1 * h1 * g3 * t2 * t2
        - 2.0 * h1 * h2 * h2 * k1 * g2
        + d8
        - 2.0 * h1 * k1 * k2 * g * t2
        + 2.0 * h1 * k1 * g2 * t2 * t2
        + 2.0 * h2 * h2 * k1 * g2 * t1
        - 2.0 * h2 * h2 * g3 * t1 * t1
        + d7
        - 2.0 * h2 * k1 * k2 * g * t1
        + 2.0 * h2 * k2 * g2 * t1 * t1
        + 2.0 * k1 * k2 * g * t1 * t2
        - 2.0 * k1 * g2 * t1 * t2 * t2
        - 2.0 * k2 * g2 * t1 * t1 * t2
        + 2.0 * g3 * t1 * t1 * t2 * t2;
    let d6 = (k1 * k2).sqrt() * noisy_sqrt(h1 * k2 + h2 * k1 - 2.0 * h1 * h2 * g)? * noisy_sqrt(radicand)?;
    Ok((-d6 + d8 + d7 - d5 - d4 - d3 + d2) / d1)
}

/// Slopes `m1..m4` of the straight pieces through `vertices`.
pub fn segment_slopes(vertices: &[Point; 4]) -> Result<[f64; 4], AnalysisError> {
    let [p0, p1, p2, p3] = *vertices;
    let pairs = [(p0, p1), (p2, p1), (p2, p3), (p0, p3)];
    let mut m = [0.0; 4];
    for (i, (a, b)) in pairs.into_iter().enumerate() {
        let dx = a[0] - b[0];
        if dx == 0.0 {
            return Err(AnalysisError::SlopeUndefined(i + 1));
        }
        m[i] = (a[1] - b[1]) / dx;
    }
    Ok(m)
}

/// Builds the orbit from the vertex `p0(1) = r`.
pub fn cycle_from_vertex(r: f64, p: &NetworkParams) -> Result<LimitCycle, AnalysisError> {
    let (u1, u2) = (p.u1(), p.u2());
    let (lo1, hi1, lo2, hi2) = (p.theta1 - p.h1, p.theta1 + p.h1, p.theta2 - p.h2, p.theta2 + p.h2);
    let p0 = [r, lo2];
    let p1 = [hi1, rho1(r, p)?];
    let p2 = [rho2(p1[1], p)?, hi2];
    let p3 = [lo1, rho3(p2[0], p)?];
    let times = [
        ((u1 - p0[0]) / (u1 - hi1)).ln() / p.gamma1,
        ((u2 - p1[1]) / (u2 - hi2)).ln() / p.gamma2,
        (p2[0] / lo1).ln() / p.gamma1,
        (p3[1] / lo2).ln() / p.gamma2,
    ];
    let vertices = [p0, p1, p2, p3];
    let slopes = if p.gamma1 == p.gamma2 { Some(segment_slopes(&vertices)?) } else { None };
    Ok(LimitCycle { params: *p, vertices, times, period: times.iter().sum(), slopes })
}

/// The limit cycle of the oscillating regime.
///
/// With equal decay rates the closed-form vertex is used after checking it
/// against the fixed point of the return map.
pub fn compute_limit_cycle(p: &NetworkParams) -> Result<LimitCycle, AnalysisError> {
    validate_params(p).map_err(AnalysisError::InvalidParams)?;
    let case = case_of(p);
    if case != Case::Case5 {
        return Err(AnalysisError::NotOscillating(case));
    }
    let bisection = rho_fixed_point(p)?;
    let r = if p.gamma1 == p.gamma2 {
        let closed = closed_form_p0(p)?;
        if !((closed - bisection).abs() <= CLOSED_FORM_TOL) {
            return Err(AnalysisError::ClosedFormMismatch { closed, bisection });
        }
        closed
    } else {
        bisection
    };
    cycle_from_vertex(r, p)
}

/// `m1..m4` of a straight-piece cycle.
pub fn slopes(cycle: &LimitCycle) -> Result<[f64; 4], AnalysisError> {
    cycle.slopes.ok_or(AnalysisError::UnequalDecay { gamma1: cycle.params.gamma1, gamma2: cycle.params.gamma2 })
}

/// Line extending the cycle piece of mode `q`.
///
/// Pieces of modes (0,0) and (1,0) are anchored at `p1`, the others at `p3`.
pub fn piece_line(cycle: &LimitCycle, q: Mode) -> Result<Line, AnalysisError> {
    let m = slopes(cycle)?;
    let i = q.cycle_index();
    let anchor = if i < 2 { cycle.vertices[1] } else { cycle.vertices[3] };
    Ok(Line::through(anchor, m[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub slopes: [f64; 4],
    /// `min{|m2|,|m4|} − |m1|`.
    pub margin1: f64,
    /// `min{|m2|,|m4|} − |m3|`.
    pub margin3: f64,
    pub holds: bool,
}

/// Evaluates `|m1| ≤ min{|m2|,|m4|}` and `|m3| ≤ min{|m2|,|m4|}`.
pub fn check_stability_condition(p: &NetworkParams) -> Result<StabilityCheck, AnalysisError> {
    if p.gamma1 != p.gamma2 {
        return Err(AnalysisError::UnequalDecay { gamma1: p.gamma1, gamma2: p.gamma2 });
    }
    let cycle = compute_limit_cycle(p)?;
    Ok(stability_of(&slopes(&cycle)?))
}

pub fn stability_of(m: &[f64; 4]) -> StabilityCheck {
    let bound = m[1].abs().min(m[3].abs());
    let margin1 = bound - m[0].abs();
    let margin3 = bound - m[2].abs();
    StabilityCheck { slopes: *m, margin1, margin3, holds: margin1 >= 0.0 && margin3 >= 0.0 }
}

/// Whether `(x, q)` lies on the cycle piece of mode `q`.
///
/// Straight pieces: line residual and vertex bounding box within
/// [`EPS_GEOM`]. Curved pieces: exponential-arc residual within [`EPS_GEOM`].
pub fn membership_in_s(x: Point, q: Mode, cycle: &LimitCycle) -> bool {
    let i = q.cycle_index();
    match piece_line(cycle, q) {
        Ok(line) => {
            let (a, b) = (cycle.vertices[i], cycle.vertices[(i + 1) % 4]);
            let in_box = (0..2).all(|k| a[k].min(b[k]) - EPS_GEOM <= x[k] && x[k] <= a[k].max(b[k]) + EPS_GEOM);
            in_box && line.distance(x) <= EPS_GEOM
        }
        Err(_) => cycle.residual(x, q) <= EPS_GEOM,
    }
}
