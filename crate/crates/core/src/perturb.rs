//! The network under bounded disturbances.
//!
//! The flow becomes `ẋ_i = k_eff_i − γ_i(x_i + d1_i(t)) + d2_i(t)` and the
//! guards are evaluated at the displaced state `x + d1(t)`. Closed-form
//! crossing times no longer exist, so the flow is integrated with RK4 and
//! crossings are located by bisection on the sign of the displaced `η`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, LimitCycle};
use crate::hybrid::{
    Budget, FlowSegment, HybridArc, HybridError, HybridSystem, HybridTime, Jump, Point, SegmentPath, Termination,
    EPS_ZENO, J_ZENO,
};
use crate::model::{in_flow_set, GeneNetwork, HybridState, Mode, ModelError, NetworkParams};

/// Shape of a disturbance signal. Every shape is bounded by 1 per channel
/// pair and gets scaled by the `δ` of its [`DisturbanceSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DisturbanceKind {
    /// Fixed directions for `d1` and `d2`.
    Constant { d1_dir: Point, d2_dir: Point },
    /// Uniform samples from the unit disk, redrawn every `dwell` seconds.
    PiecewiseConstantRandom { seed: u64, dwell: f64 },
    /// `a_c sin(2π f_c t + φ_c)` on channels `(d1_1, d1_2, d2_1, d2_2)`.
    Sinusoid { amplitude: [f64; 4], frequency: [f64; 4], phase: [f64; 4] },
    /// Synthesis-rate error: `d1 = 0`, `d2 = (k1δ(1 − q2), k2δ q1)`.
    RateOffset { k1_delta: f64, k2_delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Bound on `|d1(t)|`.
    pub delta1: f64,
    /// Bound on `|d2(t)|`.
    pub delta2: f64,
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self { kind: DisturbanceKind::Constant { d1_dir: [0.0; 2], d2_dir: [0.0; 2] }, delta1: 0.0, delta2: 0.0 }
    }

    pub fn new(kind: DisturbanceKind, delta1: f64, delta2: f64) -> Self {
        Self { kind, delta1, delta2 }
    }

    /// Same shape with both bounds set to `delta`.
    pub fn scaled(&self, delta: f64) -> Self {
        Self { kind: self.kind.clone(), delta1: delta, delta2: delta }
    }

    /// Checks the bounds and shape against an integration step.
    pub fn validate(&self, step: f64) -> Result<(), PerturbError> {
        let bad = |m: String| Err(PerturbError::InvalidSpec(m));
        for (name, d) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {d}"));
            }
        }
        match &self.kind {
            DisturbanceKind::Constant { d1_dir, d2_dir } => {
                if !d1_dir.iter().chain(d2_dir).all(|v| v.is_finite()) {
                    return bad("directions must be finite".into());
                }
            }
            DisturbanceKind::PiecewiseConstantRandom { dwell, .. } => {
                if !(*dwell >= 10.0 * step && dwell.is_finite()) {
                    return bad(format!("dwell {dwell} must be at least 10 integration steps ({})", 10.0 * step));
                }
            }
            DisturbanceKind::Sinusoid { amplitude, frequency, phase } => {
                if !amplitude.iter().chain(frequency).chain(phase).all(|v| v.is_finite()) {
                    return bad("sinusoid coefficients must be finite".into());
                }
            }
            DisturbanceKind::RateOffset { k1_delta, k2_delta } => {
                let norm = k1_delta.hypot(*k2_delta);
                if !(norm <= self.delta2 * (1.0 + 1e-12)) {
                    return bad(format!("rate offset norm {norm} exceeds delta2 = {}", self.delta2));
                }
            }
        }
        Ok(())
    }

    /// Evaluator of `(d1(t), d2(t))`.
    pub fn signal(&self) -> Signal<'_> {
        Signal { spec: self, cache: None }
    }
}

/// Scales `v` down onto the unit disk when it lies outside.
fn clip_unit(v: Point) -> Point {
    let n = v[0].hypot(v[1]);
    if n > 1.0 {
        [v[0] / n, v[1] / n]
    } else {
        v
    }
}

fn scale(v: Point, s: f64) -> Point {
    [v[0] * s, v[1] * s]
}

/// Stateful evaluator; caches the current random interval.
pub struct Signal<'a> {
    spec: &'a DisturbanceSpec,
    cache: Option<(u64, Point, Point)>,
}

impl Signal<'_> {
    /// `(d1(t), d2(t))` in mode `q`.
    pub fn sample(&mut self, t: f64, q: Mode) -> (Point, Point) {
        let (d1, d2) = (self.spec.delta1, self.spec.delta2);
        match &self.spec.kind {
            DisturbanceKind::Constant { d1_dir, d2_dir } => (scale(clip_unit(*d1_dir), d1), scale(clip_unit(*d2_dir), d2)),
            DisturbanceKind::PiecewiseConstantRandom { seed, dwell } => {
                let n = (t / dwell).floor().max(0.0) as u64;
                match self.cache {
                    Some((m, a, b)) if m == n => (scale(a, d1), scale(b, d2)),
                    _ => {
                        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                        rng.set_stream(n);
                        let (a, b) = (unit_disk(&mut rng), unit_disk(&mut rng));
                        self.cache = Some((n, a, b));
                        (scale(a, d1), scale(b, d2))
                    }
                }
            }
            DisturbanceKind::Sinusoid { amplitude, frequency, phase } => {
                let c = |i: usize| amplitude[i] * (std::f64::consts::TAU * frequency[i] * t + phase[i]).sin();
                (scale(clip_unit([c(0), c(1)]), d1), scale(clip_unit([c(2), c(3)]), d2))
            }
            DisturbanceKind::RateOffset { k1_delta, k2_delta } => {
                let on1 = if q.q1 { 1.0 } else { 0.0 };
                let off2 = if q.q2 { 0.0 } else { 1.0 };
                ([0.0; 2], [k1_delta * off2, k2_delta * on1])
            }
        }
    }
}

fn unit_disk(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
        if v[0] * v[0] + v[1] * v[1] <= 1.0 {
            return v;
        }
    }
}

/// `K = [0, x1_max] × [0, x2_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactBox {
    pub x1_max: f64,
    pub x2_max: f64,
}

impl Default for CompactBox {
    fn default() -> Self {
        Self { x1_max: 2.0, x2_max: 2.0 }
    }
}

impl CompactBox {
    pub fn contains(&self, x: Point) -> bool {
        (0.0..=self.x1_max).contains(&x[0]) && (0.0..=self.x2_max).contains(&x[1])
    }

    /// Whether every vertex of `cycle` lies in the box.
    pub fn covers(&self, cycle: &LimitCycle) -> bool {
        cycle.vertices.iter().all(|v| self.contains(*v))
    }
}

/// Integration settings for the disturbed flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbOptions {
    /// RK4 step.
    pub step: f64,
    /// Spacing of stored samples inside a flow segment.
    pub record_interval: f64,
    /// Width of the final bisection bracket around a crossing time.
    pub event_tol: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self { step: 1e-4, record_interval: 1e-3, event_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid disturbance: {0}")]
    InvalidSpec(String),
    #[error("invalid integration options: {0}")]
    InvalidOptions(String),
    #[error("box must have positive sides, got {0} × {1}")]
    InvalidBox(f64, f64),
    #[error("initial state ({0}, {1}) lies outside K")]
    StartOutsideBox(f64, f64),
    #[error("probe needs the slope condition (margins {0:.6}, {1:.6})")]
    ConditionUnmet(f64, f64),
}

struct Disturbed<'a> {
    net: GeneNetwork,
    signal: Signal<'a>,
}

impl Disturbed<'_> {
    fn rhs(&mut self, t: f64, x: Point, q: Mode) -> Point {
        let (d1, d2) = self.signal.sample(t, q);
        let g = self.net.params.gains(q);
        [g[0].k_eff - g[0].gamma * (x[0] + d1[0]) + d2[0], g[1].k_eff - g[1].gamma * (x[1] + d1[1]) + d2[1]]
    }

    fn rk4(&mut self, t: f64, x: Point, q: Mode, h: f64) -> Point {
        let add = |a: Point, b: Point, s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = self.rhs(t, x, q);
        let k2 = self.rhs(t + 0.5 * h, add(x, k1, 0.5 * h), q);
        let k3 = self.rhs(t + 0.5 * h, add(x, k2, 0.5 * h), q);
        let k4 = self.rhs(t + h, add(x, k3, h), q);
        [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Index of the first guard whose displaced switching function is `≥ 0`.
    fn fired(&mut self, t: f64, x: Point, q: Mode) -> Option<usize> {
        let (d1, _) = self.signal.sample(t, q);
        let y = [x[0] + d1[0], x[1] + d1[1]];
        self.net.guards(q).iter().position(|g| g.eta(y) >= 0.0)
    }
}

struct SegmentBuf {
    times: Vec<f64>,
    states: Vec<Point>,
}

impl SegmentBuf {
    fn start(t: f64, x: Point) -> Self {
        Self { times: vec![t], states: vec![x] }
    }

    fn push(&mut self, t: f64, x: Point) {
        if self.times.last() != Some(&t) {
            self.times.push(t);
            self.states.push(x);
        }
    }

    fn close(mut self, j: usize, mode: Mode, t: f64, x: Point) -> FlowSegment<Mode> {
        self.push(t, x);
        FlowSegment {
            j,
            t_start: self.times[0],
            t_end: t,
            mode,
            x_start: self.states[0],
            x_end: x,
            path: SegmentPath::Sampled { times: self.times, states: self.states },
        }
    }
}

/// Integrates the disturbed system from `z0`.
///
/// Jumps use the nominal jump map and fire as soon as a displaced guard
/// reaches zero, lowest guard first. Leaving `K` ends the arc with
/// [`Termination::LeftDomain`].
pub fn simulate_perturbed(
    z0: HybridState,
    p: &NetworkParams,
    spec: &DisturbanceSpec,
    bounds: CompactBox,
    budget: Budget,
    opts: PerturbOptions,
) -> Result<HybridArc<Mode>, PerturbError> {
    let net = GeneNetwork::new(*p)?;
    if !(opts.step > 0.0 && opts.record_interval > 0.0 && opts.event_tol > 0.0) {
        return Err(PerturbError::InvalidOptions(format!("{opts:?}")));
    }
    spec.validate(opts.step)?;
    if !(bounds.x1_max > 0.0 && bounds.x2_max > 0.0) {
        return Err(PerturbError::InvalidBox(bounds.x1_max, bounds.x2_max));
    }
    if !(budget.t_max > 0.0) || budget.j_max == 0 {
        return Err(ModelError::Hybrid(HybridError::InvalidBudget { t_max: budget.t_max, j_max: budget.j_max }).into());
    }
    if !bounds.contains(z0.x) {
        return Err(PerturbError::StartOutsideBox(z0.x[0], z0.x[1]));
    }

    let mut sys = Disturbed { net, signal: spec.signal() };
    let record_every = ((opts.record_interval / opts.step).round() as usize).max(1);
    let (mut t, mut x, mut q) = (0.0, z0.x, z0.q);
    let mut segments = Vec::new();
    let mut jumps: Vec<Jump<Mode>> = Vec::new();
    let mut buf = SegmentBuf::start(t, x);
    let mut since_record = 0;

    let termination = loop {
        if let Some(guard) = sys.fired(t, x, q) {
            if jumps.len() >= budget.j_max {
                break Termination::ReachedJumpBudget;
            }
            let post = sys.net.successor(q, guard);
            let j = segments.len();
            segments.push(std::mem::replace(&mut buf, SegmentBuf::start(t, x)).close(j, q, t, x));
            jumps.push(Jump { time: HybridTime::new(t, j), guard, x, pre: q, post });
            q = post;
            since_record = 0;
            let n = jumps.len();
            if n >= J_ZENO && t - jumps[n - J_ZENO].time.t <= EPS_ZENO {
                break Termination::ZenoSuspected;
            }
            continue;
        }
        if t >= budget.t_max {
            break Termination::ReachedTimeBudget;
        }
        if !bounds.contains(x) {
            break Termination::LeftDomain;
        }
        let h = opts.step.min(budget.t_max - t);
        let x_next = sys.rk4(t, x, q, h);
        if sys.fired(t + h, x_next, q).is_some() {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > opts.event_tol {
                let mid = 0.5 * (lo + hi);
                let xm = sys.rk4(t, x, q, mid);
                if sys.fired(t + mid, xm, q).is_some() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            x = sys.rk4(t, x, q, hi);
            t += hi;
            buf.push(t, x);
            since_record = 0;
        } else {
            x = x_next;
            t = if h < opts.step { budget.t_max } else { t + h };
            since_record += 1;
            if since_record >= record_every {
                buf.push(t, x);
                since_record = 0;
            }
        }
    };
    segments.push(buf.close(segments.len(), q, t, x));
    Ok(HybridArc { segments, jumps, termination })
}

/// Settings of [`practical_stability_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePlan {
    /// Disturbance bounds to try; a `δ = 0` row is always added.
    pub ladder: Vec<f64>,
    /// Signal shape. Random shapes get seed `seed + start_id`.
    pub kind: DisturbanceKind,
    pub starts: Vec<HybridState>,
    pub horizon: f64,
    /// Start of the window whose sup distance is the tail offset.
    pub tail_from: f64,
    /// Allowed tail offset at `δ = 0`.
    pub epsilon: f64,
    pub bounds: CompactBox,
    pub options: PerturbOptions,
}

impl ProbePlan {
    /// Ladder `{1e-2, 1e-3, 1e-4}`, horizon 20, tail window `[15, 20]`.
    pub fn standard(kind: DisturbanceKind, starts: Vec<HybridState>) -> Self {
        Self {
            ladder: vec![1e-2, 1e-3, 1e-4],
            kind,
            starts,
            horizon: 20.0,
            tail_from: 15.0,
            epsilon: 1e-6,
            bounds: CompactBox::default(),
            options: PerturbOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub delta: f64,
    pub start_id: usize,
    pub tail_offset: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    /// Rows grouped by decreasing `δ`, starts in plan order.
    pub rows: Vec<ProbeRow>,
    /// Per start, the number of adjacent ladder pairs where the smaller `δ`
    /// has the larger tail offset, summed over starts.
    pub inversions: usize,
    /// Largest tail offset of the `δ = 0` row.
    pub zero_offset: f64,
    /// At most one inversion.
    pub monotone: bool,
    /// `zero_offset ≤ ε`.
    pub vanishing: bool,
}

impl ProbeReport {
    /// Largest tail offset per `δ`, in ladder order.
    pub fn max_by_delta(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((d, m)) if *d == r.delta => *m = m.max(r.tail_offset),
                _ => out.push((r.delta, r.tail_offset)),
            }
        }
        out
    }
}

/// Uniform starts in `[0, 1]²` with a uniform mode, kept when in `C`.
pub fn random_starts(p: &NetworkParams, n: usize, seed: u64) -> Vec<HybridState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = HybridState::new(rng.gen(), rng.gen(), rng.gen(), rng.gen());
        if in_flow_set(&z, p) {
            out.push(z);
        }
    }
    out
}

fn tail_offset(arc: &HybridArc<Mode>, cycle: &LimitCycle, tail_from: f64) -> Result<f64, AnalysisError> {
    let mut sup = f64::NEG_INFINITY;
    for seg in arc.segments.iter().filter(|s| s.t_end >= tail_from) {
        let line = analysis::piece_line(cycle, seg.mode)?;
        if let SegmentPath::Sampled { times, states } = &seg.path {
            for (t, x) in times.iter().zip(states) {
                if *t >= tail_from {
                    sup = sup.max(line.distance(*x));
                }
            }
        }
    }
    Ok(if sup.is_finite() { sup } else { f64::INFINITY })
}

/// Runs every start under every `δ` of the ladder and summarizes how the
/// eventual distance to the extended cycle set depends on `δ`.
pub fn practical_stability_probe(p: &NetworkParams, plan: &ProbePlan) -> Result<ProbeReport, PerturbError> {
    let check = analysis::check_stability_condition(p)?;
    if !check.holds {
        return Err(PerturbError::ConditionUnmet(check.margin1, check.margin3));
    }
    let cycle = analysis::compute_limit_cycle(p)?;
    let mut ladder: Vec<f64> = plan.ladder.clone();
    if !ladder.contains(&0.0) {
        ladder.push(0.0);
    }
    ladder.sort_by(|a, b| b.total_cmp(a));
    ladder.dedup();

    let jobs: Vec<(f64, usize)> =
        ladder.iter().flat_map(|&d| (0..plan.starts.len()).map(move |i| (d, i))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(delta, start_id)| {
            let kind = match &plan.kind {
                DisturbanceKind::PiecewiseConstantRandom { seed, dwell } => {
                    DisturbanceKind::PiecewiseConstantRandom { seed: seed.wrapping_add(start_id as u64), dwell: *dwell }
                }
                other => other.clone(),
            };
            let spec = DisturbanceSpec::new(kind, delta, delta);
            let arc = simulate_perturbed(
                plan.starts[start_id],
                p,
                &spec,
                plan.bounds,
                Budget::horizon(plan.horizon),
                plan.options,
            )?;
            let tail_offset = tail_offset(&arc, &cycle, plan.tail_from)?;
            Ok(ProbeRow { delta, start_id, tail_offset, termination: arc.termination })
        })
        .collect::<Result<Vec<_>, PerturbError>>()?;

    let n = plan.starts.len();
    let mut inversions = 0;
    for start in 0..n {
        for k in 1..ladder.len() {
            if rows[k * n + start].tail_offset > rows[(k - 1) * n + start].tail_offset {
                inversions += 1;
            }
        }
    }
    let zero_offset = rows[(ladder.len() - 1) * n..].iter().map(|r| r.tail_offset).fold(0.0, f64::max);
    Ok(ProbeReport { rows, inversions, zero_offset, monotone: inversions <= 1, vanishing: zero_offset <= plan.epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_respect_bounds() {
        let kinds = [
            DisturbanceKind::Constant { d1_dir: [3.0, 4.0], d2_dir: [0.1, 0.0] },
            DisturbanceKind::PiecewiseConstantRandom { seed: 7, dwell: 0.05 },
            DisturbanceKind::Sinusoid { amplitude: [1.0; 4], frequency: [1.0, 2.0, 0.5, 3.0], phase: [0.0, 1.0, 2.0, 3.0] },
        ];
        for kind in kinds {
            let spec = DisturbanceSpec::new(kind, 0.01, 0.02);
            let mut sig = spec.signal();
            for i in 0..2000 {
                let (d1, d2) = sig.sample(i as f64 * 0.0037, Mode::new(i % 2 == 0, i % 3 == 0));
                assert!(d1[0].hypot(d1[1]) <= 0.01 * (1.0 + 1e-15));
                assert!(d2[0].hypot(d2[1]) <= 0.02 * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn random_signal_is_reproducible() {
        let spec = DisturbanceSpec::new(DisturbanceKind::PiecewiseConstantRandom { seed: 3, dwell: 0.1 }, 1.0, 1.0);
        let (mut a, mut b) = (spec.signal(), spec.signal());
        let q = Mode::new(false, false);
        let forward: Vec<_> = (0..50).map(|i| a.sample(i as f64 * 0.07, q)).collect();
        let backward: Vec<_> = (0..50).rev().map(|i| b.sample(i as f64 * 0.07, q)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_eq!(a.sample(0.01, q), a.sample(0.09, q));
        assert_ne!(a.sample(0.09, q), a.sample(0.11, q));
    }

    #[test]
    fn rate_offset_depends_on_mode() {
        let spec = DisturbanceSpec::new(DisturbanceKind::RateOffset { k1_delta: 0.1, k2_delta: -0.1 }, 0.0, 0.2);
        let mut sig = spec.signal();
        assert_eq!(sig.sample(0.0, Mode::new(false, false)), ([0.0; 2], [0.1, 0.0]));
        assert_eq!(sig.sample(0.0, Mode::new(true, true)), ([0.0; 2], [0.0, -0.1]));
        let too_big = DisturbanceSpec::new(DisturbanceKind::RateOffset { k1_delta: 0.2, k2_delta: 0.2 }, 0.0, 0.2);
        assert!(matches!(too_big.validate(1e-4), Err(PerturbError::InvalidSpec(_))));
    }

    #[test]
    fn dwell_floor_is_enforced() {
        let spec = DisturbanceSpec::new(DisturbanceKind::PiecewiseConstantRandom { seed: 0, dwell: 5e-4 }, 0.1, 0.1);
        assert!(spec.validate(1e-4).is_err());
        assert!(spec.validate(5e-5).is_ok());
    }

    #[test]
    fn start_outside_box_is_rejected() {
        let err = simulate_perturbed(
            HybridState::new(0.3, 2.5, false, false),
            &NetworkParams::nominal(),
            &DisturbanceSpec::none(),
            CompactBox::default(),
            Budget::horizon(1.0),
            PerturbOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, PerturbError::StartOutsideBox(0.3, 2.5));
    }

    #[test]
    fn leaving_the_box_ends_the_arc() {
        // protein 1 heads for u1 = 1 but the box stops at 0.5
        let arc = simulate_perturbed(
            HybridState::new(0.1, 0.0, true, true),
            &NetworkParams::symmetric(1.0, 1.0, 1.0, 0.01),
            &DisturbanceSpec::none(),
            CompactBox { x1_max: 2.0, x2_max: 0.5 },
            Budget::horizon(10.0),
            PerturbOptions::default(),
        )
        .unwrap();
        assert_eq!(arc.termination, Termination::LeftDomain);
        assert!(arc.final_state().0[1] > 0.5);
        arc.check_domain().unwrap();
    }
}
