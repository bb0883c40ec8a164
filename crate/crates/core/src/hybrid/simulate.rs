use serde::{Deserialize, Serialize};

use super::{
    time_to_level, FlowSegment, HybridArc, HybridError, HybridSystem, HybridTime, Jump, Point,
    SegmentPath, Termination, EPS_EVENT, EPS_ZENO, J_ZENO, MAX_BRANCHES,
};

/// Simulation horizon in flow time and jump count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub t_max: f64,
    pub j_max: usize,
}

impl Budget {
    pub fn new(t_max: f64, j_max: usize) -> Self {
        Self { t_max, j_max }
    }

    /// A flow-time horizon with a jump budget generous enough never to bind
    /// before it for non-Zeno systems.
    pub fn horizon(t_max: f64) -> Self {
        Self { t_max, j_max: 1_000_000 }
    }
}

/// Selection among jump-map values when several guards are active at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpPolicy {
    /// Fire the lowest-indexed active guard (`g1` in the gene model).
    #[default]
    PreferQ1,
    /// Fire the highest-indexed active guard (`g2` in the gene model).
    PreferQ2,
    /// Fork: one arc per active guard.
    Both,
}

#[derive(Clone)]
struct Partial<M> {
    segments: Vec<FlowSegment<M>>,
    jumps: Vec<Jump<M>>,
    x: Point,
    mode: M,
    t: f64,
    seg_start: (f64, Point),
}

impl<M: Copy> Partial<M> {
    fn close_segment<S: HybridSystem<Mode = M>>(&mut self, system: &S) {
        let (t_start, x_start) = self.seg_start;
        self.segments.push(FlowSegment {
            j: self.segments.len(),
            t_start,
            t_end: self.t,
            mode: self.mode,
            x_start,
            x_end: self.x,
            path: SegmentPath::Exact { gains: system.gains(self.mode) },
        });
    }

    fn apply_jump<S: HybridSystem<Mode = M>>(&mut self, system: &S, guard: usize, post: M) {
        self.close_segment(system);
        self.jumps.push(Jump {
            time: HybridTime::new(self.t, self.jumps.len()),
            guard,
            x: self.x,
            pre: self.mode,
            post,
        });
        self.mode = post;
        self.seg_start = (self.t, self.x);
    }

    fn zeno_suspected(&self) -> bool {
        let n = self.jumps.len();
        n >= J_ZENO && self.t - self.jumps[n - J_ZENO].time.t <= EPS_ZENO
    }

    fn finish<S: HybridSystem<Mode = M>>(mut self, system: &S, termination: Termination) -> HybridArc<M> {
        self.close_segment(system);
        HybridArc { segments: self.segments, jumps: self.jumps, termination }
    }
}

/// Computes solutions of `system` from `(x0, mode0)`.
///
/// Flows stay inside the flow set and stop exactly at the first guard
/// crossing; the state then jumps whenever it lies in the jump set. With
/// [`JumpPolicy::Both`] every simultaneous-guard point forks the solution, so
/// more than one arc may be returned (at most [`MAX_BRANCHES`]); the other
/// policies always return exactly one arc.
pub fn simulate<S: HybridSystem>(
    system: &S,
    x0: Point,
    mode0: S::Mode,
    budget: Budget,
    policy: JumpPolicy,
) -> Result<Vec<HybridArc<S::Mode>>, HybridError> {
    if !(budget.t_max > 0.0) || budget.j_max == 0 {
        return Err(HybridError::InvalidBudget { t_max: budget.t_max, j_max: budget.j_max });
    }
    if let Some((guard, eta)) = system
        .guards(mode0)
        .iter()
        .map(|g| g.eta(x0))
        .enumerate()
        .find(|(_, eta)| *eta > EPS_EVENT)
    {
        return Err(HybridError::OutsideDomain { guard, eta });
    }

    let mut pending = vec![Partial {
        segments: Vec::new(),
        jumps: Vec::new(),
        x: x0,
        mode: mode0,
        t: 0.0,
        seg_start: (0.0, x0),
    }];
    let mut arcs = Vec::new();
    while let Some(partial) = pending.pop() {
        let live = arcs.len() + pending.len() + 1;
        let arc = run_branch(system, partial, budget, policy, &mut pending, live);
        arcs.push(arc);
    }
    Ok(arcs)
}

fn run_branch<S: HybridSystem>(
    system: &S,
    mut p: Partial<S::Mode>,
    budget: Budget,
    policy: JumpPolicy,
    pending: &mut Vec<Partial<S::Mode>>,
    mut live: usize,
) -> HybridArc<S::Mode> {
    loop {
        let guards = system.guards(p.mode);
        let etas: Vec<f64> = guards.iter().map(|g| g.eta(p.x)).collect();
        if etas.iter().any(|&e| e > EPS_EVENT) {
            return p.finish(system, Termination::LeftDomain);
        }
        let active: Vec<usize> = (0..guards.len()).filter(|&i| etas[i].abs() <= EPS_EVENT).collect();
        if !active.is_empty() {
            if p.jumps.len() >= budget.j_max {
                return p.finish(system, Termination::ReachedJumpBudget);
            }
            let chosen = match policy {
                JumpPolicy::PreferQ1 => active[0],
                JumpPolicy::PreferQ2 => active[active.len() - 1],
                JumpPolicy::Both => {
                    for &other in &active[1..] {
                        if live >= MAX_BRANCHES {
                            break;
                        }
                        let mut fork = p.clone();
                        fork.apply_jump(system, other, system.successor(p.mode, other));
                        pending.push(fork);
                        live += 1;
                    }
                    active[0]
                }
            };
            p.apply_jump(system, chosen, system.successor(p.mode, chosen));
            if p.zeno_suspected() {
                return p.finish(system, Termination::ZenoSuspected);
            }
            continue;
        }
        if p.t >= budget.t_max {
            return p.finish(system, Termination::ReachedTimeBudget);
        }

        let gains = system.gains(p.mode);
        let next = guards
            .iter()
            .filter_map(|g| time_to_level(p.x[g.axis], gains[g.axis], g.level).map(|s| (s, g)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let remaining = budget.t_max - p.t;
        match next {
            Some((s, guard)) if s <= remaining => {
                p.x = [gains[0].advance(p.x[0], s), gains[1].advance(p.x[1], s)];
                p.x[guard.axis] = guard.level;
                p.t += s;
            }
            _ => {
                p.x = [gains[0].advance(p.x[0], remaining), gains[1].advance(p.x[1], remaining)];
                p.t = budget.t_max;
            }
        }
    }
}
