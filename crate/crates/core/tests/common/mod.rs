#![allow(dead_code)]

use hh_core::analysis::{case_of, Case};
use hh_core::hybrid::Point;
use hh_core::model::{eta1, eta2, flow_map, HybridState, Mode, NetworkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random admissible parameters in the oscillating regime.
pub fn random_case5(rng: &mut ChaCha8Rng, equal_gamma: bool) -> NetworkParams {
    loop {
        let theta1 = rng.gen_range(0.2..1.0);
        let theta2 = rng.gen_range(0.2..1.0);
        let h1 = rng.gen_range(0.002..0.05);
        let h2 = rng.gen_range(0.002..0.05);
        let gamma1 = rng.gen_range(0.3..3.0);
        let gamma2 = if equal_gamma { gamma1 } else { rng.gen_range(0.3..3.0) };
        let u1 = rng.gen_range(theta1 + h1 + 0.02..3.0 * theta1 + 0.1);
        let u2 = rng.gen_range(theta2 + h2 + 0.02..3.0 * theta2 + 0.1);
        let p = NetworkParams::new(u1 * gamma1, u2 * gamma2, gamma1, gamma2, theta1, theta2, h1, h2);
        if case_of(&p) == Case::Case5 {
            return p;
        }
    }
}

/// Random admissible parameters with a single equilibrium `z1*`.
pub fn random_case1(rng: &mut ChaCha8Rng) -> NetworkParams {
    loop {
        let theta1 = rng.gen_range(0.2..1.0);
        let theta2 = rng.gen_range(0.2..1.0);
        let h1 = rng.gen_range(0.002..0.05);
        let h2 = rng.gen_range(0.002..0.05);
        let gamma1 = rng.gen_range(0.3..3.0);
        let gamma2 = rng.gen_range(0.3..3.0);
        let u1 = rng.gen_range(theta1 + h1 + 0.02..3.0 * theta1 + 0.1);
        let u2 = rng.gen_range(0.05..theta2 + h2 - 0.01);
        let p = NetworkParams::new(u1 * gamma1, u2 * gamma2, gamma1, gamma2, theta1, theta2, h1, h2);
        if case_of(&p) == Case::Case1 {
            return p;
        }
    }
}

/// Random state in `[0, 1]²` with a random mode, inside `C`.
pub fn random_start(rng: &mut ChaCha8Rng, p: &NetworkParams) -> HybridState {
    loop {
        let z = HybridState::new(rng.gen(), rng.gen(), rng.gen(), rng.gen());
        if eta1(z.x[0], z.q.q1, p) < 0.0 && eta2(z.x[1], z.q.q2, p) < 0.0 {
            return z;
        }
    }
}

fn rk4_step(p: &NetworkParams, x: Point, q: Mode, h: f64) -> Point {
    let f = |y: Point| {
        let d = flow_map(&HybridState { x: y, q }, p);
        [d[0], d[1]]
    };
    let k1 = f(x);
    let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
    let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
    let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn fired(p: &NetworkParams, x: Point, q: Mode) -> Option<usize> {
    if eta1(x[0], q.q1, p) >= 0.0 {
        Some(0)
    } else if eta2(x[1], q.q2, p) >= 0.0 {
        Some(1)
    } else {
        None
    }
}

/// Fixed-step RK4 with bisection event location, written directly against
/// the flow map and switching functions. Returns `x` at multiples of
/// `sample_dt` up to `t_max`.
pub fn rk4_oracle(p: &NetworkParams, z0: HybridState, t_max: f64, step: f64, sample_dt: f64) -> Vec<(f64, Point)> {
    let (mut t, mut x, mut q) = (0.0, z0.x, z0.q);
    let mut out = vec![(0.0, x)];
    let mut k = 1;
    while (k as f64) * sample_dt <= t_max + 1e-12 {
        let target = k as f64 * sample_dt;
        loop {
            while let Some(i) = fired(p, x, q) {
                q = if i == 0 { Mode::new(!q.q1, q.q2) } else { Mode::new(q.q1, !q.q2) };
            }
            if t >= target {
                break;
            }
            let h = step.min(target - t);
            let next = rk4_step(p, x, q, h);
            if fired(p, next, q).is_some() {
                let (mut lo, mut hi) = (0.0, h);
                while hi - lo > 1e-14 {
                    let mid = 0.5 * (lo + hi);
                    if fired(p, rk4_step(p, x, q, mid), q).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                x = rk4_step(p, x, q, hi);
                t += hi;
            } else {
                x = next;
                t = if h < step { target } else { t + h };
            }
        }
        out.push((target, x));
        k += 1;
    }
    out
}

pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn sup_dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}
