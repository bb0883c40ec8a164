mod common;

use std::time::{Duration, Instant};

use common::{random_case1, random_case5, rk4_oracle, rng, sup_dist};
use hh_core::analysis::{classify_equilibria, compute_limit_cycle, piece_line, rho_fixed_point};
use hh_core::certificate::{run_certificate, JUMP_TOL};
use hh_core::hybrid::{Budget, Termination};
use hh_core::model::{GeneNetwork, HybridState, Mode, NetworkParams};
use hh_core::perturb::{practical_stability_probe, random_starts, DisturbanceKind, ProbePlan};

fn report(n: usize, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n}: {detail}");
}

#[test]
fn criterion_01_limit_cycle_numbers() {
    let start = Instant::now();
    let c = compute_limit_cycle(&NetworkParams::nominal()).unwrap();
    let elapsed = start.elapsed();
    let vertices = [[0.4966, 0.49], [0.61, 0.3796], [0.692, 0.51], [0.59, 0.5822]];
    let times = [0.2552, 0.2359, 0.1594, 0.1724];
    let vertex_err = c.vertices.iter().zip(vertices).map(|(v, e)| sup_dist(*v, e)).fold(0.0, f64::max);
    let time_err = c.times.iter().zip(times).map(|(t, e)| (t - e).abs()).fold((c.period - 0.8230).abs(), f64::max);
    let ok = vertex_err <= 1e-3 && time_err <= 1e-3 && elapsed < Duration::from_secs(1);
    report(1, ok, format!("vertex err {vertex_err:.2e}, time err {time_err:.2e}, {elapsed:?}"));
}

#[test]
fn criterion_02_segment_lines() {
    let c = compute_limit_cycle(&NetworkParams::nominal()).unwrap();
    let expected = [(-0.973381, 0.973381), (1.590722, -0.590722), (-0.7081296, 1.0), (0.9871896, -0.000238)];
    let mut worst: f64 = 0.0;
    let mut failing = Vec::new();
    for (i, (slope, intercept)) in expected.into_iter().enumerate() {
        let line = piece_line(&c, Mode::CYCLE[i]).unwrap();
        let err = (line.slope - slope).abs().max((line.intercept - intercept).abs());
        worst = worst.max(err);
        if err > 1e-4 {
            failing.push(format!("S{} got x2 = {:.7}x1 + {:.7}", i + 1, line.slope, line.intercept));
        }
    }
    report(2, failing.is_empty(), format!("worst err {worst:.2e} {failing:?}"));
}

#[test]
fn criterion_03_classification_matches_simulation() {
    struct Scenario {
        fig: usize,
        k1: f64,
        k2: f64,
        h: f64,
        z0: HybridState,
        // index into the classified equilibria: 0 is z1*, last is z2*
        want_z1: bool,
    }
    let scenarios = [
        Scenario { fig: 3, k1: 0.7, k2: 0.4, h: 0.01, z0: HybridState::new(0.4, 0.4, false, false), want_z1: true },
        Scenario { fig: 4, k1: 0.4, k2: 0.7, h: 0.01, z0: HybridState::new(0.7, 0.3, true, false), want_z1: false },
        Scenario { fig: 5, k1: 0.601, k2: 0.501, h: 0.02, z0: HybridState::new(0.7, 0.3, true, false), want_z1: true },
        Scenario { fig: 6, k1: 0.601, k2: 0.501, h: 0.02, z0: HybridState::new(0.7, 0.7, true, true), want_z1: false },
        Scenario { fig: 8, k1: 0.61, k2: 1.0, h: 0.02, z0: HybridState::new(0.7, 0.3, true, false), want_z1: false },
    ];
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for s in scenarios {
        let p = NetworkParams::symmetric(s.k1, s.k2, 1.0, s.h);
        let rep = classify_equilibria(&p).unwrap();
        let target = if s.want_z1 { rep.points.first() } else { rep.points.last() };
        let Some(target) = target.copied() else {
            ok = false;
            details.push(format!("fig {} has no equilibrium ({:?})", s.fig, rep.case));
            continue;
        };
        let is_z1 = target.q == Mode::new(true, false);
        let (x, q) = GeneNetwork::new(p).unwrap().simulate_one(s.z0, Budget::horizon(30.0)).unwrap().final_state();
        let err = sup_dist(x, target.x);
        let hit = is_z1 == s.want_z1 && q == target.q && err <= 1e-4;
        ok &= hit;
        details.push(format!("fig {} {:?} err {err:.1e}", s.fig, rep.case));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(5);
    report(3, ok, format!("{}, {elapsed:?}", details.join("; ")));
}

#[test]
fn criterion_04_cycle_invariance() {
    let p = NetworkParams::nominal();
    let c = compute_limit_cycle(&p).unwrap();
    let z0 = HybridState { x: c.vertices[0], q: Mode::new(false, false) };
    let arc = GeneNetwork::new(p).unwrap().simulate_one(z0, Budget::horizon(c.period)).unwrap();
    let (x, q) = arc.final_state();
    let err = sup_dist(x, c.vertices[0]);
    let ok = err <= 1e-9 && arc.jump_count() == 4 && q == z0.q;
    report(4, ok, format!("closure err {err:.2e}, {} jumps", arc.jump_count()));
}

#[test]
fn criterion_05_certificate_contraction() {
    let p = NetworkParams::nominal();
    let mut violations = 0;
    let mut worst_final: f64 = 0.0;
    for z0 in random_starts(&p, 100, 2024) {
        let tr = match run_certificate(z0, &p, 20.0) {
            Ok(tr) => tr,
            Err(e) => {
                violations += 1;
                println!("  start {z0:?}: {e}");
                continue;
            }
        };
        for w in tr.samples.windows(2) {
            if w[1].j == w[0].j + 1 && w[1].dist > w[0].dist + JUMP_TOL {
                violations += 1;
            }
        }
        for s in &tr.samples {
            if s.dist > s.bound * (1.0 + 1e-9) + 1e-12 {
                violations += 1;
            }
        }
        let last = tr.final_sample();
        let allowed = (-20.0f64).exp() * tr.dist0 + 1e-9;
        if last.d_stilde > allowed {
            violations += 1;
        }
        worst_final = worst_final.max(last.d_stilde);
    }
    report(5, violations == 0, format!("{violations} violations, worst final distance {worst_final:.2e}"));
}

#[test]
fn criterion_06_non_zeno_dwell() {
    let p = NetworkParams::nominal();
    let net = GeneNetwork::new(p).unwrap();
    let floor = 2.0 * p.h1.min(p.h2) - 1e-9;
    let mut shortest = f64::INFINITY;
    for z0 in random_starts(&p, 100, 2024) {
        let arc = net.simulate_one(z0, Budget::horizon(20.0)).unwrap();
        for w in arc.jumps.windows(2).skip(1) {
            let d = (w[1].x[0] - w[0].x[0]).abs().max((w[1].x[1] - w[0].x[1]).abs());
            shortest = shortest.min(d);
        }
    }
    report(6, shortest >= floor, format!("smallest displacement {shortest:.6}"));
}

#[test]
fn criterion_07_oracle_equivalence() {
    let mut r = rng(77);
    let mut worst: f64 = 0.0;
    for draw in 0..40 {
        let p = if draw < 20 { random_case5(&mut r, false) } else { random_case1(&mut r) };
        let z0 = common::random_start(&mut r, &p);
        let arc = GeneNetwork::new(p).unwrap().simulate_one(z0, Budget::horizon(10.0)).unwrap();
        for (t, x) in rk4_oracle(&p, z0, 10.0, 1e-4, 0.01) {
            worst = worst.max(sup_dist(x, arc.state_at_time(t).unwrap().0));
        }
    }
    report(7, worst <= 1e-7, format!("sup-norm gap {worst:.2e}"));
}

#[test]
fn criterion_08_hysteresis_shrink() {
    let mut prev: Option<(f64, f64)> = None;
    let mut ok = true;
    let mut details = Vec::new();
    for h in [1e-2, 1e-3, 1e-4] {
        let c = compute_limit_cycle(&NetworkParams::symmetric(1.0, 1.0, 1.0, h)).unwrap();
        let (lo, hi) = c.bounding_box();
        let (w, ht) = (hi[0] - lo[0], hi[1] - lo[1]);
        if let Some((pw, ph)) = prev {
            ok &= w < pw && ht < ph;
        }
        prev = Some((w, ht));
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let off = sup_dist(center, [0.6, 0.5]);
        ok &= off <= 2.0 * h;
        details.push(format!("h={h:.0e} box {w:.2e}x{ht:.2e} center off {off:.2e}"));
    }
    report(8, ok, details.join("; "));
}

#[test]
fn criterion_09_perturbation_ladder() {
    let p = NetworkParams::nominal();
    let start = Instant::now();
    let plan = ProbePlan::standard(
        DisturbanceKind::PiecewiseConstantRandom { seed: 9, dwell: 0.05 },
        random_starts(&p, 20, 99),
    );
    let rep = practical_stability_probe(&p, &plan).unwrap();
    let elapsed = start.elapsed();
    let left = rep.rows.iter().filter(|r| r.termination != Termination::ReachedTimeBudget).count();
    let ok = rep.monotone && rep.zero_offset <= 1e-6 && left == 0 && elapsed < Duration::from_secs(60);
    report(
        9,
        ok,
        format!(
            "{} inversions, zero row {:.2e}, max by delta {:?}, {elapsed:?}",
            rep.inversions,
            rep.zero_offset,
            rep.max_by_delta()
        ),
    );
}

#[test]
fn criterion_10_unequal_decay_cycle() {
    let p = NetworkParams::new(5.0, 1.0, 5.0, 1.0, 0.6, 0.5, 0.01, 0.01);
    let net = GeneNetwork::new(p).unwrap();
    let fixed = rho_fixed_point(&p);
    let c = compute_limit_cycle(&p).unwrap();
    let z0 = HybridState { x: c.vertices[0], q: Mode::new(false, false) };
    let arc = net.simulate_one(z0, Budget::horizon(c.period)).unwrap();
    let closure = sup_dist(arc.final_state().0, c.vertices[0]);
    let mut ok = fixed.is_ok() && closure <= 1e-6 && arc.jump_count() == 4;
    let mut r = rng(12);
    let mut details = Vec::new();
    for _ in 0..3 {
        let z = common::random_start(&mut r, &p);
        let arc = net.simulate_one(z, Budget::horizon(10.0)).unwrap();
        // Poincaré returns into (0,0) all sit on x2 = θ2 − h2
        let gaps: Vec<f64> = arc
            .jumps
            .iter()
            .filter(|j| j.post == Mode::new(false, false))
            .map(|j| (j.x[0] - c.vertices[0][0]).abs())
            .collect();
        let decreasing = gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let converged = gaps.last().is_some_and(|g| *g < 1e-6);
        ok &= gaps.len() >= 3 && decreasing && converged;
        details.push(format!("{} returns, last gap {:.1e}", gaps.len(), gaps.last().copied().unwrap_or(f64::NAN)));
    }
    report(10, ok, format!("closure {closure:.2e}; {}", details.join("; ")));
}
