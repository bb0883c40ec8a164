mod common;

use common::{dist, random_start, rng};
use hh_core::analysis::{compute_limit_cycle, LimitCycle};
use hh_core::certificate::{dist_to_stilde, line_of_mode, run_certificate, shadow_jump, CertificateError};
use hh_core::model::{HybridState, Mode, NetworkParams};
use rand::Rng;

fn nominal_cycle() -> LimitCycle {
    compute_limit_cycle(&NetworkParams::nominal()).unwrap()
}

#[test]
fn lines_of_the_nominal_cycle() {
    let c = nominal_cycle();
    let l = line_of_mode(Mode::new(false, false), &c).unwrap();
    assert!((l.slope + 0.973381).abs() < 1e-4 && (l.intercept - 0.973381).abs() < 1e-4);
    let l = line_of_mode(Mode::new(true, true), &c).unwrap();
    assert!((l.slope + 0.7081296).abs() < 1e-4 && (l.intercept - 1.0).abs() < 1e-4);
}

#[test]
fn point_line_distance_matches_dense_search() {
    let c = nominal_cycle();
    let q = Mode::new(false, false);
    let l = line_of_mode(q, &c).unwrap();
    let x = [0.4, 0.4];
    let formula = (l.slope * 0.4 + l.intercept - 0.4).abs() / l.slope.hypot(1.0);
    let d = dist_to_stilde(x, q, &c).unwrap();
    assert!((d - formula).abs() < 1e-15);
    let dense = (0..=200_000)
        .map(|i| {
            let s = -1.0 + 3.0 * i as f64 / 200_000.0;
            dist(x, [s, l.slope * s + l.intercept])
        })
        .fold(f64::INFINITY, f64::min);
    assert!(dense >= d - 1e-15 && dense - d < 1e-9);
}

#[test]
fn return_jump_distances_follow_slopes() {
    let c = nominal_cycle();
    let m = c.slopes.unwrap();
    let (pre_q, post_q) = (Mode::new(false, true), Mode::new(false, false));
    let p0 = c.vertices[0];
    let mut r = rng(9);
    for _ in 0..200 {
        let x = [r.gen_range(0.0..p0[0]), p0[1]];
        let zeta_pre = line_of_mode(pre_q, &c).unwrap().project(x);
        let pre = dist(x, zeta_pre);
        let zeta_post = shadow_jump(x, pre_q, post_q, zeta_pre, &c).unwrap();
        let post = dist(x, zeta_post);
        let gap = (x[0] - p0[0]).abs();
        assert!((pre - m[3].abs() * gap / m[3].hypot(1.0)).abs() < 1e-12);
        assert!((post - m[0].abs() * gap / m[0].hypot(1.0)).abs() < 1e-12);
        assert!(post <= pre);
    }
}

#[test]
fn switch_on_jump_does_not_increase_distance() {
    let c = nominal_cycle();
    let (pre_q, post_q) = (Mode::new(false, false), Mode::new(true, false));
    let mut r = rng(10);
    for _ in 0..200 {
        let x = [0.61, r.gen_range(0.0..0.51)];
        let zeta_pre = line_of_mode(pre_q, &c).unwrap().project(x);
        let zeta_post = shadow_jump(x, pre_q, post_q, zeta_pre, &c).unwrap();
        assert!(dist(x, zeta_post) <= dist(x, zeta_pre));
    }
}

#[test]
fn trace_contracts_and_witnesses() {
    let p = NetworkParams::nominal();
    let c = nominal_cycle();
    let tr = run_certificate(HybridState::new(0.4, 0.4, false, false), &p, 10.0).unwrap();
    let last = tr.final_sample();
    assert!(last.dist <= (-10.0f64).exp() * tr.dist0 * (1.0 + 1e-9));
    for w in tr.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(a.d_stilde <= a.dist + 1e-15);
        if a.j == b.j && b.t > a.t {
            // same segment: exact exponential contraction up to coordinate rounding
            let expected = a.dist * (-(b.t - a.t)).exp();
            assert!((b.dist - expected).abs() < 1e-14, "{a:?} {b:?}");
        }
        if b.j == a.j + 1 {
            assert_eq!(a.t, b.t);
            assert!(b.dist <= a.dist + 1e-12);
            // projection is the minimizer: dist equals distance to the new line
            assert!((b.dist - b.d_stilde).abs() < 1e-12);
        }
    }
    let (x, q) = tr.arc.final_state();
    assert!((dist_to_stilde(x, q, &c).unwrap() - last.d_stilde).abs() < 1e-15);
}

#[test]
fn long_run_ends_on_the_cycle() {
    let p = NetworkParams::nominal();
    let c = nominal_cycle();
    let mut r = rng(12);
    for _ in 0..10 {
        let tr = run_certificate(random_start(&mut r, &p), &p, 50.0).unwrap();
        let (x, q) = tr.arc.final_state();
        assert!(c.residual(x, q) < 1e-6);
    }
}

#[test]
fn unequal_decay_is_unsupported() {
    let p = NetworkParams::new(5.0, 1.0, 5.0, 1.0, 0.6, 0.5, 0.01, 0.01);
    let err = run_certificate(HybridState::new(0.4, 0.4, false, false), &p, 1.0).unwrap_err();
    assert!(matches!(err, CertificateError::Analysis(_)));
}
