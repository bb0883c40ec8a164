mod common;

use common::{random_start, rng, sup_dist};
use hh_core::analysis::compute_limit_cycle;
use hh_core::hybrid::{Budget, SegmentPath, Termination};
use hh_core::model::{GeneNetwork, HybridState, Mode, NetworkParams};
use hh_core::perturb::{
    practical_stability_probe, random_starts, simulate_perturbed, CompactBox, DisturbanceKind, DisturbanceSpec,
    PerturbOptions, ProbePlan,
};

fn sampled_points(arc: &hh_core::hybrid::HybridArc<Mode>) -> Vec<(f64, [f64; 2], Mode)> {
    let mut out = Vec::new();
    for seg in &arc.segments {
        if let SegmentPath::Sampled { times, states } = &seg.path {
            out.extend(times.iter().zip(states).map(|(t, x)| (*t, *x, seg.mode)));
        }
    }
    out
}

fn max_deviation_from_nominal(p: &NetworkParams, z0: HybridState, spec: &DisturbanceSpec, horizon: f64) -> f64 {
    let arc =
        simulate_perturbed(z0, p, spec, CompactBox::default(), Budget::horizon(horizon), PerturbOptions::default()).unwrap();
    assert_eq!(arc.termination, Termination::ReachedTimeBudget);
    arc.check_domain().unwrap();
    let nominal = GeneNetwork::new(*p).unwrap().simulate_one(z0, Budget::horizon(horizon)).unwrap();
    sampled_points(&arc)
        .into_iter()
        .map(|(t, x, _)| sup_dist(x, nominal.state_at_time(t).unwrap().0))
        .fold(0.0, f64::max)
}

#[test]
fn zero_disturbance_reproduces_closed_form() {
    let p = NetworkParams::nominal();
    let mut r = rng(21);
    for _ in 0..3 {
        let z0 = random_start(&mut r, &p);
        let dev = max_deviation_from_nominal(&p, z0, &DisturbanceSpec::none(), 10.0);
        assert!(dev < 1e-7, "deviation {dev}");
    }
}

#[test]
fn rate_offset_equals_reparameterized_network() {
    let p = NetworkParams::nominal();
    let (k1_delta, k2_delta) = (0.05, -0.03);
    let spec = DisturbanceSpec::new(DisturbanceKind::RateOffset { k1_delta, k2_delta }, 0.0, 0.1);
    let shifted = NetworkParams { k1: p.k1 + k1_delta, k2: p.k2 + k2_delta, ..p };
    let z0 = HybridState::new(0.4, 0.4, false, false);
    let arc = simulate_perturbed(z0, &p, &spec, CompactBox::default(), Budget::horizon(10.0), PerturbOptions::default()).unwrap();
    let nominal = GeneNetwork::new(shifted).unwrap().simulate_one(z0, Budget::horizon(10.0)).unwrap();
    for (t, x, _) in sampled_points(&arc) {
        assert!(sup_dist(x, nominal.state_at_time(t).unwrap().0) < 1e-7);
    }
}

#[test]
fn synthesis_sweep_settles_on_displaced_cycles() {
    let p = NetworkParams::nominal();
    let nominal = compute_limit_cycle(&p).unwrap();
    for k in [0.8, 0.9, 1.1, 1.2] {
        let d = k - 1.0;
        let spec = DisturbanceSpec::new(DisturbanceKind::RateOffset { k1_delta: d, k2_delta: d }, 0.0, d.abs() * 2f64.sqrt());
        let arc = simulate_perturbed(
            HybridState::new(0.4, 0.4, false, false),
            &p,
            &spec,
            CompactBox::default(),
            Budget::horizon(20.0),
            PerturbOptions::default(),
        )
        .unwrap();
        let displaced = compute_limit_cycle(&NetworkParams::symmetric(k, k, 1.0, 0.01)).unwrap();
        let (x, q) = arc.final_state();
        assert!(displaced.residual(x, q) < 1e-5, "k = {k}");
        let shift = displaced.vertices.iter().zip(&nominal.vertices).map(|(a, b)| sup_dist(*a, *b)).fold(0.0, f64::max);
        assert!(shift < 0.1, "k = {k}: shift {shift}");
    }
}

#[test]
fn small_noise_stays_in_box() {
    let p = NetworkParams::nominal();
    let kinds = [
        DisturbanceKind::PiecewiseConstantRandom { seed: 4, dwell: 0.05 },
        DisturbanceKind::Sinusoid { amplitude: [1.0; 4], frequency: [3.0, 5.0, 7.0, 11.0], phase: [0.0, 0.5, 1.0, 1.5] },
    ];
    let mut r = rng(30);
    for kind in kinds {
        let z0 = random_start(&mut r, &p);
        let spec = DisturbanceSpec::new(kind, 1e-2, 1e-2);
        let arc =
            simulate_perturbed(z0, &p, &spec, CompactBox::default(), Budget::horizon(100.0), PerturbOptions::default()).unwrap();
        assert_eq!(arc.termination, Termination::ReachedTimeBudget);
        assert!(sampled_points(&arc).iter().all(|(_, x, _)| CompactBox::default().contains(*x)));
    }
}

#[test]
fn noise_shapes_give_comparable_tails() {
    let p = NetworkParams::nominal();
    let starts = random_starts(&p, 4, 8);
    let mut peaks = Vec::new();
    for kind in [
        DisturbanceKind::PiecewiseConstantRandom { seed: 1, dwell: 0.05 },
        DisturbanceKind::Sinusoid { amplitude: [1.0; 4], frequency: [3.0, 5.0, 7.0, 11.0], phase: [0.0, 0.5, 1.0, 1.5] },
    ] {
        let plan = ProbePlan { ladder: vec![1e-2], ..ProbePlan::standard(kind, starts.clone()) };
        let report = practical_stability_probe(&p, &plan).unwrap();
        peaks.push(report.max_by_delta()[0].1);
    }
    let ratio = peaks[0] / peaks[1];
    assert!((0.1..10.0).contains(&ratio), "{peaks:?}");
}
