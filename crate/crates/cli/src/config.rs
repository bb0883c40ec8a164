//! Scenario files.
//!
//! A scenario is a TOML document with the sections `[params]`, `[initial.N]`,
//! `[run]`, and optionally `[disturbance]`, `[box]`, `[probe]` and
//! `[integration]`. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use hh_core::hybrid::{Budget, JumpPolicy};
use hh_core::model::{default_theta_max, in_flow_set, validate_params, HybridState, Mode, NetworkParams};
use hh_core::perturb::{CompactBox, DisturbanceKind, DisturbanceSpec, PerturbOptions};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Classify,
    LimitCycle,
    Certify,
    Perturb,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Simulate => "simulate",
            Command::Classify => "classify",
            Command::LimitCycle => "limit-cycle",
            Command::Certify => "certify",
            Command::Perturb => "perturb",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Settings of a practical-stability probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub ladder: Vec<f64>,
    pub horizon: f64,
    pub tail_from: f64,
    pub epsilon: f64,
    /// Number of random starts drawn in `K ∩ C`. When zero, the `[initial.N]`
    /// states are used.
    pub random_starts: usize,
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub command: Command,
    pub params: NetworkParams,
    /// Initial states keyed by their `[initial.N]` id, in id order.
    pub initial: Vec<(u32, HybridState)>,
    pub budget: Budget,
    pub policy: JumpPolicy,
    pub disturbance: Option<DisturbanceSpec>,
    pub bounds: Option<CompactBox>,
    pub probe: Option<ProbeSettings>,
    pub integration: PerturbOptions,
    pub seed: u64,
    pub output: PathBuf,
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Degenerate zero-hysteresis parameters that skip the usual `h > 0` check.
    pub fn zero_hysteresis(&self) -> bool {
        self.params.h1 == 0.0 || self.params.h2 == 0.0
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    k1: Option<f64>,
    k2: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    h1: Option<f64>,
    h2: Option<f64>,
    theta1_max: Option<f64>,
    theta2_max: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    x1: Option<f64>,
    x2: Option<f64>,
    q1: Option<u8>,
    q2: Option<u8>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t_max: Option<f64>,
    j_max: Option<usize>,
    #[serde(default)]
    policy: JumpPolicy,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisturbance {
    kind: Option<String>,
    delta1: Option<f64>,
    delta2: Option<f64>,
    d1_dir: Option<[f64; 2]>,
    d2_dir: Option<[f64; 2]>,
    seed: Option<u64>,
    dwell: Option<f64>,
    amplitude: Option<[f64; 4]>,
    frequency: Option<[f64; 4]>,
    phase: Option<[f64; 4]>,
    k1_delta: Option<f64>,
    k2_delta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    ladder: Option<Vec<f64>>,
    horizon: Option<f64>,
    tail_from: Option<f64>,
    epsilon: Option<f64>,
    #[serde(default)]
    random_starts: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: Option<RawParams>,
    #[serde(default)]
    initial: BTreeMap<String, RawState>,
    run: Option<RawRun>,
    disturbance: Option<RawDisturbance>,
    #[serde(rename = "box")]
    bounds: Option<CompactBox>,
    probe: Option<RawProbe>,
    integration: Option<PerturbOptions>,
}

/// Collects missing-key messages while pulling required values.
struct Missing<'a>(&'a mut Vec<String>);

impl Missing<'_> {
    fn get<T: Copy + Default>(&mut self, section: &str, key: &str, v: Option<T>) -> T {
        v.unwrap_or_else(|| {
            self.0.push(format!("missing key `{key}` in [{section}]"));
            T::default()
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, column)
}

/// Parses and validates a scenario document for `command`.
pub fn parse_config(text: &str, command: Command) -> Result<Scenario, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    let mut errors = Vec::new();
    let mut warnings = Vec::new();

    let params = match raw.params {
        None => {
            errors.push("missing section [params]".into());
            NetworkParams::nominal()
        }
        Some(rp) => {
            let mut m = Missing(&mut errors);
            let theta1 = m.get("params", "theta1", rp.theta1);
            let theta2 = m.get("params", "theta2", rp.theta2);
            let mut p = NetworkParams::new(
                m.get("params", "k1", rp.k1),
                m.get("params", "k2", rp.k2),
                m.get("params", "gamma1", rp.gamma1),
                m.get("params", "gamma2", rp.gamma2),
                theta1,
                theta2,
                m.get("params", "h1", rp.h1),
                m.get("params", "h2", rp.h2),
            );
            let theta_max = default_theta_max(theta1, theta2);
            p.theta1_max = rp.theta1_max.unwrap_or(theta_max);
            p.theta2_max = rp.theta2_max.unwrap_or(theta_max);
            p
        }
    };
    let params_complete = errors.is_empty();
    if params_complete {
        if let Err(violations) = validate_params(&params) {
            for v in violations {
                if v.is_zero_hysteresis() {
                    let msg = format!("degenerate hysteresis accepted: {v}; expect chattering");
                    log::warn!("{msg}");
                    warnings.push(msg);
                } else {
                    errors.push(v.to_string());
                }
            }
        }
    }

    let mut initial = Vec::new();
    for (key, rs) in raw.initial {
        let section = format!("initial.{key}");
        let Ok(id) = key.parse::<u32>() else {
            errors.push(format!("[{section}]: initial-state ids must be nonnegative integers"));
            continue;
        };
        let mut m = Missing(&mut errors);
        let (x1, x2) = (m.get(&section, "x1", rs.x1), m.get(&section, "x2", rs.x2));
        let (q1, q2) = (m.get(&section, "q1", rs.q1), m.get(&section, "q2", rs.q2));
        let Some(q) = Mode::from_bits(q1, q2) else {
            errors.push(format!("[{section}]: q1 and q2 must be 0 or 1"));
            continue;
        };
        let z = HybridState { x: [x1, x2], q };
        if !(x1 >= 0.0 && x2 >= 0.0 && x1.is_finite() && x2.is_finite()) {
            errors.push(format!("[{section}]: concentrations must be finite and nonnegative"));
        } else if params_complete && !in_flow_set(&z, &params) {
            errors.push(format!("[{section}]: ({x1}, {x2}) in mode {q} is outside the flow set C"));
        }
        initial.push((id, z));
    }
    initial.sort_by_key(|(id, _)| *id);
    let needs_initial = !matches!(command, Command::Classify | Command::LimitCycle);

    let run = raw.run.unwrap_or_default();
    let t_max = match run.t_max {
        Some(t) if t.is_finite() && t >= 0.0 => t,
        Some(t) => {
            errors.push(format!("[run] t_max must be finite and nonnegative, got {t}"));
            0.0
        }
        None if needs_initial => {
            errors.push("missing key `t_max` in [run]".into());
            0.0
        }
        None => 0.0,
    };
    let budget = match run.j_max {
        Some(j) => Budget::new(t_max, j),
        None => Budget::horizon(t_max),
    };

    let integration = raw.integration.unwrap_or_default();
    let opts = &integration;
    if !(opts.step > 0.0 && opts.record_interval >= opts.step && opts.event_tol > 0.0) {
        errors.push("[integration] needs step > 0, record_interval ≥ step, event_tol > 0".into());
    }

    let disturbance = raw.disturbance.map(|rd| build_disturbance(rd, &mut errors));
    if let Some(spec) = &disturbance {
        if let Err(e) = spec.validate(integration.step) {
            errors.push(format!("[disturbance] {e}"));
        }
    }

    if let Some(b) = raw.bounds {
        if !(b.x1_max > 0.0 && b.x2_max > 0.0) {
            errors.push(format!("[box] sides must be positive, got {} × {}", b.x1_max, b.x2_max));
        }
        for (id, z) in &initial {
            if command == Command::Perturb && !b.contains(z.x) {
                errors.push(format!("[initial.{id}] lies outside the box"));
            }
        }
    }

    let probe = raw.probe.map(|rp| {
        let mut m = Missing(&mut errors);
        let horizon = m.get("probe", "horizon", rp.horizon);
        let tail_from = m.get("probe", "tail_from", rp.tail_from);
        let epsilon = m.get("probe", "epsilon", rp.epsilon);
        let ladder = rp.ladder.unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
        if !(0.0 <= tail_from && tail_from < horizon) {
            errors.push("[probe] needs 0 ≤ tail_from < horizon".into());
        }
        if ladder.is_empty() || ladder.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            errors.push("[probe] ladder must hold positive bounds".into());
        }
        ProbeSettings { ladder, horizon, tail_from, epsilon, random_starts: rp.random_starts }
    });

    match command {
        Command::Perturb => {
            if disturbance.is_none() {
                errors.push("perturb needs a [disturbance] section".into());
            }
            let probing_random = probe.as_ref().is_some_and(|p| p.random_starts > 0);
            if initial.is_empty() && !probing_random {
                errors.push("perturb needs at least one [initial.N] state or [probe] random_starts".into());
            }
        }
        Command::Simulate | Command::Certify if initial.is_empty() => {
            errors.push(format!("{command} needs at least one [initial.N] state"));
        }
        _ => {}
    }

    if !errors.is_empty() {
        return Err(ConfigError::Invalid(errors));
    }
    Ok(Scenario {
        command,
        params,
        initial,
        budget,
        policy: run.policy,
        disturbance,
        bounds: raw.bounds,
        probe,
        integration,
        seed: run.seed.unwrap_or(0),
        output: PathBuf::from("hh"),
        warnings,
    })
}

fn build_disturbance(rd: RawDisturbance, errors: &mut Vec<String>) -> DisturbanceSpec {
    let mut m = Missing(errors);
    let delta1 = m.get("disturbance", "delta1", rd.delta1);
    let delta2 = m.get("disturbance", "delta2", rd.delta2);
    let kind_name = rd.kind.clone().unwrap_or_default();
    let provided: Vec<&str> = [
        ("d1_dir", rd.d1_dir.is_some()),
        ("d2_dir", rd.d2_dir.is_some()),
        ("seed", rd.seed.is_some()),
        ("dwell", rd.dwell.is_some()),
        ("amplitude", rd.amplitude.is_some()),
        ("frequency", rd.frequency.is_some()),
        ("phase", rd.phase.is_some()),
        ("k1_delta", rd.k1_delta.is_some()),
        ("k2_delta", rd.k2_delta.is_some()),
    ]
    .into_iter()
    .filter_map(|(k, set)| set.then_some(k))
    .collect();
    let (kind, allowed): (DisturbanceKind, &[&str]) = match kind_name.as_str() {
        "constant" => (
            DisturbanceKind::Constant {
                d1_dir: m.get("disturbance", "d1_dir", rd.d1_dir),
                d2_dir: m.get("disturbance", "d2_dir", rd.d2_dir),
            },
            &["d1_dir", "d2_dir"],
        ),
        "piecewise-constant-random" => (
            DisturbanceKind::PiecewiseConstantRandom {
                seed: rd.seed.unwrap_or(0),
                dwell: m.get("disturbance", "dwell", rd.dwell),
            },
            &["seed", "dwell"],
        ),
        "sinusoid" => (
            DisturbanceKind::Sinusoid {
                amplitude: m.get("disturbance", "amplitude", rd.amplitude),
                frequency: m.get("disturbance", "frequency", rd.frequency),
                phase: rd.phase.unwrap_or([0.0; 4]),
            },
            &["amplitude", "frequency", "phase"],
        ),
        "rate-offset" => (
            DisturbanceKind::RateOffset {
                k1_delta: m.get("disturbance", "k1_delta", rd.k1_delta),
                k2_delta: m.get("disturbance", "k2_delta", rd.k2_delta),
            },
            &["k1_delta", "k2_delta"],
        ),
        "" => {
            errors.push("missing key `kind` in [disturbance]".into());
            return DisturbanceSpec::none();
        }
        other => {
            errors.push(format!(
                "[disturbance] unknown kind `{other}`; expected constant, piecewise-constant-random, sinusoid or rate-offset"
            ));
            return DisturbanceSpec::none();
        }
    };
    for key in provided.into_iter().filter(|k| !allowed.contains(k)) {
        errors.push(format!("[disturbance] key `{key}` does not apply to kind `{kind_name}`"));
    }
    DisturbanceSpec::new(kind, delta1, delta2)
}
