//! Command dispatch.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 validation error,
//! 4 analysis or model error, 5 stability condition unmet, 6 certificate
//! violation, 7 I/O error.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use hh_core::analysis::{
    self, check_stability_condition, classify_equilibria, compute_limit_cycle, AnalysisError, Case, LimitCycle,
    StabilityCheck,
};
use hh_core::certificate::{run_certificate, CertificateError};
use hh_core::hybrid::{classify_arc, ArcStatus, Budget, HybridArc, Termination};
use hh_core::model::{GeneNetwork, HybridState, Mode, ModelError};
use hh_core::perturb::{
    practical_stability_probe, random_starts, simulate_perturbed, DisturbanceKind, DisturbanceSpec, PerturbError,
    ProbePlan,
};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{Command, ConfigError, Scenario};
use crate::emit;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Grid points per flow segment in trajectory CSVs.
    pub density: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { density: 200 }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error("condition unmet: slope margins {:.6} and {:.6} must both be nonnegative", .0.margin1, .0.margin3)]
    ConditionUnmet(StabilityCheck),
    #[error("certificate violation for initial state {id}: {source}")]
    Violation { id: u32, source: CertificateError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Parse { .. }) => 2,
            RunError::Config(ConfigError::Invalid(_)) => 3,
            RunError::Model(_) | RunError::Analysis(_) | RunError::Perturb(_) => 4,
            RunError::ConditionUnmet(_) => 5,
            RunError::Violation { .. } => 6,
            RunError::Io { .. } => 7,
        }
    }
}

/// Files written and the text summary of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Output<'a> {
    prefix: &'a Path,
}

impl Output<'_> {
    fn path(&self, name: &str) -> PathBuf {
        let mut s = self.prefix.as_os_str().to_owned();
        s.push(format!("_{name}"));
        PathBuf::from(s)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), RunError> {
        let path = self.path(name);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
        }
        let file = File::create(&path).map_err(|source| RunError::Io { path: path.clone(), source })?;
        Ok((path, BufWriter::new(file)))
    }

    fn trajectory(&self, name: &str, arc: &HybridArc<Mode>, density: usize) -> Result<PathBuf, RunError> {
        let (path, w) = self.create(name)?;
        emit::emit_trajectory(arc, density, w).map_err(|e| csv_io(&path, e))?;
        Ok(path)
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf, RunError> {
        let (path, w) = self.create(name)?;
        emit::emit_json(value, w).map_err(|source| RunError::Io { path: path.clone(), source })?;
        Ok(path)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> RunError {
    RunError::Io { path: path.to_path_buf(), source: e.into() }
}

/// Runs the scenario and writes its artifacts under `scenario.output`.
pub fn run(scenario: &Scenario, opts: RunOptions) -> Result<Outcome, RunError> {
    let out = Output { prefix: &scenario.output };
    log::info!("running {} with {} initial state(s)", scenario.command, scenario.initial.len());
    match scenario.command {
        Command::Simulate => simulate(scenario, &out, opts),
        Command::Classify => classify(scenario, &out),
        Command::LimitCycle => limit_cycle(scenario, &out, opts),
        Command::Certify => certify(scenario, &out, opts),
        Command::Perturb => perturb(scenario, &out, opts),
    }
}

#[derive(Serialize)]
struct ArcSummary {
    id: u32,
    branch: usize,
    termination: Termination,
    status: ArcStatus,
    jumps: usize,
    end_time: f64,
    final_state: HybridState,
    file: PathBuf,
}

fn summarize(id: u32, branch: usize, arc: &HybridArc<Mode>, file: PathBuf) -> ArcSummary {
    let (x, q) = arc.final_state();
    ArcSummary {
        id,
        branch,
        termination: arc.termination,
        status: classify_arc(arc).status,
        jumps: arc.jump_count(),
        end_time: arc.end_time().t,
        final_state: HybridState { x, q },
        file,
    }
}

fn network(s: &Scenario) -> Result<GeneNetwork, RunError> {
    if s.zero_hysteresis() {
        Ok(GeneNetwork::new_unchecked(s.params))
    } else {
        Ok(GeneNetwork::new(s.params)?)
    }
}

fn write_line(text: &mut String, line: impl std::fmt::Display) {
    let _ = writeln!(text, "{line}");
}

fn simulate(s: &Scenario, out: &Output, opts: RunOptions) -> Result<Outcome, RunError> {
    let net = network(s)?;
    let runs: Vec<Result<Vec<ArcSummary>, RunError>> = s
        .initial
        .par_iter()
        .map(|&(id, z0)| {
            let arcs = net.simulate(z0, s.budget, s.policy)?;
            let many = arcs.len() > 1;
            arcs.iter()
                .enumerate()
                .map(|(b, arc)| {
                    let name = if many { format!("traj_{id}_b{b}.csv") } else { format!("traj_{id}.csv") };
                    Ok(summarize(id, b, arc, out.trajectory(&name, arc, opts.density)?))
                })
                .collect()
        })
        .collect();
    let runs: Vec<ArcSummary> = runs.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let mut files: Vec<PathBuf> = runs.iter().map(|r| r.file.clone()).collect();
    files.push(out.json("simulate.json", &runs)?);
    let mut text = String::new();
    for r in &runs {
        write_line(
            &mut text,
            format_args!(
                "initial {} branch {}: {:?}, {} jumps, t = {:.4}, final x = ({:.6}, {:.6}) q = {}",
                r.id, r.branch, r.status, r.jumps, r.end_time, r.final_state.x[0], r.final_state.x[1], r.final_state.q
            ),
        );
    }
    Ok(Outcome { files, summary: text })
}

fn classify(s: &Scenario, out: &Output) -> Result<Outcome, RunError> {
    let report = classify_equilibria(&s.params)?;
    let file = out.json("equilibria.json", &report)?;
    let mut text = format!("{:?}\n", report.case);
    for z in &report.points {
        write_line(&mut text, format_args!("equilibrium x = ({:.6}, {:.6}) q = {}", z.x[0], z.x[1], z.q));
    }
    if let Some(c) = &report.limit_cycle {
        write_line(&mut text, format_args!("limit cycle with period {:.4}", c.period));
    }
    if report.case == Case::Boundary {
        write_line(&mut text, "parameters lie on a boundary between regions; no prediction");
    }
    Ok(Outcome { files: vec![file], summary: text })
}

#[derive(Serialize)]
#[serde(rename_all = "kebab-case")]
enum StabilityStatus {
    /// Slope condition holds; attractivity is certified.
    Certified,
    ConditionUnmet,
    /// Unequal decay rates: the cycle is computed but no certificate applies.
    ObservedNotCertified,
}

#[derive(Serialize)]
struct LineReport {
    slope: f64,
    intercept: f64,
}

#[derive(Serialize)]
struct CycleReport<'a> {
    cycle: &'a LimitCycle,
    lines: Option<Vec<LineReport>>,
    check: Option<StabilityCheck>,
    status: StabilityStatus,
}

fn limit_cycle(s: &Scenario, out: &Output, opts: RunOptions) -> Result<Outcome, RunError> {
    let cycle = compute_limit_cycle(&s.params)?;
    let check = if s.params.gamma1 == s.params.gamma2 { Some(check_stability_condition(&s.params)?) } else { None };
    let status = match check {
        Some(c) if c.holds => StabilityStatus::Certified,
        Some(_) => StabilityStatus::ConditionUnmet,
        None => StabilityStatus::ObservedNotCertified,
    };
    let lines = match cycle.slopes {
        Some(_) => Some(
            Mode::CYCLE
                .iter()
                .map(|&q| analysis::piece_line(&cycle, q).map(|l| LineReport { slope: l.slope, intercept: l.intercept }))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let mut files = vec![out.json("limit_cycle.json", &CycleReport { cycle: &cycle, lines, check, status })?];
    let z0 = HybridState { x: cycle.vertices[0], q: Mode::CYCLE[0] };
    let period = GeneNetwork::new(s.params)?.simulate_one(z0, Budget::horizon(cycle.period))?;
    files.push(out.trajectory("cycle.csv", &period, opts.density)?);

    let mut text = String::new();
    for (i, v) in cycle.vertices.iter().enumerate() {
        write_line(&mut text, format_args!("p{i} = ({:.7}, {:.7})  t{} = {:.4}", v[0], v[1], i + 1, cycle.times[i]));
    }
    write_line(&mut text, format_args!("period T = {:.4}", cycle.period));
    match check {
        Some(c) => write_line(
            &mut text,
            format_args!(
                "slopes {:?}, margins {:.6} / {:.6}: {}",
                c.slopes,
                c.margin1,
                c.margin3,
                if c.holds { "certified" } else { "condition unmet" }
            ),
        ),
        None => write_line(&mut text, "γ1 ≠ γ2: segments are curved, stability observed but not certified"),
    }
    Ok(Outcome { files, summary: text })
}

#[derive(Serialize)]
struct CertSummary {
    id: u32,
    dist0: f64,
    final_dist: f64,
    final_d_stilde: f64,
    jumps: usize,
    trace: PathBuf,
    trajectory: PathBuf,
}

fn certify(s: &Scenario, out: &Output, opts: RunOptions) -> Result<Outcome, RunError> {
    let check = check_stability_condition(&s.params)?;
    if !check.holds {
        return Err(RunError::ConditionUnmet(check));
    }
    let results: Vec<Result<CertSummary, RunError>> = s
        .initial
        .par_iter()
        .map(|&(id, z0)| {
            let tr = run_certificate(z0, &s.params, s.budget.t_max).map_err(|e| match e {
                CertificateError::Analysis(a) => RunError::Analysis(a),
                CertificateError::Model(m) => RunError::Model(m),
                CertificateError::ConditionUnmet(c) => RunError::ConditionUnmet(c),
                source => RunError::Violation { id, source },
            })?;
            let (trace, w) = out.create(&format!("cert_{id}.csv"))?;
            emit::emit_certificate(&tr.samples, w).map_err(|e| csv_io(&trace, e))?;
            let trajectory = out.trajectory(&format!("traj_{id}.csv"), &tr.arc, opts.density)?;
            let last = tr.final_sample();
            Ok(CertSummary {
                id,
                dist0: tr.dist0,
                final_dist: last.dist,
                final_d_stilde: last.d_stilde,
                jumps: tr.arc.jump_count(),
                trace,
                trajectory,
            })
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut files: Vec<PathBuf> = runs.iter().flat_map(|r| [r.trace.clone(), r.trajectory.clone()]).collect();
    files.push(out.json("certify.json", &runs)?);
    let mut text = format!("slope margins {:.6} / {:.6}: condition holds\n", check.margin1, check.margin3);
    for r in &runs {
        write_line(
            &mut text,
            format_args!(
                "initial {}: dist {:.3e} -> {:.3e} over {} jumps, no violations",
                r.id, r.dist0, r.final_dist, r.jumps
            ),
        );
    }
    Ok(Outcome { files, summary: text })
}

/// The disturbance with its random seed replaced by the scenario seed.
fn seeded(spec: &DisturbanceSpec, seed: u64) -> DisturbanceSpec {
    let mut spec = spec.clone();
    if let DisturbanceKind::PiecewiseConstantRandom { seed: s, .. } = &mut spec.kind {
        *s = s.wrapping_add(seed);
    }
    spec
}

fn perturb(s: &Scenario, out: &Output, opts: RunOptions) -> Result<Outcome, RunError> {
    let spec = seeded(s.disturbance.as_ref().expect("validated scenario has a disturbance"), s.seed);
    let bounds = s.bounds.unwrap_or_default();
    if let Some(probe) = &s.probe {
        let starts = if probe.random_starts > 0 {
            random_starts(&s.params, probe.random_starts, s.seed)
        } else {
            s.initial.iter().map(|(_, z)| *z).collect()
        };
        let plan = ProbePlan {
            ladder: probe.ladder.clone(),
            kind: spec.kind.clone(),
            starts,
            horizon: probe.horizon,
            tail_from: probe.tail_from,
            epsilon: probe.epsilon,
            bounds,
            options: s.integration,
        };
        let report = practical_stability_probe(&s.params, &plan)?;
        let (csv_path, w) = out.create("probe.csv")?;
        emit::emit_probe(&report, w).map_err(|e| csv_io(&csv_path, e))?;
        let json = out.json("probe.json", &report)?;
        let mut text = String::new();
        for (delta, offset) in report.max_by_delta() {
            write_line(&mut text, format_args!("delta {delta:.0e}: max tail offset {offset:.3e}"));
        }
        write_line(
            &mut text,
            format_args!(
                "{} inversion(s), monotone: {}, zero-disturbance offset {:.2e} (vanishing: {})",
                report.inversions, report.monotone, report.zero_offset, report.vanishing
            ),
        );
        return Ok(Outcome { files: vec![csv_path, json], summary: text });
    }

    let runs: Vec<Result<ArcSummary, RunError>> = s
        .initial
        .par_iter()
        .map(|&(id, z0)| {
            let arc = simulate_perturbed(z0, &s.params, &spec, bounds, s.budget, s.integration)?;
            Ok(summarize(id, 0, &arc, out.trajectory(&format!("perturbed_{id}.csv"), &arc, opts.density)?))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut files: Vec<PathBuf> = runs.iter().map(|r| r.file.clone()).collect();
    files.push(out.json("perturb.json", &runs)?);
    let mut text = String::new();
    for r in &runs {
        write_line(
            &mut text,
            format_args!(
                "initial {}: {:?}, {} jumps, final x = ({:.6}, {:.6}) q = {}",
                r.id, r.termination, r.jumps, r.final_state.x[0], r.final_state.x[1], r.final_state.q
            ),
        );
    }
    Ok(Outcome { files, summary: text })
}
