use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hh_cli::{parse_config, run, Command, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "hh", version, about = "Simulate and analyse a two-gene network with hysteresis")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate hybrid arcs from every initial state.
    Simulate(Common),
    /// Report the equilibrium case and its equilibria or limit cycle.
    Classify(Common),
    /// Compute the limit cycle, its segment lines and the slope condition.
    LimitCycle(Common),
    /// Run the contraction certificate from every initial state.
    Certify(Common),
    /// Simulate under bounded disturbances, or run a probe ladder.
    Perturb(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output path prefix; defaults to the config file stem.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid points per flow segment in trajectory CSVs.
    #[arg(long, default_value_t = 200)]
    density: usize,
    /// Overrides the `[run]` seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HH_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Classify(a) => (Command::Classify, a),
        Sub::LimitCycle(a) => (Command::LimitCycle, a),
        Sub::Certify(a) => (Command::Certify, a),
        Sub::Perturb(a) => (Command::Perturb, a),
    };
    match execute(command, &args) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command, args: &Common) -> Result<String, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|source| RunError::Io { path: args.config.clone(), source })?;
    // warnings are logged by the parser
    let mut scenario = parse_config(&text, command)?;
    scenario.output = match &args.out {
        Some(p) => p.clone(),
        None => PathBuf::from(args.config.file_stem().unwrap_or_default()),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let outcome = run(&scenario, RunOptions { density: args.density })?;
    let mut summary = outcome.summary;
    for f in &outcome.files {
        summary.push_str(&format!("wrote {}\n", f.display()));
    }
    Ok(summary)
}
