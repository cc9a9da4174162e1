use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use walkcorr_core::algorithms::Algorithm;
use walkcorr_core::planner::{self, PlanError};
use walkcorr_core::runner::{
    self, ExperimentConfig, HamiltonianSource, RunError, EXIT_INFEASIBLE, EXIT_OK, EXIT_PROPERTY,
    EXIT_VALIDATION,
};
use walkcorr_core::verify;

/// Quantum-walk Hamiltonian simulation with LCU correction, simulated on
/// statevectors.
#[derive(Parser)]
#[command(name = "walkcorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Choose segment parameters for a simulation size and target error.
    Plan {
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        rounds: u8,
    },
    /// Run one experiment and print its report as JSON.
    Simulate(SimulateArgs),
    /// Run a JSON array of experiment configs and print a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property suite.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Uncorrected,
    Corrected1,
    Corrected2,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Uncorrected => Algorithm::Uncorrected,
            AlgorithmArg::Corrected1 => Algorithm::Corrected1,
            AlgorithmArg::Corrected2 => Algorithm::Corrected2,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Hamiltonian JSON file.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    hamiltonian: Option<PathBuf>,
    /// Generated Hamiltonian as `n,d[,seed]`.
    #[arg(long)]
    random: Option<String>,
    /// Evolution time.
    #[arg(long, conflicts_with = "tau", required_unless_present = "tau")]
    time: Option<f64>,
    /// Evolution size `t ||H||_max d` instead of a time.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_random(spec: &str) -> Result<HamiltonianSource, RunError> {
    let bad = || RunError::Config(format!("--random expects n,d[,seed], got {spec:?}"));
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let n = parts[0].parse().map_err(|_| bad())?;
    let d = parts[1].parse().map_err(|_| bad())?;
    let seed = match parts.get(2) {
        Some(s) => Some(s.parse().map_err(|_| bad())?),
        None => None,
    };
    Ok(HamiltonianSource::Random { n, d, seed })
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), RunError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| RunError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plan(tau: f64, eps: f64, rounds: u8) -> Result<i32, RunError> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(RunError::Config(format!("tau must be finite and >= 0, got {tau}")));
    }
    let text = if rounds == 1 {
        serde_json::to_string_pretty(&planner::plan_single(tau, eps)?)
    } else {
        serde_json::to_string_pretty(&planner::plan_double(tau, eps)?)
    }
    .expect("plan serialises");
    println!("{text}");
    Ok(EXIT_OK)
}

fn simulate(args: SimulateArgs) -> Result<i32, RunError> {
    let hamiltonian = match (&args.hamiltonian, &args.random) {
        (Some(path), _) => HamiltonianSource::Path(path.clone()),
        (None, Some(spec)) => parse_random(spec)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let config = ExperimentConfig {
        hamiltonian,
        t: args.time,
        tau: args.tau,
        epsilon: args.eps,
        algorithm: args.algorithm.into(),
        output: args.out,
    };
    let report = runner::run_simulate(&config)?;
    write_output(config.output.as_deref(), &report.to_json())?;
    Ok(EXIT_OK)
}

fn sweep(config: &Path, out: Option<&Path>) -> Result<i32, RunError> {
    let text = std::fs::read_to_string(config).map_err(|source| RunError::Io {
        path: config.to_path_buf(),
        source,
    })?;
    let grid = runner::parse_grid(&text)?;
    for c in &grid {
        c.validate()?;
    }
    let output = runner::run_sweep(&grid);
    write_output(out, &output.csv)?;
    Ok(if output.all_pass() { EXIT_OK } else { EXIT_PROPERTY })
}

fn run_verify(suite: &str) -> Result<i32, RunError> {
    let checks = verify::run_verify(suite)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_PROPERTY })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { tau, eps, rounds } => plan(tau, eps, rounds),
        Command::Simulate(args) => simulate(args),
        Command::Sweep { config, out } => sweep(&config, out.as_deref()),
        Command::Verify { suite } => run_verify(&suite),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("walkcorr: {e}");
            match e {
                RunError::Plan(PlanError::Infeasible(_)) => EXIT_INFEASIBLE,
                ref other => other.exit_code().max(EXIT_VALIDATION),
            }
        }
    };
    ExitCode::from(code as u8)
}
