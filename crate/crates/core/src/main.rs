//! Command-line front end. Exit codes: 0 on success, 1 for configuration or
//! usage problems, 2 for runtime failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spindd::config::{config_reference, parse_config_with, OutputFormat, Overrides, RunConfig};
use spindd::runner;

#[derive(Parser)]
#[command(name = "spindd", version, about = "Pulse-sequence simulator and average-Hamiltonian analyzer for dipolar-coupled spins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides output.path; without either, results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides output.format: csv, structured, or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Prints the toggled Hamiltonian per interval and its leading averages.
    Toggling(RunArgs),
    /// Evolves each realization under the configured cycle and samples observables.
    Evolve(RunArgs),
    /// Runs the main sequence and baselines on identical realizations at equal total time.
    Compare(RunArgs),
    /// Sweeps one pulse or timing parameter over a grid.
    Scan(RunArgs),
    /// Estimates free-induction decay times per realization.
    Fid(RunArgs),
    /// Prints the configuration key reference.
    ConfigReference,
}

enum Failure {
    /// Bad arguments or config; exit 1.
    Validation(String),
    /// The run itself failed; exit 2.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let (expected_kind, args) = match cli.command {
        Command::ConfigReference => {
            print!("{}", config_reference());
            return Ok(());
        }
        Command::Toggling(a) => ("toggling", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Compare(a) => ("compare", a),
        Command::Scan(a) => ("scan", a),
        Command::Fid(a) => ("fid", a),
    };
    let config = load_config(&args, expected_kind)?;
    let result = runner::run(&config).map_err(|e| Failure::Runtime(e.to_string()))?;
    match &config.output_path {
        Some(path) => result
            .write_to(path)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{}", result.render());
            Ok(())
        }
    }
}

fn load_config(args: &RunArgs, expected_kind: &str) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Failure::Validation(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let format = match &args.format {
        Some(name) => Some(OutputFormat::from_name(name).ok_or_else(|| {
            Failure::Validation(format!(
                "unknown format `{name}`; allowed: csv, structured, json"
            ))
        })?),
        None => None,
    };
    let overrides = Overrides { seed: args.seed, format, path: args.out.clone() };
    let config = parse_config_with(&text, &overrides)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    if config.kind.name() != expected_kind {
        return Err(Failure::Validation(format!(
            "config run.kind is `{}` but the `{expected_kind}` subcommand was invoked",
            config.kind.name()
        )));
    }
    Ok(config)
}
