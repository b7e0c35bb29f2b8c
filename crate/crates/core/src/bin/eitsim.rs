//! Command-line front end: `eitsim simulate --config FILE` runs a
//! configuration, `eitsim simulate --check FILE` only validates it.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use ion_eit::run::{check, run, RunOptions, EXIT_CONFIG};
use ion_eit::spectra::Engine;

#[derive(Parser)]
#[command(name = "eitsim", version, about = "Single-ion extinction and EIT spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or validate a configuration file.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Analytic,
    Numeric,
}

#[derive(Args)]
#[command(group(ArgGroup::new("input").required(true).args(["config", "check"])))]
struct SimulateArgs {
    /// Configuration file to run.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Validate the configuration file without running it.
    #[arg(long, value_name = "PATH")]
    check: Option<PathBuf>,
    /// Override the scan engine.
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// CSV output path (overrides `output.csv`).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// SVG output path (overrides `output.svg`).
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Suppress the summary line.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let Command::Simulate(args) = cli.command;
    let options = RunOptions {
        engine: args.engine.map(|e| match e {
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Numeric => Engine::Numeric,
        }),
        out: args.out,
        svg: args.svg,
        quiet: args.quiet,
    };
    let code = match (&args.config, &args.check) {
        (_, Some(path)) => check(path, &options),
        (Some(path), None) => run(path, &options),
        (None, None) => unreachable!("clap enforces one input"),
    };
    ExitCode::from(code as u8)
}
