use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fene::diagnostics::{self, RunConfig, Status, SuiteResult};

#[derive(Parser)]
#[command(name = "fene", version, about = "FENE Fokker-Planck solver and invariant checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario named in the config and write its artifacts.
    Run(Args),
    /// Run the invariant suite; exit 1 if any suite fails.
    Check(Args),
    /// Equilibrium trace profiles over the configured b values.
    Sweep(Args),
}

#[derive(clap::Args)]
struct Args {
    config: PathBuf,
    /// Overrides of the form `section.key=value`.
    overrides: Vec<String>,
}

fn report(results: &[SuiteResult]) -> Status {
    for r in results {
        println!("{}", r.line());
    }
    if results.iter().all(|r| r.pass) {
        Status::Ok
    } else {
        Status::InvariantFailure
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { Status::ConfigError } else { Status::Ok };
            return ExitCode::from(code.code() as u8);
        }
    };
    let (args, action): (&Args, fn(&RunConfig) -> fene::Result<Vec<SuiteResult>>) = match &cli.command {
        Command::Run(a) => (a, diagnostics::run),
        Command::Check(a) => (a, diagnostics::check),
        Command::Sweep(a) => (a, diagnostics::sweep),
    };
    let status = match RunConfig::load(&args.config, &args.overrides).and_then(|cfg| action(&cfg)) {
        Ok(results) => report(&results),
        Err(e) => {
            eprintln!("error: {e}");
            Status::from_error(&e)
        }
    };
    ExitCode::from(status.code() as u8)
}
