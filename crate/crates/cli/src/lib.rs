//! `ntnsim` command line.
//!
//! Exit status: 0 when a run is feasible over its whole window, 2 when any
//! violation occurred, 1 on usage, I/O or validation errors. `compare` exits 0
//! once its table is produced, whatever the member verdicts.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod compare;
pub mod dimension;
pub mod simulate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATIONS: i32 = 2;

/// Environment variable holding the log filter (`error`, `info`, `ntnsim_core=debug`, ...).
pub const LOG_ENV: &str = "NTNSIM_LOG";

#[derive(Debug, Parser)]
#[command(name = "ntnsim", version, about = "Feasibility simulator for O-RAN splits over LEO constellations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fronthaul/midhaul rates and latency budgets for an air interface.
    Dimension(dimension::DimensionArgs),
    /// Run a scenario over its window and write reports.
    Simulate(simulate::SimulateArgs),
    /// Run one scenario per split option and print them side by side.
    Compare(compare::CompareArgs),
    /// Parse and resolve a scenario without running it.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (program name first) and runs the command; returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    init_logging();
    let result = match cli.command {
        Command::Dimension(a) => dimension::cmd_dimension(&a, &mut std::io::stdout().lock()).map(|_| EXIT_OK),
        Command::Simulate(a) => simulate::cmd_simulate(&a, &mut std::io::stdout().lock()),
        Command::Compare(a) => compare::cmd_compare(&a, &mut std::io::stdout().lock()),
        Command::Validate(a) => cmd_validate(&a, &mut std::io::stdout().lock()).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn std::io::Write) -> anyhow::Result<()> {
    let sc = ntnsim_core::scenario::load_scenario(&args.scenario)?;
    let resolved = sc.resolve()?;
    writeln!(
        out,
        "ok: {} (option {}, extension {}, {} functions, {} steps)",
        sc.name,
        resolved.spec.split,
        resolved.spec.extension,
        resolved.spec.assignments.len(),
        sc.window.times().len()
    )?;
    Ok(())
}
