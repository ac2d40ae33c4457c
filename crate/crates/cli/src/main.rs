//! `vflsim`: config-driven experiment runner for the vertical federated
//! saddle-point solvers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod compare;
mod config;
mod run;
mod selftest;

#[derive(Parser)]
#[command(name = "vflsim", version, about = "Vertical federated saddle-point experiment runner")]
struct Cli {
    /// Suppress tables and progress output; errors still print.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (solver, seed) pair of a config and write CSV records.
    Run {
        /// Experiment configuration file.
        config: PathBuf,
        /// Output directory; overrides the config and $VFLSIM_OUTDIR.
        #[arg(long)]
        outdir: Option<PathBuf>,
        /// Run a single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize run records side by side and name per-metric winners.
    Compare {
        /// Record CSV paths.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Suboptimality level for the iterations-to-threshold column.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Also write one merged long-format CSV for plotting.
        #[arg(long)]
        merge: Option<PathBuf>,
    },
    /// Check the built-in invariant suite on small instances.
    Selftest,
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe instead of panicking mid-table.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, outdir, seed } => run::cmd_run(&config, outdir, seed, cli.quiet),
        Command::Compare { records, threshold, merge } => {
            compare::cmd_compare(&records, threshold, merge.as_deref(), cli.quiet)
        }
        Command::Selftest => selftest::cmd_selftest(cli.quiet),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
