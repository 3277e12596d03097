//! `avoid` — scenario-driven avoidability experiments.
//!
//! Subcommands map onto the library's criteria and simulators; each reads a
//! scenario TOML and writes JSON verdicts, CSV partial sums and a manifest.
//! Exit codes: 0 success, 1 error, 2 when every classification came back
//! indeterminate.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use avoid_core::scenario::{compare_runs, load_run_output, run_scenario, RunStatus};

#[derive(Parser)]
#[command(name = "avoid", version, about = "Avoidability analysis for isotropic Lévy processes")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory root (overrides the scenario's [output] section).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format for the console summary.
    #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check requested by the scenario.
    Run(RunArgs),
    /// Run only the avoidability classifier.
    Classify(RunArgs),
    /// Run only the series-type tests.
    Series(RunArgs),
    /// Run only the integral test.
    Integral(RunArgs),
    /// Run only the Wiener-type sums.
    Wiener(RunArgs),
    /// Run only the simulation section.
    Simulate(RunArgs),
    /// Diff two persisted runs.
    Compare {
        /// First verdicts.json.
        a: PathBuf,
        /// Second verdicts.json.
        b: PathBuf,
    },
}

fn execute(args: &RunArgs, only: Option<&[&str]>) -> anyhow::Result<RunStatus> {
    let summary = run_scenario(
        &args.scenario,
        args.out.as_deref(),
        args.seed,
        only,
    )
    .with_context(|| format!("running {}", args.scenario.display()))?;
    match args.format.as_str() {
        "json" => {
            println!("{}", serde_json::to_string_pretty(&summary.output)?);
        }
        _ => {
            for r in &summary.output.results {
                println!("{}", serde_json::to_string(r)?);
            }
        }
    }
    eprintln!(
        "wrote {} artifacts under {}",
        summary.artifacts.len(),
        summary.out_dir.display()
    );
    Ok(summary.status)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("warning: thread pool: {e}");
        }
    }
    let outcome = match &cli.command {
        Command::Run(a) => execute(a, None),
        Command::Classify(a) => execute(a, Some(&["classify"])),
        Command::Series(a) => execute(a, Some(&["series", "psi-form"])),
        Command::Integral(a) => execute(a, Some(&["integral"])),
        Command::Wiener(a) => execute(a, Some(&["wiener-whitney", "wiener-annuli"])),
        Command::Simulate(a) => execute(a, Some(&["simulate"])),
        Command::Compare { a, b } => (|| {
            let ra = load_run_output(a)?;
            let rb = load_run_output(b)?;
            let diff = compare_runs(&ra, &rb)?;
            println!("{}", serde_json::to_string_pretty(&diff)?);
            anyhow::Ok(if diff.equal {
                RunStatus::Success
            } else {
                RunStatus::IndeterminateOnly
            })
        })(),
    };
    match outcome {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
