use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fhmm_ensemble::io::{run_experiment, ExperimentConfig, ExperimentKind};
use fhmm_ensemble::verify::run_checks;

#[derive(Parser)]
#[command(name = "fhmm-ensemble", version, about = "Augmented ensemble MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multimodal block toy target
    Toy(RunArgs),
    /// FHMM on simulated two-explanation data
    FhmmSim(RunArgs),
    /// FHMM with integrated-out depth on a counts file or synthetic counts
    FhmmData(RunArgs),
    /// Exact kernel and recursion checks on small instances
    Check,
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Override a config key, e.g. `--set ensemble.exchange=swap`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

fn build_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::new(kind),
    };
    if config.experiment != kind {
        bail!(
            "config is for experiment '{}' but the '{kind}' command was used",
            config.experiment
        );
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(repeats) = args.repeats {
        config.repeats = repeats;
    }
    for assignment in &args.overrides {
        config.apply_set(assignment)?;
    }
    Ok(config.resolve()?)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> Result<()> {
    let config = build_config(kind, args)?;
    let reports = run_experiment(&config)?;
    println!(
        "{kind}: {} repeat(s) written to {}",
        reports.len(),
        config.output_dir.display()
    );
    for r in &reports {
        let modes = r
            .distinct_modes
            .map(|m| format!(", distinct modes {m}"))
            .unwrap_or_default();
        println!(
            "  repeat {:>3}: max log-posterior {:.4}, exchanges accepted {}/{}{modes}",
            r.index, r.final_log_posterior_max, r.exchanges_accepted, r.exchanges_attempted
        );
    }
    Ok(())
}

fn check() -> bool {
    let results = run_checks();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
    failed == 0
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Toy(args) => run(ExperimentKind::Toy, args),
        Command::FhmmSim(args) => run(ExperimentKind::FhmmSim, args),
        Command::FhmmData(args) => run(ExperimentKind::FhmmData, args),
        Command::Check => {
            return if check() { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
