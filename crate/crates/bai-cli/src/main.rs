use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use bai_cli::{
    cmd_oracle, cmd_random_instances, cmd_run, cmd_thresholds, cmd_validate, CommandOutput,
    ExperimentConfig,
};

/// Fixed-confidence best arm identification for Gaussian bandits with
/// unknown variances: allocation oracles, calibrated stopping thresholds,
/// sampling rules, and Monte Carlo validation.
#[derive(Parser)]
#[command(name = "bai-lab", version, about)]
struct Cli {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Episodes per (instance, sampler, threshold, delta) cell.
    #[arg(long, global = true)]
    episodes: Option<usize>,

    /// Worker threads (0 = all cores); BAI_LAB_THREADS overrides.
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    /// Output path for the CSV (aggregate JSON lands next to it with a
    /// .json extension); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic times, allocations and lower bounds per instance.
    Oracle,
    /// Threshold-family values along a seed-fixed uniform two-arm stream.
    Thresholds,
    /// Run episode batches for instances x samplers x thresholds x deltas.
    Run,
    /// The random-instance protocol (same driver as `run` over the
    /// random-generator source).
    Sweep,
    /// Monte Carlo coverage checks of the concentration bounds.
    Validate,
    /// Emit instances from the random generator as JSON.
    RandomInstances,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(episodes) = cli.episodes {
        config.episodes = Some(episodes);
    }
    if let Some(par) = cli.parallelism {
        config.parallelism = Some(par);
    }
    if let Ok(threads) = std::env::var("BAI_LAB_THREADS") {
        config.parallelism = Some(threads.parse().context("BAI_LAB_THREADS")?);
    }
    let out = match cli.command {
        Command::Oracle => cmd_oracle(&config)?,
        Command::Thresholds => cmd_thresholds(&config)?,
        Command::Run => cmd_run(&config)?,
        Command::Sweep => {
            if config.instances.is_none() {
                config.instances = Some(bai_cli::InstanceSource::Random { count: 20, k: 10 });
            }
            cmd_run(&config)?
        }
        Command::Validate => cmd_validate(&config)?,
        Command::RandomInstances => cmd_random_instances(&config)?,
    };
    write_output(&cli.out, &out)
}

fn write_output(path: &Option<PathBuf>, out: &CommandOutput) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if !out.csv.is_empty() {
                std::fs::write(p, &out.csv).with_context(|| format!("writing {}", p.display()))?;
            }
            if let Some(json) = &out.json {
                let jp = p.with_extension("json");
                std::fs::write(&jp, json)
                    .with_context(|| format!("writing {}", jp.display()))?;
            }
        }
        None => {
            if !out.csv.is_empty() {
                print!("{}", out.csv);
            }
            if let Some(json) = &out.json {
                println!("{json}");
            }
        }
    }
    Ok(())
}
