//! Campaign CLI for the RIS-aided MIMO link-level simulator.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use ris_mimo_core::scenario::ScenarioConfig;
use ris_mimo_core::sim::{run_campaign, Campaign, Experiment};

mod oracles;

#[derive(Parser)]
#[command(
    name = "ris-mimo",
    about = "Link-level simulator for an active-array + RIS antenna architecture",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write CSV tables plus a manifest.
    Run {
        /// Scenario TOML file, or a preset name (`desk`, `paper`).
        #[arg(long)]
        scenario: String,
        /// Experiment: cdf_compare, epsilon_sweep, quantization_sweep,
        /// ris_policy_compare or legacy_mimo_baseline.
        #[arg(long)]
        experiment: String,
        /// Monte Carlo drops (UE placements).
        #[arg(long, default_value_t = 50)]
        drops: usize,
        /// Inner fading/estimation draws per drop.
        #[arg(long, default_value_t = 32)]
        fading: usize,
        /// Campaign seed; the RIS_MIMO_SEED environment variable wins.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated sweep values (experiment specific).
        #[arg(long)]
        sweep: Option<String>,
        /// Power split used by active arms of comparison experiments.
        #[arg(long, default_value_t = 0.2)]
        active_split: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a scenario file, reporting derived quantities.
    Validate {
        /// Scenario TOML file, or a preset name (`desk`, `paper`).
        #[arg(long)]
        scenario: String,
    },
    /// Re-run a campaign exactly as recorded in a manifest.
    Rerun {
        /// Manifest written by a previous `run`.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate an independent numerical oracle and print its fixtures.
    Oracle {
        /// Oracle name; use `list` to enumerate.
        name: String,
    },
}

fn load_scenario(spec: &str) -> anyhow::Result<ScenarioConfig> {
    if Path::new(spec).exists() {
        let text = std::fs::read_to_string(spec)
            .with_context(|| format!("reading scenario file {spec}"))?;
        return Ok(ScenarioConfig::from_toml(&text)?);
    }
    match spec {
        "desk" => Ok(ScenarioConfig::desk()),
        "paper" => Ok(ScenarioConfig::paper()),
        other => bail!("scenario {other:?} is neither a file nor a preset (desk, paper)"),
    }
}

fn seed_override(cli_seed: Option<u64>, scenario: &ScenarioConfig) -> anyhow::Result<u64> {
    if let Ok(env) = std::env::var("RIS_MIMO_SEED") {
        return env
            .parse()
            .with_context(|| format!("RIS_MIMO_SEED={env} is not an integer"));
    }
    Ok(cli_seed.unwrap_or(scenario.rng_seed))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            experiment,
            drops,
            fading,
            seed,
            sweep,
            active_split,
            out,
        } => {
            let scenario = load_scenario(&scenario)?;
            let seed = seed_override(seed, &scenario)?;
            let campaign = Campaign {
                scenario,
                experiment: Experiment::parse(&experiment)?,
                n_drops: drops,
                n_fading_per_drop: fading,
                sweep: sweep
                    .map(|s| s.split(',').map(|v| v.trim().to_string()).collect())
                    .unwrap_or_default(),
                seed,
                active_power_split: active_split,
            };
            let result = run_campaign(&campaign, &out)?;
            for file in &result.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let cfg = load_scenario(&scenario)?.validated()?;
            println!("scenario ok");
            println!("  wavelength        {:.6} m", cfg.wavelength());
            println!("  training epochs   {}", cfg.training_epochs());
            println!(
                "  noise power       {:.3} dBm",
                10.0 * cfg.sigma_a2().log10() + 30.0
            );
            println!("  effective prelog  {:.4}", cfg.effective_prelog());
            let geom = ris_mimo_core::geometry::build_geometry(&cfg)?;
            println!("  antenna spacing   {:.6} m", geom.active_spacing);
            Ok(())
        }
        Command::Rerun { manifest, out } => {
            let text = std::fs::read_to_string(&manifest)
                .with_context(|| format!("reading manifest {}", manifest.display()))?;
            let campaign = Campaign::from_toml(&text)?;
            let result = run_campaign(&campaign, &out)?;
            for file in &result.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Oracle { name } => oracles::run(&name),
    }
}
