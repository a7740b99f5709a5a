//! Command-line front end: feasibility checks, event simulation, attack
//! evaluation, and the readability/privacy tradeoff sweep, all driven by a
//! TOML scenario file.

use clap::{Args, Parser, Subcommand};
use qdirsim::runner::{
    run_attack, run_feasibility, run_simulate, run_tradeoff, Overrides, EXIT_ERROR,
};
use qdirsim::scenario::ScenarioConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "qdirsim", version, about = "Direction-private biphoton link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a scenario TOML file, or the name of a bundled scenario
    /// (default_protocol, control_narrowbeams, periodic_slots).
    #[arg(long)]
    config: String,
    /// Output directory for run artifacts (default: the scenario's
    /// `run.out_dir`, or `qdirsim_out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's event count.
    #[arg(long)]
    events: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the geometric feasibility conditions and print the verdict.
    Feasibility(CommonArgs),
    /// Sample a detection record and write events.csv plus summary.json.
    Simulate(CommonArgs),
    /// Run an interception attack (blocking or ensemble) and print its report.
    Attack {
        /// Attack to run: blocking or ensemble.
        name: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep the aperture cutoff and write tradeoff.csv.
    Tradeoff(CommonArgs),
}

fn load_config(common: &CommonArgs) -> qdirsim::Result<ScenarioConfig> {
    let mut cfg = match ScenarioConfig::bundled(&common.config) {
        Some(cfg) => cfg,
        None => ScenarioConfig::load(common.config.as_ref())?,
    };
    Overrides {
        seed: common.seed,
        events: common.events,
    }
    .apply(&mut cfg);
    Ok(cfg)
}

fn out_dir(common: &CommonArgs, cfg: &ScenarioConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("qdirsim_out"))
}

fn run() -> qdirsim::Result<i32> {
    let cli = Cli::parse();
    let stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Feasibility(common) => {
            let cfg = load_config(common)?;
            run_feasibility(&cfg, &out_dir(common, &cfg), stdout)
        }
        Command::Simulate(common) => {
            let cfg = load_config(common)?;
            run_simulate(&cfg, &out_dir(common, &cfg), stdout)
        }
        Command::Attack { name, common } => {
            let cfg = load_config(common)?;
            run_attack(&cfg, name, &out_dir(common, &cfg), stdout)
        }
        Command::Tradeoff(common) => {
            let cfg = load_config(common)?;
            run_tradeoff(&cfg, &out_dir(common, &cfg), stdout)
        }
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(EXIT_ERROR);
        }
    }
}
