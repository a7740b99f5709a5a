//! Command implementations shared by the CLI binary: each subcommand takes a
//! parsed scenario, writes its artifacts into an output directory, prints a
//! machine-readable result, and returns a process exit code.
//!
//! Exit codes: 0 success, 1 error (bad input, unknown attack, empty run),
//! 2 infeasible geometry.

use crate::adversary::{
    blocking_attack, ensemble_statistics_attack, inject_noise, AttackReport,
    BLOCKING_THRESHOLD, ENSEMBLE_LEVEL,
};
use crate::error::{Error, Result};
use crate::geometry::check_feasibility;
use crate::measurement::{
    derive_seed, recoil_direction, sample_events, write_events_csv, DetectionEvent,
    MeasurementChannel, Outcome,
};
use crate::metrics::{image_contrast, tradeoff_scan, write_tradeoff_csv, TradeoffReport};
use crate::scenario::{ScenarioConfig, StateKind};
use crate::state::Arm;
use serde::Serialize;
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub events: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(events) = self.events {
            cfg.run.n_events = events;
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    scenario: &'a str,
    command: &'a str,
    config_sha256: String,
    seed: u64,
    n_events: usize,
    package_version: &'a str,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(w)?;
    Ok(())
}

fn write_manifest(cfg: &ScenarioConfig, command: &str, out_dir: &Path) -> Result<()> {
    let canonical = cfg.to_toml_string()?;
    let manifest = RunManifest {
        scenario: &cfg.name,
        command,
        config_sha256: format!("{:x}", Sha256::digest(canonical.as_bytes())),
        seed: cfg.run.seed,
        n_events: cfg.run.n_events,
        package_version: env!("CARGO_PKG_VERSION"),
    };
    write_json(&manifest, &out_dir.join("manifest.json"))
}

fn prepare_out_dir(out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    Ok(())
}

/// Checks the geometric feasibility conditions and prints the verdict as
/// JSON. Returns exit code 0 when feasible, 2 otherwise.
pub fn run_feasibility<W: Write>(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    mut stdout: W,
) -> Result<i32> {
    let geom = cfg.build_geometry()?;
    let verdict = check_feasibility(&geom, cfg.geometry.margin)?;
    prepare_out_dir(out_dir)?;
    write_json(&verdict, &out_dir.join("feasibility.json"))?;
    write_manifest(cfg, "feasibility", out_dir)?;
    let text = serde_json::to_string_pretty(&verdict)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(stdout, "{text}")?;
    Ok(if verdict.feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

#[derive(Serialize)]
struct SimulateSummary {
    scenario: String,
    n_events: usize,
    seed: u64,
    n_noise_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    image_contrast: Option<f64>,
    recoil_angle: f64,
    recoil_standard_error: f64,
    marginal_uniformity_p: f64,
}

/// Chi-square p-value of the single-photon angular histogram against a
/// uniform distribution over the support cells of `expected_support`.
fn uniformity_p_value(events: &[DetectionEvent], support: &[bool], dq: f64, q_min: f64) -> f64 {
    let k = support.iter().filter(|&&s| s).count();
    if k < 2 {
        return 1.0;
    }
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total = 0.0;
    for e in events {
        if let Outcome::Single { q } = e.outcome {
            let idx = ((q - q_min) / dq).round() as usize;
            *counts.entry(idx).or_insert(0.0) += 1.0;
            total += 1.0;
        }
    }
    if total < 5.0 * k as f64 {
        return 1.0;
    }
    let expected = total / k as f64;
    let mut chi2 = 0.0;
    for (i, &s) in support.iter().enumerate() {
        if s {
            let c = counts.get(&i).copied().unwrap_or(0.0);
            chi2 += (c - expected).powi(2) / expected;
        }
    }
    let dist = ChiSquared::new((k - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(chi2)
}

/// Runs the source through its transfer chain, samples a detection record,
/// injects configured noise, and writes `events.csv` plus `summary.json`.
pub fn run_simulate<W: Write>(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    mut stdout: W,
) -> Result<i32> {
    cfg.validate()?;
    let geom = cfg.build_geometry()?;
    let state = cfg.build_state()?;
    let chain = cfg.build_chain();
    let timing = cfg.timing_model();
    let n_events = cfg.run.n_events;
    let seed = cfg.run.seed;

    let pair_channel = MeasurementChannel::wide_pair(chain.clone());
    let prepared = pair_channel.prepare(&state)?;
    let pair_events = sample_events(&state, &pair_channel, n_events, seed, timing)?;

    // Parallel single-photon record on the signal arm, full acceptance.
    let single_channel = MeasurementChannel::narrow_single(
        state.grid().q_max() / std::f64::consts::TAU,
        Arm::Signal,
        chain.clone(),
    );
    let single_prepared = single_channel.prepare(&state)?;
    let single_events = sample_events(
        &state,
        &single_channel,
        n_events,
        derive_seed(seed, 0x517),
        timing,
    )?;

    let policy = cfg.build_noise_policy(&single_prepared)?;
    let (noisy_pairs, noisy_singles) = match &policy {
        Some(p) => (
            inject_noise(&pair_events, p, state.grid(), seed)?,
            inject_noise(&single_events, p, state.grid(), derive_seed(seed, 0x518))?,
        ),
        None => (pair_events.clone(), single_events.clone()),
    };
    let n_noise = noisy_pairs.iter().filter(|e| e.is_noise).count()
        + noisy_singles.iter().filter(|e| e.is_noise).count();

    let contrast = match cfg.state.kind {
        StateKind::DifferenceCorrelated => Some(image_contrast(
            &prepared.coincidence_image(),
            prepared.grid(),
            &cfg.image(),
        )?),
        StateKind::NarrowBeams => None,
    };
    let (recoil_angle, recoil_se) = recoil_direction(&noisy_pairs, geom.axial_momentum)?;

    let dq = state.grid().dq();
    let marg = single_prepared.marginal(Arm::Signal);
    let support: Vec<bool> = marg.iter().map(|&p| p * dq > 1e-12).collect();
    let p_uniform = uniformity_p_value(&noisy_singles, &support, dq, -state.grid().q_max());

    prepare_out_dir(out_dir)?;
    let mut all_events = noisy_pairs;
    all_events.extend(noisy_singles);
    all_events.sort_by_key(|e| e.arrival_slot);
    write_events_csv(&all_events, BufWriter::new(File::create(out_dir.join("events.csv"))?))?;

    let summary = SimulateSummary {
        scenario: cfg.name.clone(),
        n_events,
        seed,
        n_noise_events: n_noise,
        image_contrast: contrast,
        recoil_angle,
        recoil_standard_error: recoil_se,
        marginal_uniformity_p: p_uniform,
    };
    write_json(&summary, &out_dir.join("summary.json"))?;
    write_manifest(cfg, "simulate", out_dir)?;
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(stdout, "{text}")?;
    Ok(EXIT_OK)
}

pub const ATTACK_NAMES: [&str; 2] = ["blocking", "ensemble"];

/// Runs the named interception attack and prints its report as JSON.
/// The verdict is data, not an exit code: both outcomes exit 0.
pub fn run_attack<W: Write>(
    cfg: &ScenarioConfig,
    attack_name: &str,
    out_dir: &Path,
    mut stdout: W,
) -> Result<i32> {
    cfg.validate()?;
    let geom = cfg.build_geometry()?;
    let state = cfg.build_state()?;
    let chain = cfg.build_chain();
    let report: AttackReport = match attack_name {
        "blocking" => {
            let prepared = MeasurementChannel::wide_pair(chain).prepare(&state)?;
            blocking_attack(
                &prepared,
                &geom,
                cfg.attack.mask_width,
                cfg.run.n_events,
                cfg.run.seed,
                BLOCKING_THRESHOLD,
            )?
        }
        "ensemble" => {
            let channel = MeasurementChannel::narrow_single(
                state.grid().q_max() / std::f64::consts::TAU,
                Arm::Signal,
                chain,
            );
            let prepared = channel.prepare(&state)?;
            let events = sample_events(
                &state,
                &channel,
                cfg.run.n_events,
                cfg.run.seed,
                cfg.timing_model(),
            )?;
            let events = match cfg.build_noise_policy(&prepared)? {
                Some(p) => inject_noise(&events, &p, state.grid(), cfg.run.seed)?,
                None => events,
            };
            ensemble_statistics_attack(&events, cfg.attack.window, ENSEMBLE_LEVEL)?
        }
        other => {
            return Err(Error::Config(format!(
                "unknown attack name `{other}`; valid names: {}",
                ATTACK_NAMES.join(", ")
            )))
        }
    };
    prepare_out_dir(out_dir)?;
    write_json(&report, &out_dir.join(format!("attack_{attack_name}.json")))?;
    write_manifest(cfg, "attack", out_dir)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(stdout, "{text}")?;
    Ok(EXIT_OK)
}

fn tradeoff_summary_line(reports: &[TradeoffReport]) -> String {
    let mut min_c = f64::INFINITY;
    let mut max_c = f64::NEG_INFINITY;
    for r in reports {
        min_c = min_c.min(r.image_contrast);
        max_c = max_c.max(r.image_contrast);
    }
    let boundary = reports
        .iter()
        .find(|r| r.direction_error.is_none())
        .map(|r| format!("{}", r.cutoff))
        .unwrap_or_else(|| "none".into());
    format!(
        "tradeoff: contrast {min_c:.3}..{max_c:.3} over {} cutoffs, identifiability boundary at cutoff {boundary}",
        reports.len()
    )
}

/// Sweeps the aperture cutoff and writes `tradeoff.csv`, printing a one-line
/// summary of the readability/privacy trade.
pub fn run_tradeoff<W: Write>(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    mut stdout: W,
) -> Result<i32> {
    cfg.validate()?;
    if cfg.state.kind != StateKind::DifferenceCorrelated {
        return Err(Error::Config(
            "tradeoff requires a difference_correlated state".into(),
        ));
    }
    let geom = cfg.build_geometry()?;
    let grid = cfg.build_grid()?;
    let reports = tradeoff_scan(
        grid,
        cfg.envelope(),
        &cfg.image(),
        &geom,
        &cfg.tradeoff.cutoffs,
        cfg.run.n_events,
        cfg.run.seed,
        &cfg.name,
    )?;
    prepare_out_dir(out_dir)?;
    write_tradeoff_csv(
        &reports,
        BufWriter::new(File::create(out_dir.join("tradeoff.csv"))?),
    )?;
    write_manifest(cfg, "tradeoff", out_dir)?;
    writeln!(stdout, "{}", tradeoff_summary_line(&reports))?;
    Ok(EXIT_OK)
}
