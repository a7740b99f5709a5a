//! Adversary toolkit: the image-blocking attack, detector-array ensemble
//! statistics, and the sender's countermeasure of single-photon noise
//! injection that offsets the marginal bias.
//!
//! Attack verdicts are always derived from a statistic compared against the
//! configured threshold, never set independently; thresholds are artifact
//! configuration with documented defaults.

use crate::error::{Error, Result};
use crate::geometry::SystemGeometry;
use crate::grid::TransverseGrid;
use crate::measurement::{derive_seed, DetectionEvent, Outcome};
use crate::optics::{apply_mask, FilterArm};
use crate::state::{Arm, BiphotonState};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Binomial;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Rate-variation threshold below which the blocking sweep is judged
/// uninformative.
pub const BLOCKING_THRESHOLD: f64 = 0.1;
/// Significance level for the ensemble homogeneity tests.
pub const ENSEMBLE_LEVEL: f64 = 0.01;
/// Number of mask centers in the blocking sweep.
const SWEEP_CENTERS: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PrivacyHeld,
    PrivacyBroken,
}

/// Outcome of one attack run; serializes to JSON with fixed field names.
#[derive(Debug, Clone, Serialize)]
pub struct AttackReport {
    pub kind: String,
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub details: serde_json::Value,
}

/// Exact masked coincidence-rate curve: for each mask center, the fraction
/// of pairs surviving a mask of `mask_width` radians on the signal arm.
pub fn mask_sweep_transmissions(
    state: &BiphotonState<f64>,
    geometry: &SystemGeometry<f64>,
    mask_width: f64,
    centers: &[f64],
) -> Result<Vec<f64>> {
    let p_z = geometry.axial_momentum;
    centers
        .iter()
        .map(|&c| {
            if mask_width == 0.0 {
                return Ok(1.0);
            }
            let half = mask_width / 2.0;
            Ok(apply_mask(state, FilterArm::Signal, c - half, c + half, p_z)?.transmitted)
        })
        .collect()
}

fn sweep_centers(opening_angle_full: f64) -> Vec<f64> {
    let span = opening_angle_full;
    (0..SWEEP_CENTERS)
        .map(|i| -span + 2.0 * span * i as f64 / (SWEEP_CENTERS - 1) as f64)
        .collect()
}

/// The §-style blocking attack: sweep an opaque strip across the field of
/// view and look for mask positions that kill the coincidence rate. The
/// statistic is (max − min observed rate)/mean over the sweep; below the
/// threshold the sweep carries no direction information.
pub fn blocking_attack(
    state: &BiphotonState<f64>,
    geometry: &SystemGeometry<f64>,
    mask_width: f64,
    n_events: usize,
    seed: u64,
    threshold: f64,
) -> Result<AttackReport> {
    if mask_width < 0.0 || mask_width > geometry.opening_angle_full {
        return Err(Error::Domain(format!(
            "mask width {mask_width} must lie in [0, opening_angle_full = {}]",
            geometry.opening_angle_full
        )));
    }
    if n_events == 0 {
        return Err(Error::InsufficientEvents { got: 0, need: 1 });
    }
    let centers = sweep_centers(geometry.opening_angle_full);
    let transmissions = mask_sweep_transmissions(state, geometry, mask_width, &centers)?;
    let rates: Vec<f64> = transmissions
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 10 + i as u64));
            let bin = Binomial::new(n_events as u64, t.clamp(0.0, 1.0)).expect("valid binomial");
            bin.sample(&mut rng) as f64 / n_events as f64
        })
        .collect();
    let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let statistic = if max == min { 0.0 } else { (max - min) / mean };
    Ok(AttackReport {
        kind: "blocking".into(),
        statistic,
        threshold,
        verdict: if statistic < threshold {
            Verdict::PrivacyHeld
        } else {
            Verdict::PrivacyBroken
        },
        details: serde_json::json!({
            "mask_width": mask_width,
            "centers": centers,
            "rates": rates,
            "exact_transmissions": transmissions,
        }),
    })
}

fn two_sided_normal_p(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - n.cdf(z.abs()))
}

fn two_sided_chi_square_p(stat: f64, dof: f64) -> f64 {
    let d = ChiSquared::new(dof).unwrap();
    let lower = d.cdf(stat);
    2.0 * lower.min(1.0 - lower)
}

/// Detector-array ensemble analysis: per-window count autocorrelation,
/// count dispersion against a homogeneous Bernoulli-per-slot process, and
/// angular uniformity of single-photon outcomes. Privacy holds iff every
/// computed test is consistent with homogeneous noise at the configured
/// level (the statistic reported is the smallest p-value).
pub fn ensemble_statistics_attack(
    events: &[DetectionEvent],
    window: u64,
    level: f64,
) -> Result<AttackReport> {
    if window == 0 {
        return Err(Error::Domain("window must be positive".into()));
    }
    let max_slot = events.iter().map(|e| e.arrival_slot).max().unwrap_or(0);
    let n_windows = (max_slot / window) as usize;
    if n_windows < 10 {
        return Err(Error::InsufficientEvents {
            got: n_windows,
            need: 10,
        });
    }
    // Complete windows only; window w covers slots [w·window+1, (w+1)·window].
    let mut counts = vec![0.0f64; n_windows];
    for e in events {
        if e.arrival_slot >= 1 {
            let w = ((e.arrival_slot - 1) / window) as usize;
            if w < n_windows {
                counts[w] += 1.0;
            }
        }
    }
    let n = n_windows as f64;
    let mean = counts.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::InsufficientEvents { got: 0, need: 10 });
    }
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);

    // Lag-1 autocorrelation; z ≈ r·√N under the homogeneous null.
    let denom: f64 = counts.iter().map(|c| (c - mean).powi(2)).sum();
    let numer: f64 = counts
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum();
    let r1 = if denom > 0.0 { numer / denom } else { 0.0 };
    let p_autocorr = two_sided_normal_p(r1 * n.sqrt());

    // Index of dispersion: under the homogeneous null (events scattered
    // uniformly over windows) Σ(c−c̄)²/c̄ is χ²_{W−1}.
    let dispersion = (n - 1.0) * var / mean;
    let p_dispersion = two_sided_chi_square_p(dispersion, n - 1.0);

    // Angular uniformity over the distinct single-photon grid outcomes.
    let mut angular: BTreeMap<u64, f64> = BTreeMap::new();
    let mut n_singles = 0.0;
    for e in events {
        if let Outcome::Single { q } = e.outcome {
            *angular.entry(q.to_bits()).or_insert(0.0) += 1.0;
            n_singles += 1.0;
        }
    }
    let p_angular = if n_singles >= 100.0 && angular.len() >= 2 {
        let k = angular.len() as f64;
        let expected = n_singles / k;
        let stat: f64 = angular
            .values()
            .map(|c| (c - expected).powi(2) / expected)
            .sum();
        Some(1.0 - ChiSquared::new(k - 1.0).unwrap().cdf(stat))
    } else {
        None
    };

    let statistic = [Some(p_autocorr), Some(p_dispersion), p_angular]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    Ok(AttackReport {
        kind: "ensemble_statistics".into(),
        statistic,
        threshold: level,
        verdict: if statistic >= level {
            Verdict::PrivacyHeld
        } else {
            Verdict::PrivacyBroken
        },
        details: serde_json::json!({
            "n_windows": n_windows,
            "window": window,
            "autocorrelation": r1,
            "p_autocorrelation": p_autocorr,
            "fano": var / mean,
            "p_dispersion": p_dispersion,
            "p_angular": p_angular,
        }),
    })
}

/// Angular profile plus its injection rate (noise events per signal event).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetPolicy {
    pub rate: f64,
    /// Per-grid-cell probabilities, summing to one.
    pub profile: Vec<f64>,
}

/// Sender-side noise configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePolicy {
    /// Expected background events per signal event.
    pub background_rate: f64,
    /// Per-grid-cell probabilities of the background, summing to one.
    pub background_profile: Vec<f64>,
    /// Optional extra component that cancels the signal's marginal bias.
    pub single_photon_offset: Option<OffsetPolicy>,
}

impl NoisePolicy {
    /// Isotropic background over the cells with |q| ≤ `q_bound`.
    pub fn isotropic(background_rate: f64, grid: &TransverseGrid<f64>, q_bound: f64) -> Self {
        let pass: Vec<bool> = grid.momenta().iter().map(|&q| q.abs() <= q_bound).collect();
        let k = pass.iter().filter(|&&p| p).count() as f64;
        Self {
            background_rate,
            background_profile: pass
                .iter()
                .map(|&p| if p { 1.0 / k } else { 0.0 })
                .collect(),
            single_photon_offset: None,
        }
    }

    pub fn validate(&self, grid: &TransverseGrid<f64>) -> Result<()> {
        if self.background_rate < 0.0 {
            return Err(Error::Validation(format!(
                "background_rate must be >= 0, got {}",
                self.background_rate
            )));
        }
        let check = |name: &str, profile: &[f64]| -> Result<()> {
            if profile.len() != grid.n_points() {
                return Err(Error::Validation(format!(
                    "{name} has {} entries, grid has {}",
                    profile.len(),
                    grid.n_points()
                )));
            }
            if profile.iter().any(|&p| p < 0.0) {
                return Err(Error::Validation(format!("{name} has negative entries")));
            }
            let total: f64 = profile.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "{name} sums to {total}, expected 1 within 1e-9"
                )));
            }
            Ok(())
        };
        if self.background_rate > 0.0 {
            check("background_profile", &self.background_profile)?;
        }
        if let Some(o) = &self.single_photon_offset {
            if o.rate < 0.0 {
                return Err(Error::Validation(format!(
                    "offset rate must be >= 0, got {}",
                    o.rate
                )));
            }
            if o.rate > 0.0 {
                check("single_photon_offset", &o.profile)?;
            }
        }
        Ok(())
    }
}

/// Deviation of the single-photon momentum marginal from uniform over the
/// state's support, as per-cell probabilities (positive where the signal
/// over-represents a cell). This is what the sender must cancel with noise.
pub fn compute_marginal_bias(state: &BiphotonState<f64>) -> Vec<f64> {
    let grid = state.grid();
    let dq = grid.dq();
    let probs: Vec<f64> = state.marginal(Arm::Signal).iter().map(|p| p * dq).collect();
    let support: Vec<bool> = probs.iter().map(|&p| p > 1e-12).collect();
    let k = support.iter().filter(|&&s| s).count() as f64;
    probs
        .iter()
        .zip(&support)
        .map(|(&p, &s)| if s { p - 1.0 / k } else { 0.0 })
        .collect()
}

/// Builds the minimal-rate offset that drives the expected post-injection
/// single-photon histogram to uniform over the support. Returns `None` when
/// the marginal is already uniform within 1e-9. The residual (clipped
/// negative mass, zero for the minimal rate) comes with the policy.
pub fn build_offset(state: &BiphotonState<f64>) -> Option<(OffsetPolicy, f64)> {
    let grid = state.grid();
    let dq = grid.dq();
    let probs: Vec<f64> = state.marginal(Arm::Signal).iter().map(|p| p * dq).collect();
    let support: Vec<bool> = probs.iter().map(|&p| p > 1e-12).collect();
    let k = support.iter().filter(|&&s| s).count() as f64;
    let u = 1.0 / k;
    let max_ratio = probs
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(&p, _)| p / u)
        .fold(0.0f64, f64::max);
    let rate = max_ratio - 1.0;
    if rate <= 1e-9 {
        return None;
    }
    let mut profile: Vec<f64> = probs
        .iter()
        .zip(&support)
        .map(|(&p, &s)| if s { ((1.0 + rate) * u - p) / rate } else { 0.0 })
        .collect();
    let clipped: f64 = profile.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    for v in &mut profile {
        *v = v.max(0.0);
    }
    let total: f64 = profile.iter().sum();
    for v in &mut profile {
        *v /= total;
    }
    Some((OffsetPolicy { rate, profile }, clipped))
}

fn sample_profile(profile: &[f64], grid: &TransverseGrid<f64>, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in profile.iter().enumerate() {
        acc += p;
        if acc >= u {
            return grid.momentum(i);
        }
    }
    grid.momentum(profile.len() - 1)
}

/// Interleaves noise events into a signal stream. Signal outcomes are never
/// modified; noise events are single-photon detections tagged `is_noise`
/// (ground truth for oracles only) at uniformly random slots within the
/// stream's span. The output stays sorted by arrival slot.
pub fn inject_noise(
    events: &[DetectionEvent],
    policy: &NoisePolicy,
    grid: &TransverseGrid<f64>,
    seed: u64,
) -> Result<Vec<DetectionEvent>> {
    policy.validate(grid)?;
    let offset_rate = policy.single_photon_offset.as_ref().map_or(0.0, |o| o.rate);
    let total_rate = policy.background_rate + offset_rate;
    if total_rate == 0.0 || events.is_empty() {
        return Ok(events.to_vec());
    }
    let max_slot = events.iter().map(|e| e.arrival_slot).max().unwrap().max(1);
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, 3));
    // Count with mean rate·n and sub-Poisson spread.
    let trials = (2.0 * total_rate * events.len() as f64).round() as u64;
    let n_noise = Binomial::new(trials, 0.5).expect("valid binomial").sample(&mut rng);
    let p_background = policy.background_rate / total_rate;
    let mut noise: Vec<DetectionEvent> = (0..n_noise)
        .map(|_| {
            let profile = if rng.gen::<f64>() < p_background {
                &policy.background_profile
            } else {
                &policy.single_photon_offset.as_ref().unwrap().profile
            };
            DetectionEvent {
                outcome: Outcome::Single {
                    q: sample_profile(profile, grid, &mut rng),
                },
                arrival_slot: rng.gen_range(1..=max_slot),
                is_noise: true,
            }
        })
        .collect();
    let mut merged = events.to_vec();
    merged.append(&mut noise);
    merged.sort_by_key(|e| e.arrival_slot);
    Ok(merged)
}
