//! Monte Carlo detection: seeded sampling of coincidence, single-photon,
//! and recoil events from a prepared state, plus the rival estimators
//! (recoil direction, two-source direction fit).
//!
//! Sampling is inverse-CDF over the exact discrete densities, so it is
//! deterministic for a fixed seed and oracle-checkable against the state's
//! density methods. The statistics stack is fixed at `f64`.

use crate::error::{Error, Result};
use crate::optics::{apply_aperture, apply_chain, ArmWavelengths, FilterArm, TransferStep};
use crate::state::{Arm, BiphotonState};
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::Geometric;
use std::io::Write;

/// Derives an independent substream seed; splitmix64 finalizer over the
/// (seed, stream) pair, the documented splitting rule for parallel sampling.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Detected observable of one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// Coincidence pair: relative position and total transverse momentum.
    Pair { y_rel: f64, q_sum: f64 },
    /// Single photon transverse momentum.
    Single { q: f64 },
    /// Integrated recoil: total transverse momentum only.
    Recoil { q_sum: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub outcome: Outcome,
    pub arrival_slot: u64,
    /// Ground truth used only by test oracles, never by estimators.
    pub is_noise: bool,
}

impl DetectionEvent {
    pub fn channel_label(&self) -> &'static str {
        match self.outcome {
            Outcome::Pair { .. } => "pair",
            Outcome::Single { .. } => "single",
            Outcome::Recoil { .. } => "recoil",
        }
    }
}

/// What the detector accepts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind {
    /// Coincidence detection with no extra aperture.
    WideAcceptancePair,
    /// Single-photon detection on one arm behind a narrow aperture
    /// (spatial-frequency `cutoff`).
    NarrowAcceptanceSingle { cutoff: f64, arm: Arm },
    /// Total-momentum (recoil) integration.
    RecoilIntegrating,
}

/// Arrival-time process for event slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimingModel {
    /// Geometric inter-arrival gaps with the given mean (≥ 1 slot apart).
    RandomIntervals { mean_gap: f64 },
    /// Fixed-period transmission (the pattern the timing attack detects).
    Periodic { period: u64 },
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel::RandomIntervals { mean_gap: 4.0 }
    }
}

/// A measurement channel: the preceding transfer chain plus the detector kind.
#[derive(Debug, Clone)]
pub struct MeasurementChannel {
    pub kind: ChannelKind,
    pub chain: Vec<TransferStep<f64>>,
    pub wavelengths: ArmWavelengths<f64>,
}

impl MeasurementChannel {
    pub fn wide_pair(chain: Vec<TransferStep<f64>>) -> Self {
        Self {
            kind: ChannelKind::WideAcceptancePair,
            chain,
            wavelengths: ArmWavelengths::default(),
        }
    }

    pub fn narrow_single(cutoff: f64, arm: Arm, chain: Vec<TransferStep<f64>>) -> Self {
        Self {
            kind: ChannelKind::NarrowAcceptanceSingle { cutoff, arm },
            chain,
            wavelengths: ArmWavelengths::default(),
        }
    }

    pub fn recoil(chain: Vec<TransferStep<f64>>) -> Self {
        Self {
            kind: ChannelKind::RecoilIntegrating,
            chain,
            wavelengths: ArmWavelengths::default(),
        }
    }

    /// Applies the transfer chain (plus the detector's own aperture for the
    /// narrow-acceptance kind) and returns the state the detector sees.
    pub fn prepare(&self, state: &BiphotonState<f64>) -> Result<BiphotonState<f64>> {
        let (mut out, _) = apply_chain(state, &self.chain, self.wavelengths)?;
        if let ChannelKind::NarrowAcceptanceSingle { cutoff, arm } = self.kind {
            let filter_arm = match arm {
                Arm::Signal => FilterArm::Signal,
                Arm::Idler => FilterArm::Idler,
            };
            out = apply_aperture(&out, filter_arm, cutoff)?.state;
        }
        Ok(out)
    }
}

/// Cumulative distribution over non-negative weights, for inverse-CDF draws.
struct DiscreteCdf {
    cumulative: Vec<f64>,
}

impl DiscreteCdf {
    fn new(weights: &[f64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w.max(0.0);
            cumulative.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::DegenerateDensity { sum: acc });
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Ok(Self { cumulative })
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cumulative
            .partition_point(|&c| c < u)
            .min(self.cumulative.len() - 1)
    }
}

fn arrival_slots(n: usize, timing: TimingModel, rng: &mut impl Rng) -> Vec<u64> {
    match timing {
        TimingModel::RandomIntervals { mean_gap } => {
            let p = (1.0 / mean_gap.max(1.0)).clamp(1e-9, 1.0);
            let geo = Geometric::new(p).expect("valid geometric parameter");
            let mut slot = 0u64;
            (0..n)
                .map(|_| {
                    slot += 1 + geo.sample(rng);
                    slot
                })
                .collect()
        }
        TimingModel::Periodic { period } => {
            (0..n).map(|i| (i as u64 + 1) * period.max(1)).collect()
        }
    }
}

/// Draws `n_events` i.i.d. events from the channel's outcome distribution.
/// Deterministic for a fixed `(state, channel, n_events, seed)` tuple.
pub fn sample_events(
    state: &BiphotonState<f64>,
    channel: &MeasurementChannel,
    n_events: usize,
    seed: u64,
    timing: TimingModel,
) -> Result<Vec<DetectionEvent>> {
    if n_events == 0 {
        return Err(Error::InsufficientEvents { got: 0, need: 1 });
    }
    let prepared = channel.prepare(state)?;
    let grid = *prepared.grid();
    let mut rng_outcome = ChaCha12Rng::seed_from_u64(derive_seed(seed, 1));
    let mut rng_timing = ChaCha12Rng::seed_from_u64(derive_seed(seed, 2));
    let slots = arrival_slots(n_events, timing, &mut rng_timing);

    let outcomes: Vec<Outcome> = match channel.kind {
        ChannelKind::WideAcceptancePair => {
            let image_cdf = DiscreteCdf::new(&prepared.coincidence_image())?;
            let sum_cdf = DiscreteCdf::new(&prepared.sum_marginal())?;
            (0..n_events)
                .map(|_| {
                    let y_rel = grid.position(image_cdf.sample(&mut rng_outcome));
                    let q_sum = grid.momentum(sum_cdf.sample(&mut rng_outcome));
                    Outcome::Pair { y_rel, q_sum }
                })
                .collect()
        }
        ChannelKind::NarrowAcceptanceSingle { arm, .. } => {
            let cdf = DiscreteCdf::new(&prepared.marginal(arm))?;
            (0..n_events)
                .map(|_| Outcome::Single {
                    q: grid.momentum(cdf.sample(&mut rng_outcome)),
                })
                .collect()
        }
        ChannelKind::RecoilIntegrating => {
            let cdf = DiscreteCdf::new(&prepared.sum_marginal())?;
            (0..n_events)
                .map(|_| Outcome::Recoil {
                    q_sum: grid.momentum(cdf.sample(&mut rng_outcome)),
                })
                .collect()
        }
    };

    Ok(outcomes
        .into_iter()
        .zip(slots)
        .map(|(outcome, arrival_slot)| DetectionEvent {
            outcome,
            arrival_slot,
            is_noise: false,
        })
        .collect())
}

/// Recoil-based pointing estimate: mean of q_sum/(2·P_Z) with its standard
/// error, over all events that carry a total momentum.
pub fn recoil_direction(events: &[DetectionEvent], p_z: f64) -> Result<(f64, f64)> {
    let angles: Vec<f64> = events
        .iter()
        .filter_map(|e| match e.outcome {
            Outcome::Pair { q_sum, .. } | Outcome::Recoil { q_sum } => {
                Some(q_sum / (2.0 * p_z))
            }
            Outcome::Single { .. } => None,
        })
        .collect();
    if angles.len() < 2 {
        return Err(Error::InsufficientEvents {
            got: angles.len(),
            need: 2,
        });
    }
    let n = angles.len() as f64;
    let mean = angles.iter().sum::<f64>() / n;
    let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Estimation strategy for the two source directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionStrategy {
    /// Two-component Gaussian mixture ML fit (binned EM, common width).
    SinglePhotonMl,
    /// Median split and per-cluster centroids.
    Centroid,
}

/// Two fitted directions (sorted ascending) with bootstrap covariance.
#[derive(Debug, Clone, Copy)]
pub struct DirectionEstimate {
    pub angles: [f64; 2],
    /// 2×2 bootstrap covariance of the sorted angle pair (200 resamples).
    pub covariance: [[f64; 2]; 2],
    /// Fitted common component width (ML strategy; cluster pooled std for
    /// centroid).
    pub sigma: f64,
}

const BOOTSTRAP_RESAMPLES: usize = 200;

struct BinnedAngles {
    centers: Vec<f64>,
    counts: Vec<f64>,
    total: f64,
}

fn bin_angles(angles: &[f64], cell: f64) -> BinnedAngles {
    let idx: Vec<i64> = angles.iter().map(|a| (a / cell).round() as i64).collect();
    let lo = *idx.iter().min().unwrap();
    let hi = *idx.iter().max().unwrap();
    let n_bins = (hi - lo + 1) as usize;
    let mut counts = vec![0.0; n_bins];
    for &i in &idx {
        counts[(i - lo) as usize] += 1.0;
    }
    let centers = (0..n_bins).map(|b| (lo + b as i64) as f64 * cell).collect();
    BinnedAngles {
        centers,
        counts,
        total: angles.len() as f64,
    }
}

fn weighted_quantile(bins: &BinnedAngles, q: f64) -> f64 {
    let target = q * bins.total;
    let mut acc = 0.0;
    for (c, &w) in bins.centers.iter().zip(&bins.counts) {
        acc += w;
        if acc >= target {
            return *c;
        }
    }
    *bins.centers.last().unwrap()
}

struct MixtureFit {
    means: [f64; 2],
    sigma: f64,
}

/// EM for a two-component, common-width Gaussian mixture on binned counts.
fn fit_mixture(bins: &BinnedAngles, sigma_floor: f64) -> MixtureFit {
    let mut mu = [weighted_quantile(bins, 0.25), weighted_quantile(bins, 0.75)];
    let mean = bins
        .centers
        .iter()
        .zip(&bins.counts)
        .map(|(c, w)| c * w)
        .sum::<f64>()
        / bins.total;
    let overall_var = bins
        .centers
        .iter()
        .zip(&bins.counts)
        .map(|(c, w)| (c - mean).powi(2) * w)
        .sum::<f64>()
        / bins.total;
    let mut sigma = (overall_var.sqrt() / 2.0).max(sigma_floor);
    let mut weights = [0.5, 0.5];
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..300 {
        // E-step on bin centers, counts as multiplicities.
        let mut sums = [0.0; 2];
        let mut mean_acc = [0.0; 2];
        let mut var_acc = 0.0;
        let mut ll = 0.0;
        for (c, &w) in bins.centers.iter().zip(&bins.counts) {
            if w == 0.0 {
                continue;
            }
            let mut comp = [0.0; 2];
            for k in 0..2 {
                let z = (c - mu[k]) / sigma;
                comp[k] = weights[k] * (-0.5 * z * z).exp() / sigma;
            }
            let denom = comp[0] + comp[1];
            if denom <= 0.0 {
                continue;
            }
            ll += w * denom.ln();
            for k in 0..2 {
                let r = w * comp[k] / denom;
                sums[k] += r;
                mean_acc[k] += r * c;
                var_acc += r * (c - mu[k]).powi(2);
            }
        }
        for k in 0..2 {
            if sums[k] > 0.0 {
                mu[k] = mean_acc[k] / sums[k];
            }
            weights[k] = (sums[k] / bins.total).clamp(1e-6, 1.0);
        }
        let wsum = weights[0] + weights[1];
        weights[0] /= wsum;
        weights[1] /= wsum;
        sigma = (var_acc / bins.total).sqrt().max(sigma_floor);
        if (ll - prev_ll).abs() < 1e-9 * (1.0 + ll.abs()) {
            break;
        }
        prev_ll = ll;
    }
    if mu[0] > mu[1] {
        mu.swap(0, 1);
    }
    MixtureFit { means: mu, sigma }
}

fn centroid_split(angles: &mut [f64]) -> MixtureFit {
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = angles.len() / 2;
    let (lo, hi) = angles.split_at(mid);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let m = [mean(lo), mean(hi)];
    let pooled_var = lo
        .iter()
        .map(|a| (a - m[0]).powi(2))
        .chain(hi.iter().map(|a| (a - m[1]).powi(2)))
        .sum::<f64>()
        / angles.len() as f64;
    MixtureFit {
        means: m,
        sigma: pooled_var.sqrt(),
    }
}

fn covariance_of(pairs: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let n = pairs.len() as f64;
    let mut mean = [0.0; 2];
    for p in pairs {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut cov = [[0.0; 2]; 2];
    for p in pairs {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for row in &mut cov {
        for v in row {
            *v /= n - 1.0;
        }
    }
    cov
}

/// Fits two source directions from single-photon events.
///
/// `cell_angle` is the angular size of one grid cell (Δq/P_Z), the hard
/// resolution floor. The fit is declared non-identifiable when the component
/// separation falls below one cell or — for the ML strategy — below the
/// fitted component width (the Rayleigh criterion: overlapping components
/// cannot be attributed to distinct sources).
pub fn estimate_source_directions(
    events: &[DetectionEvent],
    strategy: DirectionStrategy,
    p_z: f64,
    cell_angle: f64,
) -> Result<DirectionEstimate> {
    let angles: Vec<f64> = events
        .iter()
        .filter_map(|e| match e.outcome {
            Outcome::Single { q } => Some(q / p_z),
            _ => None,
        })
        .collect();
    if angles.len() < 100 {
        return Err(Error::InsufficientEvents {
            got: angles.len(),
            need: 100,
        });
    }
    let bins = bin_angles(&angles, cell_angle);
    let sigma_floor = cell_angle / 2.0;

    let (fit, limit) = match strategy {
        DirectionStrategy::SinglePhotonMl => {
            let fit = fit_mixture(&bins, sigma_floor);
            let limit = cell_angle.max(fit.sigma);
            (fit, limit)
        }
        DirectionStrategy::Centroid => {
            let mut a = angles.clone();
            (centroid_split(&mut a), cell_angle)
        }
    };
    let separation = fit.means[1] - fit.means[0];
    if separation < limit {
        return Err(Error::NonIdentifiable { separation, limit });
    }

    // Bootstrap: multinomial resampling of the binned counts.
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(0xB007, bins.total as u64));
    let cdf = DiscreteCdf::new(&bins.counts)?;
    let n = angles.len();
    let mut resamples = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut counts = vec![0.0; bins.counts.len()];
        for _ in 0..n {
            counts[cdf.sample(&mut rng)] += 1.0;
        }
        let rb = BinnedAngles {
            centers: bins.centers.clone(),
            counts,
            total: n as f64,
        };
        let f = match strategy {
            DirectionStrategy::SinglePhotonMl => fit_mixture(&rb, sigma_floor),
            DirectionStrategy::Centroid => {
                let mut expanded: Vec<f64> = rb
                    .centers
                    .iter()
                    .zip(&rb.counts)
                    .flat_map(|(&c, &w)| std::iter::repeat(c).take(w as usize))
                    .collect();
                centroid_split(&mut expanded)
            }
        };
        resamples.push(f.means);
    }
    Ok(DirectionEstimate {
        angles: fit.means,
        covariance: covariance_of(&resamples),
        sigma: fit.sigma,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.8e}"),
        None => String::new(),
    }
}

/// Writes events as CSV: `channel,q1,q2,q_sum,y_rel,arrival_slot`, floats at
/// nine significant digits, inapplicable cells left empty.
pub fn write_events_csv<W: Write>(events: &[DetectionEvent], mut w: W) -> Result<()> {
    writeln!(w, "channel,q1,q2,q_sum,y_rel,arrival_slot")?;
    for e in events {
        let (q1, q2, q_sum, y_rel) = match e.outcome {
            Outcome::Pair { y_rel, q_sum } => (None, None, Some(q_sum), Some(y_rel)),
            Outcome::Single { q } => (Some(q), None, None, None),
            Outcome::Recoil { q_sum } => (None, None, Some(q_sum), None),
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            e.channel_label(),
            fmt_opt(q1),
            fmt_opt(q2),
            fmt_opt(q_sum),
            fmt_opt(y_rel),
            e.arrival_slot
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TransverseGrid;
    use crate::optics::{TransferKind, TransferStep};
    use crate::state::{make_difference_correlated_state, ImageSpec, SumEnvelope};
    use rustfft::num_complex::Complex;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn default_grid() -> TransverseGrid<f64> {
        TransverseGrid::new(256, 8.0 * std::f64::consts::PI).unwrap()
    }

    fn protocol_chain() -> Vec<TransferStep<f64>> {
        vec![TransferStep {
            kind: TransferKind::HardAperture { cutoff: 1.0 },
            arm: FilterArm::Both,
        }]
    }

    fn protocol_state() -> BiphotonState<f64> {
        let grid = default_grid();
        make_difference_correlated_state(
            grid,
            SumEnvelope::Gaussian { sigma: grid.q_max() / 32.0 },
            &ImageSpec::two_dots(4.0, 0.5),
        )
        .unwrap()
    }

    #[test]
    fn uniform_marginal_samples_pass_chi_square() {
        let grid = default_grid();
        let st = make_difference_correlated_state(
            grid,
            SumEnvelope::Flat,
            &ImageSpec::two_dots(4.0, 0.5),
        )
        .unwrap();
        // Wide single channel: cutoff at the grid edge keeps the marginal
        // exactly uniform.
        let ch = MeasurementChannel::narrow_single(
            grid.q_max() / std::f64::consts::TAU,
            Arm::Signal,
            vec![],
        );
        let events = sample_events(&st, &ch, 10_000, 42, TimingModel::default()).unwrap();
        let mut counts = vec![0.0f64; grid.n_points()];
        for e in &events {
            if let Outcome::Single { q } = e.outcome {
                counts[grid.momentum_index(q).unwrap()] += 1.0;
            }
        }
        let expected = 10_000.0 / grid.n_points() as f64;
        let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let dof = (grid.n_points() - 1) as f64;
        let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square p = {p}, stat = {stat}");
    }

    #[test]
    fn single_event_is_reproducible() {
        let st = protocol_state();
        let ch = MeasurementChannel::wide_pair(protocol_chain());
        let a = sample_events(&st, &ch, 1, 7, TimingModel::default()).unwrap();
        let b = sample_events(&st, &ch, 1, 7, TimingModel::default()).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn seed_determinism_on_full_streams() {
        let st = protocol_state();
        let ch = MeasurementChannel::wide_pair(protocol_chain());
        let a = sample_events(&st, &ch, 500, 99, TimingModel::default()).unwrap();
        let b = sample_events(&st, &ch, 500, 99, TimingModel::default()).unwrap();
        let c = sample_events(&st, &ch, 500, 100, TimingModel::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_histogram_has_two_modes_at_dot_positions() {
        let st = protocol_state();
        let grid = *st.grid();
        let ch = MeasurementChannel::wide_pair(protocol_chain());
        let events = sample_events(&st, &ch, 10_000, 42, TimingModel::default()).unwrap();
        let mut hist = vec![0.0f64; grid.n_points()];
        for e in &events {
            if let Outcome::Pair { y_rel, .. } = e.outcome {
                hist[grid.position_index(y_rel).unwrap()] += 1.0;
            }
        }
        let n = grid.n_points();
        let peak = |slice: &[f64], offset: usize| {
            offset
                + slice
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
        };
        let left = peak(&hist[..n / 2], 0);
        let right = peak(&hist[n / 2..], n / 2);
        assert!((grid.position(left) + 2.0).abs() <= grid.dy());
        assert!((grid.position(right) - 2.0).abs() <= grid.dy());
    }

    #[test]
    fn sampling_converges_in_total_variation() {
        let st = protocol_state();
        let grid = *st.grid();
        let ch = MeasurementChannel::wide_pair(protocol_chain());
        let prepared = ch.prepare(&st).unwrap();
        let density = prepared.coincidence_image();
        let probs: Vec<f64> = density.iter().map(|d| d * grid.dy()).collect();
        let events = sample_events(&st, &ch, 100_000, 42, TimingModel::default()).unwrap();
        let mut hist = vec![0.0f64; grid.n_points()];
        for e in &events {
            if let Outcome::Pair { y_rel, .. } = e.outcome {
                hist[grid.position_index(y_rel).unwrap()] += 1.0 / 100_000.0;
            }
        }
        let tv: f64 = probs
            .iter()
            .zip(&hist)
            .map(|(p, h)| (p - h).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "total variation {tv}");
    }

    #[test]
    fn arrival_slots_increase_and_periodic_mode_is_regular() {
        let st = protocol_state();
        let ch = MeasurementChannel::wide_pair(protocol_chain());
        let random = sample_events(&st, &ch, 200, 5, TimingModel::default()).unwrap();
        for w in random.windows(2) {
            assert!(w[1].arrival_slot > w[0].arrival_slot);
        }
        let periodic =
            sample_events(&st, &ch, 200, 5, TimingModel::Periodic { period: 7 }).unwrap();
        for (i, e) in periodic.iter().enumerate() {
            assert_eq!(e.arrival_slot, (i as u64 + 1) * 7);
        }
    }

    /// Builds a state whose sum-coordinate density is a two-Gaussian mixture
    /// at q_s = ±2·P_Z·θ₀ with the given intensity weights.
    fn recoil_state(theta0: f64, w_plus: f64) -> BiphotonState<f64> {
        let grid = default_grid();
        let p_z = std::f64::consts::TAU;
        let center = 2.0 * p_z * theta0;
        // Several grid cells wide, so the off-lattice center is represented
        // without discretization bias.
        let sig = 0.4;
        BiphotonState::from_fn(grid, |q1, q2| {
            let qd = grid.wrap_momentum(q1 - q2);
            let qs = grid.wrap_momentum(q1 + q2);
            let f = (-qd * qd / 16.0).exp();
            // Intensity-weighted mixture (amplitude = sqrt of the target
            // density) so overlapping components cannot interfere.
            let g2 = w_plus * (-(qs - center).powi(2) / (2.0 * sig * sig)).exp()
                + (1.0 - w_plus) * (-(qs + center).powi(2) / (2.0 * sig * sig)).exp();
            Complex::new(f * g2.sqrt(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn recoil_points_between_symmetric_sources() {
        let st = recoil_state(0.05, 0.5);
        let ch = MeasurementChannel::recoil(vec![]);
        let events = sample_events(&st, &ch, 20_000, 42, TimingModel::default()).unwrap();
        let (est, se) = recoil_direction(&events, std::f64::consts::TAU).unwrap();
        assert!(est.abs() < 3.0 * se, "estimate {est} vs se {se}");
    }

    #[test]
    fn recoil_tracks_single_source() {
        let st = recoil_state(0.05, 1.0);
        let ch = MeasurementChannel::recoil(vec![]);
        let events = sample_events(&st, &ch, 20_000, 42, TimingModel::default()).unwrap();
        let (est, se) = recoil_direction(&events, std::f64::consts::TAU).unwrap();
        assert!((est - 0.05).abs() < 3.0 * se + 1e-3, "estimate {est} ± {se}");
    }

    #[test]
    fn recoil_weighted_mixture() {
        // 70/30 split between ±ΔΘ₀/2 with ΔΘ₀ = 0.1 → mean 0.2·ΔΘ₀/2·2 = 0.02.
        let st = recoil_state(0.05, 0.7);
        let ch = MeasurementChannel::recoil(vec![]);
        let events = sample_events(&st, &ch, 50_000, 42, TimingModel::default()).unwrap();
        let (est, se) = recoil_direction(&events, std::f64::consts::TAU).unwrap();
        assert!((est - 0.02).abs() < 3.0 * se + 1e-3, "estimate {est} ± {se}");
    }

    #[test]
    fn recoil_needs_pair_outcomes() {
        let events = vec![DetectionEvent {
            outcome: Outcome::Single { q: 0.0 },
            arrival_slot: 1,
            is_noise: false,
        }];
        assert!(matches!(
            recoil_direction(&events, 1.0),
            Err(Error::InsufficientEvents { .. })
        ));
    }

    /// Two narrow angular beams at ±θ₀: the control (non-protocol) source.
    fn narrow_beams_state(theta0: f64, beam_std: f64) -> BiphotonState<f64> {
        let grid = TransverseGrid::new(256, std::f64::consts::TAU).unwrap();
        let p_z = std::f64::consts::TAU;
        let (c, s) = (p_z * theta0, p_z * beam_std);
        BiphotonState::from_fn(grid, |q1, q2| {
            let beam = |q: f64| {
                (-(q - c).powi(2) / (4.0 * s * s)).exp()
                    + (-(q + c).powi(2) / (4.0 * s * s)).exp()
            };
            Complex::new(beam(q1) * (-q2 * q2 / (4.0 * s * s)).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn directions_recovered_for_separated_beams() {
        let st = narrow_beams_state(0.05, 0.01);
        let grid = *st.grid();
        let p_z = std::f64::consts::TAU;
        let cell_angle = grid.dq() / p_z;
        let ch = MeasurementChannel::narrow_single(1.0, Arm::Signal, vec![]);
        let events = sample_events(&st, &ch, 10_000, 42, TimingModel::default()).unwrap();
        for strategy in [DirectionStrategy::SinglePhotonMl, DirectionStrategy::Centroid] {
            let est = estimate_source_directions(&events, strategy, p_z, cell_angle).unwrap();
            assert!(
                (est.angles[0] + 0.05).abs() <= cell_angle,
                "{strategy:?}: {:?}",
                est.angles
            );
            assert!((est.angles[1] - 0.05).abs() <= cell_angle);
            assert!(est.covariance[0][0] >= 0.0 && est.covariance[1][1] >= 0.0);
        }
    }

    #[test]
    fn protocol_marginal_is_non_identifiable() {
        let st = protocol_state();
        let grid = *st.grid();
        let p_z = std::f64::consts::TAU;
        let cell_angle = grid.dq() / p_z;
        let mut chain = protocol_chain();
        chain.pop(); // narrow_single applies its own aperture below
        let ch = MeasurementChannel::narrow_single(1.0, Arm::Signal, chain);
        let events = sample_events(&st, &ch, 10_000, 42, TimingModel::default()).unwrap();
        let r = estimate_source_directions(
            &events,
            DirectionStrategy::SinglePhotonMl,
            p_z,
            cell_angle,
        );
        match r {
            Err(Error::NonIdentifiable { .. }) => {}
            Ok(est) => {
                // Privacy also holds if the uncertainty spans the whole
                // opening-angle window.
                let spread = est.covariance[0][0].sqrt() + est.covariance[1][1].sqrt();
                assert!(spread >= 0.1, "identifiable with spread {spread}: {est:?}");
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn degenerate_single_point_is_non_identifiable() {
        let events: Vec<DetectionEvent> = (0..200)
            .map(|i| DetectionEvent {
                outcome: Outcome::Single { q: 0.5 },
                arrival_slot: i,
                is_noise: false,
            })
            .collect();
        for strategy in [DirectionStrategy::SinglePhotonMl, DirectionStrategy::Centroid] {
            assert!(matches!(
                estimate_source_directions(&events, strategy, 1.0, 0.01),
                Err(Error::NonIdentifiable { .. })
            ));
        }
    }

    #[test]
    fn too_few_events_errors() {
        let events: Vec<DetectionEvent> = (0..50)
            .map(|i| DetectionEvent {
                outcome: Outcome::Single { q: i as f64 * 0.01 },
                arrival_slot: i,
                is_noise: false,
            })
            .collect();
        assert!(matches!(
            estimate_source_directions(&events, DirectionStrategy::Centroid, 1.0, 0.01),
            Err(Error::InsufficientEvents { .. })
        ));
    }

    #[test]
    fn exclusivity_of_image_and_direction_measurements() {
        // The central claim, operationally: with the wide-acceptance chain
        // the image reads out at high contrast while directions are not
        // identifiable; the narrow chain that would resolve directions
        // destroys the image contrast.
        let st = protocol_state();
        let grid = *st.grid();
        let p_z = std::f64::consts::TAU;

        // Wide acceptance: high contrast.
        let wide = MeasurementChannel::wide_pair(protocol_chain());
        let img = wide.prepare(&st).unwrap().coincidence_image();
        let peak = img[grid.position_index(2.0).unwrap()]
            .max(img[grid.position_index(-2.0).unwrap()]);
        let mid = img[grid.position_index(0.0).unwrap()];
        let contrast_wide = (peak - mid) / (peak + mid);
        assert!(contrast_wide > 0.9, "wide contrast {contrast_wide}");

        // ... while the single-photon directions stay hidden.
        let singles = MeasurementChannel::narrow_single(1.0, Arm::Signal, vec![]);
        let events = sample_events(&st, &singles, 10_000, 42, TimingModel::default()).unwrap();
        let cell_angle = grid.dq() / p_z;
        let dir = estimate_source_directions(
            &events,
            DirectionStrategy::SinglePhotonMl,
            p_z,
            cell_angle,
        );
        assert!(
            matches!(dir, Err(Error::NonIdentifiable { .. })),
            "directions should be hidden, got {dir:?}"
        );

        // Narrow acceptance: contrast destroyed.
        let narrow = apply_aperture(&st, FilterArm::Signal, 0.1).unwrap().state;
        let img = narrow.coincidence_image();
        let peak = img[grid.position_index(2.0).unwrap()]
            .max(img[grid.position_index(-2.0).unwrap()]);
        let mid = img[grid.position_index(0.0).unwrap()];
        let contrast_narrow = ((peak - mid) / (peak + mid)).max(0.0);
        assert!(contrast_narrow < 0.1, "narrow contrast {contrast_narrow}");
    }

    #[test]
    fn csv_export_format() {
        let events = vec![
            DetectionEvent {
                outcome: Outcome::Pair { y_rel: 2.0, q_sum: -0.5 },
                arrival_slot: 3,
                is_noise: false,
            },
            DetectionEvent {
                outcome: Outcome::Single { q: 1.25 },
                arrival_slot: 9,
                is_noise: true,
            },
        ];
        let mut buf = Vec::new();
        write_events_csv(&events, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "channel,q1,q2,q_sum,y_rel,arrival_slot");
        assert_eq!(lines[1], "pair,,,-5.00000000e-1,2.00000000e0,3");
        assert_eq!(lines[2], "single,1.25000000e0,,,,9");
    }
}
