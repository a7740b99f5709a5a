//! Scenario configuration: a strict TOML schema that fully describes a run
//! (geometry, grid, state, transfer chain, noise, timing, attack, sweep),
//! plus the bundled reference scenarios.
//!
//! Parsing is strict — unknown keys are fatal, naming the offending key —
//! and configs round-trip through serialization unchanged.

use crate::adversary::{build_offset, NoisePolicy};
use crate::error::{Error, Result};
use crate::geometry::SystemGeometry;
use crate::grid::TransverseGrid;
use crate::measurement::TimingModel;
use crate::optics::{FilterArm, TransferKind, TransferStep};
use crate::state::{
    make_difference_correlated_state, BiphotonState, ImageSpec, SumEnvelope,
};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    pub state: StateConfig,
    #[serde(default)]
    pub channel: Vec<ChannelStepConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub timing: TimingConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub tradeoff: TradeoffConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub transmitter_separation: f64,
    pub range: f64,
    pub opening_angle_narrow: f64,
    pub image_separation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_wavelength: Option<f64>,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub q_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// The protocol state: image in the difference coordinate times a sum
    /// envelope.
    DifferenceCorrelated,
    /// Control source: two independent narrow beams, one per transmitter.
    NarrowBeams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Flat,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub kind: StateKind,
    #[serde(default = "default_envelope")]
    pub sum_envelope: EnvelopeKind,
    /// Width of the Gaussian sum envelope; default q_max/32.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_envelope_sigma: Option<f64>,
    #[serde(default = "default_dots")]
    pub dot_positions: Vec<f64>,
    #[serde(default = "default_dot_width")]
    pub dot_width: f64,
    #[serde(default = "default_beam_angles")]
    pub beam_angles: Vec<f64>,
    #[serde(default = "default_beam_std")]
    pub beam_angular_std: f64,
}

fn default_envelope() -> EnvelopeKind {
    EnvelopeKind::Gaussian
}
fn default_dots() -> Vec<f64> {
    vec![-2.0, 2.0]
}
fn default_dot_width() -> f64 {
    0.5
}
fn default_beam_angles() -> Vec<f64> {
    vec![-0.05, 0.05]
}
fn default_beam_std() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmConfig {
    Signal,
    Idler,
    Both,
}

impl From<ArmConfig> for FilterArm {
    fn from(a: ArmConfig) -> Self {
        match a {
            ArmConfig::Signal => FilterArm::Signal,
            ArmConfig::Idler => FilterArm::Idler,
            ArmConfig::Both => FilterArm::Both,
        }
    }
}

fn default_arm() -> ArmConfig {
    ArmConfig::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelStepConfig {
    FreePropagation {
        distance: f64,
        #[serde(default = "default_arm")]
        arm: ArmConfig,
    },
    HardAperture {
        cutoff: f64,
        #[serde(default = "default_arm")]
        arm: ArmConfig,
    },
    Mask {
        from: f64,
        to: f64,
        #[serde(default = "default_arm")]
        arm: ArmConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub background_rate: f64,
    /// Add the computed minimal offset that flattens the single-photon
    /// marginal.
    #[serde(default)]
    pub apply_offset: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            background_rate: 0.0,
            apply_offset: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimingConfig {
    Random {
        #[serde(default = "default_mean_gap")]
        mean_gap: f64,
    },
    Periodic {
        #[serde(default = "default_period")]
        period: u64,
    },
}

fn default_mean_gap() -> f64 {
    4.0
}
fn default_period() -> u64 {
    7
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig::Random { mean_gap: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "default_mask_width")]
    pub mask_width: f64,
    #[serde(default = "default_window")]
    pub window: u64,
}

fn default_mask_width() -> f64 {
    0.05
}
fn default_window() -> u64 {
    64
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mask_width: default_mask_width(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffConfig {
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
}

fn default_cutoffs() -> Vec<f64> {
    vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0]
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            cutoffs: default_cutoffs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_events: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    /// Bundled reference scenario by name, if any.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name {
            "default_protocol" => include_str!("../scenarios/default_protocol.toml"),
            "control_narrowbeams" => include_str!("../scenarios/control_narrowbeams.toml"),
            "periodic_slots" => include_str!("../scenarios/periodic_slots.toml"),
            "infeasible" => include_str!("../scenarios/infeasible.toml"),
            _ => return None,
        };
        Some(Self::from_toml_str(text).expect("bundled scenario parses"))
    }

    pub fn build_geometry(&self) -> Result<SystemGeometry<f64>> {
        let g = SystemGeometry::from_baseline(
            self.geometry.transmitter_separation,
            self.geometry.range,
            self.geometry.opening_angle_narrow,
            self.geometry.image_separation,
        )?;
        match self.geometry.pump_wavelength {
            Some(l) => g.with_pump_wavelength(l),
            None => Ok(g),
        }
    }

    pub fn build_grid(&self) -> Result<TransverseGrid<f64>> {
        TransverseGrid::new(self.grid.n_points, self.grid.q_max)
    }

    pub fn image(&self) -> ImageSpec<f64> {
        ImageSpec::new(self.state.dot_positions.clone(), self.state.dot_width)
    }

    pub fn envelope(&self) -> SumEnvelope<f64> {
        match self.state.sum_envelope {
            EnvelopeKind::Flat => SumEnvelope::Flat,
            EnvelopeKind::Gaussian => SumEnvelope::Gaussian {
                sigma: self
                    .state
                    .sum_envelope_sigma
                    .unwrap_or(self.grid.q_max / 32.0),
            },
        }
    }

    pub fn build_state(&self) -> Result<BiphotonState<f64>> {
        let grid = self.build_grid()?;
        match self.state.kind {
            StateKind::DifferenceCorrelated => {
                make_difference_correlated_state(grid, self.envelope(), &self.image())
            }
            StateKind::NarrowBeams => {
                let geom = self.build_geometry()?;
                let p_z = geom.axial_momentum;
                let centers: Vec<f64> =
                    self.state.beam_angles.iter().map(|&a| a * p_z).collect();
                let s = self.state.beam_angular_std * p_z;
                if centers.is_empty() {
                    return Err(Error::Validation("beam_angles must not be empty".into()));
                }
                BiphotonState::from_fn(grid, |q1, q2| {
                    let beam = |q: f64| -> f64 {
                        centers
                            .iter()
                            .map(|&c| (-(q - c).powi(2) / (4.0 * s * s)).exp())
                            .sum()
                    };
                    Complex::new(beam(q1) * beam(q2), 0.0)
                })
            }
        }
    }

    pub fn build_chain(&self) -> Vec<TransferStep<f64>> {
        self.channel
            .iter()
            .map(|step| match *step {
                ChannelStepConfig::FreePropagation { distance, arm } => TransferStep {
                    kind: TransferKind::FreePropagation { distance },
                    arm: arm.into(),
                },
                ChannelStepConfig::HardAperture { cutoff, arm } => TransferStep {
                    kind: TransferKind::HardAperture { cutoff },
                    arm: arm.into(),
                },
                ChannelStepConfig::Mask { from, to, arm } => TransferStep {
                    kind: TransferKind::Mask { from, to },
                    arm: arm.into(),
                },
            })
            .collect()
    }

    pub fn timing_model(&self) -> TimingModel {
        match self.timing {
            TimingConfig::Random { mean_gap } => TimingModel::RandomIntervals { mean_gap },
            TimingConfig::Periodic { period } => TimingModel::Periodic { period },
        }
    }

    /// Noise policy against the given (chain-prepared) state: isotropic
    /// background over the on-shell field of view plus, if configured, the
    /// computed bias-cancelling offset.
    pub fn build_noise_policy(
        &self,
        prepared: &BiphotonState<f64>,
    ) -> Result<Option<NoisePolicy>> {
        if self.noise.background_rate == 0.0 && !self.noise.apply_offset {
            return Ok(None);
        }
        let grid = prepared.grid();
        let mut policy = NoisePolicy::isotropic(
            self.noise.background_rate,
            grid,
            std::f64::consts::TAU,
        );
        if self.noise.apply_offset {
            if let Some((offset, _residual)) = build_offset(prepared) {
                policy.single_photon_offset = Some(offset);
            }
        }
        Ok(Some(policy))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.n_events == 0 {
            return Err(Error::Validation("run.n_events must be positive".into()));
        }
        self.build_geometry()?;
        self.build_grid()?;
        Ok(())
    }
}
