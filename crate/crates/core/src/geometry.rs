//! Dimensionless unit system, scenario geometry, and feasibility margins.
//!
//! All lengths are expressed in units of the signal wavelength (λ ≡ 1), so
//! the on-shell axial momentum of a signal photon is 2π. The feasibility
//! check operationalizes the two opening-angle inequalities plus the
//! propagation bound Y₀ ≥ λ.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Angles are treated as small up to this bound (inclusive); beyond it the
/// linear angle-momentum relation is rejected.
pub const SMALL_ANGLE_MAX: f64 = 0.1;

/// Dimensionless convention: the signal wavelength is the base length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem<T: Real> {
    /// Signal wavelength; identically one in this convention.
    pub signal_wavelength: T,
}

impl<T: Real> Default for UnitSystem<T> {
    fn default() -> Self {
        Self {
            signal_wavelength: T::one(),
        }
    }
}

impl<T: Real> UnitSystem<T> {
    /// On-shell momentum magnitude 2π/λ of a signal photon.
    pub fn axial_momentum(&self) -> T {
        T::TAU() / self.signal_wavelength
    }
}

/// Two-transmitter scenario geometry in signal-wavelength units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemGeometry<T: Real> {
    /// Transmitter separation L.
    pub transmitter_separation: T,
    /// Range R from transmitters to receiver.
    pub range: T,
    /// Full opening angle ΔΘ₀ = L/R between the two transmitters.
    pub opening_angle_full: T,
    /// Narrow opening angle ΔΘ needed to isolate one transmitter.
    pub opening_angle_narrow: T,
    /// Axial momentum P_Z (2π for an on-shell signal photon).
    pub axial_momentum: T,
    /// Image dot separation Y₀.
    pub image_separation: T,
    /// Pump wavelength λ_p (λ/2 by default).
    pub pump_wavelength: T,
}

impl<T: Real> SystemGeometry<T> {
    /// Builds the geometry from transmitter separation and range, deriving
    /// ΔΘ₀ = L/R and defaulting λ_p = λ/2.
    pub fn from_baseline(
        transmitter_separation: T,
        range: T,
        opening_angle_narrow: T,
        image_separation: T,
    ) -> Result<Self> {
        let units = UnitSystem::default();
        let geom = Self {
            transmitter_separation,
            range,
            opening_angle_full: transmitter_separation / range,
            opening_angle_narrow,
            axial_momentum: units.axial_momentum(),
            image_separation,
            pump_wavelength: units.signal_wavelength / T::from_f64_lossy(2.0),
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn with_pump_wavelength(mut self, pump_wavelength: T) -> Result<Self> {
        self.pump_wavelength = pump_wavelength;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("transmitter_separation", self.transmitter_separation),
            ("range", self.range),
            ("image_separation", self.image_separation),
            ("pump_wavelength", self.pump_wavelength),
            ("axial_momentum", self.axial_momentum),
        ];
        for (name, v) in pos {
            if !(v > T::zero()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.opening_angle_full > self.opening_angle_narrow
            && self.opening_angle_narrow > T::zero())
        {
            return Err(Error::Domain(format!(
                "need opening_angle_full > opening_angle_narrow > 0, got {} and {}",
                self.opening_angle_full, self.opening_angle_narrow
            )));
        }
        let derived = self.transmitter_separation / self.range;
        if (derived - self.opening_angle_full).abs() > T::from_f64_lossy(1e-12) {
            return Err(Error::Domain(format!(
                "opening_angle_full {} inconsistent with L/R = {derived}",
                self.opening_angle_full
            )));
        }
        if self.opening_angle_full > T::from_f64_lossy(SMALL_ANGLE_MAX) {
            return Err(Error::Domain(format!(
                "opening_angle_full {} outside small-angle regime (max {SMALL_ANGLE_MAX})",
                self.opening_angle_full
            )));
        }
        Ok(())
    }
}

/// Outcome of the three feasibility conditions, with the dimensionless
/// margins by which each holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict<T: Real> {
    pub feasible: bool,
    /// Y₀ · 4π ΔΘ₀ / λ, the factor by which Y₀ exceeds 1/ΔP_{y,0}.
    pub margin_lower: T,
    /// λ / (4π ΔΘ · Y₀), the factor by which Y₀ stays below 1/ΔP_y.
    pub margin_upper: T,
    /// Y₀/λ, the propagation condition.
    pub margin_propagation: T,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub propagation_ok: bool,
}

/// Converts a small angle to the transverse momentum spread P_Z · θ.
pub fn angle_to_transverse_momentum<T: Real>(theta: T, p_z: T) -> Result<T> {
    if !(p_z > T::zero()) {
        return Err(Error::Domain(format!("p_z must be positive, got {p_z}")));
    }
    if theta < T::zero() || theta > T::from_f64_lossy(SMALL_ANGLE_MAX) {
        return Err(Error::Domain(format!(
            "theta {theta} outside small-angle regime [0, {SMALL_ANGLE_MAX}]"
        )));
    }
    Ok(p_z * theta)
}

/// Linear angle ↔ momentum map without the small-angle guard, for grid-axis
/// conversions in the optics layer where angles cover the whole momentum grid.
pub fn angle_to_transverse_momentum_unchecked<T: Real>(theta: T, p_z: T) -> T {
    p_z * theta
}

/// Evaluates the three feasibility conditions at a "much greater than"
/// margin `margin` (the two inequality margins must reach it; the
/// propagation ratio Y₀/λ must reach one).
pub fn check_feasibility<T: Real>(
    geom: &SystemGeometry<T>,
    margin: T,
) -> Result<FeasibilityVerdict<T>> {
    if margin < T::one() {
        return Err(Error::Domain(format!("margin must be >= 1, got {margin}")));
    }
    geom.validate()?;
    let lambda = UnitSystem::<T>::default().signal_wavelength;
    let four_pi = T::from_f64_lossy(4.0) * T::PI();
    let margin_lower = geom.image_separation * four_pi * geom.opening_angle_full / lambda;
    let margin_upper = lambda / (four_pi * geom.opening_angle_narrow * geom.image_separation);
    let margin_propagation = geom.image_separation / lambda;
    let lower_ok = margin_lower >= margin;
    let upper_ok = margin_upper >= margin;
    let propagation_ok = margin_propagation >= T::one();
    Ok(FeasibilityVerdict {
        feasible: lower_ok && upper_ok && propagation_ok,
        margin_lower,
        margin_upper,
        margin_propagation,
        lower_ok,
        upper_ok,
        propagation_ok,
    })
}

/// Spatial-frequency cutoff w/(zλ) of an aperture of width `w` at range `z`.
pub fn aperture_cutoff<T: Real>(width: T, range: T, wavelength: T) -> Result<T> {
    for (name, v) in [("width", width), ("range", range), ("wavelength", wavelength)] {
        if !(v > T::zero()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if width / range >= T::from_f64_lossy(0.5) {
        return Err(Error::Domain(format!(
            "w/z = {} is not a small angular measure",
            width / range
        )));
    }
    Ok(width / (range * wavelength))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn demo_geometry() -> SystemGeometry<f64> {
        SystemGeometry::from_baseline(1e5, 1e6, 1e-3, 4.0).unwrap()
    }

    #[test]
    fn zero_angle_maps_to_zero_momentum() {
        assert_eq!(
            angle_to_transverse_momentum(0.0, std::f64::consts::TAU).unwrap(),
            0.0
        );
    }

    #[test]
    fn angle_momentum_hand_values() {
        // P_Z·ΔΘ evaluated by hand.
        assert_relative_eq!(
            angle_to_transverse_momentum(1e-3, std::f64::consts::TAU).unwrap(),
            6.2832e-3,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            angle_to_transverse_momentum(0.05, 4.0 * std::f64::consts::PI).unwrap(),
            0.6283,
            max_relative = 1e-4
        );
    }

    #[test]
    fn angle_momentum_rejects_large_angle() {
        assert!(angle_to_transverse_momentum(0.2, 1.0).is_err());
        assert!(angle_to_transverse_momentum(-0.01, 1.0).is_err());
        assert!(angle_to_transverse_momentum(0.05, 0.0).is_err());
    }

    #[test]
    fn feasible_demo_scenario() {
        let v = check_feasibility(&demo_geometry(), 5.0).unwrap();
        assert!(v.feasible);
        assert_relative_eq!(v.margin_lower, 5.0265, max_relative = 1e-4);
        assert_relative_eq!(v.margin_upper, 19.894, max_relative = 1e-4);
        assert_relative_eq!(v.margin_propagation, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn propagation_condition_fails_for_subwavelength_separation() {
        let g = SystemGeometry::from_baseline(1e5, 1e6, 1e-3, 0.9).unwrap();
        let v = check_feasibility(&g, 1.0).unwrap();
        assert!(!v.feasible);
        assert!(!v.propagation_ok);
        assert!(v.lower_ok && v.upper_ok);
    }

    #[test]
    fn lower_margin_fails_for_small_full_angle() {
        let g = SystemGeometry::from_baseline(1e4, 1e6, 1e-3, 4.0).unwrap();
        let v = check_feasibility(&g, 5.0).unwrap();
        assert!(!v.feasible);
        assert!(!v.lower_ok);
        assert_relative_eq!(v.margin_lower, 0.50265, max_relative = 1e-4);
    }

    #[test]
    fn verdict_flag_consistency() {
        for y0 in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let g = SystemGeometry::from_baseline(1e5, 1e6, 1e-3, y0).unwrap();
            let v = check_feasibility(&g, 5.0).unwrap();
            assert_eq!(v.feasible, v.lower_ok && v.upper_ok && v.propagation_ok);
        }
    }

    #[test]
    fn aperture_cutoff_hand_values() {
        assert_relative_eq!(aperture_cutoff(1.0, 10.0, 1.0).unwrap(), 0.1);
        assert_relative_eq!(aperture_cutoff(0.25, 1.0, 1.0).unwrap(), 0.25);
        let c1 = aperture_cutoff(1.0, 10.0, 1.0).unwrap();
        let c2 = aperture_cutoff(1.0, 20.0, 1.0).unwrap();
        assert_relative_eq!(c2, c1 / 2.0);
    }

    #[test]
    fn aperture_cutoff_rejects_bad_inputs() {
        assert!(aperture_cutoff(0.0, 1.0, 1.0).is_err());
        assert!(aperture_cutoff(1.0, -1.0, 1.0).is_err());
        assert!(aperture_cutoff(1.0, 1.5, 1.0).is_err());
    }

    #[test]
    fn feasibility_works_in_f32() {
        let g = SystemGeometry::<f32>::from_baseline(1e5, 1e6, 1e-3, 4.0).unwrap();
        let v = check_feasibility(&g, 5.0).unwrap();
        assert!(v.feasible);
    }
}
