//! Discretized 1-D transverse momentum/position axes.
//!
//! The momentum axis has `n_points` samples spanning [−q_max, q_max) with
//! spacing Δq = 2·q_max/n. The conjugate position axis follows from discrete
//! Fourier duality: Δy = π/q_max and extent n·Δy. Both axes are periodic.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid<T: Real> {
    n_points: usize,
    momentum_extent: T,
}

impl<T: Real> TransverseGrid<T> {
    pub fn new(n_points: usize, momentum_extent: T) -> Result<Self> {
        if n_points < 16 || !n_points.is_power_of_two() {
            return Err(Error::Domain(format!(
                "n_points must be a power of two >= 16, got {n_points}"
            )));
        }
        if !(momentum_extent > T::zero()) {
            return Err(Error::Domain(format!(
                "momentum_extent must be positive, got {momentum_extent}"
            )));
        }
        Ok(Self {
            n_points,
            momentum_extent,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Grid half-extent q_max; the axis spans [−q_max, q_max).
    pub fn q_max(&self) -> T {
        self.momentum_extent
    }

    /// Momentum spacing Δq = 2·q_max/n.
    pub fn dq(&self) -> T {
        T::from_f64_lossy(2.0) * self.momentum_extent / T::from_usize(self.n_points).unwrap()
    }

    /// Position spacing Δy = π/q_max.
    pub fn dy(&self) -> T {
        T::PI() / self.momentum_extent
    }

    /// Full position extent n·Δy = 2π·n/(2·q_max).
    pub fn position_extent(&self) -> T {
        T::from_usize(self.n_points).unwrap() * self.dy()
    }

    pub fn momentum(&self, index: usize) -> T {
        (T::from_usize(index).unwrap() - T::from_usize(self.n_points / 2).unwrap()) * self.dq()
    }

    pub fn position(&self, index: usize) -> T {
        (T::from_usize(index).unwrap() - T::from_usize(self.n_points / 2).unwrap()) * self.dy()
    }

    pub fn momenta(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.momentum(i)).collect()
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.position(i)).collect()
    }

    /// Nearest grid index to momentum `q` (q must lie within the axis).
    pub fn momentum_index(&self, q: T) -> Result<usize> {
        let idx = (q / self.dq()
            + T::from_usize(self.n_points / 2).unwrap())
        .round()
        .to_isize()
        .ok_or_else(|| Error::Domain("non-finite momentum".into()))?;
        if idx < 0 || idx >= self.n_points as isize {
            return Err(Error::Domain(format!(
                "momentum {q} outside the grid [-{0}, {0})",
                self.momentum_extent
            )));
        }
        Ok(idx as usize)
    }

    /// Nearest grid index to position `y`.
    pub fn position_index(&self, y: T) -> Result<usize> {
        let idx = (y / self.dy()
            + T::from_usize(self.n_points / 2).unwrap())
        .round()
        .to_isize()
        .ok_or_else(|| Error::Domain("non-finite position".into()))?;
        if idx < 0 || idx >= self.n_points as isize {
            return Err(Error::Domain(format!(
                "position {y} outside the grid extent {}",
                self.position_extent()
            )));
        }
        Ok(idx as usize)
    }

    /// Wraps a momentum-like value into the principal zone [−q_max, q_max).
    pub fn wrap_momentum(&self, q: T) -> T {
        let period = T::from_f64_lossy(2.0) * self.momentum_extent;
        let shifted = q + self.momentum_extent;
        let wrapped = shifted - (shifted / period).floor() * period;
        wrapped - self.momentum_extent
    }

    /// Wraps a position-like value into [−extent/2, extent/2).
    pub fn wrap_position(&self, y: T) -> T {
        let period = self.position_extent();
        let half = period / T::from_f64_lossy(2.0);
        let shifted = y + half;
        let wrapped = shifted - (shifted / period).floor() * period;
        wrapped - half
    }
}
