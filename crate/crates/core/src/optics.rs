//! Transfer-function optics on biphoton states: angular-spectrum free
//! propagation with an evanescent cutoff, hard momentum apertures, and
//! angular blocking masks.
//!
//! Propagation multiplies each arm by the unit-modulus phase
//! exp(i·k_z(q)·z) with k_z = √((2π/λ)² − q²) and zeroes modes beyond the
//! on-shell bound; the lost norm is reported rather than silently
//! renormalized. Apertures and masks renormalize, since detection is
//! conditioned on arrival, and report the transmitted fraction.

use crate::error::{Error, Result};
use crate::geometry::angle_to_transverse_momentum_unchecked;
use crate::scalar::{on_shell_bound, Real};
use crate::state::BiphotonState;
use rustfft::num_complex::Complex;

/// Which arm(s) a filter acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterArm {
    Signal,
    Idler,
    Both,
}

impl FilterArm {
    fn hits_signal(self) -> bool {
        matches!(self, FilterArm::Signal | FilterArm::Both)
    }
    fn hits_idler(self) -> bool {
        matches!(self, FilterArm::Idler | FilterArm::Both)
    }
}

/// Signal/idler wavelengths used by free propagation (both one by default,
/// in signal-wavelength units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmWavelengths<T: Real> {
    pub signal: T,
    pub idler: T,
}

impl<T: Real> Default for ArmWavelengths<T> {
    fn default() -> Self {
        Self {
            signal: T::one(),
            idler: T::one(),
        }
    }
}

/// One passive optical element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransferKind<T: Real> {
    /// Free-space propagation over `distance` (acts on both arms).
    FreePropagation { distance: T },
    /// Hard aperture passing spatial frequencies |q|/(2π) ≤ `cutoff`.
    HardAperture { cutoff: T },
    /// Opaque strip blocking the angular interval [`from`, `to`] (radians).
    Mask { from: T, to: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferStep<T: Real> {
    pub kind: TransferKind<T>,
    pub arm: FilterArm,
}

/// Result of propagation: the (possibly shrunken) state plus the norm lost
/// to evanescent modes.
#[derive(Debug, Clone)]
pub struct Propagated<T: Real> {
    pub state: BiphotonState<T>,
    pub lost_norm: T,
}

/// Result of an aperture or mask: the renormalized state plus the fraction
/// of probability that made it through.
#[derive(Debug, Clone)]
pub struct Filtered<T: Real> {
    pub state: BiphotonState<T>,
    pub transmitted: T,
}

/// Per-arm phase/cut factors for free propagation.
fn propagation_factors<T: Real>(
    state: &BiphotonState<T>,
    distance: T,
    wavelength: T,
) -> Vec<Complex<T>> {
    let bound = on_shell_bound(wavelength);
    state
        .grid()
        .momenta()
        .iter()
        .map(|&q| {
            if q.abs() > bound {
                Complex::new(T::zero(), T::zero())
            } else {
                let kz = (bound * bound - q * q).sqrt();
                let phase = kz * distance;
                Complex::new(phase.cos(), phase.sin())
            }
        })
        .collect()
}

/// Angular-spectrum propagation of both arms over `distance`. Evanescent
/// modes (|q| beyond the arm's on-shell bound) are dropped for any positive
/// distance; the state is not renormalized and the removed norm is reported.
pub fn propagate<T: Real>(
    state: &BiphotonState<T>,
    distance: T,
    wavelengths: ArmWavelengths<T>,
) -> Result<Propagated<T>> {
    if distance < T::zero() {
        return Err(Error::Domain(format!(
            "propagation distance must be non-negative, got {distance}"
        )));
    }
    if distance == T::zero() {
        return Ok(Propagated {
            state: state.clone(),
            lost_norm: T::zero(),
        });
    }
    let before = state.norm_sq();
    let fs = propagation_factors(state, distance, wavelengths.signal);
    let fi = propagation_factors(state, distance, wavelengths.idler);
    let mut out = state.clone();
    let n = out.grid().n_points();
    {
        let amp = out.amplitude_mut();
        for i in 0..n {
            for j in 0..n {
                amp[[i, j] ] = amp[[i, j]] * fs[i] * fi[j];
            }
        }
    }
    let lost_norm = before - out.norm_sq();
    Ok(Propagated {
        state: out,
        lost_norm,
    })
}

/// Hard aperture: zeroes the arm's amplitude where |q|/(2π) exceeds
/// `cutoff`, then renormalizes. A pass-through aperture (nothing blocked)
/// returns the input bit-for-bit.
pub fn apply_aperture<T: Real>(
    state: &BiphotonState<T>,
    arm: FilterArm,
    cutoff: T,
) -> Result<Filtered<T>> {
    if !(cutoff > T::zero()) {
        return Err(Error::Domain(format!(
            "aperture cutoff must be positive, got {cutoff}"
        )));
    }
    let q_cut = cutoff * T::TAU();
    let grid = *state.grid();
    let pass: Vec<bool> = grid.momenta().iter().map(|&q| q.abs() <= q_cut).collect();
    if pass.iter().all(|&p| p) {
        return Ok(Filtered {
            state: state.clone(),
            transmitted: T::one(),
        });
    }
    let before = state.norm_sq();
    let mut out = state.clone();
    let n = grid.n_points();
    let zero = Complex::new(T::zero(), T::zero());
    let mut changed = false;
    {
        let amp = out.amplitude_mut();
        for i in 0..n {
            for j in 0..n {
                let blocked =
                    (arm.hits_signal() && !pass[i]) || (arm.hits_idler() && !pass[j]);
                if blocked && amp[[i, j]] != zero {
                    amp[[i, j]] = zero;
                    changed = true;
                }
            }
        }
    }
    if !changed {
        // Support already inside the aperture: bit-for-bit idempotence.
        return Ok(Filtered {
            state: out,
            transmitted: T::one(),
        });
    }
    let transmitted = out.norm_sq() / before;
    if transmitted.to_f64_lossy() < 1e-12 {
        return Err(Error::NullState {
            transmitted: transmitted.to_f64_lossy(),
        });
    }
    Ok(Filtered {
        state: out.renormalized()?,
        transmitted,
    })
}

/// Fraction of the momentum cell centered at `q` covered by [`lo`, `hi`].
/// Cell extents are clipped to the axis [−q_max, q_max) so a full-range
/// mask covers the edge cells completely.
fn cell_coverage<T: Real>(q: T, dq: T, q_max: T, lo: T, hi: T) -> T {
    let half = dq / T::from_f64_lossy(2.0);
    let cell_lo = (q - half).max(-q_max);
    let cell_hi = (q + half).min(q_max);
    let a = cell_lo.max(lo);
    let b = cell_hi.min(hi);
    ((b - a).max(T::zero()) / (cell_hi - cell_lo)).min(T::one())
}

/// Opaque strip blocking the angular interval [`from`, `to`] on one arm.
/// Cell transmission is averaged over the cell (amplitude × √(1 − coverage))
/// so sub-cell mask widths act proportionally. Renormalizes.
pub fn apply_mask<T: Real>(
    state: &BiphotonState<T>,
    arm: FilterArm,
    from: T,
    to: T,
    p_z: T,
) -> Result<Filtered<T>> {
    if !(p_z > T::zero()) {
        return Err(Error::Domain(format!("p_z must be positive, got {p_z}")));
    }
    if from > to {
        return Err(Error::Domain(format!(
            "mask interval [{from}, {to}] is reversed"
        )));
    }
    let grid = *state.grid();
    let angular_max = grid.q_max() / p_z;
    if from < -angular_max || to > angular_max {
        return Err(Error::Domain(format!(
            "mask interval [{from}, {to}] outside the grid angular range ±{angular_max}"
        )));
    }
    let q_lo = angle_to_transverse_momentum_unchecked(from, p_z);
    let q_hi = angle_to_transverse_momentum_unchecked(to, p_z);
    if q_lo == q_hi {
        return Ok(Filtered {
            state: state.clone(),
            transmitted: T::one(),
        });
    }
    let dq = grid.dq();
    let t_amp: Vec<T> = grid
        .momenta()
        .iter()
        .map(|&q| (T::one() - cell_coverage(q, dq, grid.q_max(), q_lo, q_hi)).sqrt())
        .collect();
    let before = state.norm_sq();
    let mut out = state.clone();
    let n = grid.n_points();
    {
        let amp = out.amplitude_mut();
        for i in 0..n {
            for j in 0..n {
                let mut t = T::one();
                if arm.hits_signal() {
                    t *= t_amp[i];
                }
                if arm.hits_idler() {
                    t *= t_amp[j];
                }
                amp[[i, j]] = amp[[i, j]] * t;
            }
        }
    }
    let transmitted = out.norm_sq() / before;
    if transmitted.to_f64_lossy() < 1e-12 {
        return Err(Error::NullState {
            transmitted: transmitted.to_f64_lossy(),
        });
    }
    Ok(Filtered {
        state: out.renormalized()?,
        transmitted,
    })
}

/// Largest |q₁+q₂| on the raw (unwrapped) sum lattice holding at least 1e-6
/// of the total probability in a single sum bin.
pub fn sum_momentum_range<T: Real>(state: &BiphotonState<T>) -> Result<T> {
    let grid = state.grid();
    let n = grid.n_points();
    let amp = state.amplitude();
    // Raw sums live on a lattice of 2n−1 values spaced Δq.
    let mut mass = vec![T::zero(); 2 * n - 1];
    let mut total = T::zero();
    for i in 0..n {
        for j in 0..n {
            let p = amp[[i, j]].norm_sqr();
            mass[i + j] += p;
            total += p;
        }
    }
    if total.to_f64_lossy() < 1e-12 {
        return Err(Error::NullState {
            transmitted: total.to_f64_lossy(),
        });
    }
    let threshold = T::from_f64_lossy(1e-6) * total;
    let dq = grid.dq();
    let center = T::from_usize(n).unwrap() * dq; // index n corresponds to sum 0
    let mut best = T::zero();
    for (k, &m) in mass.iter().enumerate() {
        if m >= threshold {
            let q_sum = (T::from_usize(k).unwrap() * dq - center).abs();
            if q_sum > best {
                best = q_sum;
            }
        }
    }
    Ok(best)
}

/// Outcome bookkeeping for one chain step.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<T: Real> {
    /// Norm lost to evanescent filtering (propagation steps).
    pub lost_norm: Option<T>,
    /// Transmitted probability fraction (aperture/mask steps).
    pub transmitted: Option<T>,
}

/// Applies an ordered chain of transfer steps, renormalizing after
/// propagation losses so downstream filters see a unit-norm state.
pub fn apply_chain<T: Real>(
    state: &BiphotonState<T>,
    steps: &[TransferStep<T>],
    wavelengths: ArmWavelengths<T>,
) -> Result<(BiphotonState<T>, Vec<StepReport<T>>)> {
    let mut current = state.clone();
    let mut reports = Vec::with_capacity(steps.len());
    for step in steps {
        match step.kind {
            TransferKind::FreePropagation { distance } => {
                let p = propagate(&current, distance, wavelengths)?;
                current = p.state.renormalized()?;
                reports.push(StepReport {
                    lost_norm: Some(p.lost_norm),
                    transmitted: None,
                });
            }
            TransferKind::HardAperture { cutoff } => {
                let f = apply_aperture(&current, step.arm, cutoff)?;
                current = f.state;
                reports.push(StepReport {
                    lost_norm: None,
                    transmitted: Some(f.transmitted),
                });
            }
            TransferKind::Mask { from, to } => {
                let f = apply_mask(&current, step.arm, from, to, T::TAU())?;
                current = f.state;
                reports.push(StepReport {
                    lost_norm: None,
                    transmitted: Some(f.transmitted),
                });
            }
        }
    }
    Ok((current, reports))
}
