//! Discretized biphoton joint amplitudes Φ(q₁, q₂).
//!
//! States are built from a difference-coordinate kernel carrying the encoded
//! image times an envelope in the sum coordinate, both evaluated on the
//! periodic momentum torus. The relative-position coordinate y₁−y₂ is
//! conjugate to (q₁−q₂)/2, so an image profile f(y) enters through its
//! Fourier transform sampled at half the wrapped momentum difference.

use crate::error::{Error, Result};
use crate::fft::ifft2_centered;
use crate::grid::TransverseGrid;
use crate::scalar::Real;
use ndarray::Array2;
use rustfft::num_complex::Complex;
use std::io::Write;

/// Which photon of the pair an operation addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

/// Transverse coordinate the image is encoded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncodingCoordinate {
    /// Image lives in the relative coordinate y₁−y₂ (the protocol choice).
    #[default]
    Relative,
    /// Image lives in the center-of-mass coordinate (y₁+y₂)/2.
    CenterOfMass,
}

/// Envelope applied in the coordinate complementary to the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SumEnvelope<T: Real> {
    /// No envelope: a pure difference kernel. Exactly translation invariant
    /// on the periodic grid, hence an exactly uniform single-photon marginal.
    Flat,
    /// Gaussian envelope whose intensity profile has standard deviation
    /// `sigma` in the sum momentum coordinate.
    Gaussian { sigma: T },
}

/// Transverse image: Gaussian dots at the given positions.
///
/// `dot_width` is the standard deviation of a single dot in the recovered
/// coincidence intensity profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSpec<T: Real> {
    pub dot_positions: Vec<T>,
    pub dot_width: T,
    pub encoding: EncodingCoordinate,
}

impl<T: Real> ImageSpec<T> {
    pub fn new(dot_positions: Vec<T>, dot_width: T) -> Self {
        Self {
            dot_positions,
            dot_width,
            encoding: EncodingCoordinate::Relative,
        }
    }

    /// Two dots at ±separation/2, the canonical protocol image.
    pub fn two_dots(separation: T, dot_width: T) -> Self {
        let half = separation / T::from_f64_lossy(2.0);
        Self::new(vec![-half, half], dot_width)
    }

    pub fn validate(&self, grid: &TransverseGrid<T>) -> Result<()> {
        if self.dot_positions.is_empty() {
            return Err(Error::Domain("image needs at least one dot".into()));
        }
        let quarter = grid.position_extent() / T::from_f64_lossy(4.0);
        for &d in &self.dot_positions {
            if d.abs() >= quarter {
                return Err(Error::Domain(format!(
                    "dot position {d} too close to the periodic wrap (|y| must stay below {quarter})"
                )));
            }
        }
        let min_width = T::from_f64_lossy(0.25);
        if self.dot_width < min_width {
            return Err(Error::Domain(format!(
                "dot width {} below λ/4; sub-wavelength features do not propagate",
                self.dot_width
            )));
        }
        Ok(())
    }

    /// Per-photon momentum bandwidth of the encoded image (3σ point of the
    /// dot transform).
    pub fn bandwidth(&self) -> T {
        T::from_f64_lossy(3.0) / self.dot_width
    }

    /// Fourier transform of the dot amplitude profile at spatial frequency `k`.
    pub fn profile_transform(&self, k: T) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        let env = (-k * k * self.dot_width * self.dot_width).exp();
        for &d in &self.dot_positions {
            let phase = -k * d;
            acc += Complex::new(phase.cos(), phase.sin()) * env;
        }
        acc
    }
}

/// Complex joint amplitude over (q₁, q₂) index pairs, normalized so that
/// Σ|Φ|²·Δq² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BiphotonState<T: Real> {
    grid: TransverseGrid<T>,
    amplitude: Array2<Complex<T>>,
}

impl<T: Real> BiphotonState<T> {
    /// Builds a state by evaluating `f(q_signal, q_idler)` on the grid and
    /// normalizing. Errors if the amplitude is null.
    pub fn from_fn(
        grid: TransverseGrid<T>,
        f: impl Fn(T, T) -> Complex<T>,
    ) -> Result<Self> {
        let n = grid.n_points();
        let mut amplitude = Array2::zeros((n, n));
        for i in 0..n {
            let qi = grid.momentum(i);
            for j in 0..n {
                amplitude[[i, j]] = f(qi, grid.momentum(j));
            }
        }
        Self::from_amplitude(grid, amplitude)
    }

    /// Wraps an existing amplitude array, normalizing it.
    pub fn from_amplitude(grid: TransverseGrid<T>, amplitude: Array2<Complex<T>>) -> Result<Self> {
        let mut state = Self { grid, amplitude };
        let norm = state.norm_sq();
        if !(norm.to_f64_lossy() > 1e-300) {
            return Err(Error::NullState { transmitted: 0.0 });
        }
        let scale = T::one() / norm.sqrt();
        state.amplitude.mapv_inplace(|v| v * scale);
        Ok(state)
    }

    pub fn grid(&self) -> &TransverseGrid<T> {
        &self.grid
    }

    pub fn amplitude(&self) -> &Array2<Complex<T>> {
        &self.amplitude
    }

    /// Σ|Φ|²·Δq², one for a normalized state.
    pub fn norm_sq(&self) -> T {
        let dq = self.grid.dq();
        self.amplitude.iter().map(|c| c.norm_sqr()).sum::<T>() * dq * dq
    }

    /// Internal constructor: takes a possibly unnormalized amplitude
    /// without rescaling it. Only exercised by edge-case tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn raw(grid: TransverseGrid<T>, amplitude: Array2<Complex<T>>) -> Self {
        Self { grid, amplitude }
    }

    pub(crate) fn amplitude_mut(&mut self) -> &mut Array2<Complex<T>> {
        &mut self.amplitude
    }

    /// Returns a renormalized copy; errors if essentially no mass remains.
    pub fn renormalized(&self) -> Result<Self> {
        Self::from_amplitude(self.grid, self.amplitude.clone())
    }

    /// Single-photon momentum density of one arm; integrates to one
    /// against Δq for a normalized state.
    pub fn marginal(&self, arm: Arm) -> Vec<T> {
        let n = self.grid.n_points();
        let dq = self.grid.dq();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let p = self.amplitude[[i, j]].norm_sqr();
                match arm {
                    Arm::Signal => out[i] += p,
                    Arm::Idler => out[j] += p,
                }
            }
        }
        for v in &mut out {
            *v *= dq;
        }
        out
    }

    /// Density of the other arm's momentum conditioned on measuring
    /// `measured_q` on `measured_arm`.
    pub fn conditional(&self, measured_q: T, measured_arm: Arm) -> Result<Vec<T>> {
        let idx = self.grid.momentum_index(measured_q)?;
        let marg = self.marginal(measured_arm);
        if marg[idx].to_f64_lossy() <= 1e-12 {
            return Err(Error::ConditionOnNull {
                q: measured_q.to_f64_lossy(),
                density: marg[idx].to_f64_lossy(),
            });
        }
        let n = self.grid.n_points();
        let mut out: Vec<T> = (0..n)
            .map(|k| match measured_arm {
                Arm::Signal => self.amplitude[[idx, k]].norm_sqr(),
                Arm::Idler => self.amplitude[[k, idx]].norm_sqr(),
            })
            .collect();
        let total: T = out.iter().copied().sum::<T>() * self.grid.dq();
        for v in &mut out {
            *v /= total;
        }
        Ok(out)
    }

    /// Joint position density |ψ(y₁, y₂)|², normalized to sum one.
    pub fn position_density(&self) -> Array2<T> {
        let psi = ifft2_centered(&self.amplitude);
        let mut dens = psi.mapv(|c| c.norm_sqr());
        let total = dens.iter().copied().sum::<T>();
        dens.mapv_inplace(|v| v / total);
        dens
    }

    /// Single-photon position density of one arm (against Δy).
    pub fn position_marginal(&self, arm: Arm) -> Vec<T> {
        let dens = self.position_density();
        let n = self.grid.n_points();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                match arm {
                    Arm::Signal => out[i] += dens[[i, j]],
                    Arm::Idler => out[j] += dens[[i, j]],
                }
            }
        }
        let dy = self.grid.dy();
        for v in &mut out {
            *v /= dy;
        }
        out
    }

    /// Density of the relative position y₁−y₂ (wrapped to the grid),
    /// integrating to one against Δy.
    pub fn coincidence_image(&self) -> Vec<T> {
        let dens = self.position_density();
        let n = self.grid.n_points();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let k = (i + n - j) % n; // (i-j) mod n
                out[(k + n / 2) % n] += dens[[i, j]];
            }
        }
        let dy = self.grid.dy();
        for v in &mut out {
            *v /= dy;
        }
        out
    }

    /// Density of the wrapped total momentum q₁+q₂ (against Δq).
    pub fn sum_marginal(&self) -> Vec<T> {
        let n = self.grid.n_points();
        let dq = self.grid.dq();
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let k = (i + j) % n;
                out[(k + n / 2) % n] += self.amplitude[[i, j]].norm_sqr();
            }
        }
        let total: T = out.iter().copied().sum();
        for v in &mut out {
            *v /= total * dq;
        }
        out
    }

    /// Writes the state as a text matrix: a commented header followed by one
    /// row per q₁ sample, each holding `re im` pairs over q₂. Debug format,
    /// not stability guaranteed.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# qdirsim biphoton state, row-major over (q1, q2)")?;
        writeln!(w, "# n_points={}", self.grid.n_points())?;
        writeln!(w, "# q_max={:e}", self.grid.q_max())?;
        for row in self.amplitude.rows() {
            let mut line = String::new();
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:e} {:e}", c.re, c.im));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Builds the protocol state Φ(q₁,q₂) = F(q₁−q₂)·G(q₁+q₂) on the periodic
/// grid, with F carrying the image and G the sum-coordinate envelope.
pub fn make_difference_correlated_state<T: Real>(
    grid: TransverseGrid<T>,
    envelope: SumEnvelope<T>,
    image: &ImageSpec<T>,
) -> Result<BiphotonState<T>> {
    image.validate(&grid)?;
    if let SumEnvelope::Gaussian { sigma } = envelope {
        if !(sigma > T::zero()) || sigma >= grid.q_max() / T::from_f64_lossy(4.0) {
            return Err(Error::Domain(format!(
                "sum envelope width {sigma} must lie in (0, q_max/4)"
            )));
        }
    }
    let bw = image.bandwidth();
    let limit = grid.q_max() / T::from_f64_lossy(2.0);
    if bw > limit {
        return Err(Error::Aliasing {
            bandwidth: bw.to_f64_lossy(),
            limit: limit.to_f64_lossy(),
        });
    }
    let half = T::from_f64_lossy(0.5);
    BiphotonState::from_fn(grid, |q1, q2| {
        let qd = grid.wrap_momentum(q1 - q2);
        let qs = grid.wrap_momentum(q1 + q2);
        let (image_coord, env_coord) = match image.encoding {
            // y₁−y₂ is conjugate to (q₁−q₂)/2; (y₁+y₂)/2 to q₁+q₂.
            EncodingCoordinate::Relative => (qd * half, qs),
            EncodingCoordinate::CenterOfMass => (qs, qd * half),
        };
        let f = image.profile_transform(image_coord);
        let g = match envelope {
            SumEnvelope::Flat => T::one(),
            SumEnvelope::Gaussian { sigma } => {
                (-env_coord * env_coord / (T::from_f64_lossy(4.0) * sigma * sigma)).exp()
            }
        };
        f * g
    })
}

/// Mean and standard deviation of a density sampled on `axis` (weights need
/// not be pre-normalized).
pub fn density_moments<T: Real>(axis: &[T], density: &[T]) -> (T, T) {
    let total: T = density.iter().copied().sum();
    let mean = axis
        .iter()
        .zip(density)
        .map(|(&x, &p)| x * p)
        .sum::<T>()
        / total;
    let var = axis
        .iter()
        .zip(density)
        .map(|(&x, &p)| (x - mean) * (x - mean) * p)
        .sum::<T>()
        / total;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn default_grid() -> TransverseGrid<f64> {
        TransverseGrid::new(256, 8.0 * std::f64::consts::PI).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn single_dot_relative_profile_is_gaussian_of_dot_width() {
        let grid = default_grid();
        let sigma = 0.5;
        let st = make_difference_correlated_state(
            grid,
            SumEnvelope::Flat,
            &ImageSpec::new(vec![0.0], sigma),
        )
        .unwrap();
        let img = st.coincidence_image();
        let (mean, std) = density_moments(&grid.positions(), &img);
        assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
        // Analytic Gaussian Fourier pair: density std equals the dot width.
        assert_relative_eq!(std, sigma, max_relative = 1e-3);
    }

    #[test]
    fn two_dot_image_peaks_at_dot_positions() {
        let grid = default_grid();
        let st = make_difference_correlated_state(
            grid,
            SumEnvelope::Gaussian { sigma: grid.q_max() / 32.0 },
            &ImageSpec::two_dots(4.0, 0.5),
        )
        .unwrap();
        let img = st.coincidence_image();
        let n = grid.n_points();
        // Peaks of the two halves of the axis.
        let left = argmax(&img[..n / 2]);
        let right = n / 2 + argmax(&img[n / 2..]);
        assert!((grid.position(left) + 2.0).abs() <= grid.dy());
        assert!((grid.position(right) - 2.0).abs() <= grid.dy());
    }

    /// Brute-force O(n³) centered 2-D DFT, independent of the FFT path.
    fn coincidence_image_oracle(st: &BiphotonState<f64>) -> Vec<f64> {
        let n = st.grid().n_points();
        let amp = st.amplitude();
        let dft1 = |col: &[Complex<f64>]| -> Vec<Complex<f64>> {
            (0..n)
                .map(|a| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for (i, v) in col.iter().enumerate() {
                        let ph = std::f64::consts::TAU
                            * ((i as isize - (n / 2) as isize)
                                * (a as isize - (n / 2) as isize)) as f64
                            / n as f64;
                        acc += v * Complex::new(ph.cos(), ph.sin());
                    }
                    acc
                })
                .collect()
        };
        let mut rows: Vec<Vec<Complex<f64>>> = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<Complex<f64>> = (0..n).map(|j| amp[[i, j]]).collect();
            rows.push(dft1(&row));
        }
        let mut dens = vec![vec![0.0; n]; n];
        for j in 0..n {
            let col: Vec<Complex<f64>> = (0..n).map(|i| rows[i][j]).collect();
            let t = dft1(&col);
            for i in 0..n {
                dens[i][j] = t[i].norm_sqr();
            }
        }
        let total: f64 = dens.iter().flatten().sum();
        let mut out = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let k = (i + n - j) % n;
                out[(k + n / 2) % n] += dens[i][j] / total;
            }
        }
        let dy = st.grid().dy();
        out.iter().map(|v| v / dy).collect()
    }

    #[test]
    fn coincidence_image_matches_brute_force_dft() {
        let grid = TransverseGrid::new(64, 4.0 * std::f64::consts::PI).unwrap();
        let st = make_difference_correlated_state(
            grid,
            SumEnvelope::Gaussian { sigma: 0.5 },
            &ImageSpec::two_dots(3.0, 0.5),
        )
        .unwrap();
        let fast = st.coincidence_image();
        let slow = coincidence_image_oracle(&st);
        for (a, b) in fast.iter().zip(&slow) {
            assert_relative_eq!(a, b, epsilon = 1e-10, max_relative = 1e-8);
        }
    }

    #[test]
    fn difference_kernel_marginal_is_uniform() {
        let grid = default_grid();
        let st = make_difference_correlated_state(
            grid,
            SumEnvelope::Flat,
            &ImageSpec::two_dots(4.0, 0.5),
        )
        .unwrap();
        for arm in [Arm::Signal, Arm::Idler] {
            let m = st.marginal(arm);
            let uniform = 1.0 / (2.0 * grid.q_max());
            for p in m {
                assert!((p - uniform).abs() < 1e-9, "deviation {}", (p - uniform).abs());
            }
        }
    }

    #[test]
    fn separable_state_marginal_is_single_photon_density() {
        let grid = default_grid();
        let f = |q: f64| (-q * q / 8.0).exp();
        let g = |q: f64| (-(q - 1.0) * (q - 1.0) / 2.0).exp();
        let st = BiphotonState::from_fn(grid, |q1, q2| Complex::new(f(q1) * g(q2), 0.0)).unwrap();
        let m = st.marginal(Arm::Signal);
        let norm: f64 = grid.momenta().iter().map(|&q| f(q) * f(q)).sum::<f64>() * grid.dq();
        for (i, p) in m.iter().enumerate() {
            let q = grid.momentum(i);
            assert_relative_eq!(*p, f(q) * f(q) / norm, epsilon = 1e-12, max_relative = 1e-9);
        }
        // Conditional of a separable state does not depend on the outcome.
        let c1 = st.conditional(0.0, Arm::Signal).unwrap();
        let c2 = st.conditional(1.5, Arm::Signal).unwrap();
        for (a, b) in c1.iter().zip(&c2) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_kernel_marginal_matches_closed_form() {
        // |Φ|² Gaussian with std a in the difference and b in the sum
        // coordinate gives a single-photon marginal of std sqrt(a²+b²)/2.
        let grid = default_grid();
        let (a, b) = (2.0, 1.0);
        let st = BiphotonState::from_fn(grid, |q1, q2| {
            let qd = q1 - q2;
            let qs = q1 + q2;
            Complex::new((-qd * qd / (4.0 * a * a) - qs * qs / (4.0 * b * b)).exp(), 0.0)
        })
        .unwrap();
        let m = st.marginal(Arm::Signal);
        let expect_std = (a * a + b * b).sqrt() / 2.0;
        let norm: f64 = grid
            .momenta()
            .iter()
            .map(|&q| (-q * q / (2.0 * expect_std * expect_std)).exp())
            .sum::<f64>()
            * grid.dq();
        for (i, p) in m.iter().enumerate() {
            let q = grid.momentum(i);
            let closed = (-q * q / (2.0 * expect_std * expect_std)).exp() / norm;
            assert!((p - closed).abs() < 1e-6, "at q={q}: {p} vs {closed}");
        }
    }

    #[test]
    fn conditional_tracks_measured_momentum() {
        let grid = default_grid();
        let sigma_f = 1.0;
        let st = BiphotonState::from_fn(grid, |q1, q2| {
            let qd = grid.wrap_momentum(q1 - q2);
            Complex::new((-qd * qd / (4.0 * sigma_f * sigma_f)).exp(), 0.0)
        })
        .unwrap();
        let n = grid.n_points();
        for idx in (n / 4..3 * n / 4).step_by(7) {
            let qstar = grid.momentum(idx);
            let cond = st.conditional(qstar, Arm::Idler).unwrap();
            let peak = argmax(&cond);
            assert!(
                (grid.momentum(peak) - qstar).abs() <= grid.dq(),
                "peak {} vs measured {qstar}",
                grid.momentum(peak)
            );
            let (_, std) = density_moments(&grid.momenta(), &cond);
            assert_relative_eq!(std, sigma_f, max_relative = 0.05);
        }
    }

    #[test]
    fn conditioning_on_null_outcome_errors() {
        let grid = default_grid();
        // All mass near q=0 on the signal arm.
        let st = BiphotonState::from_fn(grid, |q1, q2| {
            Complex::new(((-q1 * q1 - q2 * q2) * 8.0).exp(), 0.0)
        })
        .unwrap();
        assert!(matches!(
            st.conditional(20.0, Arm::Signal),
            Err(Error::ConditionOnNull { .. })
        ));
    }

    #[test]
    fn minimum_uncertainty_product_on_gaussian_slice() {
        let grid = default_grid();
        let sigma_q = 1.5;
        let st = BiphotonState::from_fn(grid, |q1, q2| {
            Complex::new(
                (-q1 * q1 / (4.0 * sigma_q * sigma_q)).exp() * (-q2 * q2 / 4.0).exp(),
                0.0,
            )
        })
        .unwrap();
        let (_, sq) = density_moments(&grid.momenta(), &st.marginal(Arm::Signal));
        let (_, sy) = density_moments(&grid.positions(), &st.position_marginal(Arm::Signal));
        let product = sq * sy;
        assert!(product >= 0.5 - 1e-9 && product <= 0.51, "σ_y·σ_q = {product}");
    }

    #[test]
    fn aliasing_rejected_on_coarse_grid() {
        let grid = TransverseGrid::new(16, 4.0f64).unwrap();
        let err = make_difference_correlated_state(
            grid,
            SumEnvelope::Flat,
            &ImageSpec::new(vec![0.0], 0.5),
        );
        assert!(matches!(err, Err(Error::Aliasing { .. })));
    }

    #[test]
    fn text_export_has_header_and_rows() {
        let grid = TransverseGrid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let st = BiphotonState::from_fn(grid, |q1, q2| {
            Complex::new((-(q1 * q1 + q2 * q2) / 8.0).exp(), 0.0)
        })
        .unwrap();
        let mut buf = Vec::new();
        st.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains("n_points=16"));
        assert!(lines[2].contains("q_max="));
        assert_eq!(lines.len(), 3 + 16);
        assert_eq!(lines[3].split_whitespace().count(), 32);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn built_states_are_normalized(
            sep in 1.0f64..6.0,
            width in 0.3f64..1.5,
            sigma in 0.1f64..2.0,
        ) {
            let grid = TransverseGrid::new(128, 8.0 * std::f64::consts::PI).unwrap();
            let st = make_difference_correlated_state(
                grid,
                SumEnvelope::Gaussian { sigma },
                &ImageSpec::two_dots(sep, width),
            ).unwrap();
            prop_assert!((st.norm_sq() - 1.0).abs() < 1e-9);
            let m = st.marginal(Arm::Signal);
            let total: f64 = m.iter().sum::<f64>() * grid.dq();
            prop_assert!((total - 1.0).abs() < 1e-9);
            let img = st.coincidence_image();
            let total_img: f64 = img.iter().sum::<f64>() * grid.dy();
            prop_assert!((total_img - 1.0).abs() < 1e-9);
        }

        #[test]
        fn image_round_trip_recovers_dot_positions(
            sep in 2.0f64..7.0,
        ) {
            let grid = TransverseGrid::new(256, 8.0 * std::f64::consts::PI).unwrap();
            let st = make_difference_correlated_state(
                grid,
                SumEnvelope::Gaussian { sigma: grid.q_max() / 32.0 },
                &ImageSpec::two_dots(sep, 0.5),
            ).unwrap();
            let img = st.coincidence_image();
            let n = grid.n_points();
            let left = img[..n / 2]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            // The difference coordinate is conjugate to the *half*-difference
            // momentum, so the binned image only populates the even
            // sublattice: peak localization resolves to 2·dy, not dy.
            prop_assert!((grid.position(left) + sep / 2.0).abs() <= grid.dy() * 2.01);
        }
    }
}
