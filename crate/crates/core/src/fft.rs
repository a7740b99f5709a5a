//! Centered DFT helpers on the symmetric grid axes.
//!
//! Arrays are indexed so that element n/2 sits at zero momentum/position.
//! The centered transforms are the plain FFT sandwiched between half-length
//! rotations, which maps the symmetric axis convention onto rustfft's
//! 0-based one.

use crate::scalar::Real;
use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn rotate_half<T: Copy>(data: &mut [T]) {
    let n = data.len();
    data.rotate_left(n / 2);
}

/// Centered inverse DFT of a vector (momentum → position), 1/n normalized.
pub fn ifft1_centered<T: Real>(input: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = input.len();
    let mut buf = input.to_vec();
    rotate_half(&mut buf);
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    rotate_half(&mut buf);
    let scale = T::one() / T::from_usize(n).unwrap();
    for v in &mut buf {
        *v = *v * scale;
    }
    buf
}

/// Centered forward DFT of a vector (position → momentum), unnormalized.
pub fn fft1_centered<T: Real>(input: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = input.len();
    let mut buf = input.to_vec();
    rotate_half(&mut buf);
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    rotate_half(&mut buf);
    buf
}

/// Centered inverse DFT along both axes of a square array, 1/n² normalized.
pub fn ifft2_centered<T: Real>(input: &Array2<Complex<T>>) -> Array2<Complex<T>> {
    let n = input.nrows();
    assert_eq!(n, input.ncols(), "ifft2_centered expects a square array");
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_inverse(n);

    let mut out = input.clone();
    for mut row in out.rows_mut() {
        let slice = row.as_slice_mut().expect("row not contiguous");
        rotate_half(slice);
        fft.process(slice);
        rotate_half(slice);
    }
    let mut out = out.reversed_axes().as_standard_layout().into_owned();
    for mut row in out.rows_mut() {
        let slice = row.as_slice_mut().expect("row not contiguous");
        rotate_half(slice);
        fft.process(slice);
        rotate_half(slice);
    }
    let mut out = out.reversed_axes().as_standard_layout().into_owned();
    let scale = T::one() / T::from_usize(n * n).unwrap();
    out.mapv_inplace(|v| v * scale);
    out
}
