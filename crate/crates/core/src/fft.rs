//! Unitary multi-dimensional FFT helpers over `ndarray` arrays.
//!
//! Every transform is scaled by `1/√N` per axis, so forward followed by
//! inverse is the identity and Parseval holds without extra factors.

use std::f64::consts::PI;

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `exp(-j 2π mn/N)`.
    Forward,
    /// Kernel `exp(+j 2π mn/N)`.
    Inverse,
}

/// In-place unitary FFT along every contiguous chunk of length `n`.
pub fn fft_chunks(data: &mut [Complex64], n: usize, dir: Direction) {
    if n == 0 || data.is_empty() {
        return;
    }
    let mut planner = FftPlanner::<f64>::new();
    let plan = match dir {
        Direction::Forward => planner.plan_fft_forward(n),
        Direction::Inverse => planner.plan_fft_inverse(n),
    };
    let scale = 1.0 / (n as f64).sqrt();
    // batches keep the scratch allocation per task small
    let batch = (64 * 1024 / n).max(1) * n;
    data.par_chunks_mut(batch).for_each(|chunk| {
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(chunk, &mut scratch);
        chunk.iter_mut().for_each(|v| *v *= scale);
    });
}

/// Moves `axis` last, applies `f` to the contiguous data, and restores the layout.
fn with_axis_last<F>(a: &mut ArrayD<Complex64>, axis: usize, f: F)
where
    F: FnOnce(&mut [Complex64], usize),
{
    let nd = a.ndim();
    let n = a.shape()[axis];
    if axis == nd - 1 && a.is_standard_layout() {
        f(a.as_slice_mut().expect("standard layout"), n);
        return;
    }
    let mut perm: Vec<usize> = (0..nd).filter(|&d| d != axis).collect();
    perm.push(axis);
    let mut moved = a
        .view()
        .permuted_axes(IxDyn(&perm))
        .as_standard_layout()
        .into_owned();
    f(moved.as_slice_mut().expect("standard layout"), n);
    let mut inv = vec![0; nd];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    a.assign(&moved.permuted_axes(IxDyn(&inv)));
}

/// Unitary FFT along one axis.
pub fn fft_axis(a: &mut ArrayD<Complex64>, axis: usize, dir: Direction) {
    with_axis_last(a, axis, |data, n| fft_chunks(data, n, dir));
}

/// Unitary FFT along each listed axis.
pub fn fft_axes(a: &mut ArrayD<Complex64>, axes: &[usize], dir: Direction) {
    for &ax in axes {
        fft_axis(a, ax, dir);
    }
}

/// Circular shift along `axis` by `shift` (positive moves samples to higher index).
pub fn roll_axis(a: &ArrayD<Complex64>, axis: usize, shift: isize) -> ArrayD<Complex64> {
    let n = a.shape()[axis] as isize;
    let mut out = a.clone();
    for i in 0..n {
        let dst = (i + shift).rem_euclid(n) as usize;
        out.index_axis_mut(Axis(axis), dst)
            .assign(&a.index_axis(Axis(axis), i as usize));
    }
    out
}

/// FFT order → centered order (zero frequency at index `n/2`).
pub fn fftshift_axis(a: &ArrayD<Complex64>, axis: usize) -> ArrayD<Complex64> {
    let n = a.shape()[axis] as isize;
    roll_axis(a, axis, n / 2)
}

/// Centered order → FFT order.
pub fn ifftshift_axis(a: &ArrayD<Complex64>, axis: usize) -> ArrayD<Complex64> {
    let n = a.shape()[axis] as isize;
    roll_axis(a, axis, -(n / 2))
}

/// Signed bin index in FFT order: `0, 1, …, ⌈n/2⌉-1, -⌊n/2⌋, …, -1`.
pub fn signed_bin(i: usize, n: usize) -> isize {
    if i < n.div_ceil(2) {
        i as isize
    } else {
        i as isize - n as isize
    }
}

/// Angular spatial frequencies (rad per unit) in FFT order for sample step `d`.
pub fn wavenumbers(n: usize, d: f64) -> Vec<f64> {
    (0..n)
        .map(|i| 2.0 * PI * signed_bin(i, n) as f64 / (n as f64 * d))
        .collect()
}

pub fn energy(a: &ArrayD<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> ArrayD<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ArrayD::from_shape_fn(IxDyn(shape), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn matches_direct_dft_along_middle_axis() {
        let a = random(&[3, 5, 4], 1);
        let mut b = a.clone();
        fft_axis(&mut b, 1, Direction::Forward);
        for i in 0..3 {
            for k in 0..4 {
                for m in 0..5 {
                    let mut acc = Complex64::default();
                    for n in 0..5 {
                        let ph = -2.0 * PI * (m * n) as f64 / 5.0;
                        acc += a[[i, n, k]] * Complex64::from_polar(1.0, ph);
                    }
                    acc /= 5f64.sqrt();
                    assert!((acc - b[[i, m, k]]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unitary_roundtrip_and_parseval() {
        let a = random(&[8, 6, 10], 2);
        let mut b = a.clone();
        fft_axes(&mut b, &[0, 1, 2], Direction::Forward);
        assert!((energy(&a) - energy(&b)).abs() < 1e-10 * energy(&a));
        fft_axes(&mut b, &[0, 1, 2], Direction::Inverse);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn shifts_invert() {
        let a = random(&[5, 4], 3);
        let s = fftshift_axis(&a, 0);
        assert_eq!(s[[2, 1]], a[[0, 1]]);
        assert_eq!(ifftshift_axis(&s, 0), a);
    }

    #[test]
    fn bins() {
        assert_eq!((0..5).map(|i| signed_bin(i, 5)).collect::<Vec<_>>(), vec![0, 1, 2, -2, -1]);
        assert_eq!((0..4).map(|i| signed_bin(i, 4)).collect::<Vec<_>>(), vec![0, 1, -2, -1]);
    }
}
