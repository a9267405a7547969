//! Spectral upsampling and periodic interpolation of FFT-ordered images.

use ndarray::{Array3, ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::fft::signed_bin;

/// Zero-pads an FFT-ordered spectrum along `axis` to `len` bins, scaled so
/// a unitary inverse transform keeps sample amplitudes.
pub(crate) fn spectral_pad(a: &ArrayD<Complex64>, axis: usize, len: usize) -> ArrayD<Complex64> {
    let n = a.shape()[axis];
    if len <= n {
        return a.clone();
    }
    let mut shape = a.shape().to_vec();
    shape[axis] = len;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    let scale = (len as f64 / n as f64).sqrt();
    for i in 0..n {
        let dst = signed_bin(i, n).rem_euclid(len as isize) as usize;
        out.index_axis_mut(Axis(axis), dst)
            .assign(&a.index_axis(Axis(axis), i).mapv(|v| v * scale));
    }
    out
}

/// Image axis whose sample `p` sits at `origin + p·step`, periodic in `len`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PeriodicAxis {
    pub origin: f64,
    pub step: f64,
    pub len: usize,
}

impl PeriodicAxis {
    fn weights(&self, x: f64) -> (usize, usize, f64) {
        if self.len == 1 {
            return (0, 0, 0.0);
        }
        let u = ((x - self.origin) / self.step).rem_euclid(self.len as f64);
        let i0 = (u.floor() as usize).min(self.len - 1);
        (i0, (i0 + 1) % self.len, u - i0 as f64)
    }
}

/// Linear interpolation of a periodic image along one axis at `coords`.
pub(crate) fn sample_axis(
    a: &ArrayD<Complex64>,
    axis: usize,
    ax: PeriodicAxis,
    coords: &[f64],
) -> ArrayD<Complex64> {
    let mut shape = a.shape().to_vec();
    shape[axis] = coords.len();
    let mut out = ArrayD::zeros(IxDyn(&shape));
    for (p, &x) in coords.iter().enumerate() {
        let (i0, i1, w) = ax.weights(x);
        let lo = a.index_axis(Axis(axis), i0);
        let hi = a.index_axis(Axis(axis), i1);
        ndarray::Zip::from(out.index_axis_mut(Axis(axis), p))
            .and(&lo)
            .and(&hi)
            .for_each(|o, &l, &h| *o = l * (1.0 - w) + h * w);
    }
    out
}

/// Trilinear interpolation of a periodic 3-D image on the separable lattice
/// `coords[0] × coords[1] × coords[2]`.
pub(crate) fn sample_periodic(
    img: &Array3<Complex64>,
    axes: [PeriodicAxis; 3],
    coords: [&[f64]; 3],
) -> Array3<Complex64> {
    let w: Vec<Vec<(usize, usize, f64)>> = (0..3)
        .map(|a| coords[a].iter().map(|&x| axes[a].weights(x)).collect())
        .collect();
    let (n0, n1, n2) = (coords[0].len(), coords[1].len(), coords[2].len());
    let mut out = Array3::zeros((n0, n1, n2));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut plane)| {
            let (a0, a1, wa) = w[0][i];
            for (j, &(b0, b1, wb)) in w[1].iter().enumerate() {
                for (k, &(c0, c1, wc)) in w[2].iter().enumerate() {
                    let lerp = |a: usize| {
                        let lo = img[[a, b0, c0]] * (1.0 - wc) + img[[a, b0, c1]] * wc;
                        let hi = img[[a, b1, c0]] * (1.0 - wc) + img[[a, b1, c1]] * wc;
                        lo * (1.0 - wb) + hi * wb
                    };
                    plane[[j, k]] = lerp(a0) * (1.0 - wa) + lerp(a1) * wa;
                }
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::{fft_axis, Direction};

    #[test]
    fn padding_interpolates_bandlimited_signal() {
        let n = 16;
        let f = |x: f64| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3.0 * x / n as f64);
        let mut a = ArrayD::from_shape_fn(IxDyn(&[n]), |i| f(i[0] as f64));
        fft_axis(&mut a, 0, Direction::Forward);
        let mut b = spectral_pad(&a, 0, 4 * n);
        fft_axis(&mut b, 0, Direction::Inverse);
        for p in 0..4 * n {
            assert!((b[[p]] - f(p as f64 / 4.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn periodic_weights_wrap() {
        let ax = PeriodicAxis {
            origin: 1.0,
            step: 0.5,
            len: 4,
        };
        assert_eq!(ax.weights(1.0), (0, 1, 0.0));
        let (i0, i1, w) = ax.weights(0.75);
        assert_eq!((i0, i1), (3, 0));
        assert!((w - 0.5).abs() < 1e-12);
    }
}
