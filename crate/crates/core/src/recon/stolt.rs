//! Stolt resampling from measured wavenumbers onto uniform k-space lattices.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array3, ArrayView3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    #[default]
    Linear,
    Cubic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StoltStats {
    /// Lines with fewer than two propagating samples, output as zeros.
    pub zeroed_lines: usize,
}

/// `kz = sqrt(4k² − kx² − ky²)`, or `None` in the evanescent region.
pub fn dispersion_kz(k: f64, kx: f64, ky: f64) -> Option<f64> {
    let q = 4.0 * k * k - kx * kx - ky * ky;
    if q >= 0.0 {
        Some(q.sqrt())
    } else {
        None
    }
}

/// Interpolates `(xs, ys)` at `t`, with `xs` increasing. Returns 0 outside.
fn interp_at(xs: &[f64], ys: &[Complex64], t: f64, mode: Interp) -> Complex64 {
    let n = xs.len();
    if n < 2 || !(t >= xs[0] && t <= xs[n - 1]) {
        return Complex64::default();
    }
    let j = (xs.partition_point(|&x| x <= t).clamp(1, n - 1)) - 1;
    match mode {
        Interp::Cubic if n >= 4 => {
            let s = j.saturating_sub(1).min(n - 4);
            let mut acc = Complex64::default();
            for a in s..s + 4 {
                let mut w = 1.0;
                for b in s..s + 4 {
                    if a != b {
                        w *= (t - xs[b]) / (xs[a] - xs[b]);
                    }
                }
                acc += ys[a] * w;
            }
            acc
        }
        _ => {
            let w = (t - xs[j]) / (xs[j + 1] - xs[j]);
            ys[j] * (1.0 - w) + ys[j + 1] * w
        }
    }
}

fn check_increasing(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 2 || !v.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid(name, "need at least 2 increasing samples"));
    }
    Ok(())
}

/// Resamples `S(kx, ky, k)` (shape `[kx, ky, k]`) onto `kz_grid` per line.
///
/// Samples are placed at `kz(k) = sqrt(4k² − kx² − ky²)` and interpolated in
/// `kz`. Evanescent samples are dropped; targets outside the propagating
/// `kz` span come out as zero. `kz_grid` may be in any order.
pub fn stolt_rectilinear(
    spectrum: ArrayView3<Complex64>,
    kx: &[f64],
    ky: &[f64],
    k: &[f64],
    kz_grid: &[f64],
    mode: Interp,
) -> Result<(Array3<Complex64>, StoltStats)> {
    let (nx, ny, nk) = spectrum.dim();
    if kx.len() != nx || ky.len() != ny || k.len() != nk {
        return Err(Error::Shape(format!(
            "spectrum {:?} vs axes ({}, {}, {})",
            spectrum.dim(),
            kx.len(),
            ky.len(),
            k.len()
        )));
    }
    check_increasing("k", k)?;
    let spectrum = spectrum.as_standard_layout();
    let src = spectrum.as_slice().expect("standard layout");
    let m = kz_grid.len();
    let mut out = Array3::<Complex64>::zeros((nx, ny, m));
    let zeroed = AtomicUsize::new(0);
    out.as_slice_mut()
        .expect("fresh array")
        .par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(line, dst)| {
            let (ix, iy) = (line / ny, line % ny);
            let row = &src[line * nk..(line + 1) * nk];
            let q = kx[ix] * kx[ix] + ky[iy] * ky[iy];
            let first = k.partition_point(|&kk| 4.0 * kk * kk < q);
            if nk - first < 2 {
                zeroed.fetch_add(1, Ordering::Relaxed);
                return;
            }
            let kz: Vec<f64> = k[first..].iter().map(|&kk| (4.0 * kk * kk - q).max(0.0).sqrt()).collect();
            let vals = &row[first..];
            for (d, &t) in dst.iter_mut().zip(kz_grid) {
                *d = interp_at(&kz, vals, t, mode);
            }
        });
    Ok((
        out,
        StoltStats {
            zeroed_lines: zeroed.into_inner(),
        },
    ))
}

/// Resamples a polar spectrum `σ(α, ky, k)` (shape `[α, ky, k]`) onto the
/// rectangular `(kx, ky, kz)` lattice given by `kx_grid` × `ky` × `kz_grid`.
///
/// The angle axis is `α_l = alpha0 + 2πl/Nα`, periodic. Each node takes
/// `α = atan2(kz, kx)` and `kr = sqrt(kx² + kz²)` and is interpolated
/// bilinearly in `(α, kr)` using `kr(k) = sqrt(4k² − ky²)`. Nodes outside the
/// measured `kr` annulus, and the origin, are zero.
pub fn stolt_polar(
    spectrum: ArrayView3<Complex64>,
    alpha0: f64,
    ky: &[f64],
    k: &[f64],
    kx_grid: &[f64],
    kz_grid: &[f64],
) -> Result<Array3<Complex64>> {
    let (na, nky, nk) = spectrum.dim();
    if ky.len() != nky || k.len() != nk {
        return Err(Error::Shape(format!(
            "spectrum {:?} vs axes (ky {}, k {})",
            spectrum.dim(),
            ky.len(),
            k.len()
        )));
    }
    if na < 2 {
        return Err(Error::invalid("alpha", "need at least 2 angle samples"));
    }
    check_increasing("k", k)
        .map_err(|_| Error::invalid("kr", "degenerate radial wavenumber range"))?;
    let spectrum = spectrum.as_standard_layout();
    let dalpha = 2.0 * PI / na as f64;
    let (nx, nz) = (kx_grid.len(), kz_grid.len());
    let mut out = Array3::<Complex64>::zeros((nx, nky, nz));
    out.as_slice_mut()
        .expect("fresh array")
        .par_chunks_mut(nz.max(1))
        .enumerate()
        .for_each(|(line, dst)| {
            let (ix, iy) = (line / nky, line % nky);
            let q = ky[iy] * ky[iy];
            let first = k.partition_point(|&kk| 4.0 * kk * kk < q);
            if nk - first < 2 {
                return;
            }
            let kr: Vec<f64> = k[first..].iter().map(|&kk| (4.0 * kk * kk - q).max(0.0).sqrt()).collect();
            let (lo, hi) = (kr[0], kr[kr.len() - 1]);
            let kxv = kx_grid[ix];
            for (d, &kzv) in dst.iter_mut().zip(kz_grid) {
                let r = kxv.hypot(kzv);
                if r == 0.0 || !(r >= lo && r <= hi) {
                    continue;
                }
                let j = kr.partition_point(|&x| x <= r).clamp(1, kr.len() - 1) - 1;
                let wr = (r - kr[j]) / (kr[j + 1] - kr[j]);
                let u = (kzv.atan2(kxv) - alpha0).rem_euclid(2.0 * PI) / dalpha;
                let a0 = (u.floor() as usize) % na;
                let a1 = (a0 + 1) % na;
                let wa = u - u.floor();
                let at = |a: usize, kk: usize| spectrum[[a, iy, first + kk]];
                *d = (at(a0, j) * (1.0 - wr) + at(a0, j + 1) * wr) * (1.0 - wa)
                    + (at(a1, j) * (1.0 - wr) + at(a1, j + 1) * wr) * wa;
            }
        });
    Ok(out)
}
