//! Range migration for circular and cylindrical apertures.
//!
//! The azimuth axis is deconvolved in the angular-harmonic domain, the
//! resulting polar spectrum is resampled onto a rectangular lattice and
//! inverse transformed.

use std::f64::consts::PI;

use ndarray::{Array3, ArrayD, Axis, Ix3, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rectilinear::make_stage;
use super::resample::{sample_periodic, spectral_pad, PeriodicAxis};
use super::stolt::stolt_polar;
use super::{ImageVolume, Provenance, Reconstruction, RmaOptions, Stage};
use crate::aperture::{ApertureKind, UniformMeta};
use crate::error::{Error, Result};
use crate::fft::{fft_axis, fft_chunks, signed_bin, wavenumbers, Direction};
use crate::forward::EchoData;
use crate::scene::{AxisSpec, GridSpec};

/// Azimuth kernel used by the polar reconstructors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolarKernel {
    /// Phase kernel restricted to the half circle facing the element,
    /// integrated on an oversampled angle grid.
    #[default]
    Facing,
    /// Plain `N`-point DFT over the full circle, see [`azimuth_kernel`].
    Literal,
}

/// Unitary `N`-point DFT over `θ_n = 2πn/N` of `exp(−j·sqrt(4k² − ky²)·R0·cos θ)`,
/// in FFT bin order. The flag is set, and the kernel zeroed, when `|ky| > 2k`.
pub fn azimuth_kernel(ntheta: usize, ky: f64, k: f64, r0: f64) -> Result<(Vec<Complex64>, bool)> {
    if ntheta < 2 {
        return Err(Error::invalid("ntheta", "need at least 2 angles"));
    }
    let q = 4.0 * k * k - ky * ky;
    if q < 0.0 {
        return Ok((vec![Complex64::default(); ntheta], true));
    }
    let kr = q.sqrt();
    let mut g: Vec<Complex64> = (0..ntheta)
        .map(|n| {
            let t = 2.0 * PI * n as f64 / ntheta as f64;
            Complex64::from_polar(1.0, -kr * r0 * t.cos())
        })
        .collect();
    fft_chunks(&mut g, ntheta, Direction::Forward);
    Ok((g, false))
}

/// 1 within 45° of boresight, raised-cosine taper to 0 at 90°. The smooth
/// edge keeps endpoint contributions out of the harmonics.
fn facing_window(phi: f64) -> f64 {
    let a = phi.sin().atan2(phi.cos()).abs();
    if a <= PI / 4.0 {
        1.0
    } else if a < PI / 2.0 {
        0.5 * (1.0 + ((a - PI / 4.0) / (PI / 4.0) * PI).cos())
    } else {
        0.0
    }
}

/// Kernel of the facing half circle for radial wavenumber `kr`,
/// returned on the `N` FFT bins of an `N`-angle aperture.
///
/// The angular bandwidth of `exp(−j·kr·R0·cos φ)` is about `kr·R0`, far above
/// `N/2` for practical apertures, so the integral is evaluated on at least
/// `4·kr·R0` angles before keeping the first `N` harmonics.
pub fn facing_azimuth_kernel(ntheta: usize, kr: f64, r0: f64) -> Vec<Complex64> {
    let q = (4.0 * kr * r0).ceil().max(ntheta as f64) as usize;
    let q = q.next_power_of_two();
    let mut g: Vec<Complex64> = (0..q)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / q as f64;
            let c = t.cos();
            Complex64::from_polar(facing_window(t), -kr * r0 * c)
        })
        .collect();
    fft_chunks(&mut g, q, Direction::Forward);
    // unitary q-point sums rescaled to the N-point convention
    let scale = (ntheta as f64).sqrt() / (q as f64).sqrt();
    (0..ntheta)
        .map(|i| g[signed_bin(i, ntheta).rem_euclid(q as isize) as usize] * scale)
        .collect()
}

struct PolarLattice {
    ntheta: usize,
    ny: usize,
    dy: f64,
    r0: f64,
    /// Grid axes `(first polar, axial?, second polar)`.
    a1: AxisSpec,
    ay: Option<AxisSpec>,
    a2: AxisSpec,
    names: [&'static str; 3],
}

/// Circular aperture in the `y–z` plane → 2-D `(y, z)` image.
pub fn rma_circular(echo: &EchoData, grid: &GridSpec, opts: &RmaOptions) -> Result<Reconstruction> {
    let (ntheta, r0) = match echo.aperture.meta() {
        Some(&UniformMeta::Circular { ntheta, r0 }) if echo.aperture.kind() == ApertureKind::Circular => {
            (ntheta, r0)
        }
        _ => {
            return Err(Error::Geometry(
                "rma-circular needs a uniform circular aperture; use `bpa` for other geometries".into(),
            ))
        }
    };
    if grid.dims() != 2 {
        return Err(Error::invalid("grid", "rma-circular needs a 2-axis (y, z) grid"));
    }
    let lat = PolarLattice {
        ntheta,
        ny: 1,
        dy: 1.0,
        r0,
        a1: grid.axes[0],
        ay: None,
        a2: grid.axes[1],
        names: ["y", "", "z"],
    };
    polar(echo, grid, opts, lat, "rma-circular")
}

/// Cylindrical aperture around the y axis → 3-D `(x, y, z)` image.
pub fn rma_cylindrical(echo: &EchoData, grid: &GridSpec, opts: &RmaOptions) -> Result<Reconstruction> {
    let (ntheta, ny, dy, r0) = match echo.aperture.meta() {
        Some(&UniformMeta::Cylindrical { ntheta, ny, dy, r0 })
            if echo.aperture.kind() == ApertureKind::Cylindrical =>
        {
            (ntheta, ny, dy, r0)
        }
        _ => {
            return Err(Error::Geometry(
                "rma-cylindrical needs a uniform cylindrical aperture; use `bpa` for other geometries".into(),
            ))
        }
    };
    if grid.dims() != 3 {
        return Err(Error::invalid("grid", "rma-cylindrical needs a 3-axis (x, y, z) grid"));
    }
    let lat = PolarLattice {
        ntheta,
        ny,
        dy,
        r0,
        a1: grid.axes[0],
        ay: Some(grid.axes[1]),
        a2: grid.axes[2],
        names: ["x", "y", "z"],
    };
    polar(echo, grid, opts, lat, "rma-cylindrical")
}

fn polar(
    echo: &EchoData,
    grid: &GridSpec,
    opts: &RmaOptions,
    lat: PolarLattice,
    name: &str,
) -> Result<Reconstruction> {
    grid.validate()?;
    if opts.pad_factor == 0 {
        return Err(Error::invalid("pad_factor", "must be at least 1"));
    }
    let n = lat.ntheta;
    let nf = echo.freq.len();
    let k = echo.freq.wavenumbers();
    let (kmin, kmax) = (k[0], k[nf - 1]);
    let y_start = echo.aperture.positions()[0][1];
    let yc = lat.ay.map_or(0.0, |a| a.center());
    let py = match lat.ay {
        Some(a) => (opts.pad_factor * lat.ny).max((2.0 * (a.max - a.min) / lat.dy).ceil() as usize),
        None => 1,
    };
    let drop = lat.ay.is_none().then_some(1);
    let [n1, ny_name, n2] = lat.names;
    let kname = |s: &str| format!("k{s}");

    let mut s = Array3::<Complex64>::zeros((n, py, nf));
    for it in 0..n {
        for iy in 0..lat.ny {
            s.slice_mut(ndarray::s![it, iy, ..])
                .assign(&echo.samples.row(it * lat.ny + iy));
        }
    }
    let mut stages = Vec::new();
    let thetas: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let ys: Vec<f64> = (0..lat.ny).map(|i| y_start + i as f64 * lat.dy).collect();
    if opts.keep_stages {
        let raw = s.slice(ndarray::s![.., ..lat.ny, ..]).to_owned();
        stages.push(make_stage(
            Stage::Signal,
            &raw,
            [("theta", &thetas, false), (ny_name, &ys, false), ("k", &k, false)],
            drop,
        )?);
    }

    let mut sd = s.into_dyn();
    fft_axis(&mut sd, 0, Direction::Forward);
    let ky = if lat.ay.is_some() {
        fft_axis(&mut sd, 1, Direction::Forward);
        wavenumbers(py, lat.dy)
    } else {
        vec![0.0]
    };
    let sy = y_start - yc;
    for (iy, mut plane) in sd.axis_iter_mut(Axis(1)).enumerate() {
        let ph = Complex64::from_polar(1.0, -ky[iy] * sy);
        plane.mapv_inplace(|v| v * ph);
    }
    let harmonics: Vec<f64> = (0..n).map(|i| signed_bin(i, n) as f64).collect();
    if opts.keep_stages {
        let a = sd.view().into_dimensionality::<Ix3>().expect("3-D").to_owned();
        stages.push(make_stage(
            Stage::Spectrum,
            &a,
            [("ktheta", &harmonics, true), (&kname(ny_name), &ky, true), ("k", &k, false)],
            drop,
        )?);
    }

    // angular oversampling keeps the α interpolation below ~0.5 rad per step
    let rho_max = [lat.a1.min, lat.a1.max]
        .iter()
        .flat_map(|&u| [lat.a2.min, lat.a2.max].map(|v| u.hypot(v)))
        .fold(0.0, f64::max);
    let n_alpha = {
        let need = (4.0 * PI * 2.0 * kmax * rho_max).ceil() as usize;
        let v = need.max(n);
        v + v % 2
    };
    if (n as f64) < 2.0 * 2.0 * kmax * rho_max {
        log::warn!(
            "{name}: {n} angles undersample a scene of radius {:.2} mm at k = {kmax:.0} rad/m",
            rho_max * 1e3
        );
    }

    // matched filter per (ky, k) column, then back to the angle domain
    let cols = sd
        .view()
        .permuted_axes(IxDyn(&[1, 2, 0]))
        .as_standard_layout()
        .into_owned();
    let src = cols.as_slice().expect("standard layout");
    let mut filtered = vec![Complex64::default(); py * nf * n_alpha];
    let kernel = opts.polar_kernel;
    filtered
        .par_chunks_mut(n_alpha)
        .zip(src.par_chunks(n))
        .enumerate()
        .for_each(|(c, (dst, col))| {
            let (iy, j) = (c / nf, c % nf);
            let q = 4.0 * k[j] * k[j] - ky[iy] * ky[iy];
            if q <= 0.0 {
                return;
            }
            let kr = q.sqrt();
            let g = match kernel {
                PolarKernel::Facing => facing_azimuth_kernel(n, kr, lat.r0),
                PolarKernel::Literal => azimuth_kernel(n, ky[iy], k[j], lat.r0).expect("n ≥ 2").0,
            };
            let scale = (n_alpha as f64 / n as f64).sqrt();
            for m in 0..n {
                let dst_bin = signed_bin(m, n).rem_euclid(n_alpha as isize) as usize;
                dst[dst_bin] = col[m] * g[m].conj() * scale;
            }
            fft_chunks(dst, n_alpha, Direction::Inverse);
        });
    let sigma = ArrayD::from_shape_vec(IxDyn(&[py, nf, n_alpha]), filtered)
        .expect("sized above")
        .permuted_axes(IxDyn(&[2, 0, 1]))
        .as_standard_layout()
        .into_owned()
        .into_dimensionality::<Ix3>()
        .expect("3-D");
    // the matched filter leaves σ(α) ∝ exp(+j·kr·α̂·ρ); the spectral angle is α + π
    let alpha0 = PI;
    if opts.keep_stages {
        let alphas: Vec<f64> = (0..n_alpha)
            .map(|i| alpha0 + 2.0 * PI * i as f64 / n_alpha as f64)
            .collect();
        stages.push(make_stage(
            Stage::Compensated,
            &sigma,
            [("alpha", &alphas, false), (&kname(ny_name), &ky, true), ("k", &k, false)],
            drop,
        )?);
    }

    let delta_rho = 2.4 / (kmax + kmin);
    let period = |a: &AxisSpec| 2.0 * (a.max - a.min) + 4.0 * delta_rho;
    let (p1, p2) = (period(&lat.a1), period(&lat.a2));
    let lattice = |p: f64| {
        let dk = 2.0 * PI / p;
        let m = 2 * ((2.0 * kmax / dk).ceil() as usize) + 1;
        (0..m).map(|i| signed_bin(i, m) as f64 * dk).collect::<Vec<f64>>()
    };
    let (k1, k2) = (lattice(p1), lattice(p2));
    let st = stolt_polar(sigma.view(), alpha0, &ky, &k, &k1, &k2)?;
    if opts.keep_stages {
        stages.push(make_stage(
            Stage::Stolt,
            &st,
            [(&kname(n1), &k1, true), (&kname(ny_name), &ky, true), (&kname(n2), &k2, true)],
            drop,
        )?);
    }

    let up = |m: usize, p: f64, req: f64| m.max((2.0 * p / req).ceil() as usize);
    let l1 = up(k1.len(), p1, lat.a1.step());
    let l2 = up(k2.len(), p2, lat.a2.step());
    let ly = match lat.ay {
        Some(a) => up(py, py as f64 * lat.dy, a.step()),
        None => 1,
    };
    let mut img = st.into_dyn();
    img = spectral_pad(&img, 0, l1);
    fft_axis(&mut img, 0, Direction::Inverse);
    if lat.ay.is_some() {
        img = spectral_pad(&img, 1, ly);
        fft_axis(&mut img, 1, Direction::Inverse);
    }
    img = spectral_pad(&img, 2, l2);
    fft_axis(&mut img, 2, Direction::Inverse);
    let img = img.into_dimensionality::<Ix3>().expect("3-D");

    let axes = [
        PeriodicAxis {
            origin: 0.0,
            step: p1 / l1 as f64,
            len: l1,
        },
        PeriodicAxis {
            origin: yc,
            step: py as f64 * lat.dy / ly as f64,
            len: ly,
        },
        PeriodicAxis {
            origin: 0.0,
            step: p2 / l2 as f64,
            len: l2,
        },
    ];
    let c1 = lat.a1.coords();
    let cy = lat.ay.map_or(vec![yc], |a| a.coords());
    let c2 = lat.a2.coords();
    let out = sample_periodic(&img, axes, [&c1, &cy, &c2]);
    let mut voxels = out.into_dyn();
    if lat.ay.is_none() {
        voxels = voxels.index_axis_move(Axis(1), 0);
    }
    let image = ImageVolume::new(voxels, grid.clone(), Provenance::new(name))?;
    Ok(Reconstruction { image, stages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_matches_direct_dft() {
        let (g, ev) = azimuth_kernel(16, 3.0, 5.0, 0.2).unwrap();
        assert!(!ev);
        let kr = (100.0f64 - 9.0).sqrt();
        for (m, gm) in g.iter().enumerate() {
            let mut acc = Complex64::default();
            for t in 0..16 {
                let th = 2.0 * PI * t as f64 / 16.0;
                acc += Complex64::from_polar(1.0, -kr * 0.2 * th.cos() - 2.0 * PI * (m * t) as f64 / 16.0);
            }
            assert!((acc / 4.0 - gm).norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_boundary_and_symmetry() {
        let (g, ev) = azimuth_kernel(8, 10.0, 5.0, 0.3).unwrap();
        assert!(!ev);
        assert!((g[0] - Complex64::new(8f64.sqrt(), 0.0)).norm() < 1e-12);
        assert!(g[1..].iter().all(|v| v.norm() < 1e-12));
        let (g, _) = azimuth_kernel(12, 1.0, 7.0, 0.05).unwrap();
        for m in 1..12 {
            assert!((g[m] - g[12 - m]).norm() < 1e-12);
        }
        let (g, ev) = azimuth_kernel(8, 11.0, 5.0, 0.3).unwrap();
        assert!(ev && g.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn facing_kernel_has_flat_magnitude_in_band() {
        // one stationary point per harmonic, so |G(m)| is flat for |m| ≪ kr·R0
        let g = facing_azimuth_kernel(64, 2000.0, 0.05);
        let m0 = g[0].norm();
        for m in 1..16 {
            assert!((g[m].norm() / m0 - 1.0).abs() < 0.02, "m={m}");
            assert!((g[64 - m].norm() / m0 - 1.0).abs() < 0.02, "m=-{m}");
        }
    }
}
