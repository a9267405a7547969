//! Range migration for linear and planar apertures.

use std::f64::consts::PI;

use ndarray::{Array3, ArrayD, Axis, Ix3};
use num_complex::Complex64;
use rayon::prelude::*;

use super::resample::{sample_axis, spectral_pad, PeriodicAxis};
use super::stolt::stolt_rectilinear;
use super::{ImageVolume, KAxis, KSpace, Provenance, Reconstruction, RmaOptions, Stage};
use crate::aperture::{ApertureKind, UniformMeta};
use crate::error::{Error, Result};
use crate::fft::{fft_axis, fftshift_axis, signed_bin, wavenumbers, Direction};
use crate::forward::EchoData;
use crate::scene::GridSpec;
use crate::C;

struct Lattice {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    z0: f64,
    planar: bool,
}

/// Planar aperture → 3-D `(x, y, z)` image.
pub fn rma_planar(echo: &EchoData, grid: &GridSpec, opts: &RmaOptions) -> Result<Reconstruction> {
    let lat = match echo.aperture.meta() {
        Some(&UniformMeta::Planar { nx, ny, dx, dy, z0 }) if echo.aperture.kind() == ApertureKind::Planar => {
            Lattice { nx, ny, dx, dy, z0, planar: true }
        }
        _ => {
            return Err(Error::Geometry(
                "rma-planar needs a uniform planar aperture; use `bpa` for other geometries".into(),
            ))
        }
    };
    if grid.dims() != 3 {
        return Err(Error::invalid("grid", "rma-planar needs a 3-axis (x, y, z) grid"));
    }
    rectilinear(echo, grid, opts, lat, "rma-planar")
}

/// Linear aperture along y → 2-D `(y, z)` image in the plane `x = 0`.
pub fn rma_linear(echo: &EchoData, grid: &GridSpec, opts: &RmaOptions) -> Result<Reconstruction> {
    let lat = match echo.aperture.meta() {
        Some(&UniformMeta::Linear { ny, dy, z0 }) if echo.aperture.kind() == ApertureKind::Linear => Lattice {
            nx: 1,
            ny,
            dx: 1.0,
            dy,
            z0,
            planar: false,
        },
        _ => {
            return Err(Error::Geometry(
                "rma-linear needs a uniform linear aperture; use `bpa` for other geometries".into(),
            ))
        }
    };
    if grid.dims() != 2 {
        return Err(Error::invalid("grid", "rma-linear needs a 2-axis (y, z) grid"));
    }
    rectilinear(echo, grid, opts, lat, "rma-linear")
}

/// Monotone copy of an FFT-ordered axis and its values.
pub(super) fn centered(a: &ArrayD<Complex64>, axis: usize, vals: &[f64]) -> (ArrayD<Complex64>, Vec<f64>) {
    let n = vals.len();
    let mut v = vec![0.0; n];
    for (i, &x) in vals.iter().enumerate() {
        v[(i + n / 2) % n] = x;
    }
    (fftshift_axis(a, axis), v)
}

/// Builds a stage from a 3-D array; the flag marks axes in FFT order.
/// `drop` removes a singleton axis.
pub(super) fn make_stage(
    stage: Stage,
    arr: &Array3<Complex64>,
    axes: [(&str, &[f64], bool); 3],
    drop: Option<usize>,
) -> Result<KSpace> {
    let mut a = arr.clone().into_dyn();
    let mut out_axes = Vec::new();
    for (i, (name, vals, fft)) in axes.iter().enumerate() {
        if *fft && vals.len() > 1 {
            let (shifted, v) = centered(&a, i, vals);
            a = shifted;
            out_axes.push(KAxis::new(name, v));
        } else {
            out_axes.push(KAxis::new(name, vals.to_vec()));
        }
    }
    if let Some(d) = drop {
        a = a.index_axis_move(Axis(d), 0);
        out_axes.remove(d);
    }
    KSpace::new(stage, a, out_axes)
}

fn half_extent(a: &crate::scene::AxisSpec, center: f64) -> f64 {
    (a.max - center).abs().max((a.min - center).abs())
}

fn rectilinear(
    echo: &EchoData,
    grid: &GridSpec,
    opts: &RmaOptions,
    lat: Lattice,
    name: &str,
) -> Result<Reconstruction> {
    grid.validate()?;
    if opts.pad_factor == 0 {
        return Err(Error::invalid("pad_factor", "must be at least 1"));
    }
    let nf = echo.freq.len();
    let k = echo.freq.wavenumbers();
    let (kmin, kmax) = (k[0], k[nf - 1]);
    let pos = echo.aperture.positions();
    let (x_start, y_start) = (pos[0][0], pos[0][1]);

    let gx = grid.axis_for(0).copied();
    let gy = *grid.axis_for(1).expect("y axis");
    let gz = *grid.axis_for(2).expect("z axis");
    let xc = gx.map_or(0.0, |a| a.center());
    let yc = gy.center();

    // depth u measured from the aperture plane toward the grid
    let sgn = if gz.center() >= lat.z0 { 1.0 } else { -1.0 };
    let u_of = |z: f64| sgn * (z - lat.z0);
    let u_min = u_of(gz.min).min(u_of(gz.max));
    if !(u_min > 0.0) {
        return Err(Error::invalid("grid", "grid must lie entirely on one side of the aperture plane"));
    }
    let u_c = u_of(gz.center());

    let pad_len = |n: usize, d: f64, extent: f64| (opts.pad_factor * n).max((2.0 * extent / d).ceil() as usize);
    let px = if lat.planar {
        pad_len(lat.nx, lat.dx, gx.map_or(0.0, |a| a.max - a.min))
    } else {
        1
    };
    let py = pad_len(lat.ny, lat.dy, gy.max - gy.min);

    let mut s = Array3::<Complex64>::zeros((px, py, nf));
    for iy in 0..lat.ny {
        for ix in 0..lat.nx {
            s.slice_mut(ndarray::s![ix, iy, ..])
                .assign(&echo.samples.row(iy * lat.nx + ix));
        }
    }

    let mut stages = Vec::new();
    let drop0 = (!lat.planar).then_some(0);
    let xs: Vec<f64> = (0..lat.nx).map(|i| x_start + i as f64 * lat.dx).collect();
    let ys: Vec<f64> = (0..lat.ny).map(|i| y_start + i as f64 * lat.dy).collect();
    if opts.keep_stages {
        let raw = s.slice(ndarray::s![..lat.nx, ..lat.ny, ..]).to_owned();
        stages.push(make_stage(
            Stage::Signal,
            &raw,
            [("x", &xs, false), ("y", &ys, false), ("k", &k, false)],
            drop0,
        )?);
    }

    let mut sd = s.into_dyn();
    if lat.planar {
        fft_axis(&mut sd, 0, Direction::Forward);
    }
    fft_axis(&mut sd, 1, Direction::Forward);
    let mut s = sd.into_dimensionality::<Ix3>().expect("3-D");

    let kx = if lat.planar { wavenumbers(px, lat.dx) } else { vec![0.0] };
    let ky = wavenumbers(py, lat.dy);
    // FFT bin 0 sits on the first element; re-reference to the grid center
    let sx = if lat.planar { x_start - xc } else { 0.0 };
    let sy = y_start - yc;
    s.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(ix, mut plane)| {
            for (iy, mut line) in plane.axis_iter_mut(Axis(0)).enumerate() {
                let ph = Complex64::from_polar(1.0, -(kx[ix] * sx + ky[iy] * sy));
                line.mapv_inplace(|v| v * ph);
            }
        });
    if opts.keep_stages {
        stages.push(make_stage(
            Stage::Spectrum,
            &s,
            [("kx", &kx, true), ("ky", &ky, true), ("k", &k, false)],
            drop0,
        )?);
    }

    s.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(ix, mut plane)| {
            for (iy, mut line) in plane.axis_iter_mut(Axis(0)).enumerate() {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = match super::dispersion_kz(k[j], kx[ix], ky[iy]) {
                        Some(kz) => *v * Complex64::from_polar(1.0, kz * u_c),
                        None => Complex64::default(),
                    };
                }
            }
        });
    if opts.keep_stages {
        stages.push(make_stage(
            Stage::Compensated,
            &s,
            [("kx", &kx, true), ("ky", &ky, true), ("k", &k, false)],
            drop0,
        )?);
    }

    // uniform kz lattice covering the propagating band for this geometry
    let ap_half_x = if lat.planar { (lat.nx - 1) as f64 * lat.dx / 2.0 } else { 0.0 };
    let ap_half_y = (lat.ny - 1) as f64 * lat.dy / 2.0;
    let lateral_x = if lat.planar {
        ap_half_x + gx.map_or(0.0, |a| half_extent(&a, 0.0))
    } else {
        0.0
    };
    let lateral_y = ap_half_y + half_extent(&gy, 0.0);
    let sin2 = |a: f64| a * a / (a * a + u_min * u_min);
    let kz_lo = 2.0 * kmin * (1.0 - sin2(lateral_x) - sin2(lateral_y)).max(0.0).sqrt();
    let kz_hi = 2.0 * kmax;
    let delta_z = C / (2.0 * echo.freq.bandwidth());
    let period = 2.0 * (gz.max - gz.min) + 2.0 * delta_z;
    let dkz = 2.0 * PI / period;
    let kz_c = 0.5 * (kz_lo + kz_hi);
    let m = 2 * ((0.5 * (kz_hi - kz_lo) / dkz).ceil() as usize) + 1;
    let kz_grid: Vec<f64> = (0..m).map(|i| kz_c + signed_bin(i, m) as f64 * dkz).collect();

    if opts.keep_stages {
        let (st, _) = stolt_rectilinear(s.view(), &kx, &ky, &k, &kz_grid, opts.interp)?;
        stages.push(make_stage(
            Stage::Stolt,
            &st,
            [("kx", &kx, true), ("ky", &ky, true), ("kz", &kz_grid, true)],
            drop0,
        )?);
    }

    // inverse transform with enough spectral padding for ≤ half-voxel sampling
    let up = |p: usize, native_period: f64, req: f64| p.max((2.0 * native_period / req).ceil() as usize);
    let lx = if lat.planar {
        up(px, px as f64 * lat.dx, gx.map(|a| a.step()).unwrap_or(f64::INFINITY))
    } else {
        1
    };
    let ly = up(py, py as f64 * lat.dy, gy.step());
    let lz = up(m, period, gz.step());
    let ax_x = PeriodicAxis {
        origin: xc,
        step: px as f64 * lat.dx / lx as f64,
        len: lx,
    };
    let ax_y = PeriodicAxis {
        origin: yc,
        step: py as f64 * lat.dy / ly as f64,
        len: ly,
    };
    let ax_u = PeriodicAxis {
        origin: u_c,
        step: period / lz as f64,
        len: lz,
    };
    let x_coords = gx.map_or(vec![xc], |a| a.coords());
    let y_coords = gy.coords();
    let u_coords: Vec<f64> = gz.coords().into_iter().map(u_of).collect();

    // one kx plane at a time: Stolt, then range, then cross-range, so the
    // full kz lattice is never held at once
    let planes: Vec<(ArrayD<Complex64>, usize)> = (0..px)
        .into_par_iter()
        .map(|ix| -> Result<_> {
            let (st, stats) = stolt_rectilinear(
                s.slice(ndarray::s![ix..ix + 1, .., ..]),
                &kx[ix..ix + 1],
                &ky,
                &k,
                &kz_grid,
                opts.interp,
            )?;
            let mut p = spectral_pad(&st.into_dyn(), 2, lz);
            fft_axis(&mut p, 2, Direction::Inverse);
            let p = sample_axis(&p, 2, ax_u, &u_coords);
            let mut p = spectral_pad(&p, 1, ly);
            fft_axis(&mut p, 1, Direction::Inverse);
            Ok((sample_axis(&p, 1, ax_y, &y_coords), stats.zeroed_lines))
        })
        .collect::<Result<_>>()?;
    let zeroed: usize = planes.iter().map(|p| p.1).sum();
    if zeroed > 0 {
        log::debug!("{name}: {zeroed} evanescent spectral lines zeroed");
    }
    let views: Vec<_> = planes.iter().map(|p| p.0.view()).collect();
    let mut img = ndarray::concatenate(Axis(0), &views).expect("planes share a shape");
    drop(planes);
    if lat.planar {
        img = spectral_pad(&img, 0, lx);
        fft_axis(&mut img, 0, Direction::Inverse);
    }
    let mut out = sample_axis(&img, 0, ax_x, &x_coords)
        .into_dimensionality::<Ix3>()
        .expect("3-D");
    for (iz, mut lane) in out.axis_iter_mut(Axis(2)).enumerate() {
        let carrier = Complex64::from_polar(1.0, kz_c * (u_coords[iz] - u_c));
        lane.mapv_inplace(|v| v * carrier);
    }
    let mut voxels = out.into_dyn();
    if !lat.planar {
        voxels = voxels.index_axis_move(Axis(0), 0);
    }
    let image = ImageVolume::new(voxels, grid.clone(), Provenance::new(name))?;
    Ok(Reconstruction { image, stages })
}
