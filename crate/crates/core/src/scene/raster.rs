use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, Scene};
use crate::error::{Error, Result};
use crate::recon::{ImageVolume, Provenance};

/// What to do with scatterers outside the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RasterStats {
    /// Scatterers dropped in lenient mode.
    pub clipped: usize,
}

/// Per-axis (lower index, upper weight), or `None` when outside.
fn axis_weight(a: &crate::scene::AxisSpec, x: f64) -> Option<(usize, f64)> {
    let u = a.fractional_index(x);
    let last = (a.count - 1) as f64;
    let tol = 1e-9;
    if !(u >= -tol && u <= last + tol) {
        return None;
    }
    let u = u.clamp(0.0, last);
    let i = (u.floor() as usize).min(a.count - 2);
    Some((i, u - i as f64))
}

/// Deposits `|reflectivity|` with multilinear weights. Two-axis grids use the
/// `(y, z)` coordinates and ignore `x`.
pub fn splat(scene: &Scene, grid: &GridSpec, mode: RasterMode) -> Result<(ArrayD<f64>, RasterStats)> {
    grid.validate()?;
    let mut out = ArrayD::<f64>::zeros(IxDyn(&grid.shape()));
    let mut stats = RasterStats::default();
    let phys = grid.physical_axes();
    let dims = grid.dims();
    'scatterers: for (n, s) in scene.scatterers().iter().enumerate() {
        let mut cell = Vec::with_capacity(dims);
        for (a, &p) in grid.axes.iter().zip(phys) {
            match axis_weight(a, s.position[p]) {
                Some(w) => cell.push(w),
                None => match mode {
                    RasterMode::Strict => {
                        return Err(Error::Geometry(format!(
                            "scatterer {n} at {:?} lies outside the grid",
                            s.position
                        )))
                    }
                    RasterMode::Lenient => {
                        stats.clipped += 1;
                        continue 'scatterers;
                    }
                },
            }
        }
        let mag = s.reflectivity.norm();
        let mut idx = vec![0usize; dims];
        for corner in 0..(1usize << dims) {
            let mut w = mag;
            for (d, &(i, f)) in cell.iter().enumerate() {
                let up = corner >> d & 1 == 1;
                idx[d] = i + up as usize;
                w *= if up { f } else { 1.0 - f };
            }
            out[IxDyn(&idx)] += w;
        }
    }
    Ok((out, stats))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with zero boundary.
fn blur(a: &mut ArrayD<f64>, sigma: f64) {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    for ax in 0..a.ndim() {
        for mut lane in a.lanes_mut(Axis(ax)) {
            let src: Vec<f64> = lane.to_vec();
            let n = src.len() as i64;
            for i in 0..n {
                let mut acc = 0.0;
                for (j, w) in k.iter().enumerate() {
                    let t = i + j as i64 - r;
                    if (0..n).contains(&t) {
                        acc += w * src[t as usize];
                    }
                }
                lane[i as usize] = acc;
            }
        }
    }
}

/// Ground-truth label: splat, Gaussian blur of `sigma_vox` voxels, then
/// peak-normalize to 1.
pub fn rasterize_ground_truth(
    scene: &Scene,
    grid: &GridSpec,
    sigma_vox: f64,
    mode: RasterMode,
) -> Result<(ImageVolume, RasterStats)> {
    if !(sigma_vox.is_finite() && sigma_vox >= 0.0) {
        return Err(Error::invalid("sigma_vox", "must be finite and nonnegative"));
    }
    let (mut mass, stats) = splat(scene, grid, mode)?;
    if sigma_vox > 0.0 {
        blur(&mut mass, sigma_vox);
    }
    let peak = mass.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        mass.mapv_inplace(|v| v / peak);
    }
    let voxels = mass.mapv(|v| Complex64::new(v, 0.0));
    let img = ImageVolume::new(voxels, grid.clone(), Provenance::new("ground-truth"))?;
    Ok((img, stats))
}
