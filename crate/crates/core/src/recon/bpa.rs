use std::f64::consts::PI;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{ImageVolume, Provenance};
use crate::error::{Error, Result};
use crate::forward::EchoData;
use crate::scene::GridSpec;
use crate::C;

const ANCHOR_EVERY: usize = 32;

/// `exp(+j4πfR/c)` with the cycle count reduced first.
#[inline]
fn matched(f: f64, r: f64) -> Complex64 {
    let cycles = 2.0 * f * r / C;
    Complex64::from_polar(1.0, 2.0 * PI * (cycles - cycles.round()))
}

/// Point-by-point matched filter `σ̂(t) = Σ_n Σ_k s(r_n, f_k)·exp(+j4πf_k‖t − r_n‖/c)`.
pub fn bpa(echo: &EchoData, grid: &GridSpec) -> Result<ImageVolume> {
    bpa_with(echo, grid, false)
}

/// As [`bpa`]; `serial` keeps all work on the calling thread.
pub fn bpa_with(echo: &EchoData, grid: &GridSpec, serial: bool) -> Result<ImageVolume> {
    grid.validate()?;
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty grid"));
    }
    let fv = echo.freq.values();
    let nf = fv.len();
    let f0 = fv[0];
    let df = echo.freq.step();
    let uniform = fv
        .iter()
        .enumerate()
        .all(|(k, &f)| (f - (f0 + k as f64 * df)).abs() <= 1e-12 * f);
    let rows = echo
        .samples
        .as_slice()
        .map(std::borrow::Cow::Borrowed)
        .unwrap_or_else(|| std::borrow::Cow::Owned(echo.samples.iter().copied().collect()));
    let positions = echo.aperture.positions();

    let voxel = |t: &[f64; 3]| -> Complex64 {
        let mut acc = Complex64::default();
        for (n, r) in positions.iter().enumerate() {
            let d = ((t[0] - r[0]).powi(2) + (t[1] - r[1]).powi(2) + (t[2] - r[2]).powi(2)).sqrt();
            let row = &rows[n * nf..(n + 1) * nf];
            if uniform {
                let step = matched(df, d);
                let mut k = 0;
                while k < nf {
                    let end = (k + ANCHOR_EVERY).min(nf);
                    let mut z = matched(fv[k], d);
                    for s in &row[k..end] {
                        acc += s * z;
                        z *= step;
                    }
                    k = end;
                }
            } else {
                for (s, &f) in row.iter().zip(fv) {
                    acc += s * matched(f, d);
                }
            }
        }
        acc
    };

    let pts = grid.voxel_positions();
    let values: Vec<Complex64> = if serial {
        pts.iter().map(voxel).collect()
    } else {
        pts.par_iter().map(voxel).collect()
    };
    let voxels = ArrayD::from_shape_vec(IxDyn(&grid.shape()), values)
        .map_err(|e| Error::Shape(e.to_string()))?;
    ImageVolume::new(voxels, grid.clone(), Provenance::new("bpa"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Dimension;
    use crate::aperture::planar_aperture;
    use crate::forward::simulate_echo;
    use crate::scene::{point_scene, AxisSpec, Scatterer};
    use crate::waveform::frequency_axis;

    #[test]
    fn serial_equals_parallel_and_point_focuses() {
        let ap = planar_aperture(8, 8, 0.5e-3, 0.5e-3, 0.0).unwrap();
        let sc = point_scene(vec![Scatterer::unit([0.0, 0.0, 0.05])]).unwrap();
        let fr = frequency_axis(430e9, 10e9, 40).unwrap();
        let e = simulate_echo(&ap, &sc, &fr, None).unwrap();
        let g = GridSpec::volume(
            AxisSpec::new(-2e-3, 2e-3, 5),
            AxisSpec::new(-2e-3, 2e-3, 5),
            AxisSpec::new(0.03, 0.07, 5),
        )
        .unwrap();
        let a = bpa_with(&e, &g, false).unwrap();
        let b = bpa_with(&e, &g, true).unwrap();
        assert_eq!(a, b);
        let (idx, _) = a
            .voxels()
            .indexed_iter()
            .max_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .unwrap();
        assert_eq!(idx.slice(), &[2, 2, 2]);
    }
}
