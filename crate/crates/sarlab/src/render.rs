//! Magnitude images as PNG.
//!
//! Each pixel shows `20·log10(|v| / max|v|)` clipped to `[-dr, 0]` dB and
//! mapped linearly onto a 256-entry colormap. The colormap interpolates
//! between these RGB anchors, lowest level first:
//!
//! ```text
//! (0, 0, 4)  (87, 16, 110)  (188, 55, 84)  (249, 142, 9)  (252, 255, 164)
//! ```
//!
//! Rows follow the first displayed axis and columns the second, both in
//! increasing index order. A 3-D volume is reduced by a slice or a maximum
//! intensity projection along one axis; 2-D images are shown whole.

use ndarray::{Array2, ArrayD, Axis, Ix2};
use sarlab_core::{Complex64, Error, Result};

const ANCHORS: [[f64; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [87.0, 16.0, 110.0],
    [188.0, 55.0, 84.0],
    [249.0, 142.0, 9.0],
    [252.0, 255.0, 164.0],
];

pub const DEFAULT_DR_DB: f64 = 40.0;

/// Colormap entry `level` of 256.
pub fn colormap(level: u8) -> [u8; 3] {
    let t = level as f64 / 255.0 * (ANCHORS.len() - 1) as f64;
    let i = (t.floor() as usize).min(ANCHORS.len() - 2);
    let f = t - i as f64;
    [0, 1, 2].map(|c| (ANCHORS[i][c] + f * (ANCHORS[i + 1][c] - ANCHORS[i][c])).round() as u8)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Slice { axis: usize, index: usize },
    Mip { axis: usize },
}

fn bad(field: &str, msg: String) -> Error {
    Error::Invalid {
        field: field.into(),
        msg,
    }
}

/// Reduces the magnitude of `voxels` to the displayed 2-D plane.
pub fn project(voxels: &ArrayD<Complex64>, view: View) -> Result<Array2<f64>> {
    let mag = voxels.mapv(|v| v.norm());
    let plane = match mag.ndim() {
        2 => mag,
        3 => {
            let axis = match view {
                View::Slice { axis, .. } | View::Mip { axis } => axis,
            };
            if axis >= 3 {
                return Err(bad("axis", format!("axis {axis} out of range for a 3-D image")));
            }
            match view {
                View::Slice { index, .. } => {
                    let n = mag.shape()[axis];
                    if index >= n {
                        return Err(bad("index", format!("index {index} out of range 0..{n} on axis {axis}")));
                    }
                    mag.index_axis(Axis(axis), index).to_owned()
                }
                View::Mip { .. } => mag.fold_axis(Axis(axis), 0.0f64, |&a, &b| a.max(b)),
            }
        }
        d => return Err(bad("image", format!("cannot display a {d}-D array"))),
    };
    Ok(plane.into_dimensionality::<Ix2>().expect("2-D plane"))
}

/// Colormap levels of a magnitude plane.
pub fn levels(plane: &Array2<f64>, dr_db: f64) -> Result<Array2<u8>> {
    if !(dr_db.is_finite() && dr_db > 0.0) {
        return Err(bad("dr", format!("dynamic range must be positive, got {dr_db}")));
    }
    let peak = plane.iter().cloned().fold(0.0, f64::max);
    Ok(plane.mapv(|m| {
        if !(peak > 0.0) || !(m > 0.0) {
            return 0;
        }
        let db = (20.0 * (m / peak).log10()).clamp(-dr_db, 0.0);
        ((db + dr_db) / dr_db * 255.0).round() as u8
    }))
}

pub fn render_png(voxels: &ArrayD<Complex64>, view: View, dr_db: f64) -> Result<Vec<u8>> {
    let lv = levels(&project(voxels, view)?, dr_db)?;
    let (h, w) = lv.dim();
    let mut rgb = Vec::with_capacity(h * w * 3);
    for &l in lv.iter() {
        rgb.extend_from_slice(&colormap(l));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| bad("png", e.to_string()))?;
        writer.write_image_data(&rgb).map_err(|e| bad("png", e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn colormap_ends_on_anchors() {
        assert_eq!(colormap(0), [0, 0, 4]);
        assert_eq!(colormap(255), [252, 255, 164]);
    }

    #[test]
    fn mip_and_slice_pick_expected_plane() {
        let mut v = ArrayD::zeros(IxDyn(&[3, 4, 5]));
        v[[1, 2, 3]] = Complex64::new(0.0, 2.0);
        let mip = project(&v, View::Mip { axis: 0 }).unwrap();
        assert_eq!(mip.dim(), (4, 5));
        assert_eq!(mip[[2, 3]], 2.0);
        let s = project(&v, View::Slice { axis: 2, index: 3 }).unwrap();
        assert_eq!(s.dim(), (3, 4));
        assert_eq!(s[[1, 2]], 2.0);
        assert!(project(&v, View::Slice { axis: 2, index: 5 }).is_err());
    }

    #[test]
    fn levels_clip_dynamic_range() {
        let p = Array2::from_shape_vec((1, 3), vec![1.0, 0.1, 1e-5]).unwrap();
        let l = levels(&p, 40.0).unwrap();
        assert_eq!(l.as_slice().unwrap(), &[255, 128, 0]);
    }
}
