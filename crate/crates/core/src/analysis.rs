//! Resolution formulas, point-spread measurements and image comparison.

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::recon::ImageVolume;
use crate::C;

/// Per-axis resolutions (m). Absent axes are not resolved by the geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resolutions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drho: Option<f64>,
}

/// Inputs that produced a report.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zref: Option<f64>,
    #[serde(rename = "Dx", skip_serializing_if = "Option::is_none")]
    pub dx_extent: Option<f64>,
    #[serde(rename = "Dy", skip_serializing_if = "Option::is_none")]
    pub dy_extent: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(rename = "R0", skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub predicted: Resolutions,
    pub measured: Resolutions,
    pub config: ReportConfig,
}

fn optional_extent(field: &str, d: f64) -> Result<Option<f64>> {
    if d == 0.0 {
        Ok(None)
    } else {
        require_positive(field, d)?;
        Ok(Some(d))
    }
}

/// Planar-aperture resolution: `λc·Zref/(2D)` per cross-range axis, `c/(2B)` in range.
/// A zero aperture extent omits that axis.
pub fn planar_resolution(lambda_c: f64, zref: f64, dx: f64, dy: f64, b: f64) -> Result<Resolutions> {
    require_positive("lambdaC", lambda_c)?;
    require_positive("Zref", zref)?;
    require_positive("B", b)?;
    let cross = |d: Option<f64>| d.map(|d| lambda_c * zref / (2.0 * d));
    Ok(Resolutions {
        dx: cross(optional_extent("Dx", dx)?),
        dy: cross(optional_extent("Dy", dy)?),
        dz: Some(C / (2.0 * b)),
        drho: None,
    })
}

/// Cylindrical-aperture resolution: `dy = λc·R0/(2Dy)` and `dρ = 2.4/(kmax + kmin)`.
pub fn cylindrical_resolution(lambda_c: f64, r0: f64, dy: f64, kmin: f64, kmax: f64) -> Result<Resolutions> {
    require_positive("lambdaC", lambda_c)?;
    require_positive("R0", r0)?;
    require_positive("kmin", kmin)?;
    require_positive("kmax", kmax)?;
    if kmax <= kmin {
        return Err(Error::invalid("kmax", "must exceed kmin"));
    }
    Ok(Resolutions {
        dx: None,
        dy: optional_extent("Dy", dy)?.map(|d| lambda_c * r0 / (2.0 * d)),
        dz: None,
        drho: Some(2.4 / (kmax + kmin)),
    })
}

fn argmax(mag: &ArrayD<f64>) -> Option<Vec<usize>> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for (idx, &v) in mag.indexed_iter() {
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((idx.slice().to_vec(), v));
        }
    }
    best.filter(|(_, v)| *v > 0.0).map(|(i, _)| i)
}

/// Half-power (−3 dB) widths along each grid axis through the peak, in m.
///
/// Half power is `1/√2` of the peak magnitude; crossings are located by
/// linear interpolation between samples. `peak` overrides the argmax.
pub fn psf_widths(image: &ImageVolume, peak: Option<&[usize]>) -> Result<Vec<f64>> {
    let mag = image.magnitude();
    let peak = match peak {
        Some(p) => {
            if p.len() != mag.ndim() || p.iter().zip(mag.shape()).any(|(&i, &n)| i >= n) {
                return Err(Error::invalid("peak", "index outside the image"));
            }
            p.to_vec()
        }
        None => argmax(&mag).ok_or_else(|| Error::invalid("image", "all-zero image has no peak"))?,
    };
    let top = mag[IxDyn(&peak)];
    if !(top > 0.0) {
        return Err(Error::invalid("image", "peak magnitude is zero"));
    }
    let thr = top / std::f64::consts::SQRT_2;
    let mut widths = Vec::with_capacity(mag.ndim());
    for (ax, spec) in image.grid().axes.iter().enumerate() {
        let n = mag.shape()[ax];
        let p = peak[ax];
        if p == 0 || p + 1 == n {
            return Err(Error::invalid("image", format!("peak lies on the boundary of axis {ax}")));
        }
        let mut lane_idx = peak.clone();
        let mut at = |i: usize| {
            lane_idx[ax] = i;
            mag[IxDyn(&lane_idx)]
        };
        let lane: Vec<f64> = (0..n).map(&mut at).collect();
        let cross = |from: usize, to: usize| -> f64 {
            let frac = (lane[from] - thr) / (lane[from] - lane[to]);
            from as f64 + frac * (to as f64 - from as f64)
        };
        let left = (1..=p)
            .rev()
            .find(|&i| lane[i - 1] < thr)
            .map(|i| cross(i, i - 1))
            .ok_or_else(|| Error::invalid("image", format!("no half-power crossing below the peak on axis {ax}")))?;
        let right = (p..n - 1)
            .find(|&i| lane[i + 1] < thr)
            .map(|i| cross(i, i + 1))
            .ok_or_else(|| Error::invalid("image", format!("no half-power crossing above the peak on axis {ax}")))?;
        widths.push((right - left) * spec.step());
    }
    Ok(widths)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Pearson correlation of the peak-normalized magnitudes.
    pub ncc: f64,
    /// RMS difference of the peak-normalized magnitudes.
    pub rmse: f64,
    /// Argmax of `b` minus argmax of `a`, in voxels.
    pub peak_offset: Vec<isize>,
}

/// Compares two complex images through their magnitudes.
pub fn image_compare(a: &ArrayD<Complex64>, b: &ArrayD<Complex64>) -> Result<Comparison> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let norm = |x: &ArrayD<Complex64>, name: &str| -> Result<(ArrayD<f64>, Vec<usize>)> {
        let m = x.mapv(|v| v.norm());
        let p = argmax(&m).ok_or_else(|| Error::invalid(name, "all-zero image; correlation undefined"))?;
        let top = m[IxDyn(&p)];
        Ok((m.mapv(|v| v / top), p))
    };
    let (ma, pa) = norm(a, "a")?;
    let (mb, pb) = norm(b, "b")?;
    let n = ma.len() as f64;
    let (mean_a, mean_b) = (ma.sum() / n, mb.sum() / n);
    let (mut sab, mut saa, mut sbb, mut sq) = (0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in ma.iter().zip(mb.iter()) {
        let (u, v) = (x - mean_a, y - mean_b);
        sab += u * v;
        saa += u * u;
        sbb += v * v;
        sq += (x - y) * (x - y);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::invalid("image", "constant magnitude; correlation undefined"));
    }
    Ok(Comparison {
        ncc: sab / (saa * sbb).sqrt(),
        rmse: (sq / n).sqrt(),
        peak_offset: pb.iter().zip(&pa).map(|(&x, &y)| x as isize - y as isize).collect(),
    })
}

/// Maximum-intensity projection of `|v|` along `axis`.
pub fn mip(voxels: &ArrayD<Complex64>, axis: usize) -> ArrayD<f64> {
    voxels
        .map_axis(Axis(axis), |lane| lane.iter().map(|v| v.norm()).fold(0.0, f64::max))
}
