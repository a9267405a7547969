//! Monostatic synthetic apertures.
//!
//! Axis conventions per geometry:
//! - linear: elements `(0, y, Z0)`, image plane y–z
//! - planar: elements `(x, y, Z0)`, index `iy * nx + ix`
//! - circular: elements `(0, R0 cos θ, R0 sin θ)`, image plane y–z
//! - cylindrical: elements `(R0 cos θ, y, R0 sin θ)`, index `iθ * ny + iy`
//!
//! θ is sampled uniformly on `[0, 2π)` starting at 0.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

pub type Point3 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApertureKind {
    Linear,
    Planar,
    Circular,
    Cylindrical,
    Irregular,
}

impl ApertureKind {
    pub fn code(self) -> i64 {
        match self {
            ApertureKind::Linear => 0,
            ApertureKind::Planar => 1,
            ApertureKind::Circular => 2,
            ApertureKind::Cylindrical => 3,
            ApertureKind::Irregular => 4,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            0 => ApertureKind::Linear,
            1 => ApertureKind::Planar,
            2 => ApertureKind::Circular,
            3 => ApertureKind::Cylindrical,
            4 => ApertureKind::Irregular,
            _ => return None,
        })
    }

    pub fn is_polar(self) -> bool {
        matches!(self, ApertureKind::Circular | ApertureKind::Cylindrical)
    }
}

/// Parameters that regenerate a uniform aperture exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UniformMeta {
    Linear { ny: usize, dy: f64, z0: f64 },
    Planar { nx: usize, ny: usize, dx: f64, dy: f64, z0: f64 },
    Circular { ntheta: usize, r0: f64 },
    Cylindrical { ntheta: usize, ny: usize, dy: f64, r0: f64 },
}

impl UniformMeta {
    pub fn kind(&self) -> ApertureKind {
        match self {
            UniformMeta::Linear { .. } => ApertureKind::Linear,
            UniformMeta::Planar { .. } => ApertureKind::Planar,
            UniformMeta::Circular { .. } => ApertureKind::Circular,
            UniformMeta::Cylindrical { .. } => ApertureKind::Cylindrical,
        }
    }

    pub fn build(&self) -> Result<Aperture> {
        match *self {
            UniformMeta::Linear { ny, dy, z0 } => linear_aperture(ny, dy, z0),
            UniformMeta::Planar { nx, ny, dx, dy, z0 } => planar_aperture(nx, ny, dx, dy, z0),
            UniformMeta::Circular { ntheta, r0 } => circular_aperture(ntheta, r0),
            UniformMeta::Cylindrical { ntheta, ny, dy, r0 } => {
                cylindrical_aperture(ntheta, ny, dy, r0)
            }
        }
    }

    /// Angular step for polar kinds.
    pub fn dtheta(&self) -> Option<f64> {
        match *self {
            UniformMeta::Circular { ntheta, .. } | UniformMeta::Cylindrical { ntheta, .. } => {
                Some(2.0 * PI / ntheta as f64)
            }
            _ => None,
        }
    }

    /// Flat encoding `[nx, ny, ntheta, dx, dy, r0, z0]` with NaN for unused slots.
    pub fn to_array(&self) -> [f64; 7] {
        let nan = f64::NAN;
        match *self {
            UniformMeta::Linear { ny, dy, z0 } => [nan, ny as f64, nan, nan, dy, nan, z0],
            UniformMeta::Planar { nx, ny, dx, dy, z0 } => {
                [nx as f64, ny as f64, nan, dx, dy, nan, z0]
            }
            UniformMeta::Circular { ntheta, r0 } => [nan, nan, ntheta as f64, nan, nan, r0, nan],
            UniformMeta::Cylindrical { ntheta, ny, dy, r0 } => {
                [nan, ny as f64, ntheta as f64, nan, dy, r0, nan]
            }
        }
    }

    pub fn from_array(kind: ApertureKind, a: &[f64]) -> Result<Self> {
        if a.len() != 7 {
            return Err(Error::Shape(format!("aperture meta has {} entries, expected 7", a.len())));
        }
        let count = |v: f64, name: &str| -> Result<usize> {
            if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(name, format!("bad stored count {v}")))
            }
        };
        Ok(match kind {
            ApertureKind::Linear => UniformMeta::Linear { ny: count(a[1], "ny")?, dy: a[4], z0: a[6] },
            ApertureKind::Planar => UniformMeta::Planar {
                nx: count(a[0], "nx")?,
                ny: count(a[1], "ny")?,
                dx: a[3],
                dy: a[4],
                z0: a[6],
            },
            ApertureKind::Circular => UniformMeta::Circular { ntheta: count(a[2], "ntheta")?, r0: a[5] },
            ApertureKind::Cylindrical => UniformMeta::Cylindrical {
                ntheta: count(a[2], "ntheta")?,
                ny: count(a[1], "ny")?,
                dy: a[4],
                r0: a[5],
            },
            ApertureKind::Irregular => {
                return Err(Error::Geometry("irregular apertures carry no uniform meta".into()))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aperture {
    kind: ApertureKind,
    positions: Vec<Point3>,
    meta: Option<UniformMeta>,
    warnings: Vec<String>,
}

/// Centered uniform samples `(i - (n-1)/2) * d`.
fn centered(n: usize, d: f64) -> impl Iterator<Item = f64> {
    let c = (n as f64 - 1.0) / 2.0;
    (0..n).map(move |i| (i as f64 - c) * d)
}

fn require_finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

fn require_count(field: &str, n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::invalid(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

pub fn linear_aperture(ny: usize, dy: f64, z0: f64) -> Result<Aperture> {
    require_count("ny", ny)?;
    require_positive("dy", dy)?;
    require_finite("z0", z0)?;
    let positions = centered(ny, dy).map(|y| [0.0, y, z0]).collect();
    Ok(Aperture::uniform(positions, UniformMeta::Linear { ny, dy, z0 }))
}

pub fn planar_aperture(nx: usize, ny: usize, dx: f64, dy: f64, z0: f64) -> Result<Aperture> {
    require_count("nx", nx)?;
    require_count("ny", ny)?;
    require_positive("dx", dx)?;
    require_positive("dy", dy)?;
    require_finite("z0", z0)?;
    let xs: Vec<f64> = centered(nx, dx).collect();
    let mut positions = Vec::with_capacity(nx * ny);
    for y in centered(ny, dy) {
        positions.extend(xs.iter().map(|&x| [x, y, z0]));
    }
    Ok(Aperture::uniform(positions, UniformMeta::Planar { nx, ny, dx, dy, z0 }))
}

/// Uniform angles `2πn/N`.
pub fn polar_angles(ntheta: usize) -> Vec<f64> {
    (0..ntheta).map(|i| 2.0 * PI * i as f64 / ntheta as f64).collect()
}

pub fn circular_aperture(ntheta: usize, r0: f64) -> Result<Aperture> {
    require_count("ntheta", ntheta)?;
    require_positive("r0", r0)?;
    let positions = polar_angles(ntheta)
        .into_iter()
        .map(|t| [0.0, r0 * t.cos(), r0 * t.sin()])
        .collect();
    Ok(Aperture::uniform(positions, UniformMeta::Circular { ntheta, r0 }))
}

pub fn cylindrical_aperture(ntheta: usize, ny: usize, dy: f64, r0: f64) -> Result<Aperture> {
    require_count("ntheta", ntheta)?;
    require_count("ny", ny)?;
    require_positive("dy", dy)?;
    require_positive("r0", r0)?;
    let ys: Vec<f64> = centered(ny, dy).collect();
    let mut positions = Vec::with_capacity(ntheta * ny);
    for t in polar_angles(ntheta) {
        let (s, c) = t.sin_cos();
        positions.extend(ys.iter().map(|&y| [r0 * c, y, r0 * s]));
    }
    Ok(Aperture::uniform(
        positions,
        UniformMeta::Cylindrical { ntheta, ny, dy, r0 },
    ))
}

/// Arbitrary element list, order preserved. Repeated positions are kept
/// and reported through [`Aperture::warnings`].
pub fn irregular_aperture(positions: Vec<Point3>) -> Result<Aperture> {
    if positions.is_empty() {
        return Err(Error::invalid("positions", "aperture needs at least one element"));
    }
    if let Some(i) = positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid(format!("positions[{i}]"), "non-finite coordinate"));
    }
    let mut seen = HashSet::with_capacity(positions.len());
    let mut dups = 0usize;
    for p in &positions {
        if !seen.insert(p.map(f64::to_bits)) {
            dups += 1;
        }
    }
    let mut warnings = Vec::new();
    if dups > 0 {
        warnings.push(format!("{dups} duplicate element position(s)"));
    }
    Ok(Aperture {
        kind: ApertureKind::Irregular,
        positions,
        meta: None,
        warnings,
    })
}

impl Aperture {
    fn uniform(positions: Vec<Point3>, meta: UniformMeta) -> Self {
        Aperture {
            kind: meta.kind(),
            positions,
            meta: Some(meta),
            warnings: Vec::new(),
        }
    }

    pub fn kind(&self) -> ApertureKind {
        self.kind
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn meta(&self) -> Option<&UniformMeta> {
        self.meta.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Reorders elements; used to check that echoes follow element order.
    pub fn permuted(&self, order: &[usize]) -> Result<Aperture> {
        if order.len() != self.len() {
            return Err(Error::Shape("permutation length differs from element count".into()));
        }
        let positions = order
            .iter()
            .map(|&i| self.positions.get(i).copied())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Shape("permutation index out of range".into()))?;
        irregular_aperture(positions)
    }

    /// Warnings for element spacing coarser than a quarter wavelength.
    pub fn spacing_warnings(&self, lambda_c: f64) -> Vec<String> {
        let limit = lambda_c / 4.0 * (1.0 + 1e-9);
        let mut out = Vec::new();
        let mut check = |name: &str, d: f64| {
            if d > limit {
                out.push(format!(
                    "{name} = {:.4} mm exceeds λc/4 = {:.4} mm",
                    d * 1e3,
                    lambda_c / 4.0 * 1e3
                ));
            }
        };
        match self.meta {
            Some(UniformMeta::Linear { dy, .. }) => check("dy", dy),
            Some(UniformMeta::Planar { dx, dy, .. }) => {
                check("dx", dx);
                check("dy", dy);
            }
            Some(UniformMeta::Circular { ntheta, r0 }) => check("arc step", 2.0 * PI * r0 / ntheta as f64),
            Some(UniformMeta::Cylindrical { ntheta, dy, r0, .. }) => {
                check("arc step", 2.0 * PI * r0 / ntheta as f64);
                check("dy", dy);
            }
            None => {}
        }
        out
    }
}

/// Coordinate span `(Dx, Dy)` along x and y.
pub fn aperture_extent(a: &Aperture) -> (f64, f64) {
    let span = |axis: usize| {
        let (lo, hi) = a
            .positions
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[axis]), hi.max(p[axis]))
            });
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    };
    (span(0), span(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C;

    const DY_435: f64 = C / 435e9 / 4.0;

    #[test]
    fn linear_fig5_extent() {
        let a = linear_aperture(128, DY_435, 0.0).unwrap();
        assert_eq!(a.len(), 128);
        let (dx, dy) = aperture_extent(&a);
        assert_eq!(dx, 0.0);
        assert!((dy * 1e3 - 21.88).abs() < 5e-3, "{}", dy * 1e3);
        assert!((DY_435 * 1e3 - 0.172295).abs() < 1e-6);
    }

    #[test]
    fn linear_single_and_empty() {
        let a = linear_aperture(1, 1e-3, 0.3).unwrap();
        assert_eq!(a.positions(), &[[0.0, 0.0, 0.3]]);
        assert_eq!(aperture_extent(&a), (0.0, 0.0));
        assert!(linear_aperture(0, 1e-3, 0.0).is_err());
        assert!(linear_aperture(4, 0.0, 0.0).is_err());
    }

    #[test]
    fn planar_small_grid() {
        let d = 2e-3;
        let a = planar_aperture(2, 2, d, d, 0.1).unwrap();
        let h = d / 2.0;
        assert_eq!(
            a.positions(),
            &[[-h, -h, 0.1], [h, -h, 0.1], [-h, h, 0.1], [h, h, 0.1]]
        );
        let lin = linear_aperture(5, d, 0.1).unwrap();
        let deg = planar_aperture(1, 5, d, d, 0.1).unwrap();
        assert_eq!(lin.positions(), deg.positions());
        assert!(planar_aperture(0, 2, d, d, 0.0).is_err());
        assert!(planar_aperture(2, 2, d, 0.0, 0.0).is_err());
    }

    #[test]
    fn planar_256_extent() {
        let a = planar_aperture(256, 256, DY_435, DY_435, 0.0).unwrap();
        let (dx, dy) = aperture_extent(&a);
        assert!((dx * 1e3 - 43.94).abs() < 5e-3);
        assert!((dy * 1e3 - 43.94).abs() < 5e-3);
    }

    #[test]
    fn circular_quadrants() {
        let a = circular_aperture(4, 1.0).unwrap();
        let p = a.positions();
        assert!((p[0][1] - 1.0).abs() < 1e-15 && p[0][2].abs() < 1e-15);
        assert!(p[1][1].abs() < 1e-15 && (p[1][2] - 1.0).abs() < 1e-15);
        assert!((p[2][1] + 1.0).abs() < 1e-15);
        assert!((p[3][2] + 1.0).abs() < 1e-15);
        assert!(circular_aperture(4, 0.0).is_err());
        match circular_aperture(1024, 0.2).unwrap().meta().unwrap() {
            m @ UniformMeta::Circular { .. } => {
                assert!((m.dtheta().unwrap() - 2.0 * PI / 1024.0).abs() < 1e-18)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn cylindrical_counts_and_radius() {
        let a = cylindrical_aperture(1024, 128, DY_435, 0.25).unwrap();
        assert_eq!(a.len(), 131072);
        for p in a.positions() {
            assert!(((p[0] * p[0] + p[2] * p[2]).sqrt() - 0.25).abs() < 1e-9);
        }
        let one = cylindrical_aperture(1, 4, 1e-3, 0.25).unwrap();
        for (p, y) in one.positions().iter().zip(centered(4, 1e-3)) {
            assert_eq!(*p, [0.25, y, 0.0]);
        }
    }

    #[test]
    fn irregular_rules() {
        let pts = vec![[0.0, 1.0, 2.0], [3.0, 4.0, 5.0], [-1.0, 0.5, 0.25]];
        let a = irregular_aperture(pts.clone()).unwrap();
        assert_eq!(a.positions(), &pts[..]);
        assert!(a.meta().is_none());
        assert!(a.warnings().is_empty());
        let d = irregular_aperture(vec![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(d.warnings().len(), 1);
        assert!(irregular_aperture(vec![]).is_err());
        assert!(irregular_aperture(vec![[f64::NAN, 0.0, 0.0]]).is_err());
    }

    #[test]
    fn meta_roundtrip_is_bit_identical() {
        for a in [
            linear_aperture(17, 3e-4, 0.05).unwrap(),
            planar_aperture(7, 9, 2e-4, 3e-4, -0.1).unwrap(),
            circular_aperture(33, 0.1).unwrap(),
            cylindrical_aperture(12, 5, 4e-4, 0.2).unwrap(),
        ] {
            let meta = *a.meta().unwrap();
            let b = meta.build().unwrap();
            assert_eq!(a, b);
            let enc = meta.to_array();
            assert_eq!(UniformMeta::from_array(a.kind(), &enc).unwrap().build().unwrap(), a);
        }
    }

    #[test]
    fn spacing_warning() {
        let lambda = C / 435e9;
        assert!(linear_aperture(8, lambda / 4.0, 0.0).unwrap().spacing_warnings(lambda).is_empty());
        assert_eq!(linear_aperture(8, lambda / 2.0, 0.0).unwrap().spacing_warnings(lambda).len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rectilinear_centered(nx in 1usize..40, ny in 1usize..40, dx in 1e-5f64..1e-2, dy in 1e-5f64..1e-2) {
                let a = planar_aperture(nx, ny, dx, dy, 0.0).unwrap();
                prop_assert_eq!(a.len(), nx * ny);
                let (ex, ey) = aperture_extent(&a);
                let n = a.len() as f64;
                let mx: f64 = a.positions().iter().map(|p| p[0]).sum::<f64>() / n;
                let my: f64 = a.positions().iter().map(|p| p[1]).sum::<f64>() / n;
                prop_assert!(mx.abs() <= 1e-12 * ex.max(dx));
                prop_assert!(my.abs() <= 1e-12 * ey.max(dy));
            }

            #[test]
            fn polar_radius(nt in 1usize..300, r0 in 1e-3f64..10.0) {
                for p in circular_aperture(nt, r0).unwrap().positions() {
                    prop_assert!(((p[1] * p[1] + p[2] * p[2]).sqrt() - r0).abs() < 1e-9);
                }
            }
        }
    }
}
