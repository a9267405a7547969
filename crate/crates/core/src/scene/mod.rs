//! Target scenes: point scatterers, text glyphs and sampled triangle meshes,
//! plus ground-truth label rasterization.

mod font;
mod grid;
mod mesh;
mod raster;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use font::text_scene;
pub use grid::{AxisSpec, GridSpec};
pub use mesh::{import_stl, knife_mesh, mesh_to_scatterers, StlUnits, TriangleMesh};
pub use raster::{rasterize_ground_truth, splat, RasterMode, RasterStats};

/// Padding applied to degenerate bounds axes (m).
pub const BOUNDS_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: [f64; 3],
    pub reflectivity: Complex64,
}

impl Scatterer {
    pub fn new(position: [f64; 3], reflectivity: Complex64) -> Self {
        Scatterer { position, reflectivity }
    }

    pub fn unit(position: [f64; 3]) -> Self {
        Scatterer::new(position, Complex64::new(1.0, 0.0))
    }
}

/// Axis-aligned box (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Bounds {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(min[i].is_finite() && max[i].is_finite()) || max[i] < min[i] {
                return Err(Error::invalid("bounds", format!("axis {i}: need finite max >= min")));
            }
        }
        Ok(Bounds { min, max })
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn size(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.max[i] - self.min[i])
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    fn tight(points: impl Iterator<Item = [f64; 3]>) -> Option<Self> {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        let mut any = false;
        for p in points {
            any = true;
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        any.then_some(Bounds { min, max })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    scatterers: Vec<Scatterer>,
    bounds: Bounds,
}

/// Scene with tight bounds; zero-width axes are padded by [`BOUNDS_EPS`].
pub fn point_scene(scatterers: Vec<Scatterer>) -> Result<Scene> {
    if scatterers.is_empty() {
        return Err(Error::invalid("scatterers", "scene needs at least one scatterer"));
    }
    for (i, s) in scatterers.iter().enumerate() {
        if s.position.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("scatterers[{i}].position"), "non-finite coordinate"));
        }
        if !(s.reflectivity.re.is_finite() && s.reflectivity.im.is_finite()) {
            return Err(Error::invalid(format!("scatterers[{i}].reflectivity"), "non-finite value"));
        }
    }
    let mut bounds = Bounds::tight(scatterers.iter().map(|s| s.position)).expect("nonempty");
    for i in 0..3 {
        if bounds.max[i] == bounds.min[i] {
            bounds.min[i] -= BOUNDS_EPS;
            bounds.max[i] += BOUNDS_EPS;
        }
    }
    Ok(Scene { scatterers, bounds })
}

impl Scene {
    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// Union of two scenes.
    pub fn union(&self, other: &Scene) -> Scene {
        let mut all = self.scatterers.clone();
        all.extend_from_slice(&other.scatterers);
        point_scene(all).expect("union of valid scenes")
    }

    /// Every reflectivity multiplied by `alpha`.
    pub fn scaled(&self, alpha: Complex64) -> Scene {
        Scene {
            scatterers: self
                .scatterers
                .iter()
                .map(|s| Scatterer::new(s.position, s.reflectivity * alpha))
                .collect(),
            bounds: self.bounds,
        }
    }

    /// Row-per-scatterer table `[x, y, z, re, im]`.
    pub fn to_table(&self) -> Vec<[f64; 5]> {
        self.scatterers
            .iter()
            .map(|s| {
                let p = s.position;
                [p[0], p[1], p[2], s.reflectivity.re, s.reflectivity.im]
            })
            .collect()
    }

    pub fn from_table(rows: &[[f64; 5]]) -> Result<Scene> {
        point_scene(
            rows.iter()
                .map(|r| Scatterer::new([r[0], r[1], r[2]], Complex64::new(r[3], r[4])))
                .collect(),
        )
    }
}

/// A mesh available to [`random_scene`], sampled at `spacing`.
#[derive(Clone, Debug)]
pub struct LibraryMesh {
    pub mesh: TriangleMesh,
    pub spacing: f64,
}

fn random_reflectivity(rng: &mut ChaCha8Rng) -> Complex64 {
    let mag = rng.random_range(0.5..=1.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    Complex64::from_polar(mag, phase)
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // uniform unit quaternion (Shoemake)
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn rotate(r: &[[f64; 3]; 3], p: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2])
}

/// Seeded random scene: `n_points` scatterers uniform in `bounds`, plus one
/// library mesh (chosen uniformly) under a random rigid pose when a library
/// is given. Reflectivity magnitudes are uniform on `[0.5, 1]`, phases on
/// `[0, 2π)`; a placed mesh shares one random reflectivity.
pub fn random_scene(
    seed: u64,
    n_points: usize,
    bounds: &Bounds,
    mesh_library: Option<&[LibraryMesh]>,
) -> Result<Scene> {
    let library = mesh_library.filter(|l| !l.is_empty());
    if n_points == 0 && library.is_none() {
        return Err(Error::invalid("n_points", "scene would be empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scatterers = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let p = [0, 1, 2].map(|i| {
            if bounds.max[i] > bounds.min[i] {
                rng.random_range(bounds.min[i]..=bounds.max[i])
            } else {
                bounds.min[i]
            }
        });
        scatterers.push(Scatterer::new(p, random_reflectivity(&mut rng)));
    }
    if let Some(lib) = library {
        let entry = &lib[rng.random_range(0..lib.len())];
        let refl = random_reflectivity(&mut rng);
        let rot = random_rotation(&mut rng);
        let sample_seed: u64 = rng.random();
        let local = mesh_to_scatterers(&entry.mesh, entry.spacing, refl, sample_seed)?;
        let pts: Vec<[f64; 3]> = local.scatterers().iter().map(|s| rotate(&rot, s.position)).collect();
        let bb = Bounds::tight(pts.iter().copied()).expect("mesh scene nonempty");
        let mut shift = [0.0; 3];
        for i in 0..3 {
            let lo = bounds.min[i] - bb.min[i];
            let hi = bounds.max[i] - bb.max[i];
            if hi < lo {
                return Err(Error::Geometry(format!(
                    "mesh extent {:.4} m exceeds scene bounds on axis {i}",
                    bb.max[i] - bb.min[i]
                )));
            }
            shift[i] = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        }
        scatterers.extend(pts.into_iter().map(|p| {
            // clamp guards the last-ulp overshoot of the translation
            let q = [0, 1, 2].map(|i| (p[i] + shift[i]).clamp(bounds.min[i], bounds.max[i]));
            Scatterer::new(q, refl)
        }));
    }
    point_scene(scatterers)
}
