//! JSON pipeline configuration shared by the CLI, the job service and the
//! dataset generator.
//!
//! ```json
//! {
//!   "waveform": {"type": "fmcw", "f0": 430e9, ...},
//!   "aperture": {"kind": "planar", "nx": 64, "ny": 64, "z0": 0.0},
//!   "scene": {"points": [{"xyz": [0, 0, 0.1]}]},
//!   "grid": {"axes": [{"min": -0.01, "max": 0.01, "count": 41}, ...]},
//!   "algo": "rma-planar"
//! }
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aperture::{
    aperture_extent, circular_aperture, cylindrical_aperture, irregular_aperture, linear_aperture,
    planar_aperture, Aperture, ApertureKind, Point3, UniformMeta,
};
use crate::analysis::{cylindrical_resolution, planar_resolution};
use crate::error::{require_positive, Error, Result};
use crate::recon::{Algorithm, RmaOptions};
use crate::scene::{
    import_stl, knife_mesh, mesh_to_scatterers, point_scene, random_scene, text_scene, AxisSpec, Bounds,
    GridSpec, Scatterer, Scene, StlUnits, TriangleMesh,
};
use crate::waveform::{FrequencyAxis, Waveform};
use crate::C;

/// Parses JSON, reporting failures with the dotted path of the offending field.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        let mut field = if path == "." { String::new() } else { path };
        // serde reports a missing field at its parent
        if let Some(name) = msg
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            field = if field.is_empty() { name.to_string() } else { format!("{field}.{name}") };
        }
        if field.is_empty() {
            field.push('$');
        }
        Error::Invalid { field, msg }
    })
}

fn default_true_re() -> f64 {
    1.0
}

/// Aperture block, tagged by `kind`. Omitted spacings default to `λc/4`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ApertureConfig {
    Linear {
        ny: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dy: Option<f64>,
        z0: f64,
    },
    Planar {
        nx: usize,
        ny: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dx: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dy: Option<f64>,
        z0: f64,
    },
    Circular {
        ntheta: usize,
        r0: f64,
    },
    Cylindrical {
        ntheta: usize,
        ny: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dy: Option<f64>,
        r0: f64,
    },
    Irregular {
        positions: Vec<Point3>,
    },
}

impl ApertureConfig {
    pub fn kind(&self) -> ApertureKind {
        match self {
            ApertureConfig::Linear { .. } => ApertureKind::Linear,
            ApertureConfig::Planar { .. } => ApertureKind::Planar,
            ApertureConfig::Circular { .. } => ApertureKind::Circular,
            ApertureConfig::Cylindrical { .. } => ApertureKind::Cylindrical,
            ApertureConfig::Irregular { .. } => ApertureKind::Irregular,
        }
    }

    pub fn build(&self, lambda_c: f64) -> Result<Aperture> {
        let quarter = lambda_c / 4.0;
        match *self {
            ApertureConfig::Linear { ny, dy, z0 } => linear_aperture(ny, dy.unwrap_or(quarter), z0),
            ApertureConfig::Planar { nx, ny, dx, dy, z0 } => {
                planar_aperture(nx, ny, dx.unwrap_or(quarter), dy.unwrap_or(quarter), z0)
            }
            ApertureConfig::Circular { ntheta, r0 } => circular_aperture(ntheta, r0),
            ApertureConfig::Cylindrical { ntheta, ny, dy, r0 } => {
                cylindrical_aperture(ntheta, ny, dy.unwrap_or(quarter), r0)
            }
            ApertureConfig::Irregular { ref positions } => irregular_aperture(positions.clone()),
        }
    }

    /// Reconstructor used when the config names none.
    pub fn default_algorithm(&self) -> Algorithm {
        match self.kind() {
            ApertureKind::Linear => Algorithm::RmaLinear,
            ApertureKind::Planar => Algorithm::RmaPlanar,
            ApertureKind::Circular => Algorithm::RmaCircular,
            ApertureKind::Cylindrical => Algorithm::RmaCylindrical,
            ApertureKind::Irregular => Algorithm::Bpa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointConfig {
    pub xyz: [f64; 3],
    #[serde(default = "default_true_re")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinMesh {
    Knife,
}

/// Rigid placement applied as `p ↦ R·(scale·p) + translation`, where `R`
/// rotates about x, then y, then z (fixed axes).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Pose {
    pub rotation_deg: [f64; 3],
    pub translation: [f64; 3],
    pub scale: f64,
}

impl Default for Pose {
    fn default() -> Self {
        Pose {
            rotation_deg: [0.0; 3],
            translation: [0.0; 3],
            scale: 1.0,
        }
    }
}

impl Pose {
    fn matrix(&self) -> [[f64; 3]; 3] {
        let [a, b, c] = self.rotation_deg.map(f64::to_radians);
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        // Rz · Ry · Rx
        [
            [cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa],
            [sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa],
            [-sb, cb * sa, cb * ca],
        ]
    }

    pub fn apply(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        require_positive("pose.scale", self.scale)?;
        let r = self.matrix();
        let verts = mesh
            .vertices()
            .iter()
            .map(|v| {
                let s = v.map(|c| c * self.scale);
                [0, 1, 2].map(|i| r[i][0] * s[0] + r[i][1] * s[1] + r[i][2] * s[2] + self.translation[i])
            })
            .collect();
        TriangleMesh::new(verts, mesh.triangles().to_vec())
    }
}

/// A mesh from an STL file (`path`) or a built-in solid, sampled at `spacing`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinMesh>,
    /// Overall length of a built-in solid (m).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    pub spacing: f64,
    #[serde(default)]
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<StlUnits>,
    #[serde(default = "default_true_re")]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    /// Seed of the surface sampler.
    #[serde(default)]
    pub seed: u64,
}

impl MeshConfig {
    /// Loads the untransformed mesh; relative paths resolve against `base`.
    /// `units` overrides the per-mesh STL units.
    pub fn load(&self, base: &Path, units: Option<StlUnits>) -> Result<TriangleMesh> {
        match (&self.path, self.builtin) {
            (Some(p), None) => {
                let full = if p.is_absolute() { p.clone() } else { base.join(p) };
                let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
                import_stl(&bytes, units.or(self.units).unwrap_or_default())
            }
            (None, Some(BuiltinMesh::Knife)) => {
                let size = self.size.unwrap_or(0.05);
                require_positive("size", size)?;
                Ok(knife_mesh(size))
            }
            _ => Err(Error::invalid("meshes", "give exactly one of `path` or `builtin`")),
        }
    }

    pub fn to_scene(&self, base: &Path, units: Option<StlUnits>) -> Result<Scene> {
        let mesh = self.pose.apply(&self.load(base, units)?)?;
        mesh_to_scatterers(&mesh, self.spacing, Complex64::new(self.re, self.im), self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomConfig {
    pub seed: u64,
    pub n_points: usize,
    pub bounds: Bounds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextConfig {
    pub text: String,
    /// Glyph cell pitch (m).
    pub pitch: f64,
    /// Text center `(y, z)` (m).
    pub center: [f64; 2],
}

/// Scene block. All listed parts are merged into one scene.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meshes: Vec<MeshConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<TextConfig>,
}

impl SceneConfig {
    pub fn build(&self, base: &Path, units: Option<StlUnits>) -> Result<Scene> {
        let mut parts: Vec<Scene> = Vec::new();
        if !self.points.is_empty() {
            parts.push(point_scene(
                self.points
                    .iter()
                    .map(|p| Scatterer::new(p.xyz, Complex64::new(p.re, p.im)))
                    .collect(),
            )?);
        }
        for (i, m) in self.meshes.iter().enumerate() {
            parts.push(m.to_scene(base, units).map_err(|e| prefix_field(e, &format!("scene.meshes[{i}]")))?);
        }
        if let Some(r) = &self.random {
            parts.push(random_scene(r.seed, r.n_points, &r.bounds, None)?);
        }
        if let Some(t) = &self.text {
            parts.push(text_scene(&t.text, t.pitch, t.center)?);
        }
        let mut it = parts.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::invalid("scene", "scene has no points, meshes, random or text part"))?;
        Ok(it.fold(first, |acc, s| acc.union(&s)))
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Invalid { field, msg } => Error::Invalid {
            field: format!("{prefix}.{field}"),
            msg,
        },
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Everything needed to simulate and reconstruct one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub waveform: Waveform,
    pub aperture: ApertureConfig,
    pub scene: SceneConfig,
    /// Defaults to half the predicted resolution around the scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algorithm>,
    #[serde(default)]
    pub rma: RmaOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    /// CSV antenna pattern (`theta_rad,phi_rad,gain_db`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_pattern: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = from_json(text)?;
        cfg.waveform.validate().map_err(|e| prefix_field(e, "waveform"))?;
        if let Some(g) = &cfg.grid {
            g.validate().map_err(|e| prefix_field(e, "grid"))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algo.unwrap_or_else(|| self.aperture.default_algorithm())
    }

    pub fn frequency_axis(&self) -> Result<FrequencyAxis> {
        self.waveform.frequency_axis().map_err(|e| prefix_field(e, "waveform"))
    }

    pub fn build_aperture(&self) -> Result<Aperture> {
        self.aperture
            .build(self.waveform.lambda_c()?)
            .map_err(|e| prefix_field(e, "aperture"))
    }
}

/// SHA-256 of the compact JSON serialization.
pub fn canonical_hash<T: Serialize>(value: &T) -> Result<[u8; 32]> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).into())
}

/// Most samples per axis of a default grid.
pub const DEFAULT_GRID_MAX: usize = 256;

/// Predicted resolution per image axis, in grid axis order.
pub fn predicted_axis_resolution(aperture: &Aperture, freq: &FrequencyAxis, center: [f64; 3]) -> Result<Vec<f64>> {
    let lambda_c = C / freq.center();
    let b = freq.bandwidth();
    let dr = C / (2.0 * b);
    let (dx_ext, dy_ext) = aperture_extent(aperture);
    let res = match aperture.meta() {
        Some(UniformMeta::Linear { z0, .. }) => {
            let zref = (center[2] - z0).abs().max(dr);
            let r = planar_resolution(lambda_c, zref, 0.0, dy_ext, b)?;
            vec![r.dy.unwrap_or(dr), dr]
        }
        Some(UniformMeta::Planar { z0, .. }) => {
            let zref = (center[2] - z0).abs().max(dr);
            let r = planar_resolution(lambda_c, zref, dx_ext, dy_ext, b)?;
            vec![r.dx.unwrap_or(dr), r.dy.unwrap_or(dr), dr]
        }
        Some(UniformMeta::Circular { r0, .. }) => {
            let k = freq.wavenumbers();
            let r = cylindrical_resolution(lambda_c, *r0, 0.0, k[0], k[k.len() - 1])?;
            let rho = r.drho.expect("polar resolution");
            vec![rho, rho]
        }
        Some(UniformMeta::Cylindrical { r0, .. }) => {
            let k = freq.wavenumbers();
            let r = cylindrical_resolution(lambda_c, *r0, dy_ext, k[0], k[k.len() - 1])?;
            let rho = r.drho.expect("polar resolution");
            vec![rho, r.dy.unwrap_or(dr), rho]
        }
        None => vec![dr; 3],
    };
    Ok(res)
}

/// Grid covering `bounds` plus two resolution cells on every side, sampled
/// at half the predicted resolution (coarser if an axis would exceed
/// [`DEFAULT_GRID_MAX`] samples).
pub fn default_grid(aperture: &Aperture, freq: &FrequencyAxis, bounds: &Bounds) -> Result<GridSpec> {
    let center = bounds.center();
    let res = predicted_axis_resolution(aperture, freq, center)?;
    let phys: &[usize] = if res.len() == 2 { &[1, 2] } else { &[0, 1, 2] };
    let axes = phys
        .iter()
        .zip(&res)
        .map(|(&p, &r)| {
            let lo = bounds.min[p] - 2.0 * r;
            let hi = bounds.max[p] + 2.0 * r;
            let mut step = r / 2.0;
            let mut count = ((hi - lo) / step).ceil() as usize + 1;
            if count > DEFAULT_GRID_MAX {
                count = DEFAULT_GRID_MAX;
                step = (hi - lo) / (count - 1) as f64;
            }
            AxisSpec::centered(0.5 * (lo + hi), step, count.max(3))
        })
        .collect();
    GridSpec::new(axes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "waveform": {"type": "pmcw", "fc": 435e9, "b": 10e9, "td": 1e-6, "ncode": 64, "nf": 16},
        "aperture": {"kind": "linear", "ny": 32, "z0": 0.0},
        "scene": {"points": [{"xyz": [0.0, 0.0, 0.1]}]}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = PipelineConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm(), Algorithm::RmaLinear);
        let ap = cfg.build_aperture().unwrap();
        let lc = cfg.waveform.lambda_c().unwrap();
        let p = ap.positions();
        assert!(((p[1][1] - p[0][1]) - lc / 4.0).abs() < 1e-15);
        let scene = cfg.scene.build(Path::new("."), None).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene.scatterers()[0].reflectivity, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn missing_block_names_field() {
        let text = r#"{"waveform": {"type": "pmcw", "fc": 435e9, "b": 10e9, "td": 1e-6, "ncode": 64}, "scene": {}}"#;
        match PipelineConfig::from_json(text) {
            Err(Error::Invalid { field, .. }) => assert_eq!(field, "aperture"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_error_carries_path() {
        let text = MINIMAL.replace(r#""ny": 32"#, r#""ny": -3"#);
        match PipelineConfig::from_json(&text) {
            Err(Error::Invalid { field, .. }) => assert!(field.starts_with("aperture"), "{field}"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace(r#""xyz""#, r#""xyz_typo""#);
        match PipelineConfig::from_json(&text) {
            Err(Error::Invalid { field, .. }) => assert!(field.starts_with("scene.points[0]"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_top_level_field_rejected() {
        let text = MINIMAL.replacen('{', r#"{"bogus": 1,"#, 1);
        assert!(PipelineConfig::from_json(&text).is_err());
    }

    #[test]
    fn pose_rotates_about_fixed_axes() {
        let m = TriangleMesh::new(vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let pose = Pose {
            rotation_deg: [0.0, 0.0, 90.0],
            translation: [0.0, 0.0, 1.0],
            scale: 2.0,
        };
        let out = pose.apply(&m).unwrap();
        let v = out.vertices();
        let close = |a: [f64; 3], b: [f64; 3]| (0..3).all(|i| (a[i] - b[i]).abs() < 1e-12);
        assert!(close(v[0], [0.0, 2.0, 1.0]));
        assert!(close(v[1], [-2.0, 0.0, 1.0]));
        assert!(close(v[2], [0.0, 0.0, 3.0]));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PipelineConfig::from_json(MINIMAL).unwrap();
        let b = PipelineConfig::from_json(MINIMAL).unwrap();
        assert_eq!(canonical_hash(&a).unwrap(), canonical_hash(&b).unwrap());
        let c = PipelineConfig::from_json(&MINIMAL.replace("32", "33")).unwrap();
        assert_ne!(canonical_hash(&a).unwrap(), canonical_hash(&c).unwrap());
    }

    #[test]
    fn default_grid_uses_half_resolution() {
        let cfg = PipelineConfig::from_json(MINIMAL).unwrap();
        let ap = cfg.build_aperture().unwrap();
        let freq = cfg.frequency_axis().unwrap();
        let scene = cfg.scene.build(Path::new("."), None).unwrap();
        let g = default_grid(&ap, &freq, scene.bounds()).unwrap();
        assert_eq!(g.dims(), 2);
        let dz = C / (2.0 * freq.bandwidth());
        assert!((g.axes[1].step() - dz / 2.0).abs() < 1e-12);
        assert!((g.axes[1].center() - 0.1).abs() < 1e-9);
    }
}
