//! Seeded LR/HR training-pair generation.
//!
//! Sample `i` uses seed `base_seed + i` for everything random about it, so
//! the output does not depend on worker count or scheduling. Train samples
//! take indices `0..n_train`, test samples follow.
//!
//! Layout under the output directory:
//!
//! ```text
//! dataset.json
//! train/shard_0000/sample_000000.sarb
//! ...
//! test/shard_0000/sample_020000.sarb
//! ```

use std::path::{Path, PathBuf};

use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aperture::Aperture;
use crate::config::{canonical_hash, from_json, ApertureConfig, MeshConfig};
use crate::engine::hash_words;
use crate::error::{Error, Result};
use crate::forward::{add_noise, simulate_echo};
use crate::recon::{reconstruct, Algorithm, RmaOptions};
use crate::sarb::{to_bytes, ArrayData, NamedArray};
use crate::scene::{random_scene, rasterize_ground_truth, Bounds, GridSpec, LibraryMesh, RasterMode, StlUnits};
use crate::waveform::{FrequencyAxis, Waveform};

pub const SCHEMA: u32 = 1;

fn default_sigma() -> f64 {
    1.0
}

fn default_shard() -> usize {
    1000
}

fn default_mesh_probability() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HrMode {
    /// Rasterized ground truth.
    #[default]
    Label,
    /// Reconstruction from the HR system.
    Simulate,
}

/// Random scene distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDistribution {
    /// Inclusive range of point-scatterer counts.
    pub n_points: [usize; 2],
    pub bounds: Bounds,
    /// Mesh library; `pose.scale` is honored, the rest of the pose is randomized.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meshes: Vec<MeshConfig>,
    /// Chance that a sample contains one library mesh.
    #[serde(default = "default_mesh_probability")]
    pub mesh_probability: f64,
}

/// Overrides for the HR system; absent fields reuse the LR values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrSystem {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveform: Option<Waveform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture: Option<ApertureConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub base_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub scene: SceneDistribution,
    pub waveform: Waveform,
    pub aperture: ApertureConfig,
    #[serde(default)]
    pub hr: HrSystem,
    #[serde(default)]
    pub hr_mode: HrMode,
    /// Shared by LR images and HR labels.
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<Algorithm>,
    #[serde(default)]
    pub rma: RmaOptions,
    /// Gaussian label blur (voxels).
    #[serde(default = "default_sigma")]
    pub sigma_vox: f64,
    /// LR echo SNR (dB); noiseless when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_shard")]
    pub shard_size: usize,
}

impl DatasetSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DatasetSpec = from_json(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.waveform.validate()?;
        self.grid.validate().map_err(|e| Error::invalid("grid", e.to_string()))?;
        let [lo, hi] = self.scene.n_points;
        if lo > hi {
            return Err(Error::invalid("scene.n_points", "range is reversed"));
        }
        let p = self.scene.mesh_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("scene.mesh_probability", "must lie in [0, 1]"));
        }
        let always_mesh = !self.scene.meshes.is_empty() && p == 1.0;
        if lo == 0 && !always_mesh {
            return Err(Error::invalid("scene.n_points", "minimum 0 could yield an empty scene"));
        }
        if self.shard_size == 0 {
            return Err(Error::invalid("shard_size", "must be at least 1"));
        }
        if let Some(w) = &self.hr.waveform {
            w.validate()?;
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_test
    }

    pub fn hash(&self) -> Result<[u8; 32]> {
        canonical_hash(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedSample {
    pub index: usize,
    pub split: Split,
    pub seed: u64,
    /// Relative to the output directory.
    pub path: String,
}

/// Assigns every sample its split, seed and sharded path.
pub fn plan(spec: &DatasetSpec) -> Vec<PlannedSample> {
    (0..spec.total())
        .map(|index| {
            let (split, local) = if index < spec.n_train {
                (Split::Train, index)
            } else {
                (Split::Test, index - spec.n_train)
            };
            let dir = match split {
                Split::Train => "train",
                Split::Test => "test",
            };
            PlannedSample {
                index,
                split,
                seed: spec.base_seed.wrapping_add(index as u64),
                path: format!("{dir}/shard_{:04}/sample_{index:06}.sarb", local / spec.shard_size),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub split: Split,
    pub seed: u64,
    pub path: String,
    /// SHA-256 of the sample file.
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedSample {
    pub index: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub counts: Counts,
    pub base_seed: u64,
    pub spec_hash: String,
    pub samples: Vec<SampleRecord>,
    pub failed: Vec<FailedSample>,
}

/// Immutable per-run state shared by all workers.
pub struct Generator {
    spec: DatasetSpec,
    hash: [u8; 32],
    lr_aperture: Aperture,
    lr_freq: FrequencyAxis,
    hr_aperture: Aperture,
    hr_freq: FrequencyAxis,
    library: Vec<LibraryMesh>,
}

impl Generator {
    /// Loads meshes (relative paths resolve against `base`) and builds both systems.
    pub fn new(spec: &DatasetSpec, base: &Path, units: Option<StlUnits>) -> Result<Self> {
        spec.validate()?;
        let lr_freq = spec.waveform.frequency_axis()?;
        let lr_aperture = spec.aperture.build(spec.waveform.lambda_c()?)?;
        let hr_wave = spec.hr.waveform.as_ref().unwrap_or(&spec.waveform);
        let hr_freq = hr_wave.frequency_axis()?;
        let hr_aperture = spec
            .hr
            .aperture
            .as_ref()
            .unwrap_or(&spec.aperture)
            .build(hr_wave.lambda_c()?)?;
        let library = spec
            .scene
            .meshes
            .iter()
            .map(|m| {
                let base_mesh = m.load(base, units)?;
                Ok(LibraryMesh {
                    mesh: base_mesh.transformed(m.pose.scale, [0.0; 3]),
                    spacing: m.spacing,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Generator {
            hash: spec.hash()?,
            spec: spec.clone(),
            lr_aperture,
            lr_freq,
            hr_aperture,
            hr_freq,
            library,
        })
    }

    fn algo(&self, ap: &ApertureConfig) -> Algorithm {
        self.spec.algo.unwrap_or_else(|| ap.default_algorithm())
    }

    /// Arrays of sample `index`: `lr_image`, `hr_label`, `scene` (`[N, 5]`
    /// rows of x, y, z, re, im) and `config_hash`.
    pub fn sample(&self, index: usize) -> Result<Vec<NamedArray>> {
        let spec = &self.spec;
        let seed = spec.base_seed.wrapping_add(index as u64);
        // separate stream so the scene generator keeps its own sequence
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let [lo, hi] = spec.scene.n_points;
        let n = rng.random_range(lo..=hi);
        let use_mesh = !self.library.is_empty() && rng.random_bool(spec.scene.mesh_probability);
        let n = if n == 0 && !use_mesh { 1 } else { n };
        let scene = random_scene(seed, n, &spec.scene.bounds, use_mesh.then_some(&self.library[..]))?;

        let mut echo = simulate_echo(&self.lr_aperture, &scene, &self.lr_freq, None)?;
        if let Some(snr) = spec.snr_db {
            echo = add_noise(&echo, snr, seed)?;
        }
        let lr = reconstruct(self.algo(&spec.aperture), &echo, &spec.grid, &spec.rma)?.image;
        let hr = match spec.hr_mode {
            HrMode::Label => rasterize_ground_truth(&scene, &spec.grid, spec.sigma_vox, RasterMode::Lenient)?.0,
            HrMode::Simulate => {
                let echo = simulate_echo(&self.hr_aperture, &scene, &self.hr_freq, None)?;
                let ap = spec.hr.aperture.as_ref().unwrap_or(&spec.aperture);
                reconstruct(self.algo(ap), &echo, &spec.grid, &spec.rma)?.image
            }
        };
        let table: Vec<f64> = scene.to_table().into_iter().flatten().collect();
        Ok(vec![
            NamedArray::new("lr_image", ArrayData::C128(lr.into_voxels())),
            NamedArray::new("hr_label", ArrayData::C128(hr.into_voxels())),
            NamedArray::new(
                "scene",
                ArrayData::F64(ArrayD::from_shape_vec(IxDyn(&[scene.len(), 5]), table).expect("n x 5")),
            ),
            NamedArray::new("config_hash", ArrayData::I64(hash_words(&self.hash))),
        ])
    }
}

#[derive(Clone, Default)]
pub struct GenerateOptions<'a> {
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
    /// Base for relative mesh paths.
    pub base_dir: PathBuf,
    pub stl_units: Option<StlUnits>,
    /// Called with the number of finished samples.
    pub progress: Option<&'a (dyn Fn(usize) + Sync)>,
}

fn write_sample(gen: &Generator, out_dir: &Path, p: &PlannedSample) -> Result<String> {
    let bytes = to_bytes(&gen.sample(p.index)?)?;
    let path = out_dir.join(&p.path);
    let dir = path.parent().expect("sample path has a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = path.with_extension("sarb.tmp");
    std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Generates every sample and writes `dataset.json`. Samples that fail are
/// listed under `failed`; the call itself errors only on setup or manifest
/// failures.
pub fn generate_dataset(spec: &DatasetSpec, out_dir: &Path, opts: &GenerateOptions) -> Result<Manifest> {
    let gen = Generator::new(spec, &opts.base_dir, opts.stl_units)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let planned = plan(spec);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<String>> = pool.install(|| {
        planned
            .par_iter()
            .map(|p| {
                let r = write_sample(&gen, out_dir, p);
                let d = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if let Some(cb) = opts.progress {
                    cb(d);
                }
                r
            })
            .collect()
    });

    let mut samples = Vec::with_capacity(planned.len());
    let mut failed = Vec::new();
    for (p, r) in planned.into_iter().zip(results) {
        match r {
            Ok(sha256) => samples.push(SampleRecord {
                index: p.index,
                split: p.split,
                seed: p.seed,
                path: p.path,
                sha256,
            }),
            Err(e) => failed.push(FailedSample {
                index: p.index,
                error: e.to_string(),
            }),
        }
    }
    let manifest = Manifest {
        schema: SCHEMA,
        counts: Counts {
            train: spec.n_train,
            test: spec.n_test,
        },
        base_seed: spec.base_seed,
        spec_hash: hex::encode(gen.hash),
        samples,
        failed,
    };
    let path = out_dir.join("dataset.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
