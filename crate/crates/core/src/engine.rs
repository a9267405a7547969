//! End-to-end runs shared by the command line and the job service.
//!
//! Echo containers hold `echo` (c128 `[N_el, N_f]`), `freq` (Hz),
//! `positions` (`[N_el, 3]`), `aperture_kind` (i64 `[1]`) and
//! `aperture_meta` (f64 `[7]`). Image containers hold `image`, `grid`
//! (`[dims, 3]` rows of min, max, count) and, when requested, every k-space
//! stage as `<stage>` with its axes as `<stage>.<axis>`.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use sha2::{Digest, Sha256};

use crate::analysis::{cylindrical_resolution, planar_resolution, psf_widths, ReportConfig, ResolutionReport, Resolutions};
use crate::aperture::{aperture_extent, irregular_aperture, Aperture, ApertureKind, UniformMeta};
use crate::config::{default_grid, PipelineConfig};
use crate::error::{Error, Result};
use crate::forward::{add_noise, simulate_echo_with, EchoData, GainPattern, SimulateOptions};
use crate::recon::{reconstruct, Algorithm, ImageVolume, Provenance, Reconstruction, RmaOptions};
use crate::sarb::{ArrayData, NamedArray};
use crate::scene::{AxisSpec, GridSpec, Scene, StlUnits};
use crate::waveform::FrequencyAxis;
use crate::C;

/// Where relative paths in a config resolve, and global input overrides.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub base_dir: PathBuf,
    pub stl_units: Option<StlUnits>,
}

impl Context {
    pub fn new(base_dir: impl Into<PathBuf>) -> Self {
        Context {
            base_dir: base_dir.into(),
            stl_units: None,
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// A config with every default filled in and every input loaded.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: PipelineConfig,
    pub freq: FrequencyAxis,
    pub aperture: Aperture,
    pub scene: Scene,
    pub grid: GridSpec,
    pub algo: Algorithm,
    pub gain: Option<GainPattern>,
    /// Content hash of the config and every file it references.
    pub hash: [u8; 32],
}

/// SHA-256 over the compact config JSON followed by the bytes of each
/// referenced file, in order.
pub fn config_hash(cfg: &PipelineConfig, ctx: &Context) -> Result<[u8; 32]> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg)?);
    if let Some(u) = ctx.stl_units {
        h.update(serde_json::to_vec(&u)?);
    }
    let files = cfg
        .scene
        .meshes
        .iter()
        .filter_map(|m| m.path.as_deref())
        .chain(cfg.gain_pattern.as_deref());
    for p in files {
        let full = ctx.resolve(p);
        let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
        h.update(Sha256::digest(&bytes));
    }
    Ok(h.finalize().into())
}

pub fn prepare(cfg: &PipelineConfig, ctx: &Context) -> Result<Prepared> {
    let freq = cfg.frequency_axis()?;
    let aperture = cfg.build_aperture()?;
    let scene = cfg.scene.build(&ctx.base_dir, ctx.stl_units)?;
    let grid = match &cfg.grid {
        Some(g) => g.clone(),
        None => default_grid(&aperture, &freq, scene.bounds())?,
    };
    let gain = match &cfg.gain_pattern {
        Some(p) => Some(GainPattern::from_csv_file(&ctx.resolve(p))?),
        None => None,
    };
    Ok(Prepared {
        hash: config_hash(cfg, ctx)?,
        config: cfg.clone(),
        freq,
        aperture,
        scene,
        grid,
        algo: cfg.algorithm(),
        gain,
    })
}

/// Simulates the echo, adding noise when configured.
pub fn simulate(p: &Prepared, progress: Option<&(dyn Fn(f64) + Sync)>) -> Result<EchoData> {
    let echo = simulate_echo_with(
        &p.aperture,
        &p.scene,
        &p.freq,
        SimulateOptions {
            gain: p.gain.as_ref(),
            progress,
            serial: false,
        },
    )?;
    match p.config.noise {
        Some(n) => add_noise(&echo, n.snr_db, n.seed),
        None => Ok(echo),
    }
}

/// Hash as four little-endian i64 words.
pub fn hash_words(hash: &[u8; 32]) -> ArrayD<i64> {
    let words: Vec<i64> = hash
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&[4]), words).expect("4 words")
}

pub fn echo_arrays(echo: &EchoData) -> Vec<NamedArray> {
    let ap = &echo.aperture;
    let n = ap.len();
    let pos: Vec<f64> = ap.positions().iter().flatten().copied().collect();
    let meta = ap.meta().map(|m| m.to_array()).unwrap_or([f64::NAN; 7]);
    vec![
        NamedArray::new("echo", ArrayData::C128(echo.samples.clone().into_dyn())),
        NamedArray::new("freq", ArrayData::F64(Array1::from(echo.freq.values().to_vec()).into_dyn())),
        NamedArray::new(
            "positions",
            ArrayData::F64(ArrayD::from_shape_vec(IxDyn(&[n, 3]), pos).expect("n x 3")),
        ),
        NamedArray::new(
            "aperture_kind",
            ArrayData::I64(ArrayD::from_elem(IxDyn(&[1]), ap.kind().code())),
        ),
        NamedArray::new("aperture_meta", ArrayData::F64(Array1::from(meta.to_vec()).into_dyn())),
    ]
}

fn find<'a>(arrays: &'a [NamedArray], name: &str) -> Result<&'a ArrayData> {
    arrays
        .iter()
        .find(|a| a.name == name)
        .map(|a| &a.data)
        .ok_or_else(|| Error::Shape(format!("container has no `{name}` array")))
}

fn typed<'a, T>(arrays: &'a [NamedArray], name: &str, get: impl Fn(&'a ArrayData) -> Option<&'a ArrayD<T>>) -> Result<&'a ArrayD<T>> {
    let data = find(arrays, name)?;
    get(data).ok_or_else(|| Error::Shape(format!("`{name}` has dtype {:?}", data.dtype())))
}

/// Rebuilds an echo from its container arrays. Uniform apertures are
/// regenerated from their meta and checked against the stored positions.
pub fn echo_from_arrays(arrays: &[NamedArray]) -> Result<EchoData> {
    let samples = typed(arrays, "echo", ArrayData::as_c128)?;
    let freq = typed(arrays, "freq", ArrayData::as_f64)?;
    let pos = typed(arrays, "positions", ArrayData::as_f64)?;
    let kind = typed(arrays, "aperture_kind", ArrayData::as_i64)?;
    let meta = typed(arrays, "aperture_meta", ArrayData::as_f64)?;
    if pos.ndim() != 2 || pos.shape()[1] != 3 {
        return Err(Error::Shape(format!("positions has shape {:?}, expected [N, 3]", pos.shape())));
    }
    let positions: Vec<[f64; 3]> = pos.outer_iter().map(|r| [r[0], r[1], r[2]]).collect();
    let code = kind.iter().next().copied().ok_or_else(|| Error::Shape("empty aperture_kind".into()))?;
    let kind = ApertureKind::from_code(code).ok_or_else(|| Error::invalid("aperture_kind", format!("unknown code {code}")))?;
    let aperture = if kind == ApertureKind::Irregular {
        irregular_aperture(positions)?
    } else {
        let meta: Vec<f64> = meta.iter().copied().collect();
        let ap = UniformMeta::from_array(kind, &meta)?.build()?;
        let tol = 1e-9;
        let same = ap.len() == positions.len()
            && ap
                .positions()
                .iter()
                .zip(&positions)
                .all(|(a, b)| (0..3).all(|i| (a[i] - b[i]).abs() <= tol * (1.0 + b[i].abs())));
        if !same {
            return Err(Error::Shape("positions disagree with aperture_meta".into()));
        }
        ap
    };
    if samples.ndim() != 2 {
        return Err(Error::Shape(format!("echo has shape {:?}, expected [N_el, N_f]", samples.shape())));
    }
    let samples: Array2<_> = samples.clone().into_dimensionality().expect("2-D");
    EchoData::new(samples, FrequencyAxis::from_values(freq.iter().copied().collect())?, aperture)
}

fn grid_array(grid: &GridSpec) -> ArrayData {
    let rows: Vec<f64> = grid.axes.iter().flat_map(|a| [a.min, a.max, a.count as f64]).collect();
    ArrayData::F64(ArrayD::from_shape_vec(IxDyn(&[grid.dims(), 3]), rows).expect("dims x 3"))
}

pub fn image_arrays(recon: &Reconstruction) -> Vec<NamedArray> {
    let mut out = vec![
        NamedArray::new("image", ArrayData::C128(recon.image.voxels().clone())),
        NamedArray::new("grid", grid_array(recon.image.grid())),
    ];
    for st in &recon.stages {
        let name = st.stage.name();
        out.push(NamedArray::new(name, ArrayData::C128(st.spectrum.clone())));
        for ax in &st.axes {
            out.push(NamedArray::new(
                format!("{name}.{}", ax.name),
                ArrayData::F64(Array1::from(ax.values.clone()).into_dyn()),
            ));
        }
    }
    out
}

/// Reads `image` and `grid` back into an image volume.
pub fn image_from_arrays(arrays: &[NamedArray]) -> Result<ImageVolume> {
    let voxels = typed(arrays, "image", ArrayData::as_c128)?;
    let g = typed(arrays, "grid", ArrayData::as_f64)?;
    if g.ndim() != 2 || g.shape()[1] != 3 {
        return Err(Error::Shape(format!("grid has shape {:?}, expected [dims, 3]", g.shape())));
    }
    let axes = g
        .outer_iter()
        .map(|r| AxisSpec::new(r[0], r[1], r[2] as usize))
        .collect();
    ImageVolume::new(voxels.clone(), GridSpec::new(axes)?, Provenance::new("stored"))
}

/// Reconstructs a stored echo and returns the image container arrays.
pub fn reconstruct_echo(echo: &EchoData, algo: Algorithm, grid: &GridSpec, opts: &RmaOptions) -> Result<Vec<NamedArray>> {
    Ok(image_arrays(&reconstruct(algo, echo, grid, opts)?))
}

/// Simulate, reconstruct and bundle echo, image and config hash.
pub fn run_pipeline(p: &Prepared, progress: Option<&(dyn Fn(f64) + Sync)>) -> Result<Vec<NamedArray>> {
    let half = |f: f64| {
        if let Some(cb) = progress {
            cb(0.9 * f)
        }
    };
    let echo = simulate(p, Some(&half))?;
    let mut recon = reconstruct(p.algo, &echo, &p.grid, &p.config.rma)?;
    recon.image.set_config_hash(hex::encode(p.hash));
    let mut out = echo_arrays(&echo);
    out.extend(image_arrays(&recon));
    out.push(NamedArray::new("config_hash", ArrayData::I64(hash_words(&p.hash))));
    if let Some(cb) = progress {
        cb(1.0);
    }
    Ok(out)
}

/// Predicted resolution and its inputs for an aperture and band, with the
/// range reference at `target`.
pub fn predicted_report(aperture: &Aperture, freq: &FrequencyAxis, target: [f64; 3]) -> Result<ResolutionReport> {
    let lambda_c = C / freq.center();
    let b = freq.bandwidth();
    let (dx, dy) = aperture_extent(aperture);
    let k = freq.wavenumbers();
    let (kmin, kmax) = (k[0], k[k.len() - 1]);
    let mut cfg = ReportConfig {
        lambda_c: Some(lambda_c),
        bandwidth: Some(b),
        ..Default::default()
    };
    let predicted = match aperture.meta() {
        Some(UniformMeta::Linear { z0, .. }) | Some(UniformMeta::Planar { z0, .. }) => {
            let zref = (target[2] - z0).abs();
            let dx = if aperture.kind() == ApertureKind::Linear { 0.0 } else { dx };
            cfg.zref = Some(zref);
            cfg.dx_extent = Some(dx);
            cfg.dy_extent = Some(dy);
            planar_resolution(lambda_c, zref, dx, dy, b)?
        }
        Some(UniformMeta::Circular { r0, .. }) | Some(UniformMeta::Cylindrical { r0, .. }) => {
            let dy = if aperture.kind() == ApertureKind::Circular { 0.0 } else { dy };
            cfg.r0 = Some(*r0);
            cfg.dy_extent = Some(dy);
            cfg.kmin = Some(kmin);
            cfg.kmax = Some(kmax);
            cylindrical_resolution(lambda_c, *r0, dy, kmin, kmax)?
        }
        None => Resolutions {
            dz: Some(C / (2.0 * b)),
            ..Default::default()
        },
    };
    Ok(ResolutionReport {
        predicted,
        measured: Resolutions::default(),
        config: cfg,
    })
}

/// Maps per-axis widths of an image onto report keys.
pub fn measured_resolutions(kind: ApertureKind, widths: &[f64]) -> Resolutions {
    let mut r = Resolutions::default();
    match (kind, widths) {
        (ApertureKind::Linear, [y, z]) => {
            r.dy = Some(*y);
            r.dz = Some(*z);
        }
        (ApertureKind::Circular, [y, z]) => r.drho = Some(0.5 * (y + z)),
        (ApertureKind::Cylindrical, [x, y, z]) => {
            r.drho = Some(0.5 * (x + z));
            r.dy = Some(*y);
        }
        (_, [x, y, z]) => {
            r.dx = Some(*x);
            r.dy = Some(*y);
            r.dz = Some(*z);
        }
        (_, [y, z]) => {
            r.dy = Some(*y);
            r.dz = Some(*z);
        }
        _ => {}
    }
    r
}

/// Simulates the configured scene (expected to be a single point),
/// reconstructs it and measures the half-power widths at the peak.
pub fn psf_report(p: &Prepared) -> Result<ResolutionReport> {
    let target = p.scene.bounds().center();
    let mut report = predicted_report(&p.aperture, &p.freq, target)?;
    let echo = simulate(p, None)?;
    let recon = reconstruct(p.algo, &echo, &p.grid, &p.config.rma)?;
    let widths = psf_widths(&recon.image, None)?;
    report.measured = measured_resolutions(p.aperture.kind(), &widths);
    Ok(report)
}
