//! Image formation: backprojection for any aperture and FFT-based range
//! migration for the four uniform geometries.
//!
//! RMA pipelines expose their intermediate k-space arrays as [`KSpace`]
//! stages when [`RmaOptions::keep_stages`] is set.

mod bpa;
mod polar;
mod rectilinear;
mod resample;
mod stolt;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use bpa::{bpa, bpa_with};
pub use polar::{azimuth_kernel, facing_azimuth_kernel, rma_circular, rma_cylindrical, PolarKernel};
pub use rectilinear::{rma_linear, rma_planar};
pub use stolt::{dispersion_kz, stolt_polar, stolt_rectilinear, Interp, StoltStats};

use crate::error::{Error, Result};
use crate::forward::EchoData;
use crate::scene::GridSpec;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: String,
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn new(algorithm: &str) -> Self {
        Provenance {
            algorithm: algorithm.to_string(),
            config_hash: None,
        }
    }
}

/// Complex voxels sampled on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageVolume {
    voxels: ArrayD<Complex64>,
    grid: GridSpec,
    provenance: Provenance,
}

impl ImageVolume {
    pub fn new(voxels: ArrayD<Complex64>, grid: GridSpec, provenance: Provenance) -> Result<Self> {
        grid.validate()?;
        if voxels.shape() != grid.shape().as_slice() {
            return Err(Error::Shape(format!(
                "voxels {:?} do not match grid {:?}",
                voxels.shape(),
                grid.shape()
            )));
        }
        Ok(ImageVolume {
            voxels,
            grid,
            provenance,
        })
    }

    pub fn voxels(&self) -> &ArrayD<Complex64> {
        &self.voxels
    }

    pub fn into_voxels(self) -> ArrayD<Complex64> {
        self.voxels
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn set_config_hash(&mut self, hash: impl Into<String>) {
        self.provenance.config_hash = Some(hash.into());
    }

    /// Physical coordinates along each grid axis (m).
    pub fn axes(&self) -> Vec<Vec<f64>> {
        self.grid.axes.iter().map(|a| a.coords()).collect()
    }

    pub fn magnitude(&self) -> ArrayD<f64> {
        self.voxels.mapv(|v| v.norm())
    }
}

/// Pipeline stage of an RMA reconstruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    /// Echo arranged on the aperture lattice.
    Signal,
    /// After the spatial FFTs.
    Spectrum,
    /// After reference compensation (rectilinear) or azimuth matched filtering (polar).
    Compensated,
    /// After Stolt resampling onto the uniform wavenumber lattice.
    Stolt,
}

impl Stage {
    /// Array name used when persisting the stage.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Signal => "stage0_signal",
            Stage::Spectrum => "stage1_kspace",
            Stage::Compensated => "stage2_compensated",
            Stage::Stolt => "stage3_stolt",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl KAxis {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        KAxis {
            name: name.into(),
            values,
        }
    }
}

/// Intermediate spectrum with monotone coordinate axes.
#[derive(Clone, Debug, PartialEq)]
pub struct KSpace {
    pub stage: Stage,
    pub spectrum: ArrayD<Complex64>,
    pub axes: Vec<KAxis>,
}

impl KSpace {
    pub fn new(stage: Stage, spectrum: ArrayD<Complex64>, axes: Vec<KAxis>) -> Result<Self> {
        if axes.len() != spectrum.ndim() {
            return Err(Error::Shape(format!(
                "{} axes for a {}-D spectrum",
                axes.len(),
                spectrum.ndim()
            )));
        }
        for (a, &n) in axes.iter().zip(spectrum.shape()) {
            if a.values.len() != n {
                return Err(Error::Shape(format!(
                    "axis `{}` has {} values for {} samples",
                    a.name,
                    a.values.len(),
                    n
                )));
            }
            if !a.values.windows(2).all(|w| w[1] > w[0]) {
                return Err(Error::Shape(format!("axis `{}` is not increasing", a.name)));
            }
        }
        Ok(KSpace {
            stage,
            spectrum,
            axes,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub image: ImageVolume,
    /// Empty unless stages were requested.
    pub stages: Vec<KSpace>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmaOptions {
    /// Zero-padding factor applied to the spatial aperture axes.
    pub pad_factor: usize,
    pub interp: Interp,
    pub keep_stages: bool,
    pub polar_kernel: PolarKernel,
}

impl Default for RmaOptions {
    fn default() -> Self {
        RmaOptions {
            pad_factor: 2,
            interp: Interp::Linear,
            keep_stages: false,
            polar_kernel: PolarKernel::Facing,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "bpa")]
    Bpa,
    #[serde(rename = "rma-linear")]
    RmaLinear,
    #[serde(rename = "rma-planar")]
    RmaPlanar,
    #[serde(rename = "rma-circular")]
    RmaCircular,
    #[serde(rename = "rma-cylindrical")]
    RmaCylindrical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Bpa,
        Algorithm::RmaLinear,
        Algorithm::RmaPlanar,
        Algorithm::RmaCircular,
        Algorithm::RmaCylindrical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bpa => "bpa",
            Algorithm::RmaLinear => "rma-linear",
            Algorithm::RmaPlanar => "rma-planar",
            Algorithm::RmaCircular => "rma-circular",
            Algorithm::RmaCylindrical => "rma-cylindrical",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.as_str()).collect();
                Error::invalid("algo", format!("unknown algorithm `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Runs the selected reconstructor.
pub fn reconstruct(
    algo: Algorithm,
    echo: &EchoData,
    grid: &GridSpec,
    opts: &RmaOptions,
) -> Result<Reconstruction> {
    match algo {
        Algorithm::Bpa => Ok(Reconstruction {
            image: bpa(echo, grid)?,
            stages: Vec::new(),
        }),
        Algorithm::RmaLinear => rma_linear(echo, grid, opts),
        Algorithm::RmaPlanar => rma_planar(echo, grid, opts),
        Algorithm::RmaCircular => rma_circular(echo, grid, opts),
        Algorithm::RmaCylindrical => rma_cylindrical(echo, grid, opts),
    }
}
