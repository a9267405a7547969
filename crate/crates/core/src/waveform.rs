//! Radar signaling parameters and the range/Doppler metrics they imply.
//!
//! All three schemes are reduced to a stepped-frequency band `(f0, B, Nf)` for
//! simulation; chirps, codes and subcarriers are not synthesized in time.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::C;

/// Frequency-modulated continuous wave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmcwParams {
    /// Start frequency (Hz).
    pub f0: f64,
    /// Ramp slope (Hz/s).
    #[serde(alias = "slope")]
    pub k: f64,
    /// Chirp duration (s).
    pub tc: f64,
    /// Chirp repetition interval (s).
    pub tr: f64,
    /// Chirps per frame.
    pub nc: u32,
    /// Fast-time sampling rate (Hz).
    pub fs: f64,
    /// Frequency samples used by the simulator.
    pub nf: usize,
}

/// Phase-modulated continuous wave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmcwParams {
    /// Carrier (Hz).
    pub fc: f64,
    /// Chip bandwidth (Hz).
    pub b: f64,
    /// Code duration (s).
    pub td: f64,
    pub ncode: u32,
    /// Simulation frequency samples; 64 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nf: Option<usize>,
}

/// Orthogonal frequency-division multiplexing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfdmParams {
    /// Carrier (Hz).
    pub fc: f64,
    /// Subcarrier count.
    pub nsc: u32,
    /// Subcarrier spacing (Hz).
    pub df: f64,
    /// Cyclic-prefix duration (s).
    pub tcp: f64,
    pub nsym: u32,
    /// Pulse repetition interval (s).
    pub tr: f64,
    /// Simulation frequency samples; one per subcarrier when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nf: Option<usize>,
}

/// Metrics shared by every scheme.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Range resolution (m).
    pub delta_r: f64,
    /// Maximum unambiguous range (m).
    pub r_max: f64,
    /// Maximum unambiguous velocity (m/s).
    pub v_max: f64,
    /// Doppler velocity resolution (m/s).
    pub delta_v: f64,
    /// Band-center wavelength (m).
    pub lambda_c: f64,
}

/// Configuration block `waveform`, tagged by `type`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Waveform {
    Fmcw(FmcwParams),
    Pmcw(PmcwParams),
    Ofdm(OfdmParams),
}

fn require_count(field: &str, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid(field, "must be at least 1"));
    }
    Ok(())
}

impl FmcwParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("f0", self.f0),
            ("k", self.k),
            ("tc", self.tc),
            ("tr", self.tr),
            ("fs", self.fs),
        ] {
            require_positive(name, v)?;
        }
        require_count("nc", self.nc as u64)?;
        if self.tr < self.tc {
            return Err(Error::invalid("tr", "chirp repetition interval shorter than chirp"));
        }
        if self.nf < 2 {
            return Err(Error::invalid("nf", "need at least 2 frequency samples"));
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> f64 {
        self.k * self.tc
    }
}

impl PmcwParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("fc", self.fc), ("b", self.b), ("td", self.td)] {
            require_positive(name, v)?;
        }
        require_count("ncode", self.ncode as u64)?;
        if self.fc - self.b / 2.0 <= 0.0 {
            return Err(Error::invalid("b", "band extends below 0 Hz"));
        }
        if matches!(self.nf, Some(n) if n < 2) {
            return Err(Error::invalid("nf", "need at least 2 frequency samples"));
        }
        Ok(())
    }
}

impl OfdmParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fc", self.fc),
            ("df", self.df),
            ("tcp", self.tcp),
            ("tr", self.tr),
        ] {
            require_positive(name, v)?;
        }
        require_count("nsc", self.nsc as u64)?;
        require_count("nsym", self.nsym as u64)?;
        if self.fc - self.bandwidth() / 2.0 <= 0.0 {
            return Err(Error::invalid("nsc", "band extends below 0 Hz"));
        }
        match self.nf {
            Some(n) if n < 2 => Err(Error::invalid("nf", "need at least 2 frequency samples")),
            None if self.nsc < 2 => Err(Error::invalid("nsc", "need at least 2 subcarriers")),
            _ => Ok(()),
        }
    }

    pub fn bandwidth(&self) -> f64 {
        self.nsc as f64 * self.df
    }

    /// Symbol duration, the reciprocal of the subcarrier spacing.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.df
    }
}

pub fn fmcw_derived(p: &FmcwParams) -> Result<DerivedMetrics> {
    p.validate()?;
    let b = p.bandwidth();
    let lambda_c = C / (p.f0 + b / 2.0);
    Ok(DerivedMetrics {
        bandwidth: b,
        delta_r: C / (2.0 * b),
        r_max: p.fs * C / (2.0 * p.k),
        v_max: lambda_c / (4.0 * p.tr),
        delta_v: lambda_c / (2.0 * p.nc as f64 * p.tr),
        lambda_c,
    })
}

pub fn pmcw_derived(p: &PmcwParams) -> Result<DerivedMetrics> {
    p.validate()?;
    let lambda_c = C / p.fc;
    Ok(DerivedMetrics {
        bandwidth: p.b,
        delta_r: C / (2.0 * p.b),
        r_max: C * p.td / 2.0,
        v_max: lambda_c / (4.0 * p.td),
        delta_v: lambda_c / (2.0 * p.ncode as f64 * p.td),
        lambda_c,
    })
}

pub fn ofdm_derived(p: &OfdmParams) -> Result<DerivedMetrics> {
    p.validate()?;
    let b = p.bandwidth();
    let lambda_c = C / p.fc;
    Ok(DerivedMetrics {
        bandwidth: b,
        delta_r: C / (2.0 * b),
        r_max: C * p.tcp / 2.0,
        v_max: lambda_c / (4.0 * p.tr),
        delta_v: lambda_c / (2.0 * p.nsym as f64 * p.symbol_duration()),
        lambda_c,
    })
}

impl Waveform {
    pub fn validate(&self) -> Result<()> {
        match self {
            Waveform::Fmcw(p) => p.validate(),
            Waveform::Pmcw(p) => p.validate(),
            Waveform::Ofdm(p) => p.validate(),
        }
    }

    pub fn derived(&self) -> Result<DerivedMetrics> {
        match self {
            Waveform::Fmcw(p) => fmcw_derived(p),
            Waveform::Pmcw(p) => pmcw_derived(p),
            Waveform::Ofdm(p) => ofdm_derived(p),
        }
    }

    /// Simulation band as `(start, span, samples)`.
    pub fn band(&self) -> Result<(f64, f64, usize)> {
        self.validate()?;
        Ok(match self {
            Waveform::Fmcw(p) => (p.f0, p.bandwidth(), p.nf),
            Waveform::Pmcw(p) => (p.fc - p.b / 2.0, p.b, p.nf.unwrap_or(64)),
            Waveform::Ofdm(p) => {
                let f0 = p.fc - p.bandwidth() / 2.0;
                match p.nf {
                    Some(nf) => (f0, p.bandwidth(), nf),
                    // one sample per subcarrier
                    None => (f0, (p.nsc - 1) as f64 * p.df, p.nsc as usize),
                }
            }
        })
    }

    pub fn frequency_axis(&self) -> Result<FrequencyAxis> {
        let (f0, b, nf) = self.band()?;
        frequency_axis(f0, b, nf)
    }

    /// Band-center wavelength of the simulated band.
    pub fn lambda_c(&self) -> Result<f64> {
        let (f0, b, _) = self.band()?;
        Ok(C / (f0 + b / 2.0))
    }
}

/// Uniformly spaced, strictly increasing frequency samples (Hz).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAxis {
    values: Vec<f64>,
}

/// `nf` samples on `[f0, f0 + b]`, endpoints included.
pub fn frequency_axis(f0: f64, b: f64, nf: usize) -> Result<FrequencyAxis> {
    require_positive("f0", f0)?;
    require_positive("b", b)?;
    if nf < 2 {
        return Err(Error::invalid("nf", "need at least 2 frequency samples"));
    }
    let step = b / (nf - 1) as f64;
    let mut values: Vec<f64> = (0..nf).map(|i| f0 + i as f64 * step).collect();
    values[nf - 1] = f0 + b;
    Ok(FrequencyAxis { values })
}

impl FrequencyAxis {
    /// Wraps explicit samples, checking uniform spacing.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("freq", "need at least 2 frequency samples"));
        }
        require_positive("freq[0]", values[0])?;
        let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        if step <= 0.0 {
            return Err(Error::invalid("freq", "must be strictly increasing"));
        }
        for (i, w) in values.windows(2).enumerate() {
            if ((w[1] - w[0]) - step).abs() > 1e-6 * step {
                return Err(Error::invalid(
                    "freq",
                    format!("non-uniform spacing at sample {}", i + 1),
                ));
            }
        }
        Ok(FrequencyAxis { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn step(&self) -> f64 {
        (self.values[self.len() - 1] - self.values[0]) / (self.len() - 1) as f64
    }

    pub fn bandwidth(&self) -> f64 {
        self.values[self.len() - 1] - self.values[0]
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.values[0] + self.values[self.len() - 1])
    }

    /// Radial wavenumbers `k = 2πf/c` (rad/m).
    pub fn wavenumbers(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|f| 2.0 * std::f64::consts::PI * f / C)
            .collect()
    }
}
