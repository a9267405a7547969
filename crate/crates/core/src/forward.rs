//! Echo synthesis: `s(r_n, f) = Σ_t g·σ(t)/R² · exp(-j4πfR/c)` with `R = ‖t − r_n‖`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::aperture::{Aperture, ApertureKind};
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::waveform::FrequencyAxis;
use crate::C;

/// Closest allowed element-to-scatterer distance (m).
pub const MIN_STANDOFF: f64 = 1e-6;

/// Steps between exact phase evaluations in the frequency recurrence.
const ANCHOR_EVERY: usize = 32;

/// Simulated or measured echo, one row per aperture element.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoData {
    pub samples: Array2<Complex64>,
    pub freq: FrequencyAxis,
    pub aperture: Aperture,
}

impl EchoData {
    pub fn new(samples: Array2<Complex64>, freq: FrequencyAxis, aperture: Aperture) -> Result<Self> {
        if samples.dim() != (aperture.len(), freq.len()) {
            return Err(Error::Shape(format!(
                "echo is {:?}, expected [{}, {}] (elements × frequencies)",
                samples.dim(),
                aperture.len(),
                freq.len()
            )));
        }
        if samples.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("echo", "non-finite sample"));
        }
        Ok(EchoData {
            samples,
            freq,
            aperture,
        })
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Antenna gain on a regular `(theta, phi)` grid, theta-major.
///
/// `theta` is measured from boresight, `phi` around it. Values are linear
/// power ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct GainPattern {
    theta: Vec<f64>,
    phi: Vec<f64>,
    gain: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainSample {
    pub gain: f64,
    /// False when the direction fell outside the table and `gain` is 0.
    pub covered: bool,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

impl GainPattern {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>, gain: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 || phi.len() < 2 {
            return Err(Error::invalid("gain", "need at least 2 theta and 2 phi nodes"));
        }
        if !strictly_increasing(&theta) || !strictly_increasing(&phi) {
            return Err(Error::invalid("gain", "theta and phi nodes must increase"));
        }
        if gain.len() != theta.len() * phi.len() {
            return Err(Error::Shape(format!(
                "gain table has {} values for {}×{} nodes",
                gain.len(),
                theta.len(),
                phi.len()
            )));
        }
        if let Some(i) = gain.iter().position(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid(format!("gain[{i}]"), "must be finite and ≥ 0"));
        }
        Ok(GainPattern { theta, phi, gain })
    }

    pub fn isotropic() -> Self {
        GainPattern {
            theta: vec![0.0, PI],
            phi: vec![-PI, PI],
            gain: vec![1.0; 4],
        }
    }

    /// Parses `theta_rad,phi_rad,gain_db` rows forming a theta-major grid.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse { offset: 0, msg: e.to_string() })?
            .clone();
        let expected = ["theta_rad", "phi_rad", "gain_db"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Parse {
                offset: 0,
                msg: format!("header must be `{}`", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                offset: e.position().map_or(0, |p| p.byte()),
                msg: e.to_string(),
            })?;
            let offset = rec.position().map_or(0, |p| p.byte());
            let mut vals = [0.0; 3];
            for (i, v) in vals.iter_mut().enumerate() {
                *v = rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
                    offset,
                    msg: format!("column `{}` is not a number", expected[i]),
                })?;
            }
            rows.push(vals);
        }
        let nphi = rows.iter().take_while(|r| r[0] == rows[0][0]).count();
        if nphi == 0 || rows.len() % nphi != 0 {
            return Err(Error::Parse {
                offset: 0,
                msg: "rows do not form a theta-major grid".into(),
            });
        }
        let phi: Vec<f64> = rows[..nphi].iter().map(|r| r[1]).collect();
        let theta: Vec<f64> = rows.iter().step_by(nphi).map(|r| r[0]).collect();
        for (i, r) in rows.iter().enumerate() {
            if r[0] != theta[i / nphi] || r[1] != phi[i % nphi] {
                return Err(Error::Parse {
                    offset: 0,
                    msg: format!("data row {} breaks the theta-major grid", i + 1),
                });
            }
        }
        let gain = rows.iter().map(|r| 10f64.powf(r[2] / 10.0)).collect();
        GainPattern::new(theta, phi, gain)
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    fn at(&self, it: usize, ip: usize) -> f64 {
        self.gain[it * self.phi.len() + ip]
    }
}

/// Bracketing cell and weight for `x` on increasing `nodes`.
fn bracket(nodes: &[f64], x: f64) -> Option<(usize, f64)> {
    let (lo, hi) = (nodes[0], nodes[nodes.len() - 1]);
    if !(x >= lo && x <= hi) {
        return None;
    }
    let i = nodes.partition_point(|&v| v <= x).clamp(1, nodes.len() - 1) - 1;
    Some((i, (x - nodes[i]) / (nodes[i + 1] - nodes[i])))
}

/// Bilinear gain for a unit direction expressed in the element frame
/// (boresight along +z).
pub fn gain_lookup(pattern: &GainPattern, dir: [f64; 3]) -> GainSample {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    let miss = GainSample {
        gain: 0.0,
        covered: false,
    };
    if !(n > 0.0) {
        return miss;
    }
    let theta = (dir[2] / n).clamp(-1.0, 1.0).acos();
    let mut phi = dir[1].atan2(dir[0]);
    let (plo, phi_hi) = (pattern.phi[0], pattern.phi[pattern.phi.len() - 1]);
    if phi < plo {
        phi += 2.0 * PI;
    } else if phi > phi_hi {
        phi -= 2.0 * PI;
    }
    let (Some((it, wt)), Some((ip, wp))) = (bracket(&pattern.theta, theta), bracket(&pattern.phi, phi))
    else {
        return miss;
    };
    let g = (1.0 - wt) * ((1.0 - wp) * pattern.at(it, ip) + wp * pattern.at(it, ip + 1))
        + wt * ((1.0 - wp) * pattern.at(it + 1, ip) + wp * pattern.at(it + 1, ip + 1));
    GainSample {
        gain: g,
        covered: true,
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Orthonormal element frame `(u, v, boresight)`.
///
/// Rectilinear elements look along ±z toward the scene, polar elements look
/// at the rotation axis, irregular ones at the scene center.
fn element_frame(kind: ApertureKind, r: [f64; 3], scene_center: [f64; 3]) -> [[f64; 3]; 3] {
    let w = match kind {
        ApertureKind::Linear | ApertureKind::Planar => {
            [0.0, 0.0, if scene_center[2] >= r[2] { 1.0 } else { -1.0 }]
        }
        ApertureKind::Circular => [0.0, -r[1], -r[2]],
        ApertureKind::Cylindrical => [-r[0], 0.0, -r[2]],
        ApertureKind::Irregular => sub(scene_center, r),
    };
    let wn = norm(w);
    let w = if wn > 0.0 {
        w.map(|v| v / wn)
    } else {
        [0.0, 0.0, 1.0]
    };
    let helper = if w[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let v = cross(w, helper);
    let v = v.map(|c| c / norm(v));
    let u = cross(v, w);
    [u, v, w]
}

/// Two-way phase `-4πfR/c` reduced to `(-π, π]` before the exponential.
#[inline]
fn propagation(f: f64, r: f64) -> Complex64 {
    let cycles = 2.0 * f * r / C;
    let frac = cycles - cycles.round();
    Complex64::from_polar(1.0, -2.0 * PI * frac)
}

fn is_exactly_uniform(freq: &FrequencyAxis) -> bool {
    let (f0, df) = (freq.start(), freq.step());
    freq.values()
        .iter()
        .enumerate()
        .all(|(k, &f)| (f - (f0 + k as f64 * df)).abs() <= 1e-12 * f)
}

#[derive(Clone, Copy, Default)]
pub struct SimulateOptions<'a> {
    pub gain: Option<&'a GainPattern>,
    /// Called with the completed fraction; may run on any worker thread.
    pub progress: Option<&'a (dyn Fn(f64) + Sync)>,
    /// Evaluate rows on the calling thread only.
    pub serial: bool,
}

/// Synthesizes the echo with unit gain unless a pattern is given.
pub fn simulate_echo(
    aperture: &Aperture,
    scene: &Scene,
    freq: &FrequencyAxis,
    gain: Option<&GainPattern>,
) -> Result<EchoData> {
    simulate_echo_with(
        aperture,
        scene,
        freq,
        SimulateOptions {
            gain,
            ..Default::default()
        },
    )
}

pub fn simulate_echo_with(
    aperture: &Aperture,
    scene: &Scene,
    freq: &FrequencyAxis,
    opts: SimulateOptions<'_>,
) -> Result<EchoData> {
    let nf = freq.len();
    let fv = freq.values();
    let uniform = is_exactly_uniform(freq);
    let df = freq.step();
    let center = scene.bounds().center();
    let done = AtomicUsize::new(0);
    let total = aperture.len().max(1);

    let row = |n: usize, out: &mut [Complex64]| -> Result<()> {
        let r = aperture.positions()[n];
        let frame = opts.gain.map(|_| element_frame(aperture.kind(), r, center));
        for (t, s) in scene.scatterers().iter().enumerate() {
            let d = sub(s.position, r);
            let dist = norm(d);
            if !(dist >= MIN_STANDOFF) {
                return Err(Error::Geometry(format!(
                    "scatterer {t} at {:?} is {dist:e} m from element {n} at {r:?}; minimum standoff is {MIN_STANDOFF:e} m",
                    s.position
                )));
            }
            let mut amp = s.reflectivity / (dist * dist);
            if let (Some(p), Some([u, v, w])) = (opts.gain, frame) {
                let local = [dot(d, u), dot(d, v), dot(d, w)].map(|c| c / dist);
                amp *= gain_lookup(p, local).gain;
            }
            if amp == Complex64::default() {
                continue;
            }
            if uniform {
                let step = propagation(df, dist);
                let mut k = 0;
                while k < nf {
                    let end = (k + ANCHOR_EVERY).min(nf);
                    let mut z = amp * propagation(fv[k], dist);
                    for acc in &mut out[k..end] {
                        *acc += z;
                        z *= step;
                    }
                    k = end;
                }
            } else {
                for (acc, &f) in out.iter_mut().zip(fv) {
                    *acc += amp * propagation(f, dist);
                }
            }
        }
        if let Some(cb) = opts.progress {
            let d = done.fetch_add(1, Ordering::Relaxed) + 1;
            cb(d as f64 / total as f64);
        }
        Ok(())
    };

    let mut samples = Array2::<Complex64>::zeros((aperture.len(), nf));
    let flat = samples
        .as_slice_mut()
        .expect("fresh array is contiguous");
    let results: Vec<Result<()>> = if opts.serial || nf == 0 {
        flat.chunks_mut(nf.max(1))
            .enumerate()
            .map(|(n, out)| row(n, out))
            .collect()
    } else {
        flat.par_chunks_mut(nf)
            .enumerate()
            .map(|(n, out)| row(n, out))
            .collect()
    };
    // lowest failing element wins, independent of scheduling
    results.into_iter().collect::<Result<Vec<()>>>()?;
    EchoData::new(samples, freq.clone(), aperture.clone())
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the mean
/// sample power. `f64::INFINITY` returns the echo unchanged.
pub fn add_noise(echo: &EchoData, snr_db: f64, seed: u64) -> Result<EchoData> {
    if snr_db == f64::INFINITY {
        return Ok(echo.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::invalid("snr_db", "must be finite or +inf"));
    }
    let n = echo.samples.len();
    let signal = echo.energy() / n.max(1) as f64;
    if !(signal > 0.0) {
        return Err(Error::invalid("echo", "zero-energy echo has no defined SNR"));
    }
    let sigma = (signal / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = echo.clone();
    for v in out.samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *v += Complex64::new(sigma * re, sigma * im);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::{irregular_aperture, planar_aperture};
    use crate::scene::{point_scene, Scatterer};
    use crate::waveform::frequency_axis;

    fn reference(ap: &Aperture, sc: &Scene, fr: &FrequencyAxis) -> Array2<Complex64> {
        let mut out = Array2::zeros((ap.len(), fr.len()));
        for (n, r) in ap.positions().iter().enumerate() {
            for (k, f) in fr.values().iter().enumerate() {
                for s in sc.scatterers() {
                    let d = norm(sub(s.position, *r));
                    let ph = -4.0 * PI * f * d / C;
                    out[[n, k]] += s.reflectivity / (d * d) * Complex64::new(ph.cos(), ph.sin());
                }
            }
        }
        out
    }

    fn rel_err(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|v| v.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn single_term() {
        let ap = irregular_aperture(vec![[0.0, 0.0, 0.0]]).unwrap();
        let sc = point_scene(vec![Scatterer::unit([0.0, 0.0, 0.1])]).unwrap();
        let fr = frequency_axis(430e9, 10e9, 3).unwrap();
        let e = simulate_echo(&ap, &sc, &fr, None).unwrap();
        for (k, f) in fr.values().iter().enumerate() {
            let ph = -4.0 * PI * f * 0.1 / C;
            let want = Complex64::from_polar(1.0 / 0.01, ph);
            assert!((e.samples[[0, k]] - want).norm() < 1e-12 * want.norm());
        }
    }

    #[test]
    fn long_axis_matches_reference() {
        let ap = planar_aperture(3, 2, 1e-3, 1e-3, 0.0).unwrap();
        let sc = point_scene(vec![
            Scatterer::new([0.001, 0.002, 0.1], Complex64::new(0.3, -0.7)),
            Scatterer::unit([-0.01, 0.0, 0.12]),
        ])
        .unwrap();
        let fr = frequency_axis(430e9, 10e9, 100).unwrap();
        let e = simulate_echo(&ap, &sc, &fr, None).unwrap();
        assert!(rel_err(&e.samples, &reference(&ap, &sc, &fr)) < 1e-12);
    }

    #[test]
    fn standoff_error_names_pair() {
        let ap = irregular_aperture(vec![[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]).unwrap();
        let sc = point_scene(vec![Scatterer::unit([0.0, 0.0, 0.0])]).unwrap();
        let fr = frequency_axis(430e9, 10e9, 4).unwrap();
        let msg = simulate_echo(&ap, &sc, &fr, None).unwrap_err().to_string();
        assert!(msg.contains("scatterer 0") && msg.contains("element 1"), "{msg}");
    }

    #[test]
    fn gain_table_lookups() {
        let p = GainPattern::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let dir = |t: f64, ph: f64| [t.sin() * ph.cos(), t.sin() * ph.sin(), t.cos()];
        let g = gain_lookup(&p, dir(1.0, 1.0));
        assert!((g.gain - 5.0).abs() < 1e-12 && g.covered);
        let g = gain_lookup(&p, dir(0.5, 0.5));
        assert!((g.gain - 2.75).abs() < 1e-12);
        let g = gain_lookup(&p, dir(1.5, 0.5));
        assert_eq!(g, GainSample { gain: 0.0, covered: false });
        let iso = GainPattern::isotropic();
        assert!((gain_lookup(&iso, [0.3, -0.8, -0.2]).gain - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gain_csv() {
        let text = "theta_rad,phi_rad,gain_db\n0,0,0\n0,1,10\n1,0,20\n1,1,-10\n";
        let p = GainPattern::from_csv(text).unwrap();
        assert_eq!(p.gain, vec![1.0, 10.0, 100.0, 0.1]);
        assert!(GainPattern::from_csv("a,b,c\n").is_err());
        assert!(GainPattern::from_csv("theta_rad,phi_rad,gain_db\n0,0,x\n").is_err());
    }

    #[test]
    fn noise_is_seeded_and_infinite_snr_is_identity() {
        let ap = planar_aperture(4, 4, 1e-3, 1e-3, 0.0).unwrap();
        let sc = point_scene(vec![Scatterer::unit([0.0, 0.0, 0.1])]).unwrap();
        let fr = frequency_axis(430e9, 10e9, 8).unwrap();
        let e = simulate_echo(&ap, &sc, &fr, None).unwrap();
        assert_eq!(add_noise(&e, f64::INFINITY, 1).unwrap(), e);
        assert_eq!(add_noise(&e, 10.0, 1).unwrap(), add_noise(&e, 10.0, 1).unwrap());
        let mut z = e.clone();
        z.samples.fill(Complex64::default());
        assert!(add_noise(&z, 10.0, 1).is_err());
    }
}
