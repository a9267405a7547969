use num_complex::Complex64;
use sarlab_core::analysis::image_compare;
use sarlab_core::aperture::{circular_aperture, cylindrical_aperture, linear_aperture, planar_aperture, Aperture};
use sarlab_core::forward::simulate_echo;
use sarlab_core::forward::EchoData;
use sarlab_core::recon::{
    bpa, dispersion_kz, reconstruct, stolt_polar, stolt_rectilinear, Algorithm, Interp, PolarKernel, RmaOptions,
};
use sarlab_core::scene::{point_scene, random_scene, AxisSpec, Bounds, GridSpec, Scatterer, Scene};
use sarlab_core::waveform::{frequency_axis, FrequencyAxis};
use sarlab_core::C;

fn band() -> FrequencyAxis {
    frequency_axis(430e9, 10e9, 32).unwrap()
}

fn quarter_wave() -> f64 {
    C / 435e9 / 4.0
}

fn argmax(img: &ndarray::ArrayD<Complex64>) -> Vec<usize> {
    use ndarray::Dimension;
    img.indexed_iter()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i.slice().to_vec())
        .unwrap()
}

fn nearest_voxel(grid: &GridSpec, p: [f64; 3]) -> Vec<usize> {
    grid.axes
        .iter()
        .zip(grid.physical_axes())
        .map(|(a, &ax)| a.fractional_index(p[ax]).round() as usize)
        .collect()
}

fn run(algo: Algorithm, ap: &Aperture, scene: &Scene, grid: &GridSpec, opts: &RmaOptions) -> (f64, Vec<usize>) {
    let echo = simulate_echo(ap, scene, &band(), None).unwrap();
    let t = std::time::Instant::now();
    let r = reconstruct(algo, &echo, grid, opts).unwrap();
    let trma = t.elapsed();
    let t = std::time::Instant::now();
    let b = bpa(&echo, grid).unwrap();
    let tbpa = t.elapsed();
    let c = image_compare(r.image.voxels(), b.voxels()).unwrap();
    eprintln!(
        "{algo}: ncc {:.4} rmse {:.4} offset {:?} rma {:?} bpa {:?}",
        c.ncc, c.rmse, c.peak_offset, trma, tbpa
    );
    (c.ncc, argmax(r.image.voxels()))
}

fn planar_grid() -> GridSpec {
    GridSpec::volume(
        AxisSpec::new(-0.010, 0.010, 21),
        AxisSpec::new(-0.010, 0.010, 21),
        AxisSpec::new(0.070, 0.130, 13),
    )
    .unwrap()
}

#[test]
fn planar_point_and_random() {
    let ap = planar_aperture(64, 64, quarter_wave(), quarter_wave(), 0.0).unwrap();
    let g = planar_grid();
    let p = [0.002, -0.003, 0.105];
    let s = point_scene(vec![Scatterer::unit(p)]).unwrap();
    let (_, peak) = run(Algorithm::RmaPlanar, &ap, &s, &g, &RmaOptions::default());
    assert_eq!(peak, nearest_voxel(&g, p));
    let b = Bounds::new([-0.008, -0.008, 0.085], [0.008, 0.008, 0.115]).unwrap();
    let s = random_scene(3, 5, &b, None).unwrap();
    let (ncc, _) = run(Algorithm::RmaPlanar, &ap, &s, &g, &RmaOptions::default());
    assert!(ncc >= 0.90);
}

#[test]
fn linear_point_and_random() {
    let ap = linear_aperture(128, quarter_wave(), 0.0).unwrap();
    let g = GridSpec::plane_yz(AxisSpec::new(-0.015, 0.015, 41), AxisSpec::new(0.07, 0.13, 25)).unwrap();
    let p = [0.0, 0.004, 0.1];
    let s = point_scene(vec![Scatterer::unit(p)]).unwrap();
    let (_, peak) = run(Algorithm::RmaLinear, &ap, &s, &g, &RmaOptions::default());
    assert_eq!(peak, nearest_voxel(&g, p));
    let b = Bounds::new([0.0, -0.012, 0.085], [0.0, 0.012, 0.115]).unwrap();
    let s = random_scene(5, 5, &b, None).unwrap();
    let (ncc, _) = run(Algorithm::RmaLinear, &ap, &s, &g, &RmaOptions::default());
    assert!(ncc >= 0.90);
}

fn circle_grid() -> GridSpec {
    GridSpec::plane_yz(AxisSpec::new(-0.004, 0.004, 81), AxisSpec::new(-0.004, 0.004, 81)).unwrap()
}

#[test]
fn circular_point_and_random() {
    let ap = circular_aperture(256, 0.05).unwrap();
    let g = circle_grid();
    let p = [0.0, 0.0, 0.0];
    let s = point_scene(vec![Scatterer::unit(p)]).unwrap();
    let (_, peak) = run(Algorithm::RmaCircular, &ap, &s, &g, &RmaOptions::default());
    assert_eq!(peak, nearest_voxel(&g, p));
    let b = Bounds::new([0.0, -0.003, -0.003], [0.0, 0.003, 0.003]).unwrap();
    let s = random_scene(11, 3, &b, None).unwrap();
    let (ncc, _) = run(Algorithm::RmaCircular, &ap, &s, &g, &RmaOptions::default());
    let lit = RmaOptions {
        polar_kernel: PolarKernel::Literal,
        ..Default::default()
    };
    let (ncc_lit, _) = run(Algorithm::RmaCircular, &ap, &s, &g, &lit);
    eprintln!("literal kernel ncc {ncc_lit:.4}");
    assert!(ncc >= 0.90);
}

#[test]
fn cylindrical_point_and_random() {
    let ap = cylindrical_aperture(128, 32, quarter_wave(), 0.05).unwrap();
    let g = GridSpec::volume(
        AxisSpec::new(-0.003, 0.003, 41),
        AxisSpec::new(-0.004, 0.004, 9),
        AxisSpec::new(-0.003, 0.003, 41),
    )
    .unwrap();
    let p = [0.0, 0.0, 0.0];
    let s = point_scene(vec![Scatterer::unit(p)]).unwrap();
    let (_, peak) = run(Algorithm::RmaCylindrical, &ap, &s, &g, &RmaOptions::default());
    assert_eq!(peak, nearest_voxel(&g, p));
    let b = Bounds::new([-0.0025, -0.003, -0.0025], [0.0025, 0.003, 0.0025]).unwrap();
    let s = random_scene(12, 3, &b, None).unwrap();
    let (ncc, _) = run(Algorithm::RmaCylindrical, &ap, &s, &g, &RmaOptions::default());
    assert!(ncc >= 0.85);
}

fn rel_rms(got: impl Iterator<Item = Complex64>, want: impl Iterator<Item = Complex64>) -> f64 {
    let (mut e, mut w) = (0.0, 0.0);
    for (g, t) in got.zip(want) {
        e += (g - t).norm_sqr();
        w += t.norm_sqr();
    }
    (e / w).sqrt()
}

#[test]
fn stolt_line_matches_direct_evaluation() {
    let k: Vec<f64> = band().wavenumbers();
    let k = {
        let (k0, k1) = (k[0], k[k.len() - 1]);
        (0..512).map(|i| k0 + (k1 - k0) * i as f64 / 511.0).collect::<Vec<_>>()
    };
    let (kx, ky, zt) = (900.0, -1500.0, 0.05);
    let kz = |k: f64| dispersion_kz(k, kx, ky).unwrap();
    let spectrum =
        ndarray::Array3::from_shape_fn((1, 1, k.len()), |(_, _, j)| Complex64::from_polar(1.0, -kz(k[j]) * zt));
    let (lo, hi) = (kz(k[0]), kz(k[k.len() - 1]));
    let grid: Vec<f64> = (1..200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    let (out, stats) = stolt_rectilinear(spectrum.view(), &[kx], &[ky], &k, &grid, Interp::Linear).unwrap();
    assert_eq!(stats.zeroed_lines, 0);
    let e = rel_rms(
        out.iter().copied(),
        grid.iter().map(|&q| Complex64::from_polar(1.0, -q * zt)),
    );
    assert!(e <= 1e-3, "{e}");
    let (out, _) = stolt_rectilinear(spectrum.view(), &[kx], &[ky], &k, &[lo - 1.0, hi + 1.0], Interp::Linear).unwrap();
    assert!(out.iter().all(|v| *v == Complex64::default()));
}

#[test]
fn polar_stolt_matches_smooth_field() {
    let field = |alpha: f64, kr: f64| Complex64::from_polar(1.0 + 0.01 * kr, 0.8 * alpha.cos() + 0.05 * kr);
    let (na, alpha0) = (256, 0.1);
    let k: Vec<f64> = (0..64).map(|j| 10.0 + 2.0 * j as f64 / 63.0).collect();
    let dalpha = 2.0 * std::f64::consts::PI / na as f64;
    let s = ndarray::Array3::from_shape_fn((na, 1, k.len()), |(i, _, j)| {
        field(alpha0 + i as f64 * dalpha, 2.0 * k[j])
    });
    let axis: Vec<f64> = (-24..=24).map(|i| i as f64).collect();
    let out = stolt_polar(s.view(), alpha0, &[0.0], &k, &axis, &axis).unwrap();
    let (mut got, mut want) = (Vec::new(), Vec::new());
    for (ix, &x) in axis.iter().enumerate() {
        for (iz, &z) in axis.iter().enumerate() {
            let kr = x.hypot(z);
            if kr > 20.0 && kr < 24.0 {
                got.push(out[[ix, 0, iz]]);
                want.push(field(z.atan2(x), kr));
            } else if !(20.0..=24.0).contains(&kr) {
                assert_eq!(out[[ix, 0, iz]], Complex64::default());
            }
        }
    }
    assert!(got.len() > 100);
    let e = rel_rms(got.into_iter(), want.into_iter());
    assert!(e <= 1e-3, "{e}");
}

fn small_cases() -> Vec<(Algorithm, Aperture, GridSpec)> {
    let d = quarter_wave();
    vec![
        (
            Algorithm::RmaPlanar,
            planar_aperture(12, 10, d, d, 0.0).unwrap(),
            GridSpec::volume(
                AxisSpec::new(-0.002, 0.002, 5),
                AxisSpec::new(-0.002, 0.002, 5),
                AxisSpec::new(0.04, 0.06, 5),
            )
            .unwrap(),
        ),
        (
            Algorithm::RmaLinear,
            linear_aperture(24, d, 0.0).unwrap(),
            GridSpec::plane_yz(AxisSpec::new(-0.003, 0.003, 7), AxisSpec::new(0.04, 0.06, 6)).unwrap(),
        ),
        (
            Algorithm::RmaCircular,
            circular_aperture(48, 0.05).unwrap(),
            GridSpec::plane_yz(AxisSpec::new(-0.002, 0.002, 6), AxisSpec::new(-0.002, 0.002, 6)).unwrap(),
        ),
        (
            Algorithm::RmaCylindrical,
            cylindrical_aperture(32, 6, d, 0.05).unwrap(),
            GridSpec::volume(
                AxisSpec::new(-0.002, 0.002, 5),
                AxisSpec::new(-0.001, 0.001, 3),
                AxisSpec::new(-0.002, 0.002, 5),
            )
            .unwrap(),
        ),
        (
            Algorithm::Bpa,
            linear_aperture(8, d, 0.0).unwrap(),
            GridSpec::plane_yz(AxisSpec::new(-0.003, 0.003, 4), AxisSpec::new(0.04, 0.06, 3)).unwrap(),
        ),
    ]
}

#[test]
fn reconstructors_are_linear_and_map_zero_to_zero() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let freq = frequency_axis(430e9, 10e9, 8).unwrap();
    let opts = RmaOptions::default();
    for (algo, ap, grid) in small_cases() {
        let mut noise = || {
            ndarray::Array2::from_shape_simple_fn((ap.len(), 8), || {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
        };
        let (a, b) = (noise(), noise());
        let (alpha, beta) = (Complex64::new(0.3, 2.0), Complex64::new(-1.5, 0.25));
        let img = |s: ndarray::Array2<Complex64>| {
            let e = EchoData::new(s, freq.clone(), ap.clone()).unwrap();
            reconstruct(algo, &e, &grid, &opts).unwrap().image.into_voxels()
        };
        let lhs = img(a.mapv(|v| v * alpha) + b.mapv(|v| v * beta));
        let rhs = img(a).mapv(|v| v * alpha) + img(b).mapv(|v| v * beta);
        let scale = rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
        assert!(err <= 1e-10, "{algo}: {err}");
        let zero = img(ndarray::Array2::zeros((ap.len(), 8)));
        assert!(zero.iter().all(|v| v.norm() == 0.0), "{algo}");
    }
}

#[test]
fn circular_rotation_shifts_theta_by_one_bin() {
    let n = 64;
    let ap = circular_aperture(n, 0.05).unwrap();
    let freq = frequency_axis(430e9, 10e9, 6).unwrap();
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let pts = [[0.0, 0.004, -0.002], [0.0, -0.001, 0.003]];
    let rot = |p: [f64; 3]| {
        [
            p[0],
            p[1] * step.cos() - p[2] * step.sin(),
            p[1] * step.sin() + p[2] * step.cos(),
        ]
    };
    let a = simulate_echo(
        &ap,
        &point_scene(pts.iter().map(|&p| Scatterer::unit(p)).collect()).unwrap(),
        &freq,
        None,
    )
    .unwrap();
    let b = simulate_echo(
        &ap,
        &point_scene(pts.iter().map(|&p| Scatterer::unit(rot(p))).collect()).unwrap(),
        &freq,
        None,
    )
    .unwrap();
    let scale = a.samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..6 {
            assert!((b.samples[[i, j]] - a.samples[[(i + n - 1) % n, j]]).norm() <= 1e-9 * scale);
        }
    }
}

#[test]
fn nonuniform_aperture_is_refused_by_rma() {
    let ap = sarlab_core::aperture::irregular_aperture(vec![[0.0, 0.0, 0.0], [0.0, 0.001, 0.0]]).unwrap();
    let freq = frequency_axis(430e9, 10e9, 4).unwrap();
    let e = EchoData::new(ndarray::Array2::zeros((2, 4)), freq, ap).unwrap();
    let g = GridSpec::plane_yz(AxisSpec::new(-0.002, 0.002, 3), AxisSpec::new(0.04, 0.06, 3)).unwrap();
    let err = reconstruct(Algorithm::RmaLinear, &e, &g, &RmaOptions::default()).unwrap_err();
    assert!(err.to_string().contains("bpa"), "{err}");
}
