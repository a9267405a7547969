use ndarray::{Array2, Array3};
use proptest::prelude::*;
use sarlab_core::cvnn::{
    cconv2d_direct, cconv2d_gauss, split_activation, Activation, ComplexKernel, ComplexTensor, ConvMode, ConvOptions,
};

fn tensor(c: usize, h: usize, w: usize) -> impl Strategy<Value = ComplexTensor> {
    let n = c * h * w;
    (
        prop::collection::vec(-2.0..2.0f64, n),
        prop::collection::vec(-2.0..2.0f64, n),
    )
        .prop_map(move |(re, im)| {
            ComplexTensor::new(
                Array3::from_shape_vec((c, h, w), re).unwrap(),
                Array3::from_shape_vec((c, h, w), im).unwrap(),
            )
            .unwrap()
        })
}

fn kernel(h: usize, w: usize) -> impl Strategy<Value = ComplexKernel> {
    let n = h * w;
    (
        prop::collection::vec(-2.0..2.0f64, n),
        prop::collection::vec(-2.0..2.0f64, n),
    )
        .prop_map(move |(re, im)| {
            ComplexKernel::new(
                Array2::from_shape_vec((h, w), re).unwrap(),
                Array2::from_shape_vec((h, w), im).unwrap(),
            )
            .unwrap()
        })
}

fn case() -> impl Strategy<Value = (ComplexKernel, ComplexTensor, ConvOptions)> {
    (
        1usize..4,
        1usize..4,
        0usize..5,
        0usize..5,
        1usize..3,
        any::<bool>(),
        any::<bool>(),
    )
        .prop_flat_map(|(kh, kw, eh, ew, c, same, correlate)| {
            let opts = ConvOptions {
                mode: if same { ConvMode::Same } else { ConvMode::Valid },
                correlate,
            };
            (kernel(kh, kw), tensor(c, kh + eh, kw + ew), Just(opts))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn gauss_matches_direct((w, z, opts) in case()) {
        let g = cconv2d_gauss(&w, &z, opts).unwrap();
        let d = cconv2d_direct(&w, &z, opts).unwrap();
        prop_assert_eq!(g.shape(), d.shape());
        let scale = d.re().iter().chain(d.im().iter()).fold(1e-300f64, |m, v| m.max(v.abs()));
        for (a, b) in g.re().iter().chain(g.im().iter()).zip(d.re().iter().chain(d.im().iter())) {
            prop_assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn conjugating_both_inputs_conjugates_output((w, z, opts) in case()) {
        let wc = ComplexKernel::new(w.re().clone(), w.im().mapv(|v| -v)).unwrap();
        let zc = ComplexTensor::new(z.re().clone(), z.im().mapv(|v| -v)).unwrap();
        let a = cconv2d_direct(&w, &z, opts).unwrap();
        let b = cconv2d_direct(&wc, &zc, opts).unwrap();
        for (x, y) in a.re().iter().zip(b.re()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        for (x, y) in a.im().iter().zip(b.im()) {
            prop_assert!((x + y).abs() <= 1e-12);
        }
    }

    #[test]
    fn split_activation_acts_per_part(z in tensor(2, 3, 3)) {
        let r = split_activation(&z, Activation::CRelu);
        prop_assert!(r.re().iter().zip(z.re()).all(|(a, b)| *a == b.max(0.0)));
        prop_assert!(r.im().iter().zip(z.im()).all(|(a, b)| *a == b.max(0.0)));
        let t = split_activation(&z, Activation::CTanh);
        prop_assert!(t.im().iter().zip(z.im()).all(|(a, b)| *a == b.tanh()));
    }
}

#[test]
fn valid_output_shrinks_and_same_keeps_size() {
    let z = ComplexTensor::new(Array3::ones((2, 8, 8)), Array3::zeros((2, 8, 8))).unwrap();
    let w = ComplexKernel::new(Array2::ones((3, 3)), Array2::zeros((3, 3))).unwrap();
    let valid = cconv2d_gauss(&w, &z, ConvOptions::default()).unwrap();
    assert_eq!(valid.shape(), (2, 6, 6));
    assert!(valid.re().iter().all(|&v| v == 9.0));
    let same = ConvOptions {
        mode: ConvMode::Same,
        correlate: false,
    };
    let s = cconv2d_gauss(&w, &z, same).unwrap();
    assert_eq!(s.shape(), (2, 8, 8));
    assert_eq!(s.re()[[0, 0, 0]], 4.0);
}
