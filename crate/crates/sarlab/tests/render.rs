use ndarray::{ArrayD, IxDyn};
use sarlab::render::{colormap, render_png, View};
use sarlab_core::Complex64;

fn decode(bytes: &[u8]) -> (usize, usize, Vec<u8>) {
    let dec = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = dec.read_info().unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    buf.truncate(info.buffer_size());
    (info.height as usize, info.width as usize, buf)
}

#[test]
fn zero_image_is_uniform_lowest_color() {
    let v = ArrayD::<Complex64>::zeros(IxDyn(&[6, 4]));
    let (h, w, px) = decode(&render_png(&v, View::Mip { axis: 0 }, 40.0).unwrap());
    assert_eq!((h, w), (6, 4));
    assert!(px.chunks(3).all(|c| c == colormap(0)));
}

#[test]
fn hot_voxel_lands_at_its_row_and_column() {
    let mut v = ArrayD::<Complex64>::zeros(IxDyn(&[5, 7]));
    v[[3, 2]] = Complex64::new(0.0, -4.0);
    let (h, w, px) = decode(&render_png(&v, View::Mip { axis: 0 }, 40.0).unwrap());
    assert_eq!((h, w), (5, 7));
    for r in 0..h {
        for c in 0..w {
            let p = &px[3 * (r * w + c)..3 * (r * w + c) + 3];
            let want = if (r, c) == (3, 2) { colormap(255) } else { colormap(0) };
            assert_eq!(p, want, "pixel ({r}, {c})");
        }
    }
}

#[test]
fn rendering_is_deterministic() {
    let v = ArrayD::from_shape_fn(IxDyn(&[4, 5, 6]), |i| Complex64::new(i[0] as f64 + 1.0, (i[1] * i[2]) as f64));
    let a = render_png(&v, View::Slice { axis: 1, index: 2 }, 30.0).unwrap();
    let b = render_png(&v, View::Slice { axis: 1, index: 2 }, 30.0).unwrap();
    assert_eq!(a, b);
    assert!(render_png(&v, View::Slice { axis: 1, index: 5 }, 30.0).is_err());
    assert!(render_png(&v, View::Mip { axis: 3 }, 30.0).is_err());
}
