//! Complex-valued network primitives built from real operations.

use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex feature map stored as separate real and imaginary planes,
/// shaped `[channels, height, width]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    re: Array3<f64>,
    im: Array3<f64>,
}

impl ComplexTensor {
    pub fn new(re: Array3<f64>, im: Array3<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Shape(format!("re {:?} vs im {:?}", re.shape(), im.shape())));
        }
        if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("tensor", "non-finite entry"));
        }
        Ok(ComplexTensor { re, im })
    }

    /// Single-channel tensor.
    pub fn from_planes(re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        Self::new(re.insert_axis(Axis(0)), im.insert_axis(Axis(0)))
    }

    pub fn re(&self) -> &Array3<f64> {
        &self.re
    }

    pub fn im(&self) -> &Array3<f64> {
        &self.im
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.re.dim()
    }
}

/// Complex 2-D kernel `W = W_R + j·W_I`, shared across channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexKernel {
    re: Array2<f64>,
    im: Array2<f64>,
}

impl ComplexKernel {
    pub fn new(re: Array2<f64>, im: Array2<f64>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(Error::Shape(format!("re {:?} vs im {:?}", re.shape(), im.shape())));
        }
        if re.is_empty() {
            return Err(Error::invalid("kernel", "empty kernel"));
        }
        if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("kernel", "non-finite entry"));
        }
        Ok(ComplexKernel { re, im })
    }

    pub fn re(&self) -> &Array2<f64> {
        &self.re
    }

    pub fn im(&self) -> &Array2<f64> {
        &self.im
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvMode {
    #[default]
    Valid,
    /// Output matches the input size; zero padding, centered like the
    /// `same` mode of common signal libraries.
    Same,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConvOptions {
    pub mode: ConvMode,
    /// Skip the kernel flip (the machine-learning convention).
    pub correlate: bool,
}

fn out_geometry(k: (usize, usize), x: (usize, usize), mode: ConvMode) -> Result<((usize, usize), (usize, usize))> {
    match mode {
        ConvMode::Valid => {
            if k.0 > x.0 || k.1 > x.1 {
                return Err(Error::Shape(format!(
                    "kernel {k:?} larger than input {x:?} in valid mode"
                )));
            }
            Ok(((x.0 - k.0 + 1, x.1 - k.1 + 1), (k.0 - 1, k.1 - 1)))
        }
        ConvMode::Same => Ok((x, ((k.0 - 1) / 2, (k.1 - 1) / 2))),
    }
}

/// Real 2-D convolution of every channel of `x` with `w`.
pub fn conv2d_real(w: ArrayView2<f64>, x: &Array3<f64>, opts: ConvOptions) -> Result<Array3<f64>> {
    let (c, h, wd) = x.dim();
    let (kh, kw) = w.dim();
    let ((oh, ow), (sh, sw)) = out_geometry((kh, kw), (h, wd), opts.mode)?;
    let mut out = Array3::<f64>::zeros((c, oh, ow));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(x.axis_iter(Axis(0)))
        .par_for_each(|mut o, xc| {
            for i in 0..oh {
                for j in 0..ow {
                    // full-convolution index (i + sh, j + sw)
                    let (fi, fj) = ((i + sh) as isize, (j + sw) as isize);
                    let mut acc = 0.0;
                    for a in 0..kh {
                        let r = fi - a as isize;
                        if r < 0 || r >= h as isize {
                            continue;
                        }
                        for b in 0..kw {
                            let s = fj - b as isize;
                            if s < 0 || s >= wd as isize {
                                continue;
                            }
                            let wv = if opts.correlate {
                                w[[kh - 1 - a, kw - 1 - b]]
                            } else {
                                w[[a, b]]
                            };
                            acc += wv * xc[[r as usize, s as usize]];
                        }
                    }
                    o[[i, j]] = acc;
                }
            }
        });
    Ok(out)
}

type RealConv<'a> = dyn FnMut(ArrayView2<f64>, &Array3<f64>) -> Result<Array3<f64>> + 'a;

/// Four-convolution form `(W_R⊛z_R − W_I⊛z_I) + j(W_R⊛z_I + W_I⊛z_R)`.
pub fn cconv2d_direct(w: &ComplexKernel, z: &ComplexTensor, opts: ConvOptions) -> Result<ComplexTensor> {
    cconv2d_direct_with(w, z, &mut |k, x| conv2d_real(k, x, opts))
}

/// As [`cconv2d_direct`] with a caller-supplied real convolution.
pub fn cconv2d_direct_with(w: &ComplexKernel, z: &ComplexTensor, conv: &mut RealConv<'_>) -> Result<ComplexTensor> {
    let rr = conv(w.re.view(), &z.re)?;
    let ii = conv(w.im.view(), &z.im)?;
    let ri = conv(w.re.view(), &z.im)?;
    let ir = conv(w.im.view(), &z.re)?;
    ComplexTensor::new(rr - ii, ri + ir)
}

/// Three-convolution (Gauss) form: `t1 = W_R⊛z_R`, `t2 = W_I⊛z_I`,
/// `t3 = (W_R + W_I)⊛(z_R + z_I)`, result `(t1 − t2) + j(t3 − t1 − t2)`.
pub fn cconv2d_gauss(w: &ComplexKernel, z: &ComplexTensor, opts: ConvOptions) -> Result<ComplexTensor> {
    cconv2d_gauss_with(w, z, &mut |k, x| conv2d_real(k, x, opts))
}

/// As [`cconv2d_gauss`] with a caller-supplied real convolution.
pub fn cconv2d_gauss_with(w: &ComplexKernel, z: &ComplexTensor, conv: &mut RealConv<'_>) -> Result<ComplexTensor> {
    let t1 = conv(w.re.view(), &z.re)?;
    let t2 = conv(w.im.view(), &z.im)?;
    let ws = &w.re + &w.im;
    let zs = &z.re + &z.im;
    let t3 = conv(ws.view(), &zs)?;
    let im = t3 - &t1 - &t2;
    ComplexTensor::new(t1 - t2, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    CRelu,
    CTanh,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crelu" => Ok(Activation::CRelu),
            "ctanh" => Ok(Activation::CTanh),
            _ => Err(Error::invalid("kind", format!("unknown activation `{s}` (crelu|ctanh)"))),
        }
    }
}

/// `F(z) = G(z_R) + j·G(z_I)` with the same real `G` on both parts.
pub fn split_activation(z: &ComplexTensor, kind: Activation) -> ComplexTensor {
    let g = |v: f64| match kind {
        Activation::CRelu => v.max(0.0),
        Activation::CTanh => v.tanh(),
    };
    ComplexTensor {
        re: z.re.mapv(g),
        im: z.im.mapv(g),
    }
}
