//! Dense NCHW activations and the layer kernels of the score network.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tensor4 {
    pub b: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(b: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            b,
            c,
            h,
            w,
            data: vec![0.0; b * c * h * w],
        }
    }

    pub fn plane(&self) -> usize {
        self.h * self.w
    }

    pub fn add_assign(&mut self, other: &Tensor4) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// 3x3, stride 1, zero padding 1 patches laid out as
/// `[cin * 9, b * h * w]`.
fn im2col(x: &Tensor4) -> Vec<f64> {
    let (b, c, h, w) = (x.b, x.c, x.h, x.w);
    let hw = h * w;
    let n = b * hw;
    let mut cols = vec![0.0; c * 9 * n];
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * n..][..n];
                for bi in 0..b {
                    let src = &x.data[(bi * c + ci) * hw..][..hw];
                    let dst = &mut row[bi * hw..][..hw];
                    for yy in 0..h {
                        let sy = yy as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..][..w];
                        let drow = &mut dst[yy * w..][..w];
                        match kx {
                            0 => drow[1..].copy_from_slice(&srow[..w - 1]),
                            1 => drow.copy_from_slice(srow),
                            _ => drow[..w - 1].copy_from_slice(&srow[1..]),
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], b: usize, c: usize, h: usize, w: usize) -> Tensor4 {
    let hw = h * w;
    let n = b * hw;
    let mut x = Tensor4::zeros(b, c, h, w);
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * n..][..n];
                for bi in 0..b {
                    let src = &row[bi * hw..][..hw];
                    let dst = &mut x.data[(bi * c + ci) * hw..][..hw];
                    for yy in 0..h {
                        let sy = yy as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let drow = &mut dst[sy as usize * w..][..w];
                        let srow = &src[yy * w..][..w];
                        match kx {
                            0 => {
                                for (d, s) in drow[..w - 1].iter_mut().zip(&srow[1..]) {
                                    *d += s;
                                }
                            }
                            1 => {
                                for (d, s) in drow.iter_mut().zip(srow) {
                                    *d += s;
                                }
                            }
                            _ => {
                                for (d, s) in drow[1..].iter_mut().zip(&srow[..w - 1]) {
                                    *d += s;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

/// `y = conv3x3(x; weight) + bias`, weight laid out `[cout, cin * 9]`.
pub(crate) fn conv3x3(x: &Tensor4, weight: &[f64], bias: &[f64], cout: usize) -> Tensor4 {
    let k = x.c * 9;
    let hw = x.plane();
    let n = x.b * hw;
    let cols = im2col(x);
    let mut out = vec![0.0; cout * n];
    {
        let wv = ArrayView2::from_shape((cout, k), weight).expect("weight shape");
        let cv = ArrayView2::from_shape((k, n), &cols).expect("cols shape");
        let mut ov = ArrayViewMut2::from_shape((cout, n), &mut out).expect("out shape");
        general_mat_mul(1.0, &wv, &cv, 0.0, &mut ov);
    }
    let mut y = Tensor4::zeros(x.b, cout, x.h, x.w);
    for co in 0..cout {
        let row = &out[co * n..][..n];
        for bi in 0..x.b {
            let dst = &mut y.data[(bi * cout + co) * hw..][..hw];
            for (d, s) in dst.iter_mut().zip(&row[bi * hw..][..hw]) {
                *d = s + bias[co];
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `want_input` is set.
pub(crate) fn conv3x3_backward(
    x: &Tensor4,
    weight: &[f64],
    dy: &Tensor4,
    dweight: &mut [f64],
    dbias: &mut [f64],
    want_input: bool,
) -> Option<Tensor4> {
    let cout = dy.c;
    let k = x.c * 9;
    let hw = x.plane();
    let n = x.b * hw;
    let mut dy_mat = vec![0.0; cout * n];
    for co in 0..cout {
        let row = &mut dy_mat[co * n..][..n];
        for bi in 0..x.b {
            let src = &dy.data[(bi * cout + co) * hw..][..hw];
            row[bi * hw..][..hw].copy_from_slice(src);
        }
        dbias[co] += row.iter().sum::<f64>();
    }
    let cols = im2col(x);
    let dyv = ArrayView2::from_shape((cout, n), &dy_mat).expect("dy shape");
    {
        let cv = ArrayView2::from_shape((k, n), &cols).expect("cols shape");
        let mut dwv = ArrayViewMut2::from_shape((cout, k), dweight).expect("dw shape");
        general_mat_mul(1.0, &dyv, &cv.t(), 1.0, &mut dwv);
    }
    if !want_input {
        return None;
    }
    let mut dcols = cols;
    {
        let wv = ArrayView2::from_shape((cout, k), weight).expect("weight shape");
        let mut dcv = ArrayViewMut2::from_shape((k, n), &mut dcols).expect("dcols shape");
        general_mat_mul(1.0, &wv.t(), &dyv, 0.0, &mut dcv);
    }
    Some(col2im(&dcols, x.b, x.c, x.h, x.w))
}

pub(crate) fn avg_pool2(x: &Tensor4) -> Tensor4 {
    let (h, w) = (x.h / 2, x.w / 2);
    let mut y = Tensor4::zeros(x.b, x.c, h, w);
    for plane in 0..x.b * x.c {
        let src = &x.data[plane * x.plane()..][..x.plane()];
        let dst = &mut y.data[plane * h * w..][..h * w];
        for r in 0..h {
            for c in 0..w {
                let i = 2 * r * x.w + 2 * c;
                dst[r * w + c] = 0.25 * (src[i] + src[i + 1] + src[i + x.w] + src[i + x.w + 1]);
            }
        }
    }
    y
}

pub(crate) fn avg_pool2_backward(dy: &Tensor4) -> Tensor4 {
    let (h, w) = (dy.h * 2, dy.w * 2);
    let mut dx = Tensor4::zeros(dy.b, dy.c, h, w);
    for plane in 0..dy.b * dy.c {
        let src = &dy.data[plane * dy.plane()..][..dy.plane()];
        let dst = &mut dx.data[plane * h * w..][..h * w];
        for r in 0..dy.h {
            for c in 0..dy.w {
                let g = 0.25 * src[r * dy.w + c];
                let i = 2 * r * w + 2 * c;
                dst[i] = g;
                dst[i + 1] = g;
                dst[i + w] = g;
                dst[i + w + 1] = g;
            }
        }
    }
    dx
}

pub(crate) fn upsample2(x: &Tensor4) -> Tensor4 {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut y = Tensor4::zeros(x.b, x.c, h, w);
    for plane in 0..x.b * x.c {
        let src = &x.data[plane * x.plane()..][..x.plane()];
        let dst = &mut y.data[plane * h * w..][..h * w];
        for r in 0..h {
            for c in 0..w {
                dst[r * w + c] = src[(r / 2) * x.w + c / 2];
            }
        }
    }
    y
}

pub(crate) fn upsample2_backward(dy: &Tensor4) -> Tensor4 {
    let (h, w) = (dy.h / 2, dy.w / 2);
    let mut dx = Tensor4::zeros(dy.b, dy.c, h, w);
    for plane in 0..dy.b * dy.c {
        let src = &dy.data[plane * dy.plane()..][..dy.plane()];
        let dst = &mut dx.data[plane * h * w..][..h * w];
        for r in 0..dy.h {
            for c in 0..dy.w {
                dst[(r / 2) * w + c / 2] += src[r * dy.w + c];
            }
        }
    }
    dx
}

/// Channel concatenation `[a, b]`.
pub(crate) fn concat(a: &Tensor4, b: &Tensor4) -> Tensor4 {
    let hw = a.plane();
    let c = a.c + b.c;
    let mut y = Tensor4::zeros(a.b, c, a.h, a.w);
    for bi in 0..a.b {
        y.data[bi * c * hw..][..a.c * hw].copy_from_slice(&a.data[bi * a.c * hw..][..a.c * hw]);
        y.data[(bi * c + a.c) * hw..][..b.c * hw]
            .copy_from_slice(&b.data[bi * b.c * hw..][..b.c * hw]);
    }
    y
}

pub(crate) fn split(y: &Tensor4, first: usize) -> (Tensor4, Tensor4) {
    let hw = y.plane();
    let second = y.c - first;
    let mut a = Tensor4::zeros(y.b, first, y.h, y.w);
    let mut b = Tensor4::zeros(y.b, second, y.h, y.w);
    for bi in 0..y.b {
        a.data[bi * first * hw..][..first * hw]
            .copy_from_slice(&y.data[bi * y.c * hw..][..first * hw]);
        b.data[bi * second * hw..][..second * hw]
            .copy_from_slice(&y.data[(bi * y.c + first) * hw..][..second * hw]);
    }
    (a, b)
}
