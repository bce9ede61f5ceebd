use crate::counter;
use crate::error::{Error, Result};
use crate::ops::reflect_index;
use crate::params::{join, Binder};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Weights of a 1x1 (`[Cout, Cin, 1, 1]`) or depthwise 3x3 (`[C, 1, 3, 3]`)
/// convolution, with optional per-output-channel bias.
///
/// Generic over the handle type so the same struct binds concrete tensors or
/// tape variables.
#[derive(Clone, Debug)]
pub struct ConvParams<H> {
    pub weight: H,
    pub bias: Option<H>,
}

impl<H> ConvParams<H> {
    /// Binds `{prefix}.weight` and, if present, `{prefix}.bias`.
    pub fn bind<B: Binder<H> + ?Sized>(b: &B, prefix: &str) -> Result<Self> {
        Ok(Self {
            weight: b.get(&join(prefix, "weight"))?,
            bias: b.get_opt(&join(prefix, "bias"))?,
        })
    }
}

fn pointwise_dims<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
) -> Result<(usize, usize)> {
    let (_, cin, _, _) = x.dims4("conv_pointwise")?;
    let (cout, wcin) = match w.shape() {
        [o, i, 1, 1] => (*o, *i),
        s => {
            return Err(Error::invalid_shape(
                "conv_pointwise",
                s,
                "weight must be [Cout, Cin, 1, 1]",
            ))
        }
    };
    if wcin != cin {
        return Err(Error::shape("conv_pointwise", x.shape(), w.shape()));
    }
    if let Some(b) = b {
        if b.shape() != [cout] {
            return Err(Error::shape("conv_pointwise bias", w.shape(), b.shape()));
        }
    }
    Ok((cin, cout))
}

pub fn conv_pointwise<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let (cin, cout) = pointwise_dims(x, w, b)?;
    let (bn, _, h, wd) = x.dims4("conv_pointwise")?;
    let hw = h * wd;
    let xd = x.data();
    let wdat = w.data();
    let mut out = vec![T::zero(); bn * cout * hw];
    for bi in 0..bn {
        for o in 0..cout {
            let dst = &mut out[(bi * cout + o) * hw..(bi * cout + o + 1) * hw];
            if let Some(b) = b {
                dst.fill(b.data()[o]);
            }
            for i in 0..cin {
                let k = wdat[o * cin + i];
                let src = &xd[(bi * cin + i) * hw..(bi * cin + i + 1) * hw];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
    counter::add_arith(bn * hw * cout * cin);
    Tensor::from_vec(&[bn, cout, h, wd], out)
}

/// `(dx, dw, db)`; `db` is `None` when the forward had no bias.
pub type ConvGrads<T> = (Tensor<T>, Tensor<T>, Option<Tensor<T>>);

/// Returns `(dx, dw, db)`; `db` is `None` when the forward had no bias.
pub fn conv_pointwise_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    has_bias: bool,
    dy: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (cin, cout) = pointwise_dims(x, w, None)?;
    let (bn, _, h, wd) = x.dims4("conv_pointwise_backward")?;
    if dy.shape() != [bn, cout, h, wd] {
        return Err(Error::shape(
            "conv_pointwise_backward",
            &[bn, cout, h, wd],
            dy.shape(),
        ));
    }
    let hw = h * wd;
    let (xd, wdat, gd) = (x.data(), w.data(), dy.data());
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); cout];
    for bi in 0..bn {
        for o in 0..cout {
            let g = &gd[(bi * cout + o) * hw..(bi * cout + o + 1) * hw];
            if has_bias {
                db[o] += g.iter().copied().sum::<T>();
            }
            for i in 0..cin {
                let k = wdat[o * cin + i];
                let xs = &xd[(bi * cin + i) * hw..(bi * cin + i + 1) * hw];
                let dxs = &mut dx[(bi * cin + i) * hw..(bi * cin + i + 1) * hw];
                let mut acc = T::zero();
                for ((d, &gv), &xv) in dxs.iter_mut().zip(g).zip(xs) {
                    *d += k * gv;
                    acc += gv * xv;
                }
                dw[o * cin + i] += acc;
            }
        }
    }
    Ok((
        Tensor::from_vec(x.shape(), dx)?,
        Tensor::from_vec(w.shape(), dw)?,
        if has_bias {
            Some(Tensor::from_vec(&[cout], db)?)
        } else {
            None
        },
    ))
}

fn depthwise_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: Option<&Tensor<T>>) -> Result<usize> {
    let (_, c, _, _) = x.dims4("conv_depthwise3x3")?;
    match w.shape() {
        [wc, 1, 3, 3] if *wc == c => {}
        _ => return Err(Error::shape("conv_depthwise3x3", x.shape(), w.shape())),
    }
    if let Some(b) = b {
        if b.shape() != [c] {
            return Err(Error::shape("conv_depthwise3x3 bias", w.shape(), b.shape()));
        }
    }
    Ok(c)
}

/// Depthwise 3x3 convolution, stride 1, one pixel of reflect padding.
pub fn conv_depthwise3x3<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: Option<&Tensor<T>>,
) -> Result<Tensor<T>> {
    let c = depthwise_dims(x, w, b)?;
    let (bn, _, h, wd) = x.dims4("conv_depthwise3x3")?;
    let xd = x.data();
    let mut out = vec![T::zero(); x.len()];
    for bi in 0..bn {
        for ch in 0..c {
            let base = (bi * c + ch) * h * wd;
            let k = &w.data()[ch * 9..ch * 9 + 9];
            let bias = b.map_or(T::zero(), |b| b.data()[ch]);
            for y in 0..h {
                let rows = [
                    reflect_index(y as isize - 1, h),
                    y,
                    reflect_index(y as isize + 1, h),
                ];
                for xx in 0..wd {
                    let cols = [
                        reflect_index(xx as isize - 1, wd),
                        xx,
                        reflect_index(xx as isize + 1, wd),
                    ];
                    let mut acc = bias;
                    for (ky, &ry) in rows.iter().enumerate() {
                        for (kx, &cx) in cols.iter().enumerate() {
                            acc += k[ky * 3 + kx] * xd[base + ry * wd + cx];
                        }
                    }
                    out[base + y * wd + xx] = acc;
                }
            }
        }
    }
    counter::add_arith(x.len() * 9);
    Tensor::from_vec(x.shape(), out)
}

pub fn conv_depthwise3x3_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    has_bias: bool,
    dy: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let c = depthwise_dims(x, w, None)?;
    if dy.shape() != x.shape() {
        return Err(Error::shape(
            "conv_depthwise3x3_backward",
            x.shape(),
            dy.shape(),
        ));
    }
    let (bn, _, h, wd) = x.dims4("conv_depthwise3x3_backward")?;
    let (xd, gd) = (x.data(), dy.data());
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let mut db = vec![T::zero(); c];
    for bi in 0..bn {
        for ch in 0..c {
            let base = (bi * c + ch) * h * wd;
            let k = &w.data()[ch * 9..ch * 9 + 9];
            for y in 0..h {
                let rows = [
                    reflect_index(y as isize - 1, h),
                    y,
                    reflect_index(y as isize + 1, h),
                ];
                for xx in 0..wd {
                    let cols = [
                        reflect_index(xx as isize - 1, wd),
                        xx,
                        reflect_index(xx as isize + 1, wd),
                    ];
                    let g = gd[base + y * wd + xx];
                    db[ch] += g;
                    for (ky, &ry) in rows.iter().enumerate() {
                        for (kx, &cx) in cols.iter().enumerate() {
                            let src = base + ry * wd + cx;
                            dx[src] += k[ky * 3 + kx] * g;
                            dw[ch * 9 + ky * 3 + kx] += g * xd[src];
                        }
                    }
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(x.shape(), dx)?,
        Tensor::from_vec(w.shape(), dw)?,
        if has_bias {
            Some(Tensor::from_vec(&[c], db)?)
        } else {
            None
        },
    ))
}
