use crate::counter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Exact GELU, `x * Phi(x)`.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * x * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let cdf = half * (T::one() + (x * T::FRAC_1_SQRT_2()).erf());
    let pdf = (-half * x * x).exp() * T::FRAC_2_SQRT_PI() * T::FRAC_1_SQRT_2() * half;
    cdf + x * pdf
}

fn geglu_dims<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (b, c, h, w) = x.dims4("geglu")?;
    if c % 2 != 0 {
        return Err(Error::invalid_shape(
            "geglu",
            x.shape(),
            "channel count must be even",
        ));
    }
    Ok((b, c / 2, h * w))
}

/// Splits channels into halves `(a, b)` and returns `a * GELU(b)`.
pub fn geglu<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, half, hw) = geglu_dims(x)?;
    let xd = x.data();
    let mut out = Vec::with_capacity(b * half * hw);
    for bi in 0..b {
        let base = bi * 2 * half * hw;
        let (a, g) = xd[base..base + 2 * half * hw].split_at(half * hw);
        out.extend(a.iter().zip(g).map(|(&a, &g)| a * gelu(g)));
    }
    counter::add_arith(out.len() * 8);
    let s = x.shape();
    Tensor::from_vec(&[s[0], half, s[2], s[3]], out)
}

pub fn geglu_backward<T: Scalar>(x: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, half, hw) = geglu_dims(x)?;
    if dy.len() != b * half * hw {
        return Err(Error::shape("geglu_backward", x.shape(), dy.shape()));
    }
    let (xd, gd) = (x.data(), dy.data());
    let mut dx = vec![T::zero(); x.len()];
    for bi in 0..b {
        let base = bi * 2 * half * hw;
        for i in 0..half * hw {
            let a = xd[base + i];
            let g = xd[base + half * hw + i];
            let up = gd[bi * half * hw + i];
            dx[base + i] = up * gelu(g);
            dx[base + half * hw + i] = up * a * gelu_grad(g);
        }
    }
    Tensor::from_vec(x.shape(), dx)
}

/// Softmax along the last axis with max subtraction.
pub fn softmax<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    if x.data().iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite { op: "softmax" });
    }
    let n = *x.shape().last().expect("rank >= 1");
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(n) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    counter::add_arith(x.len() * 4);
    Tensor::from_vec(x.shape(), out)
}

/// Adjoint of [`softmax`] given its output `y`.
pub fn softmax_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if y.shape() != dy.shape() {
        return Err(Error::shape("softmax_backward", y.shape(), dy.shape()));
    }
    let n = *y.shape().last().expect("rank >= 1");
    let mut dx = vec![T::zero(); y.len()];
    for ((yr, gr), dr) in y
        .data()
        .chunks(n)
        .zip(dy.data().chunks(n))
        .zip(dx.chunks_mut(n))
    {
        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
            *d = yv * (gv - dot);
        }
    }
    Tensor::from_vec(y.shape(), dx)
}
