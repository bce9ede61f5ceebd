//! Direct-summation references for the fast transforms.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spectral::Spectrum;
use crate::tensor::Tensor;

/// `O(N^2)` double sum over each `h x w` plane of the last two axes. Works
/// for any extents; twiddles are evaluated in f64.
pub fn dft2_oracle<T: Scalar>(x: &Tensor<T>) -> Result<Spectrum<T>> {
    let shape = x.shape();
    if shape.len() < 2 {
        return Err(Error::invalid_shape(
            "dft2_oracle",
            shape,
            "need at least two axes",
        ));
    }
    let r = shape.len();
    let (h, w) = (shape[r - 2], shape[r - 1]);
    let mut out = Vec::with_capacity(x.len());
    for plane in x.data().chunks(h * w) {
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(0.0f64, 0.0);
                for m in 0..h {
                    for n in 0..w {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * (((u * m) % h) as f64 / h as f64 + ((v * n) % w) as f64 / w as f64);
                        acc += Complex::from_polar(plane[m * w + n].as_f64(), phase);
                    }
                }
                out.push(Complex::new(T::from_f64(acc.re), T::from_f64(acc.im)));
            }
        }
    }
    Spectrum::from_vec(shape, out)
}

/// `c[k, l] = sum_{m,n} a[m, n] * b[(m + k) mod h, (n + l) mod w]` per plane,
/// by direct summation.
pub fn circular_cross_correlate_oracle<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "circular_cross_correlate_oracle",
            a.shape(),
            b.shape(),
        ));
    }
    let shape = a.shape();
    let r = shape.len();
    let (h, w) = if r == 1 {
        (1, shape[0])
    } else {
        (shape[r - 2], shape[r - 1])
    };
    let mut out = Vec::with_capacity(a.len());
    for (pa, pb) in a.data().chunks(h * w).zip(b.data().chunks(h * w)) {
        for k in 0..h {
            for l in 0..w {
                let mut acc = 0.0f64;
                for m in 0..h {
                    for n in 0..w {
                        acc +=
                            pa[m * w + n].as_f64() * pb[((m + k) % h) * w + (n + l) % w].as_f64();
                    }
                }
                out.push(T::from_f64(acc));
            }
        }
    }
    Tensor::from_vec(shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_two_term() {
        let a = Tensor::<f64>::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f64>::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        let c = circular_cross_correlate_oracle(&a, &b).unwrap();
        assert_eq!(c.data(), &[11.0, 10.0]);
    }

    #[test]
    fn impulse_self_correlation() {
        let mut d = Tensor::<f64>::zeros(&[4, 4]).unwrap();
        d.set(&[0, 0], 1.0);
        assert_eq!(circular_cross_correlate_oracle(&d, &d).unwrap(), d);
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let mut d = Tensor::<f64>::zeros(&[3, 5]).unwrap();
        d.set(&[0, 0], 1.0);
        let s = dft2_oracle(&d).unwrap();
        assert!(s
            .data()
            .iter()
            .all(|v| (v.re - 1.0).abs() < 1e-14 && v.im.abs() < 1e-14));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor::<f32>::zeros(&[2, 2]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        assert!(circular_cross_correlate_oracle(&a, &b).is_err());
    }
}
