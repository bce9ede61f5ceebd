//! Two-dimensional discrete Fourier transforms over the last two axes.
//!
//! Conventions: the forward transform is unnormalized and the inverse carries
//! the `1/(h*w)` factor, so that `ifft2(fft2(a) * conj(fft2(b)))` is exactly
//! `circular_cross_correlate_oracle(b, a)`, i.e. `c[k] = sum_m a[m + k] b[m]`.
//! Planes whose extents are not
//! powers of two are zero-padded on the bottom/right; the padding is recorded
//! on the spectrum and cropped again by the inverse.

mod fft;
mod oracle;

pub use fft::Radix2Plan;
pub use oracle::{circular_cross_correlate_oracle, dft2_oracle};

use num_complex::Complex;

use crate::counter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Imaginary residue (relative to the real scale) above which an inverse
/// transform is rejected as non-Hermitian.
pub const HERMITIAN_REJECT: f64 = 1e-3;

/// Complex array whose last two axes are frequency axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    shape: Vec<usize>,
    data: Vec<Complex<T>>,
    /// Spatial extents before zero-padding to a power of two.
    spatial: (usize, usize),
}

pub type ComplexSpectrum<T> = Spectrum<T>;

impl<T: Scalar> Spectrum<T> {
    pub fn from_vec(shape: &[usize], data: Vec<Complex<T>>) -> Result<Self> {
        if shape.len() < 2 || shape.contains(&0) {
            return Err(Error::invalid_shape(
                "spectrum",
                shape,
                "need rank >= 2 with nonzero extents",
            ));
        }
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::invalid_shape(
                "spectrum",
                shape,
                "element count mismatch",
            ));
        }
        let r = shape.len();
        Ok(Self {
            shape: shape.to_vec(),
            data,
            spatial: (shape[r - 2], shape[r - 1]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: vec![Complex::new(T::zero(), T::zero()); self.data.len()],
            spatial: self.spatial,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn spatial(&self) -> (usize, usize) {
        self.spatial
    }

    fn freq_dims(&self) -> (usize, usize) {
        let r = self.shape.len();
        (self.shape[r - 2], self.shape[r - 1])
    }

    /// Spatial shape the inverse transform produces.
    pub fn spatial_shape(&self) -> Vec<usize> {
        let mut s = self.shape.clone();
        let r = s.len();
        s[r - 2] = self.spatial.0;
        s[r - 1] = self.spatial.1;
        s
    }

    pub fn get(&self, lead: usize, u: usize, v: usize) -> Complex<T> {
        let (h, w) = self.freq_dims();
        self.data[lead * h * w + u * w + v]
    }

    /// Largest `|S[u,v] - conj(S[-u,-v])|` over all planes.
    pub fn hermitian_defect(&self) -> f64 {
        let (h, w) = self.freq_dims();
        let mut worst = 0.0f64;
        for plane in self.data.chunks(h * w) {
            for u in 0..h {
                for v in 0..w {
                    let a = plane[u * w + v];
                    let b = plane[((h - u) % h) * w + (w - v) % w].conj();
                    worst = worst.max((a - b).norm().as_f64());
                }
            }
        }
        worst
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("spectrum add", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn neg(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| -v).collect(),
            spatial: self.spatial,
        }
    }
}

fn plans<T: Scalar>(h: usize, w: usize) -> (Radix2Plan<T>, Radix2Plan<T>) {
    (Radix2Plan::new(h), Radix2Plan::new(w))
}

/// Applies the unnormalized 2-D transform in place to every `h x w` plane.
fn transform_planes<T: Scalar>(data: &mut [Complex<T>], h: usize, w: usize, inverse: bool) {
    let (col_plan, row_plan) = plans::<T>(h, w);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for plane in data.chunks_mut(h * w) {
        for row in plane.chunks_mut(w) {
            if inverse {
                row_plan.inverse(row);
            } else {
                row_plan.forward(row);
            }
        }
        for x in 0..w {
            for y in 0..h {
                col[y] = plane[y * w + x];
            }
            if inverse {
                col_plan.inverse(&mut col);
            } else {
                col_plan.forward(&mut col);
            }
            for y in 0..h {
                plane[y * w + x] = col[y];
            }
        }
    }
    let planes = data.len() / (h * w);
    counter::add_arith(planes * (h * row_plan.butterflies() + w * col_plan.butterflies()));
}

fn split_spatial(shape: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::invalid_shape(op, shape, "need at least two axes"));
    }
    let r = shape.len();
    let lead = shape[..r - 2].iter().product();
    Ok((lead, shape[r - 2], shape[r - 1]))
}

fn zero_embed<T: Scalar>(
    x: &[T],
    lead: usize,
    h: usize,
    w: usize,
    hf: usize,
    wf: usize,
) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); lead * hf * wf];
    for p in 0..lead {
        for y in 0..h {
            for xx in 0..w {
                buf[p * hf * wf + y * wf + xx] = Complex::new(x[(p * h + y) * w + xx], T::zero());
            }
        }
    }
    buf
}

/// Unnormalized forward transform over the last two axes.
pub fn fft2<T: Scalar>(x: &Tensor<T>) -> Result<Spectrum<T>> {
    let (lead, h, w) = split_spatial(x.shape(), "fft2")?;
    let (hf, wf) = (h.next_power_of_two(), w.next_power_of_two());
    let mut buf = zero_embed(x.data(), lead, h, w, hf, wf);
    transform_planes(&mut buf, hf, wf, false);
    let mut shape = x.shape().to_vec();
    let r = shape.len();
    shape[r - 2] = hf;
    shape[r - 1] = wf;
    Ok(Spectrum {
        shape,
        data: buf,
        spatial: (h, w),
    })
}

/// Normalized inverse, real part only, cropped to the recorded extents.
/// Returns the output together with the relative imaginary residue.
fn inverse_real<T: Scalar>(s: &Spectrum<T>) -> Result<(Tensor<T>, f64)> {
    let (lead, hf, wf) = split_spatial(&s.shape, "ifft2")?;
    if !hf.is_power_of_two() || !wf.is_power_of_two() {
        return Err(Error::invalid_shape(
            "ifft2",
            &s.shape,
            "frequency extents must be powers of two",
        ));
    }
    let (h, w) = s.spatial;
    let mut buf = s.data.clone();
    transform_planes(&mut buf, hf, wf, true);
    let norm = T::one() / T::from_usize(hf * wf);
    let mut out = Vec::with_capacity(lead * h * w);
    let mut max_im = 0.0f64;
    let mut max_re = 0.0f64;
    for p in 0..lead {
        for y in 0..h {
            for xx in 0..w {
                let v = buf[p * hf * wf + y * wf + xx] * norm;
                max_im = max_im.max(v.im.abs().as_f64());
                max_re = max_re.max(v.re.abs().as_f64());
                out.push(v.re);
            }
        }
    }
    let residue = max_im / max_re.max(1.0);
    Ok((Tensor::from_vec(&s.spatial_shape(), out)?, residue))
}

/// Inverse transform with `1/(h*w)` normalization. The imaginary part is
/// discarded; spectra whose imaginary residue exceeds [`HERMITIAN_REJECT`]
/// relative to the output scale are rejected.
pub fn ifft2<T: Scalar>(s: &Spectrum<T>) -> Result<Tensor<T>> {
    let (out, residue) = inverse_real(s)?;
    if residue.is_nan() || residue > HERMITIAN_REJECT {
        return Err(Error::NonHermitian {
            residue,
            limit: HERMITIAN_REJECT,
        });
    }
    Ok(out)
}

/// Real part of the normalized inverse. Equivalent to [`ifft2`] applied to
/// the Hermitian-symmetric part of `s`; used where a real per-bin gain may
/// break the symmetry.
pub fn ifft2_real_part<T: Scalar>(s: &Spectrum<T>) -> Result<Tensor<T>> {
    Ok(inverse_real(s)?.0)
}

/// Adjoint of [`fft2`] for a cotangent `g` on the spectrum: the real part of
/// the unnormalized inverse transform, cropped to the input extents.
pub fn fft2_backward<T: Scalar>(g: &Spectrum<T>) -> Result<Tensor<T>> {
    let (hf, wf) = g.freq_dims();
    let scale = T::from_usize(hf * wf);
    let (t, _) = inverse_real(g)?;
    Ok(t.scale(scale))
}

/// Adjoint of [`ifft2`] for a real cotangent `g`: `fft2(g) / (h*w)` on the
/// padded frequency grid of `like`.
pub fn ifft2_backward<T: Scalar>(g: &Tensor<T>, like: &Spectrum<T>) -> Result<Spectrum<T>> {
    if g.shape() != like.spatial_shape() {
        return Err(Error::shape(
            "ifft2_backward",
            g.shape(),
            &like.spatial_shape(),
        ));
    }
    let mut s = fft2(g)?;
    if s.shape != like.shape {
        return Err(Error::shape("ifft2_backward", &s.shape, &like.shape));
    }
    let (hf, wf) = like.freq_dims();
    let norm = T::one() / T::from_usize(hf * wf);
    for v in &mut s.data {
        *v *= norm;
    }
    Ok(s)
}

/// `a * conj(b)` elementwise.
pub fn mul_conj<T: Scalar>(a: &Spectrum<T>, b: &Spectrum<T>) -> Result<Spectrum<T>> {
    if a.shape != b.shape {
        return Err(Error::shape("mul_conj", &a.shape, &b.shape));
    }
    counter::add_arith(a.len() * 4);
    Ok(Spectrum {
        shape: a.shape.clone(),
        data: a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| x * y.conj())
            .collect(),
        spatial: a.spatial,
    })
}

/// Returns `(g * b, conj(g) * a)`, the cotangents of `a` and `b`.
pub fn mul_conj_backward<T: Scalar>(
    g: &Spectrum<T>,
    a: &Spectrum<T>,
    b: &Spectrum<T>,
) -> Result<(Spectrum<T>, Spectrum<T>)> {
    if g.shape != a.shape || a.shape != b.shape {
        return Err(Error::shape("mul_conj_backward", &g.shape, &a.shape));
    }
    let ga = g.data.iter().zip(&b.data).map(|(g, b)| g * b).collect();
    let gb = g
        .data
        .iter()
        .zip(&a.data)
        .map(|(g, a)| g.conj() * a)
        .collect();
    Ok((
        Spectrum {
            data: ga,
            ..g.clone()
        },
        Spectrum {
            data: gb,
            ..g.clone()
        },
    ))
}

fn check_broadcast<T: Scalar>(s: &Spectrum<T>, w: &Tensor<T>) -> Result<()> {
    let ws = w.shape();
    if ws.len() > s.shape.len() || s.shape[s.shape.len() - ws.len()..] != *ws {
        return Err(Error::shape("scale_spectrum", &s.shape, ws));
    }
    Ok(())
}

/// Scales each frequency bin by a real weight broadcast over leading axes.
/// The real and imaginary parts are scaled identically.
pub fn scale_spectrum<T: Scalar>(s: &Spectrum<T>, w: &Tensor<T>) -> Result<Spectrum<T>> {
    check_broadcast(s, w)?;
    let n = w.len();
    counter::add_arith(s.len() * 2);
    Ok(Spectrum {
        shape: s.shape.clone(),
        data: s
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v * w.data()[i % n])
            .collect(),
        spatial: s.spatial,
    })
}

/// Returns the cotangents of the spectrum and of the real weights.
pub fn scale_spectrum_backward<T: Scalar>(
    g: &Spectrum<T>,
    s: &Spectrum<T>,
    w: &Tensor<T>,
) -> Result<(Spectrum<T>, Tensor<T>)> {
    check_broadcast(s, w)?;
    let n = w.len();
    let mut dw = vec![T::zero(); n];
    let mut ds = Vec::with_capacity(s.len());
    for (i, (gv, sv)) in g.data.iter().zip(&s.data).enumerate() {
        let k = i % n;
        ds.push(gv * w.data()[k]);
        dw[k] += gv.re * sv.re + gv.im * sv.im;
    }
    Ok((
        Spectrum {
            data: ds,
            ..s.clone()
        },
        Tensor::from_vec(w.shape(), dw)?,
    ))
}

/// Mean complex magnitude over all bins.
pub fn complex_abs_mean<T: Scalar>(s: &Spectrum<T>) -> T {
    s.data.iter().map(|v| v.norm()).sum::<T>() / T::from_usize(s.len())
}

/// Cotangent of [`complex_abs_mean`]; bins with zero magnitude get the
/// subgradient 0.
pub fn complex_abs_mean_backward<T: Scalar>(g: T, s: &Spectrum<T>) -> Spectrum<T> {
    let k = g / T::from_usize(s.len());
    Spectrum {
        data: s
            .data
            .iter()
            .map(|v| {
                let m = v.norm();
                if m > T::zero() {
                    v * (k / m)
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            })
            .collect(),
        ..s.clone()
    }
}

/// `ifft2(fft2(a) * conj(fft2(b)))`.
pub fn correlate<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        return Err(Error::shape("correlate", a.shape(), b.shape()));
    }
    ifft2(&mul_conj(&fft2(a)?, &fft2(b)?)?)
}
