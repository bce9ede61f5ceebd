//! Execution backends.
//!
//! Network blocks are written once against [`Exec`]. [`Eager`] evaluates
//! kernels directly on tensors; [`crate::autodiff::Tape`] evaluates the same
//! kernels and records them for reverse-mode differentiation.

use crate::error::Result;
use crate::ops::{self, ConvParams, PatchLayout};
use crate::scalar::Scalar;
use crate::spectral::{self, Spectrum};
use crate::tensor::Tensor;

pub trait Exec<T: Scalar> {
    /// Handle to a real tensor value.
    type Real: Clone;
    /// Handle to a complex spectrum value.
    type Spec: Clone;

    fn value<'a>(&'a self, x: &'a Self::Real) -> &'a Tensor<T>;
    fn spec_value<'a>(&'a self, s: &'a Self::Spec) -> &'a Spectrum<T>;

    /// Introduces a value that is not differentiated.
    fn constant(&mut self, t: Tensor<T>) -> Self::Real;

    fn conv_pointwise(&mut self, x: &Self::Real, p: &ConvParams<Self::Real>) -> Result<Self::Real>;
    fn conv_depthwise3x3(
        &mut self,
        x: &Self::Real,
        p: &ConvParams<Self::Real>,
    ) -> Result<Self::Real>;
    fn layer_norm(
        &mut self,
        x: &Self::Real,
        scale: &Self::Real,
        offset: &Self::Real,
    ) -> Result<Self::Real>;
    fn geglu(&mut self, x: &Self::Real) -> Result<Self::Real>;
    /// Softmax over the last axis.
    fn softmax(&mut self, x: &Self::Real) -> Result<Self::Real>;

    fn unfold(&mut self, x: &Self::Real, patch: usize) -> Result<(Self::Real, PatchLayout)>;
    fn fold(&mut self, x: &Self::Real, layout: &PatchLayout) -> Result<Self::Real>;
    fn reflect_pad(&mut self, x: &Self::Real, pad_h: usize, pad_w: usize) -> Result<Self::Real>;
    fn crop(&mut self, x: &Self::Real, h: usize, w: usize) -> Result<Self::Real>;
    fn space_to_depth(&mut self, x: &Self::Real) -> Result<Self::Real>;
    fn depth_to_space(&mut self, x: &Self::Real) -> Result<Self::Real>;
    fn concat_channels(&mut self, parts: &[&Self::Real]) -> Result<Self::Real>;
    fn split_channels(&mut self, x: &Self::Real, sizes: &[usize]) -> Result<Vec<Self::Real>>;

    fn add(&mut self, a: &Self::Real, b: &Self::Real) -> Result<Self::Real>;
    fn sub(&mut self, a: &Self::Real, b: &Self::Real) -> Result<Self::Real>;
    fn mul(&mut self, a: &Self::Real, b: &Self::Real) -> Result<Self::Real>;
    fn scale(&mut self, x: &Self::Real, c: T) -> Result<Self::Real>;
    /// Sum of all elements, shape `[1]`.
    fn sum(&mut self, x: &Self::Real) -> Result<Self::Real>;
    /// Mean absolute value, shape `[1]`.
    fn l1_mean(&mut self, x: &Self::Real) -> Result<Self::Real>;

    fn fft2(&mut self, x: &Self::Real) -> Result<Self::Spec>;
    fn ifft2(&mut self, s: &Self::Spec) -> Result<Self::Real>;
    /// Real part of the inverse, without the Hermitian check.
    fn ifft2_real_part(&mut self, s: &Self::Spec) -> Result<Self::Real>;
    fn mul_conj(&mut self, a: &Self::Spec, b: &Self::Spec) -> Result<Self::Spec>;
    fn scale_spectrum(&mut self, s: &Self::Spec, w: &Self::Real) -> Result<Self::Spec>;
    /// Mean complex magnitude, shape `[1]`.
    fn complex_abs_mean(&mut self, s: &Self::Spec) -> Result<Self::Real>;
}

/// Direct evaluation with no recording.
#[derive(Clone, Copy, Debug, Default)]
pub struct Eager;

pub(crate) fn l1_mean_value<T: Scalar>(x: &Tensor<T>) -> T {
    x.data().iter().map(|v| v.abs()).sum::<T>() / T::from_usize(x.len())
}

impl<T: Scalar> Exec<T> for Eager {
    type Real = Tensor<T>;
    type Spec = Spectrum<T>;

    fn value<'a>(&'a self, x: &'a Tensor<T>) -> &'a Tensor<T> {
        x
    }

    fn spec_value<'a>(&'a self, s: &'a Spectrum<T>) -> &'a Spectrum<T> {
        s
    }

    fn constant(&mut self, t: Tensor<T>) -> Tensor<T> {
        t
    }

    fn conv_pointwise(&mut self, x: &Tensor<T>, p: &ConvParams<Tensor<T>>) -> Result<Tensor<T>> {
        ops::conv_pointwise(x, &p.weight, p.bias.as_ref())
    }

    fn conv_depthwise3x3(&mut self, x: &Tensor<T>, p: &ConvParams<Tensor<T>>) -> Result<Tensor<T>> {
        ops::conv_depthwise3x3(x, &p.weight, p.bias.as_ref())
    }

    fn layer_norm(
        &mut self,
        x: &Tensor<T>,
        scale: &Tensor<T>,
        offset: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        ops::layer_norm(x, scale, offset)
    }

    fn geglu(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::geglu(x)
    }

    fn softmax(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::softmax(x)
    }

    fn unfold(&mut self, x: &Tensor<T>, patch: usize) -> Result<(Tensor<T>, PatchLayout)> {
        ops::unfold_patches(x, patch)
    }

    fn fold(&mut self, x: &Tensor<T>, layout: &PatchLayout) -> Result<Tensor<T>> {
        ops::fold_patches(x, layout)
    }

    fn reflect_pad(&mut self, x: &Tensor<T>, pad_h: usize, pad_w: usize) -> Result<Tensor<T>> {
        ops::reflect_pad(x, pad_h, pad_w)
    }

    fn crop(&mut self, x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
        ops::crop(x, h, w)
    }

    fn space_to_depth(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::space_to_depth(x)
    }

    fn depth_to_space(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        ops::depth_to_space(x)
    }

    fn concat_channels(&mut self, parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
        ops::concat_channels(parts)
    }

    fn split_channels(&mut self, x: &Tensor<T>, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
        ops::split_channels(x, sizes)
    }

    fn add(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.add(b)
    }

    fn sub(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.sub(b)
    }

    fn mul(&mut self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        a.mul(b)
    }

    fn scale(&mut self, x: &Tensor<T>, c: T) -> Result<Tensor<T>> {
        Ok(x.scale(c))
    }

    fn sum(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Tensor::scalar(x.sum()))
    }

    fn l1_mean(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Tensor::scalar(l1_mean_value(x)))
    }

    fn fft2(&mut self, x: &Tensor<T>) -> Result<Spectrum<T>> {
        spectral::fft2(x)
    }

    fn ifft2(&mut self, s: &Spectrum<T>) -> Result<Tensor<T>> {
        spectral::ifft2(s)
    }

    fn ifft2_real_part(&mut self, s: &Spectrum<T>) -> Result<Tensor<T>> {
        spectral::ifft2_real_part(s)
    }

    fn mul_conj(&mut self, a: &Spectrum<T>, b: &Spectrum<T>) -> Result<Spectrum<T>> {
        spectral::mul_conj(a, b)
    }

    fn scale_spectrum(&mut self, s: &Spectrum<T>, w: &Tensor<T>) -> Result<Spectrum<T>> {
        spectral::scale_spectrum(s, w)
    }

    fn complex_abs_mean(&mut self, s: &Spectrum<T>) -> Result<Tensor<T>> {
        Ok(Tensor::scalar(spectral::complex_abs_mean(s)))
    }
}
