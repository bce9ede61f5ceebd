//! Frequency-domain self-attention (FSAS), the quadratic spatial attention
//! it replaces, and a windowed attention baseline.

use crate::counter;
use crate::error::{Error, Result};
use crate::exec::{Eager, Exec};
use crate::ops::{self, ConvParams, PatchLayout};
use crate::params::{self, join, Binder, ParamSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_PATCH: usize = 8;
pub const DEFAULT_TOKEN_CAP: usize = 4096;

/// Extent over which FSAS computes its correlation maps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FftGranularity {
    /// Non-overlapping `patch x patch` tiles.
    #[default]
    Patch,
    /// One transform over the whole feature plane.
    FullPlane,
}

#[derive(Clone, Debug)]
pub struct FsasParams<H> {
    /// 1x1, `C -> 3C`.
    pub qkv_point: ConvParams<H>,
    /// Depthwise 3x3 over `3C`.
    pub qkv_depth: ConvParams<H>,
    /// 1x1, `C -> C`.
    pub out_proj: ConvParams<H>,
    pub norm_scale: H,
    pub norm_offset: H,
    pub patch: usize,
    pub granularity: FftGranularity,
}

impl<H> FsasParams<H> {
    pub fn specs(prefix: &str, channels: usize) -> Vec<ParamSpec> {
        let mut v =
            params::pointwise_specs(&join(prefix, "qkv_point"), channels, 3 * channels, false);
        v.extend(params::depthwise_specs(
            &join(prefix, "qkv_depth"),
            3 * channels,
            false,
        ));
        v.extend(params::norm_specs(&join(prefix, "norm"), channels));
        v.extend(params::pointwise_specs(
            &join(prefix, "out_proj"),
            channels,
            channels,
            false,
        ));
        v
    }

    /// Scalar parameter count of one block with `channels` channels.
    pub fn count(channels: usize) -> usize {
        4 * channels * channels + 29 * channels
    }

    pub fn bind<B: Binder<H> + ?Sized>(
        b: &B,
        prefix: &str,
        patch: usize,
        granularity: FftGranularity,
    ) -> Result<Self> {
        if !patch.is_power_of_two() {
            return Err(Error::arg(
                "fsas",
                format!("patch {patch} is not a power of two"),
            ));
        }
        Ok(Self {
            qkv_point: ConvParams::bind(b, &join(prefix, "qkv_point"))?,
            qkv_depth: ConvParams::bind(b, &join(prefix, "qkv_depth"))?,
            out_proj: ConvParams::bind(b, &join(prefix, "out_proj"))?,
            norm_scale: b.get(&join(prefix, "norm.scale"))?,
            norm_offset: b.get(&join(prefix, "norm.offset"))?,
            patch,
            granularity,
        })
    }
}

/// Intermediate values of one FSAS evaluation.
#[derive(Clone, Debug)]
pub struct FsasParts<R> {
    /// Query tiles `[B, P, C, p, p]` (the plane itself for full-plane FFTs).
    pub q_tiles: R,
    pub k_tiles: R,
    /// Correlation maps in the same layout as `q_tiles`.
    pub corr: R,
    pub layout: Option<PatchLayout>,
    pub v_att: R,
    pub out: R,
}

fn project<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &FsasParams<E::Real>,
) -> Result<(E::Real, E::Real, E::Real)> {
    let c = e.value(x).dims4("fsas")?.1;
    let qkv = e.conv_pointwise(x, &p.qkv_point)?;
    let qkv = e.conv_depthwise3x3(&qkv, &p.qkv_depth)?;
    let mut parts = e.split_channels(&qkv, &[c, c, c])?.into_iter();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(q), Some(k), Some(v)) => Ok((q, k, v)),
        _ => unreachable!("split into three parts"),
    }
}

pub fn fsas_parts<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &FsasParams<E::Real>,
) -> Result<FsasParts<E::Real>> {
    let (q, k, v) = project(e, x, p)?;
    let (q_tiles, k_tiles, layout) = match p.granularity {
        FftGranularity::Patch => {
            let (qt, layout) = e.unfold(&q, p.patch)?;
            let (kt, _) = e.unfold(&k, p.patch)?;
            (qt, kt, Some(layout))
        }
        FftGranularity::FullPlane => (q, k, None),
    };
    let fq = e.fft2(&q_tiles)?;
    let fk = e.fft2(&k_tiles)?;
    let prod = e.mul_conj(&fq, &fk)?;
    let corr = e.ifft2(&prod)?;
    let a = match &layout {
        Some(l) => e.fold(&corr, l)?,
        None => corr.clone(),
    };
    let a = e.layer_norm(&a, &p.norm_scale, &p.norm_offset)?;
    let v_att = e.mul(&a, &v)?;
    let proj = e.conv_pointwise(&v_att, &p.out_proj)?;
    let out = e.add(x, &proj)?;
    Ok(FsasParts {
        q_tiles,
        k_tiles,
        corr,
        layout,
        v_att,
        out,
    })
}

/// `x + out_proj(layer_norm(A) * F_v)` where `A` holds the per-tile
/// correlations of the query and key projections.
pub fn fsas<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &FsasParams<E::Real>,
) -> Result<E::Real> {
    Ok(fsas_parts(e, x, p)?.out)
}

pub fn fsas_forward<T: Scalar>(x: &Tensor<T>, p: &FsasParams<Tensor<T>>) -> Result<Tensor<T>> {
    fsas(&mut Eager, x, p)
}

/// Projections shared with FSAS, used by the dot-product attention paths.
#[derive(Clone, Debug)]
pub struct SpatialAttnParams<T> {
    pub qkv_point: ConvParams<Tensor<T>>,
    pub qkv_depth: ConvParams<Tensor<T>>,
    pub patch: usize,
    /// Largest token count the quadratic paths accept.
    pub token_cap: usize,
}

impl<T: Scalar> SpatialAttnParams<T> {
    pub fn from_fsas(p: &FsasParams<Tensor<T>>) -> Self {
        Self {
            qkv_point: p.qkv_point.clone(),
            qkv_depth: p.qkv_depth.clone(),
            patch: p.patch,
            token_cap: DEFAULT_TOKEN_CAP,
        }
    }

    fn project(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let c = x.dims4("spatial attention")?.1;
        let qkv = ops::conv_pointwise(x, &self.qkv_point.weight, self.qkv_point.bias.as_ref())?;
        let qkv =
            ops::conv_depthwise3x3(&qkv, &self.qkv_depth.weight, self.qkv_depth.bias.as_ref())?;
        let mut parts = ops::split_channels(&qkv, &[c, c, c])?;
        let v = parts.pop().expect("three parts");
        let k = parts.pop().expect("three parts");
        let q = parts.pop().expect("three parts");
        Ok((q, k, v))
    }

    #[allow(clippy::type_complexity)]
    fn tokens(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>, PatchLayout)> {
        let (q, k, v) = self.project(x)?;
        let (qp, layout) = ops::unfold_patches(&q, self.patch)?;
        let (kp, _) = ops::unfold_patches(&k, self.patch)?;
        let (vp, _) = ops::unfold_patches(&v, self.patch)?;
        let n = layout.num_patches();
        if n > self.token_cap {
            return Err(Error::arg(
                "spatial_attention_oracle",
                format!("{n} tokens exceed the cap of {}", self.token_cap),
            ));
        }
        Ok((qp, kp, vp, layout))
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Softmax of `scores` in place.
fn softmax_row<T: Scalar>(scores: &mut [T]) {
    let m = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for s in scores.iter_mut() {
        *s = (*s - m).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Scaled dot-product attention over `n` tokens of length `d`, one row of
/// scores at a time. `q`, `k`, `v` are `[n, d]` row-major.
fn attend_rows<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    n: usize,
    d: usize,
    out: &mut [T],
    scores: &mut Vec<T>,
) {
    let scale = T::one() / T::from_usize(d).sqrt();
    scores.resize(n, T::zero());
    for i in 0..n {
        let qi = &q[i * d..(i + 1) * d];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(qi, &k[j * d..(j + 1) * d]) * scale;
        }
        softmax_row(scores);
        let oi = &mut out[i * d..(i + 1) * d];
        oi.iter_mut().for_each(|o| *o = T::zero());
        for (j, &s) in scores.iter().enumerate() {
            for (o, &vj) in oi.iter_mut().zip(&v[j * d..(j + 1) * d]) {
                *o += s * vj;
            }
        }
    }
    counter::add_token_pairs(n * n);
    counter::add_arith(n * n * (4 * d + 4));
}

/// `softmax(Q K^T / sqrt(C p p)) V` over patch tokens, folded back to the
/// plane. Cost is quadratic in the number of patches.
pub fn spatial_attention_oracle<T: Scalar>(
    x: &Tensor<T>,
    p: &SpatialAttnParams<T>,
) -> Result<Tensor<T>> {
    let (qp, kp, vp, layout) = p.tokens(x)?;
    let n = layout.num_patches();
    let d = layout.channels * layout.patch * layout.patch;
    let mut out = vec![T::zero(); qp.len()];
    let mut scores = Vec::new();
    for b in 0..layout.batch {
        let r = b * n * d..(b + 1) * n * d;
        attend_rows(
            &qp.data()[r.clone()],
            &kp.data()[r.clone()],
            &vp.data()[r.clone()],
            n,
            d,
            &mut out[r],
            &mut scores,
        );
    }
    ops::fold_patches(&Tensor::from_vec(&layout.patch_shape(), out)?, &layout)
}

/// The `[B, N, N]` attention weights of [`spatial_attention_oracle`].
pub fn spatial_attention_map<T: Scalar>(
    x: &Tensor<T>,
    p: &SpatialAttnParams<T>,
) -> Result<Tensor<T>> {
    let (qp, kp, _, layout) = p.tokens(x)?;
    let n = layout.num_patches();
    let d = layout.channels * layout.patch * layout.patch;
    let scale = T::one() / T::from_usize(d).sqrt();
    let mut out = Vec::with_capacity(layout.batch * n * n);
    for b in 0..layout.batch {
        let base = b * n * d;
        for i in 0..n {
            let qi = &qp.data()[base + i * d..base + (i + 1) * d];
            let mut row: Vec<T> = (0..n)
                .map(|j| dot(qi, &kp.data()[base + j * d..base + (j + 1) * d]) * scale)
                .collect();
            softmax_row(&mut row);
            out.extend(row);
        }
    }
    Tensor::from_vec(&[layout.batch, n, n], out)
}

/// Pixel-token attention (feature dim `C`) computed independently inside
/// each non-overlapping `window x window` block of already projected
/// `q`, `k`, `v`. The planes are reflect-padded to a multiple of the
/// window and the result cropped back.
pub fn window_attention_qkv<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    window: usize,
) -> Result<Tensor<T>> {
    let (b, c, h, w) = q.dims4("window_attention")?;
    if k.shape() != q.shape() || v.shape() != q.shape() {
        return Err(Error::shape("window_attention", q.shape(), k.shape()));
    }
    if window == 0 {
        return Err(Error::arg("window_attention", "window must be at least 1"));
    }
    let (hp, wp) = (h.div_ceil(window) * window, w.div_ceil(window) * window);
    let pad = |t: &Tensor<T>| {
        ops::reflect_pad(t, hp - h, wp - w).map_err(|_| {
            Error::invalid_shape(
                "window_attention",
                q.shape(),
                format!("window {window} is larger than the padded plane allows"),
            )
        })
    };
    let (q, k, v) = (pad(q)?, pad(k)?, pad(v)?);
    let n = window * window;
    let mut out = vec![T::zero(); q.len()];
    let (mut tq, mut tk, mut tv) = (
        vec![T::zero(); n * c],
        vec![T::zero(); n * c],
        vec![T::zero(); n * c],
    );
    let mut to = vec![T::zero(); n * c];
    let mut scores = Vec::new();
    let plane = hp * wp;
    for bi in 0..b {
        for wy in (0..hp).step_by(window) {
            for wx in (0..wp).step_by(window) {
                for (ti, (dy, dx)) in (0..window)
                    .flat_map(|dy| (0..window).map(move |dx| (dy, dx)))
                    .enumerate()
                {
                    for ci in 0..c {
                        let src = (bi * c + ci) * plane + (wy + dy) * wp + wx + dx;
                        tq[ti * c + ci] = q.data()[src];
                        tk[ti * c + ci] = k.data()[src];
                        tv[ti * c + ci] = v.data()[src];
                    }
                }
                attend_rows(&tq, &tk, &tv, n, c, &mut to, &mut scores);
                for (ti, (dy, dx)) in (0..window)
                    .flat_map(|dy| (0..window).map(move |dx| (dy, dx)))
                    .enumerate()
                {
                    for ci in 0..c {
                        out[(bi * c + ci) * plane + (wy + dy) * wp + wx + dx] = to[ti * c + ci];
                    }
                }
            }
        }
    }
    ops::crop(&Tensor::from_vec(&[b, c, hp, wp], out)?, h, w)
}

/// Projects `x` and applies [`window_attention_qkv`].
pub fn window_attention_forward<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    p: &SpatialAttnParams<T>,
) -> Result<Tensor<T>> {
    let (q, k, v) = p.project(x)?;
    window_attention_qkv(&q, &k, &v, window)
}
