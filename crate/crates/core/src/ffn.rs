//! Discriminative frequency feed-forward block (DFFN) and the plain FFN.

use crate::error::{Error, Result};
use crate::exec::{Eager, Exec};
use crate::ops::ConvParams;
use crate::params::{self, join, Binder, Init, ParamSpec};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const DEFAULT_EXPANSION: usize = 2;

fn check_expansion(channels: usize, expansion: usize) -> Result<()> {
    if expansion == 0 || !(expansion * channels).is_multiple_of(2) {
        return Err(Error::arg(
            "ffn",
            format!("expanded channel count {expansion} x {channels} must be even and nonzero"),
        ));
    }
    Ok(())
}

fn ffn_specs(prefix: &str, channels: usize, expansion: usize) -> Result<Vec<ParamSpec>> {
    check_expansion(channels, expansion)?;
    let mut v = params::norm_specs(&join(prefix, "norm"), channels);
    v.extend(params::pointwise_specs(
        &join(prefix, "expand"),
        channels,
        expansion * channels,
        false,
    ));
    if expansion != 2 {
        v.extend(params::pointwise_specs(
            &join(prefix, "out_proj"),
            expansion * channels / 2,
            channels,
            false,
        ));
    }
    Ok(v)
}

fn ffn_count(channels: usize, expansion: usize) -> usize {
    let out = if expansion != 2 {
        expansion * channels / 2 * channels
    } else {
        0
    };
    2 * channels + expansion * channels * channels + out
}

#[derive(Clone, Debug)]
pub struct FfnParams<H> {
    pub norm_scale: H,
    pub norm_offset: H,
    /// 1x1, `C -> eC`.
    pub expand: ConvParams<H>,
    /// 1x1, `eC/2 -> C`; present only when `e != 2`.
    pub out_proj: Option<ConvParams<H>>,
}

impl<H> FfnParams<H> {
    pub fn specs(prefix: &str, channels: usize, expansion: usize) -> Result<Vec<ParamSpec>> {
        ffn_specs(prefix, channels, expansion)
    }

    pub fn count(channels: usize, expansion: usize) -> usize {
        ffn_count(channels, expansion)
    }

    pub fn bind<B: Binder<H> + ?Sized>(b: &B, prefix: &str) -> Result<Self> {
        let out_proj = match b.get_opt(&join(prefix, "out_proj.weight"))? {
            Some(_) => Some(ConvParams::bind(b, &join(prefix, "out_proj"))?),
            None => None,
        };
        Ok(Self {
            norm_scale: b.get(&join(prefix, "norm.scale"))?,
            norm_offset: b.get(&join(prefix, "norm.offset"))?,
            expand: ConvParams::bind(b, &join(prefix, "expand"))?,
            out_proj,
        })
    }
}

#[derive(Clone, Debug)]
pub struct DffnParams<H> {
    pub ffn: FfnParams<H>,
    /// Real per-bin gains `[eC, p, p]`, shared by every tile.
    pub quant_w: H,
    pub patch: usize,
}

impl<H> DffnParams<H> {
    pub fn specs(
        prefix: &str,
        channels: usize,
        expansion: usize,
        patch: usize,
    ) -> Result<Vec<ParamSpec>> {
        let mut v = ffn_specs(prefix, channels, expansion)?;
        v.push(ParamSpec::new(
            join(prefix, "quant_w"),
            &[expansion * channels, patch, patch],
            Init::Ones,
        ));
        Ok(v)
    }

    pub fn count(channels: usize, expansion: usize, patch: usize) -> usize {
        ffn_count(channels, expansion) + expansion * channels * patch * patch
    }

    pub fn bind<B: Binder<H> + ?Sized>(b: &B, prefix: &str, patch: usize) -> Result<Self> {
        if !patch.is_power_of_two() {
            return Err(Error::arg(
                "dffn",
                format!("patch {patch} is not a power of two"),
            ));
        }
        Ok(Self {
            ffn: FfnParams::bind(b, prefix)?,
            quant_w: b.get(&join(prefix, "quant_w"))?,
            patch,
        })
    }
}

/// Tiles `x1`, scales each tile spectrum by `w` and returns to the plane.
pub fn spectral_filter<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x1: &E::Real,
    w: &E::Real,
    patch: usize,
) -> Result<E::Real> {
    let (tiles, layout) = e.unfold(x1, patch)?;
    let spec = e.fft2(&tiles)?;
    let spec = e.scale_spectrum(&spec, w)?;
    let tiles = e.ifft2_real_part(&spec)?;
    e.fold(&tiles, &layout)
}

fn expand<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &FfnParams<E::Real>,
) -> Result<E::Real> {
    let n = e.layer_norm(x, &p.norm_scale, &p.norm_offset)?;
    e.conv_pointwise(&n, &p.expand)
}

fn contract<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    x2: &E::Real,
    p: &FfnParams<E::Real>,
) -> Result<E::Real> {
    let g = e.geglu(x2)?;
    let g = match &p.out_proj {
        Some(op) => e.conv_pointwise(&g, op)?,
        None => g,
    };
    e.add(x, &g)
}

/// `x + GEGLU(fold(ifft2(W * fft2(unfold(expand(norm(x)))))))`.
pub fn dffn<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &DffnParams<E::Real>,
) -> Result<E::Real> {
    let x1 = expand(e, x, &p.ffn)?;
    let x2 = spectral_filter(e, &x1, &p.quant_w, p.patch)?;
    contract(e, x, &x2, &p.ffn)
}

/// `x + GEGLU(expand(norm(x)))`.
pub fn ffn<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &FfnParams<E::Real>,
) -> Result<E::Real> {
    let x1 = expand(e, x, p)?;
    contract(e, x, &x1, p)
}

pub fn dffn_forward<T: Scalar>(x: &Tensor<T>, p: &DffnParams<Tensor<T>>) -> Result<Tensor<T>> {
    dffn(&mut Eager, x, p)
}

pub fn ffn_forward<T: Scalar>(x: &Tensor<T>, p: &FfnParams<Tensor<T>>) -> Result<Tensor<T>> {
    ffn(&mut Eager, x, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, FiniteDiffOptions};
    use crate::params::{materialize, ParameterStore};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store(c: usize, e: usize, seed: u64) -> ParameterStore<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        materialize(&DffnParams::<()>::specs("", c, e, 8).unwrap(), &mut rng).unwrap()
    }

    #[test]
    fn counts_match_declarations() {
        for (c, e) in [(4, 2), (4, 3), (6, 4), (16, 2)] {
            let n: usize = DffnParams::<()>::specs("d", c, e, 8)
                .unwrap()
                .iter()
                .map(ParamSpec::numel)
                .sum();
            assert_eq!(n, DffnParams::<()>::count(c, e, 8));
            let n: usize = FfnParams::<()>::specs("f", c, e)
                .unwrap()
                .iter()
                .map(ParamSpec::numel)
                .sum();
            assert_eq!(n, FfnParams::<()>::count(c, e));
        }
        assert!(FfnParams::<()>::specs("f", 3, 1).is_err());
    }

    #[test]
    fn unit_gains_reduce_to_plain_ffn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for e in [2, 3] {
            let s = store(4, e, 2);
            let dp = DffnParams::bind(&s, "", 8).unwrap();
            let x = Tensor::<f64>::uniform(&[2, 4, 12, 16], -1.0, 1.0, &mut rng).unwrap();
            let d = dffn_forward(&x, &dp).unwrap();
            let f = ffn_forward(&x, &dp.ffn).unwrap();
            assert!(d.max_abs_diff(&f).unwrap() < 1e-12);
        }
    }

    #[test]
    fn dc_only_gains_flatten_each_tile() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x1 = Tensor::<f64>::uniform(&[1, 2, 16, 16], -1.0, 1.0, &mut rng).unwrap();
        let mut w = Tensor::zeros(&[2, 8, 8]).unwrap();
        w.set(&[0, 0, 0], 1.0);
        w.set(&[1, 0, 0], 0.5);
        let x2 = spectral_filter(&mut Eager, &x1, &w, 8).unwrap();
        for c in 0..2 {
            for (ty, tx) in [(0, 0), (0, 8), (8, 0), (8, 8)] {
                let mean: f64 = (0..64)
                    .map(|i| x1.get(&[0, c, ty + i / 8, tx + i % 8]))
                    .sum::<f64>()
                    / 64.0;
                let gain = if c == 0 { 1.0 } else { 0.5 };
                for i in 0..64 {
                    assert!((x2.get(&[0, c, ty + i / 8, tx + i % 8]) - gain * mean).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_expansion_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for e in [2, 3] {
            let mut s = store(4, e, 5);
            s.get_mut("expand.weight").unwrap().data_mut().fill(0.0);
            let dp = DffnParams::bind(&s, "", 8).unwrap();
            let x = Tensor::<f64>::uniform(&[1, 4, 9, 9], -1.0, 1.0, &mut rng).unwrap();
            assert_eq!(dffn_forward(&x, &dp).unwrap(), x);
            assert_eq!(ffn_forward(&x, &dp.ffn).unwrap(), x);
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let s = store(4, 2, 6);
        let dp = DffnParams::bind(&s, "", 8).unwrap();
        assert!(dffn_forward(&Tensor::<f64>::zeros(&[1, 3, 8, 8]).unwrap(), &dp).is_err());
    }

    #[test]
    fn spectral_filter_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = Tensor::<f64>::uniform(&[3, 8, 8], -2.0, 2.0, &mut rng).unwrap();
        let a = Tensor::<f64>::uniform(&[1, 3, 16, 8], -1.0, 1.0, &mut rng).unwrap();
        let b = Tensor::<f64>::uniform(&[1, 3, 16, 8], -1.0, 1.0, &mut rng).unwrap();
        let f = |x: &Tensor<f64>| spectral_filter(&mut Eager, x, &w, 8).unwrap();
        let mix = a.scale(0.7).add(&b.scale(-1.3)).unwrap();
        let want = f(&a).scale(0.7).add(&f(&b).scale(-1.3)).unwrap();
        assert!(f(&mix).max_abs_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn bounded_gains_do_not_add_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = Tensor::<f64>::uniform(&[2, 8, 8], -1.0, 1.0, &mut rng).unwrap();
        let x1 = Tensor::<f64>::uniform(&[1, 2, 8, 8], -1.0, 1.0, &mut rng).unwrap();
        let x2 = spectral_filter(&mut Eager, &x1, &w, 8).unwrap();
        for (p1, p2) in x1.data().chunks(64).zip(x2.data().chunks(64)) {
            let e1: f64 = p1.iter().map(|v| v * v).sum();
            let e2: f64 = p2.iter().map(|v| v * v).sum();
            assert!(e2 <= e1 * (1.0 + 1e-5));
        }
    }

    #[test]
    fn residual_branch_is_linear_in_small_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = store(4, 2, 10);
        let fp = FfnParams::bind(&s, "").unwrap();
        let x0 = Tensor::<f64>::uniform(&[1, 4, 8, 8], -1.0, 1.0, &mut rng).unwrap();
        let d = Tensor::<f64>::uniform(&[1, 4, 8, 8], -1.0, 1.0, &mut rng).unwrap();
        let branch = |t: f64| {
            let x = x0.add(&d.scale(t)).unwrap();
            ffn_forward(&x, &fp).unwrap().sub(&x).unwrap()
        };
        let eps = 1e-3;
        let (r0, r1, r2) = (branch(0.0), branch(eps), branch(2.0 * eps));
        let second = r2.sub(&r1.scale(2.0)).unwrap().add(&r0).unwrap();
        let first = r2.sub(&r0).unwrap();
        let norm = |t: &Tensor<f64>| t.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm(&second) / norm(&first) < 1e-2);
    }

    #[test]
    fn quant_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = store(2, 2, 12);
        *s.get_mut("quant_w").unwrap() = Tensor::uniform(&[4, 8, 8], 0.2, 1.5, &mut rng).unwrap();
        let x = Tensor::<f64>::uniform(&[1, 2, 8, 16], -1.0, 1.0, &mut rng).unwrap();
        let r = Tensor::<f64>::uniform(&[1, 2, 8, 16], -1.0, 1.0, &mut rng).unwrap();
        let report = finite_diff_check(
            &s,
            |t, p| {
                let dp = DffnParams::bind(p, "", 8)?;
                let xv = t.constant(x.clone());
                let rv = t.constant(r.clone());
                let y = dffn(t, &xv, &dp)?;
                let y = t.mul(&y, &rv)?;
                t.sum(&y)
            },
            &FiniteDiffOptions::default(),
        )
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}
