//! Asymmetric encoder-decoder deblurring network.
//!
//! Encoder levels hold feed-forward blocks only (plus FSAS when placement is
//! `encoder_and_decoder`); decoder levels hold FSAS followed by the
//! feed-forward block. The restored image is `N(B) + B`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{fsas, FftGranularity, FsasParams};
use crate::error::{Error, Result};
use crate::exec::{Eager, Exec};
use crate::ffn::{dffn, ffn, DffnParams, FfnParams};
use crate::ops::ConvParams;
use crate::params::{self, materialize, Binder, Init, ParamSpec, ParameterStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FsasPlacement {
    #[default]
    DecoderOnly,
    EncoderAndDecoder,
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FfnVariant {
    #[default]
    Dffn,
    PlainFfn,
}

impl FsasPlacement {
    pub const ALL: [FsasPlacement; 3] = [
        FsasPlacement::None,
        FsasPlacement::DecoderOnly,
        FsasPlacement::EncoderAndDecoder,
    ];

    fn in_encoder(self) -> bool {
        self == FsasPlacement::EncoderAndDecoder
    }

    fn in_decoder(self) -> bool {
        self != FsasPlacement::None
    }
}

impl FfnVariant {
    pub const ALL: [FfnVariant; 2] = [FfnVariant::PlainFfn, FfnVariant::Dffn];
}

impl fmt::Display for FsasPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FsasPlacement::DecoderOnly => "decoder_only",
            FsasPlacement::EncoderAndDecoder => "encoder_and_decoder",
            FsasPlacement::None => "none",
        })
    }
}

impl FromStr for FsasPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decoder_only" => Ok(FsasPlacement::DecoderOnly),
            "encoder_and_decoder" => Ok(FsasPlacement::EncoderAndDecoder),
            "none" => Ok(FsasPlacement::None),
            _ => Err(Error::config(
                "fsas_placement",
                format!("`{s}` is not one of decoder_only, encoder_and_decoder, none"),
            )),
        }
    }
}

impl fmt::Display for FfnVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FfnVariant::Dffn => "dffn",
            FfnVariant::PlainFfn => "plain_ffn",
        })
    }
}

impl FromStr for FfnVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dffn" => Ok(FfnVariant::Dffn),
            "plain_ffn" => Ok(FfnVariant::PlainFfn),
            _ => Err(Error::config(
                "ffn_variant",
                format!("`{s}` is not one of dffn, plain_ffn"),
            )),
        }
    }
}

impl fmt::Display for FftGranularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FftGranularity::Patch => "patch",
            FftGranularity::FullPlane => "full_plane",
        })
    }
}

impl FromStr for FftGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patch" => Ok(FftGranularity::Patch),
            "full_plane" => Ok(FftGranularity::FullPlane),
            _ => Err(Error::config(
                "fft_granularity",
                format!("`{s}` is not one of patch, full_plane"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub scales: usize,
    pub enc_blocks: Vec<usize>,
    pub dec_blocks: Vec<usize>,
    pub base_channels: usize,
    pub fsas_placement: FsasPlacement,
    pub ffn_variant: FfnVariant,
    pub patch: usize,
    pub expansion: usize,
    pub fft_granularity: FftGranularity,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            scales: 3,
            enc_blocks: vec![2, 2, 2],
            dec_blocks: vec![2, 2, 2],
            base_channels: 16,
            fsas_placement: FsasPlacement::DecoderOnly,
            ffn_variant: FfnVariant::Dffn,
            patch: 8,
            expansion: 2,
            fft_granularity: FftGranularity::Patch,
        }
    }
}

pub(crate) fn parse_usize(field: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(field, format!("`{v}` is not a non-negative integer")))
}

fn parse_list(field: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| parse_usize(field, p)).collect()
}

fn join_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl NetworkConfig {
    /// One scale, one block per side, four channels.
    pub fn micro() -> Self {
        Self {
            scales: 1,
            enc_blocks: vec![1],
            dec_blocks: vec![1],
            base_channels: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales == 0 {
            return Err(Error::config("scales", "must be at least 1"));
        }
        for (field, blocks) in [
            ("enc_blocks", &self.enc_blocks),
            ("dec_blocks", &self.dec_blocks),
        ] {
            if blocks.len() != self.scales {
                return Err(Error::config(
                    field,
                    format!("has {} entries but scales is {}", blocks.len(), self.scales),
                ));
            }
            if blocks.contains(&0) {
                return Err(Error::config(field, "every level needs at least one block"));
            }
        }
        if self.base_channels == 0 || !self.base_channels.is_multiple_of(2) {
            return Err(Error::config(
                "base_channels",
                "must be even and at least 2",
            ));
        }
        if !self.patch.is_power_of_two() {
            return Err(Error::config("patch", "must be a power of two"));
        }
        if self.expansion == 0 || !(self.expansion * self.base_channels).is_multiple_of(2) {
            return Err(Error::config(
                "expansion",
                "expanded channel count must be even",
            ));
        }
        Ok(())
    }

    /// Channels at level `s`.
    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    /// Spatial extents are padded to a multiple of this.
    pub fn size_multiple(&self) -> usize {
        self.patch << (self.scales - 1)
    }

    pub const KEYS: [&'static str; 9] = [
        "scales",
        "enc_blocks",
        "dec_blocks",
        "base_channels",
        "fsas_placement",
        "ffn_variant",
        "patch",
        "expansion",
        "fft_granularity",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "scales" => self.scales = parse_usize(key, v)?,
            "enc_blocks" => self.enc_blocks = parse_list(key, v)?,
            "dec_blocks" => self.dec_blocks = parse_list(key, v)?,
            "base_channels" => self.base_channels = parse_usize(key, v)?,
            "fsas_placement" => self.fsas_placement = v.parse()?,
            "ffn_variant" => self.ffn_variant = v.parse()?,
            "patch" => self.patch = parse_usize(key, v)?,
            "expansion" => self.expansion = parse_usize(key, v)?,
            "fft_granularity" => self.fft_granularity = v.parse()?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scales", self.scales.to_string()),
            ("enc_blocks", join_list(&self.enc_blocks)),
            ("dec_blocks", join_list(&self.dec_blocks)),
            ("base_channels", self.base_channels.to_string()),
            ("fsas_placement", self.fsas_placement.to_string()),
            ("ffn_variant", self.ffn_variant.to_string()),
            ("patch", self.patch.to_string()),
            ("expansion", self.expansion.to_string()),
            ("fft_granularity", self.fft_granularity.to_string()),
        ]
    }

    fn block_specs(&self, prefix: &str, c: usize, with_fsas: bool) -> Result<Vec<ParamSpec>> {
        let mut v = Vec::new();
        if with_fsas {
            v.extend(FsasParams::<()>::specs(&params::join(prefix, "fsas"), c));
        }
        let fp = params::join(prefix, "ffn");
        v.extend(match self.ffn_variant {
            FfnVariant::Dffn => DffnParams::<()>::specs(&fp, c, self.expansion, self.patch)?,
            FfnVariant::PlainFfn => FfnParams::<()>::specs(&fp, c, self.expansion)?,
        });
        Ok(v)
    }

    /// Every parameter of the network, in execution order.
    pub fn specs(&self) -> Result<Vec<ParamSpec>> {
        self.validate()?;
        let c0 = self.base_channels;
        let mut v = params::pointwise_specs("intro.point", 3, c0, true);
        v.extend(params::depthwise_specs("intro.depth", c0, true));
        for s in 0..self.scales {
            let c = self.channels(s);
            for i in 0..self.enc_blocks[s] {
                v.extend(self.block_specs(
                    &format!("enc{s}.{i}"),
                    c,
                    self.fsas_placement.in_encoder(),
                )?);
            }
            if s + 1 < self.scales {
                v.extend(params::pointwise_specs(
                    &format!("down{s}"),
                    4 * c,
                    2 * c,
                    false,
                ));
            }
        }
        for s in (0..self.scales).rev() {
            let c = self.channels(s);
            if s + 1 < self.scales {
                v.extend(params::pointwise_specs(
                    &format!("up{s}"),
                    2 * c,
                    4 * c,
                    false,
                ));
                v.extend(params::pointwise_specs(
                    &format!("fuse{s}"),
                    2 * c,
                    c,
                    false,
                ));
            }
            for i in 0..self.dec_blocks[s] {
                v.extend(self.block_specs(
                    &format!("dec{s}.{i}"),
                    c,
                    self.fsas_placement.in_decoder(),
                )?);
            }
        }
        v.push(ParamSpec::new("out.weight", &[3, c0, 1, 1], Init::Zeros));
        v.push(ParamSpec::new("out.bias", &[3], Init::Zeros));
        Ok(v)
    }
}

/// Closed-form scalar parameter count of a network built from `cfg`.
pub fn param_count(cfg: &NetworkConfig) -> Result<usize> {
    cfg.validate()?;
    let (e, p) = (cfg.expansion, cfg.patch);
    let ffn = |c: usize| match cfg.ffn_variant {
        FfnVariant::Dffn => DffnParams::<()>::count(c, e, p),
        FfnVariant::PlainFfn => FfnParams::<()>::count(c, e),
    };
    let c0 = cfg.base_channels;
    let mut n = 14 * c0 + 3 * c0 + 3;
    for s in 0..cfg.scales {
        let c = cfg.channels(s);
        let enc_fsas = if cfg.fsas_placement.in_encoder() {
            FsasParams::<()>::count(c)
        } else {
            0
        };
        let dec_fsas = if cfg.fsas_placement.in_decoder() {
            FsasParams::<()>::count(c)
        } else {
            0
        };
        n += cfg.enc_blocks[s] * (ffn(c) + enc_fsas);
        n += cfg.dec_blocks[s] * (ffn(c) + dec_fsas);
        if s + 1 < cfg.scales {
            // down 4c -> 2c, up 2c -> 4c, fuse 2c -> c
            n += 8 * c * c + 8 * c * c + 2 * c * c;
        }
    }
    Ok(n)
}

#[derive(Clone, Debug)]
pub enum FfnBlock<H> {
    Dffn(DffnParams<H>),
    Plain(FfnParams<H>),
}

#[derive(Clone, Debug)]
pub struct BlockParams<H> {
    pub fsas: Option<FsasParams<H>>,
    pub ffn: FfnBlock<H>,
}

/// Network parameters bound to one execution backend.
#[derive(Clone, Debug)]
pub struct NetworkParams<H> {
    pub intro_point: ConvParams<H>,
    pub intro_depth: ConvParams<H>,
    pub enc: Vec<Vec<BlockParams<H>>>,
    pub down: Vec<ConvParams<H>>,
    pub up: Vec<ConvParams<H>>,
    pub fuse: Vec<ConvParams<H>>,
    pub dec: Vec<Vec<BlockParams<H>>>,
    pub out: ConvParams<H>,
}

fn bind_block<H, B: Binder<H> + ?Sized>(
    cfg: &NetworkConfig,
    b: &B,
    prefix: &str,
    with_fsas: bool,
) -> Result<BlockParams<H>> {
    let fsas = if with_fsas {
        Some(FsasParams::bind(
            b,
            &params::join(prefix, "fsas"),
            cfg.patch,
            cfg.fft_granularity,
        )?)
    } else {
        None
    };
    let fp = params::join(prefix, "ffn");
    let ffn = match cfg.ffn_variant {
        FfnVariant::Dffn => FfnBlock::Dffn(DffnParams::bind(b, &fp, cfg.patch)?),
        FfnVariant::PlainFfn => FfnBlock::Plain(FfnParams::bind(b, &fp)?),
    };
    Ok(BlockParams { fsas, ffn })
}

impl<H> NetworkParams<H> {
    pub fn bind<B: Binder<H> + ?Sized>(cfg: &NetworkConfig, b: &B) -> Result<Self> {
        cfg.validate()?;
        let levels = 0..cfg.scales;
        let enc = levels
            .clone()
            .map(|s| {
                (0..cfg.enc_blocks[s])
                    .map(|i| {
                        bind_block(
                            cfg,
                            b,
                            &format!("enc{s}.{i}"),
                            cfg.fsas_placement.in_encoder(),
                        )
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let dec = levels
            .clone()
            .map(|s| {
                (0..cfg.dec_blocks[s])
                    .map(|i| {
                        bind_block(
                            cfg,
                            b,
                            &format!("dec{s}.{i}"),
                            cfg.fsas_placement.in_decoder(),
                        )
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let inner = 0..cfg.scales - 1;
        Ok(Self {
            intro_point: ConvParams::bind(b, "intro.point")?,
            intro_depth: ConvParams::bind(b, "intro.depth")?,
            enc,
            down: inner
                .clone()
                .map(|s| ConvParams::bind(b, &format!("down{s}")))
                .collect::<Result<_>>()?,
            up: inner
                .clone()
                .map(|s| ConvParams::bind(b, &format!("up{s}")))
                .collect::<Result<_>>()?,
            fuse: inner
                .map(|s| ConvParams::bind(b, &format!("fuse{s}")))
                .collect::<Result<_>>()?,
            dec,
            out: ConvParams::bind(b, "out")?,
        })
    }
}

fn block<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    p: &BlockParams<E::Real>,
) -> Result<E::Real> {
    let x = match &p.fsas {
        Some(fp) => fsas(e, x, fp)?,
        None => x.clone(),
    };
    match &p.ffn {
        FfnBlock::Dffn(dp) => dffn(e, &x, dp),
        FfnBlock::Plain(fp) => ffn(e, &x, fp),
    }
}

/// Reflect-pads bottom/right by `pad_h`, `pad_w`, in several steps when the
/// padding exceeds what a single mirror can supply.
fn pad_to<T: Scalar, E: Exec<T>>(
    e: &mut E,
    x: &E::Real,
    pad_h: usize,
    pad_w: usize,
) -> Result<E::Real> {
    let mut x = x.clone();
    let (mut rh, mut rw) = (pad_h, pad_w);
    while rh > 0 || rw > 0 {
        let (_, _, h, w) = e.value(&x).dims4("network")?;
        let (sh, sw) = (rh.min(h.saturating_sub(1)), rw.min(w.saturating_sub(1)));
        if sh == 0 && sw == 0 {
            return Err(Error::invalid_shape(
                "network",
                e.value(&x).shape(),
                "extents of 1 cannot be padded",
            ));
        }
        x = e.reflect_pad(&x, sh, sw)?;
        rh -= sh;
        rw -= sw;
    }
    Ok(x)
}

/// `N(b) + b` for a `[B, 3, H, W]` input.
pub fn forward<T: Scalar, E: Exec<T>>(
    e: &mut E,
    cfg: &NetworkConfig,
    p: &NetworkParams<E::Real>,
    b: &E::Real,
) -> Result<E::Real> {
    let r = residual(e, cfg, p, b)?;
    e.add(&r, b)
}

/// The learned residual `N(b)`, cropped to the input extents.
pub fn residual<T: Scalar, E: Exec<T>>(
    e: &mut E,
    cfg: &NetworkConfig,
    p: &NetworkParams<E::Real>,
    b: &E::Real,
) -> Result<E::Real> {
    let (_, c, h, w) = e.value(b).dims4("network")?;
    if c != 3 {
        return Err(Error::invalid_shape(
            "network",
            e.value(b).shape(),
            "input must have 3 channels",
        ));
    }
    let m = cfg.size_multiple();
    let x = pad_to(e, b, h.div_ceil(m) * m - h, w.div_ceil(m) * m - w)?;
    let x = e.conv_pointwise(&x, &p.intro_point)?;
    let mut x = e.conv_depthwise3x3(&x, &p.intro_depth)?;

    let mut skips = Vec::with_capacity(cfg.scales);
    for s in 0..cfg.scales {
        for bp in &p.enc[s] {
            x = block(e, &x, bp)?;
        }
        if s + 1 < cfg.scales {
            skips.push(x.clone());
            let d = e.space_to_depth(&x)?;
            x = e.conv_pointwise(&d, &p.down[s])?;
        }
    }
    for s in (0..cfg.scales).rev() {
        if s + 1 < cfg.scales {
            let u = e.conv_pointwise(&x, &p.up[s])?;
            let u = e.depth_to_space(&u)?;
            let skip = skips.pop().expect("one skip per inner level");
            let cat = e.concat_channels(&[&u, &skip])?;
            x = e.conv_pointwise(&cat, &p.fuse[s])?;
        }
        for bp in &p.dec[s] {
            x = block(e, &x, bp)?;
        }
    }
    let r = e.conv_pointwise(&x, &p.out)?;
    e.crop(&r, h, w)
}

/// A network configuration with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub cfg: NetworkConfig,
    pub params: ParameterStore<T>,
}

impl<T: Scalar> Model<T> {
    /// Deterministic initialization from `seed`.
    pub fn build(cfg: NetworkConfig, seed: u64) -> Result<Self> {
        let specs = cfg.specs()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = materialize(&specs, &mut rng)?;
        Ok(Self { cfg, params })
    }

    pub fn from_parts(cfg: NetworkConfig, params: ParameterStore<T>) -> Result<Self> {
        let expected = cfg.specs()?;
        if expected.len() != params.len() {
            return Err(Error::config(
                "parameters",
                format!(
                    "expected {} tensors, found {}",
                    expected.len(),
                    params.len()
                ),
            ));
        }
        for spec in &expected {
            let t = params.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::shape("model parameters", &spec.shape, t.shape()));
            }
        }
        Ok(Self { cfg, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn forward(&self, b: &Tensor<T>) -> Result<Tensor<T>> {
        let p = NetworkParams::bind(&self.cfg, &self.params)?;
        forward(&mut Eager, &self.cfg, &p, b)
    }

    /// Adds uniform noise in `[-amplitude, amplitude]` to every parameter.
    /// Used to move away from the zero output projection before gradient
    /// checks, where it would otherwise zero every upstream gradient.
    pub fn jitter(&mut self, amplitude: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in self.params.iter_mut() {
            for v in t.data_mut() {
                *v += T::from_f64(rng.gen_range(-amplitude..=amplitude));
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            cfg: self.cfg.clone(),
            params: self.params.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(placement: FsasPlacement, variant: FfnVariant) -> NetworkConfig {
        NetworkConfig {
            scales: 2,
            enc_blocks: vec![1, 2],
            dec_blocks: vec![2, 1],
            base_channels: 4,
            fsas_placement: placement,
            ffn_variant: variant,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn closed_form_count_matches_enumeration() {
        let mut cfgs = vec![NetworkConfig::default(), NetworkConfig::micro()];
        for p in FsasPlacement::ALL {
            for v in FfnVariant::ALL {
                cfgs.push(cfg(p, v));
            }
        }
        let mut odd = NetworkConfig::micro();
        odd.expansion = 3;
        cfgs.push(odd);
        for c in cfgs {
            let m = Model::<f32>::build(c.clone(), 0).unwrap();
            assert_eq!(param_count(&c).unwrap(), m.num_params(), "{c:?}");
        }
    }

    #[test]
    fn encoder_fsas_adds_one_block_per_encoder_block() {
        let d = NetworkConfig::default();
        let both = NetworkConfig {
            fsas_placement: FsasPlacement::EncoderAndDecoder,
            ..d.clone()
        };
        let extra: usize = (0..d.scales)
            .map(|s| d.enc_blocks[s] * FsasParams::<()>::count(d.channels(s)))
            .sum();
        assert_eq!(
            param_count(&both).unwrap() - param_count(&d).unwrap(),
            extra
        );
    }

    #[test]
    fn placement_counts_strictly_increase() {
        let n: Vec<usize> = FsasPlacement::ALL
            .iter()
            .map(|&p| param_count(&cfg(p, FfnVariant::Dffn)).unwrap())
            .collect();
        assert!(n[0] < n[1] && n[1] < n[2]);
    }

    #[test]
    fn doubling_channels_quadruples_quadratic_terms() {
        // every count is a*C^2 + b*C + k with k = 3
        let c = |ch: usize| {
            param_count(&NetworkConfig {
                base_channels: ch,
                ..NetworkConfig::default()
            })
            .unwrap() as i64
        };
        let (n1, n2, n4) = (c(8) - 3, c(16) - 3, c(32) - 3);
        // n = a*C^2 + b*C fitted on two widths must predict the third
        let a = (n2 - 2 * n1) / 128;
        let b = (n1 - 64 * a) / 8;
        assert_eq!(n1, 64 * a + 8 * b);
        assert_eq!(n4, 1024 * a + 32 * b);
        // channel-to-channel 1x1 weights quadruple exactly
        let inner = |ch: usize| -> usize {
            NetworkConfig {
                base_channels: ch,
                ..NetworkConfig::default()
            }
            .specs()
            .unwrap()
            .iter()
            .filter(|s| s.shape.len() == 4 && s.shape[2] == 1 && s.shape[0] != 3 && s.shape[1] != 3)
            .map(ParamSpec::numel)
            .sum()
        };
        assert_eq!(inner(16), 4 * inner(8));
    }

    #[test]
    fn build_is_deterministic() {
        let a = Model::<f32>::build(NetworkConfig::micro(), 7).unwrap();
        let b = Model::<f32>::build(NetworkConfig::micro(), 7).unwrap();
        assert_eq!(a, b);
        let c = Model::<f32>::build(NetworkConfig::micro(), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_fields_are_named() {
        let c = NetworkConfig {
            base_channels: 5,
            ..Default::default()
        };
        assert!(
            matches!(Model::<f32>::build(c, 0), Err(Error::Config { field, .. }) if field == "base_channels")
        );
        let c = NetworkConfig {
            enc_blocks: vec![2, 2],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "enc_blocks"));
        let c = NetworkConfig {
            scales: 0,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config { field, .. }) if field == "scales"));
        assert!(NetworkConfig::default().set("bogus", "1").is_err());
    }

    #[test]
    fn fresh_model_is_identity() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::<f32>::build(NetworkConfig::default(), 3).unwrap();
        for (h, w) in [(31, 31), (32, 32), (65, 40)] {
            let b = Tensor::<f32>::uniform(&[1, 3, h, w], 0.0, 1.0, &mut rng).unwrap();
            assert_eq!(m.forward(&b).unwrap(), b);
        }
    }

    #[test]
    fn output_shape_follows_input() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = Model::<f32>::build(NetworkConfig::default(), 4).unwrap();
        m.jitter(0.05, 5);
        for (h, w) in [(31, 31), (32, 32), (65, 65), (5, 9)] {
            let b = Tensor::<f32>::uniform(&[2, 3, h, w], 0.0, 1.0, &mut rng).unwrap();
            let y = m.forward(&b).unwrap();
            assert_eq!(y.shape(), b.shape());
            assert!(y.all_finite());
            assert_eq!(y, m.forward(&b).unwrap());
        }
    }

    #[test]
    fn single_scale_smoke() {
        let mut m = Model::<f32>::build(NetworkConfig::micro(), 0).unwrap();
        m.jitter(0.1, 1);
        let y = m
            .forward(&Tensor::full(&[1, 3, 32, 32], 0.5).unwrap())
            .unwrap();
        assert_eq!(y.shape(), &[1, 3, 32, 32]);
    }

    #[test]
    fn rejects_non_rgb_input() {
        let m = Model::<f32>::build(NetworkConfig::micro(), 0).unwrap();
        assert!(m.forward(&Tensor::zeros(&[1, 1, 8, 8]).unwrap()).is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let c = cfg(FsasPlacement::EncoderAndDecoder, FfnVariant::PlainFfn);
        let mut d = NetworkConfig::default();
        for (k, v) in c.to_pairs() {
            d.set(k, &v).unwrap();
        }
        assert_eq!(c, d);
    }
}
