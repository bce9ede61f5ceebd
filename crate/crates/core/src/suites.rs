//! Randomized comparisons of the fast transforms and FSAS against direct
//! summation. Case `i` of a suite draws its inputs from `seed + i`, so a
//! failing case can be replayed from the reported seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attention::{fsas_parts, FftGranularity, FsasParams};
use crate::error::Result;
use crate::exec::Eager;
use crate::params::materialize;
use crate::scalar::Scalar;
use crate::spectral::{
    circular_cross_correlate_oracle, correlate, dft2_oracle, fft2, ifft2, Spectrum,
};
use crate::tensor::Tensor;

/// Largest power-of-two extent covered by the DFT suite.
pub const DFT_MAX_EXTENT: usize = 64;
pub const DFT_TOL: f64 = 1e-4;
pub const PARSEVAL_TOL: f64 = 1e-5;
pub const HERMITIAN_TOL: f64 = 1e-5;
pub const FSAS_MAP_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub max_err: f64,
    pub tol: f64,
    /// Seed of the worst case when it exceeds `tol`.
    pub failing_seed: Option<u64>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failing_seed.is_none()
    }
}

/// Round-trip and correlation tolerance of the working precision.
pub fn identity_tol<T: Scalar>() -> f64 {
    if T::BYTES >= 8 {
        1e-10
    } else {
        1e-5
    }
}

struct Tracker {
    name: &'static str,
    tol: f64,
    cases: usize,
    worst: f64,
    worst_seed: u64,
}

impl Tracker {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            cases: 0,
            worst: 0.0,
            worst_seed: 0,
        }
    }

    fn record(&mut self, err: f64, seed: u64) {
        self.cases += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if err > self.worst || self.cases == 1 {
            self.worst = err;
            self.worst_seed = seed;
        }
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            name: self.name,
            cases: self.cases,
            max_err: self.worst,
            tol: self.tol,
            failing_seed: (self.worst > self.tol).then_some(self.worst_seed),
        }
    }
}

fn normwise<T: Scalar>(got: &Tensor<T>, want: &Tensor<T>) -> Result<f64> {
    let scale = want.max_abs().as_f64();
    Ok(got.max_abs_diff(want)? / if scale > 0.0 { scale } else { 1.0 })
}

fn spectrum_normwise<T: Scalar>(got: &Spectrum<T>, want: &Spectrum<T>) -> f64 {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (g, w) in got.data().iter().zip(want.data()) {
        let d = (g - w).norm().as_f64();
        diff = diff.max(d);
        scale = scale.max(w.norm().as_f64());
    }
    diff / if scale > 0.0 { scale } else { 1.0 }
}

fn random<T: Scalar>(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
    Tensor::uniform(shape, -1.0, 1.0, rng)
}

/// `ifft2(F(a) conj F(b))` against the direct correlation sum on random 8x8 pairs.
pub fn convolution_theorem<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("convolution_theorem", identity_tol::<T>());
    for i in 0..cases {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let a = random::<T>(&[8, 8], &mut rng)?;
        let b = random::<T>(&[8, 8], &mut rng)?;
        t.record(
            normwise(
                &correlate(&a, &b)?,
                &circular_cross_correlate_oracle(&b, &a)?,
            )?,
            s,
        );
    }
    Ok(t.finish())
}

/// Every `(h, w)` with power-of-two extents up to [`DFT_MAX_EXTENT`].
pub fn dft_sizes() -> Vec<(usize, usize)> {
    let pows: Vec<usize> =
        std::iter::successors(Some(1usize), |&p| (p < DFT_MAX_EXTENT).then_some(p * 2)).collect();
    pows.iter()
        .flat_map(|&h| pows.iter().map(move |&w| (h, w)))
        .collect()
}

/// `fft2` against `dft2_oracle`: every power-of-two size once, then random
/// 8x8 planes up to `cases` in total.
pub fn dft<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("dft", DFT_TOL);
    let sizes = dft_sizes();
    for i in 0..cases.max(sizes.len()) {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let (h, w) = sizes.get(i).copied().unwrap_or((8, 8));
        let x = random::<T>(&[h, w], &mut rng)?;
        t.record(spectrum_normwise(&fft2(&x)?, &dft2_oracle(&x)?), s);
    }
    Ok(t.finish())
}

/// `ifft2(fft2(x)) == x`, including sizes that are zero-padded internally.
pub fn round_trip<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("round_trip", identity_tol::<T>());
    let shapes: [&[usize]; 4] = [&[8, 8], &[2, 3, 16, 32], &[5, 7], &[64, 64]];
    for i in 0..cases {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let x = random::<T>(shapes[i % shapes.len()], &mut rng)?;
        t.record(normwise(&ifft2(&fft2(&x)?)?, &x)?, s);
    }
    Ok(t.finish())
}

/// `sum |x|^2 == sum |F(x)|^2 / (h w)` on random 8x8 planes, relative.
pub fn parseval<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("parseval", PARSEVAL_TOL);
    for i in 0..cases {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let x = random::<T>(&[8, 8], &mut rng)?;
        let spatial: f64 = x.data().iter().map(|v| v.as_f64().powi(2)).sum();
        let freq: f64 = fft2(&x)?
            .data()
            .iter()
            .map(|c| c.norm_sqr().as_f64())
            .sum::<f64>()
            / 64.0;
        t.record((spatial - freq).abs() / spatial, s);
    }
    Ok(t.finish())
}

/// `S[u, v] == conj S[-u, -v]` for real inputs, relative to the largest bin.
pub fn hermitian<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("hermitian", HERMITIAN_TOL);
    for i in 0..cases {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let x = random::<T>(&[8, 8], &mut rng)?;
        let f = fft2(&x)?;
        let d = f.data();
        let scale = d.iter().map(|c| c.norm().as_f64()).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for u in 0..8 {
            for v in 0..8 {
                let mirror = d[((8 - u) % 8) * 8 + (8 - v) % 8].conj();
                worst = worst.max((d[u * 8 + v] - mirror).norm().as_f64());
            }
        }
        t.record(worst / scale, s);
    }
    Ok(t.finish())
}

/// Every per-patch, per-channel correlation map inside FSAS against the
/// direct correlation of the projected query and key tiles. Each map is
/// compared relative to its own largest entry.
pub fn fsas_maps<T: Scalar>(cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut t = Tracker::new("fsas_maps", FSAS_MAP_TOL);
    for i in 0..cases {
        let s = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let c = 1 + i % 4;
        let store = materialize::<T, _>(&FsasParams::<()>::specs("f", c), &mut rng)?;
        let p = FsasParams::bind(&store, "f", 8, FftGranularity::Patch)?;
        let (h, w) = [(8, 8), (16, 24), (21, 13)][i % 3];
        let x = random::<T>(&[1 + i % 2, c, h, w], &mut rng)?;
        let parts = fsas_parts(&mut Eager, &x, &p)?;
        let want = circular_cross_correlate_oracle(&parts.k_tiles, &parts.q_tiles)?;
        let mut worst = 0.0f64;
        for (g, o) in parts.corr.data().chunks(64).zip(want.data().chunks(64)) {
            let scale = o.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
            let diff = g
                .iter()
                .zip(o)
                .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
                .fold(0.0, f64::max);
            worst = worst.max(diff / if scale > 0.0 { scale } else { 1.0 });
        }
        t.record(worst, s);
    }
    Ok(t.finish())
}

/// All suites at `cases` cases each; the FSAS suite runs a tenth as many.
pub fn oracle_suites<T: Scalar>(cases: usize, seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        convolution_theorem::<T>(cases, seed)?,
        dft::<T>(cases, seed)?,
        round_trip::<T>(cases, seed)?,
        parseval::<T>(cases, seed)?,
        hermitian::<T>(cases, seed)?,
        fsas_maps::<T>(cases.div_ceil(10), seed)?,
    ])
}
