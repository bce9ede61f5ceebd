//! Wall-clock and operation-count scaling of FSAS against quadratic and
//! windowed dot-product attention.

mod alloc;

use std::fmt::{self, Write as _};
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use freqdeblur_core::attention::{
    fsas_forward, spatial_attention_oracle, window_attention_forward, FftGranularity, FsasParams,
    SpatialAttnParams, DEFAULT_PATCH, DEFAULT_TOKEN_CAP,
};
use freqdeblur_core::counter;
use freqdeblur_core::params::materialize;
use freqdeblur_core::{Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use alloc::peak_bytes;

pub const CSV_HEADER: &str = "mechanism,n_pixels,window,median_ms,op_count,workset_bytes";
pub const MIN_WARMUPS: usize = 5;
pub const MIN_REPEATS: usize = 9;
pub const MIN_FIT_POINTS: usize = 4;
pub const DEFAULT_SIZES: [usize; 4] = [64, 128, 256, 512];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] freqdeblur_core::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Fsas,
    WindowAttention,
    QuadraticOracle,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [
        Mechanism::Fsas,
        Mechanism::WindowAttention,
        Mechanism::QuadraticOracle,
    ];
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Fsas => "fsas",
            Mechanism::WindowAttention => "window_attention",
            Mechanism::QuadraticOracle => "quadratic_oracle",
        })
    }
}

impl FromStr for Mechanism {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| BenchError::Invalid(format!("unknown mechanism `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub channels: usize,
    pub patch: usize,
    pub window: usize,
    pub warmups: usize,
    pub repeats: usize,
    pub seed: u64,
    pub token_cap: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            channels: 2,
            patch: DEFAULT_PATCH,
            window: 8,
            warmups: MIN_WARMUPS,
            repeats: MIN_REPEATS,
            seed: 0,
            token_cap: DEFAULT_TOKEN_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub mechanism: Mechanism,
    pub height: usize,
    pub width: usize,
    /// Patch size for FSAS and the oracle, window size for windowed attention.
    pub window: usize,
    pub median_ms: f64,
    /// Instrumented arithmetic count of one run.
    pub op_count: u64,
    pub token_pairs: u64,
    pub workset_bytes: usize,
}

impl BenchRow {
    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Skipped sizes and other remarks.
    pub notes: Vec<String>,
    pub cpu: String,
    pub precision: String,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{},{}",
                r.mechanism,
                r.n_pixels(),
                r.window,
                r.median_ms,
                r.op_count,
                r.workset_bytes
            );
        }
        s
    }

    pub fn rows_for(&self, m: Mechanism) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.mechanism == m)
    }

    pub fn merge(&mut self, other: BenchReport) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
        if self.cpu.is_empty() {
            self.cpu = other.cpu;
            self.precision = other.precision;
        }
    }
}

/// CPU model string from `/proc/cpuinfo`, or `unknown`.
pub fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into())
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median wall time in milliseconds over `repeats` runs after `warmups` discarded runs.
pub fn time_median(warmups: usize, repeats: usize, mut f: impl FnMut()) -> f64 {
    for _ in 0..warmups {
        f();
    }
    let mut t: Vec<f64> = (0..repeats)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    median(&mut t)
}

fn mechanism_params<T: Scalar>(cfg: &BenchConfig) -> Result<FsasParams<Tensor<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let store = materialize::<T, _>(&FsasParams::<()>::specs("attn", cfg.channels), &mut rng)?;
    Ok(FsasParams::bind(
        &store,
        "attn",
        cfg.patch,
        FftGranularity::Patch,
    )?)
}

/// Times `mechanism` at every `(H, W)` in `sizes`. Oracle sizes whose token
/// count exceeds `cfg.token_cap` are skipped with a note.
pub fn time_mechanism<T: Scalar>(
    mechanism: Mechanism,
    sizes: &[(usize, usize)],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.warmups < MIN_WARMUPS || cfg.repeats < MIN_REPEATS {
        return Err(BenchError::Invalid(format!(
            "need at least {MIN_WARMUPS} warmups and {MIN_REPEATS} repeats"
        )));
    }
    if cfg.channels == 0 {
        return Err(BenchError::Invalid("channels must be positive".into()));
    }
    let fp = mechanism_params::<T>(cfg)?;
    let sp = SpatialAttnParams {
        token_cap: cfg.token_cap,
        ..SpatialAttnParams::from_fsas(&fp)
    };
    let mut report = BenchReport {
        cpu: cpu_model(),
        precision: T::NAME.into(),
        ..Default::default()
    };
    let mut sorted = sizes.to_vec();
    sorted.sort_by_key(|&(h, w)| h * w);
    for (i, &(h, w)) in sorted.iter().enumerate() {
        if h == 0 || w == 0 {
            return Err(BenchError::Invalid(format!("empty size {h}x{w}")));
        }
        if mechanism == Mechanism::QuadraticOracle {
            let tokens = h.div_ceil(cfg.patch) * w.div_ceil(cfg.patch);
            if tokens > cfg.token_cap {
                report.notes.push(format!(
                    "{mechanism} at {h}x{w} skipped: {tokens} tokens exceed the cap of {}",
                    cfg.token_cap
                ));
                continue;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + i as u64));
        let x = Tensor::<T>::uniform(&[1, cfg.channels, h, w], -1.0, 1.0, &mut rng)?;
        let run = || -> freqdeblur_core::Result<Tensor<T>> {
            match mechanism {
                Mechanism::Fsas => fsas_forward(&x, &fp),
                Mechanism::WindowAttention => window_attention_forward(&x, cfg.window, &sp),
                Mechanism::QuadraticOracle => spatial_attention_oracle(&x, &sp),
            }
        };
        let ((out, counts), workset) = peak_bytes(|| counter::measure(run));
        out?;
        let median_ms = time_median(cfg.warmups, cfg.repeats, || {
            black_box(run().expect("checked above"));
        });
        report.rows.push(BenchRow {
            mechanism,
            height: h,
            width: w,
            window: if mechanism == Mechanism::WindowAttention {
                cfg.window
            } else {
                cfg.patch
            },
            median_ms,
            op_count: counts.arith,
            token_pairs: counts.token_pairs,
            workset_bytes: workset,
        });
    }
    Ok(report)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < MIN_FIT_POINTS {
        return Err(BenchError::Invalid(format!(
            "slope fit needs at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(BenchError::Invalid(
            "slope fit needs positive values".into(),
        ));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(BenchError::Invalid("slope fit needs distinct sizes".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Log-log slope of median time against pixel count, per mechanism present in `report`.
pub fn fit_slope(report: &BenchReport) -> Result<Vec<(Mechanism, f64)>> {
    let mut out = Vec::new();
    for m in Mechanism::ALL {
        let pts: Vec<(f64, f64)> = report
            .rows_for(m)
            .map(|r| (r.n_pixels() as f64, r.median_ms))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let slope = loglog_slope(&pts).map_err(|e| BenchError::Invalid(format!("{m}: {e}")))?;
        out.push((m, slope));
    }
    Ok(out)
}

/// Square sizes `s x s` for each `s`.
pub fn square_sizes(sides: &[usize]) -> Vec<(usize, usize)> {
    sides.iter().map(|&s| (s, s)).collect()
}
