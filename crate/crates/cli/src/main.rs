//! `freqdeblur`: oracle suites, gradient checks, training, inference,
//! evaluation and benchmarks from one binary.
//!
//! Exit status is 0 on success, 1 when a check fails or a command hits a
//! runtime error, and 2 on usage errors.

mod config;
mod pairs;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use freqdeblur_bench::{
    fit_slope, square_sizes, time_mechanism, BenchConfig, BenchReport, Mechanism,
};
use freqdeblur_core::autodiff::FiniteDiffOptions;
use freqdeblur_core::dataio::{
    load_image, load_model, psnr, save_image, save_model, ssim, synth_pairs, write_atomic,
    Checkpoint, EntryData, ImageSample,
};
use freqdeblur_core::network::{Model, NetworkConfig};
use freqdeblur_core::training::train_loop;
use freqdeblur_core::{suites, verify, Scalar};

use config::CliConfig;

#[derive(Parser, Debug)]
#[command(
    name = "freqdeblur",
    version,
    about = "Frequency-domain attention deblurring toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// key=value config file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key (repeatable); wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// FFT, correlation and FSAS oracle suites.
    Oracle {
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        cases: u64,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Central finite differences over every block and the configured network (64-bit).
    /// The network defaults to the one-scale micro configuration.
    Gradcheck {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Side of the square network input.
        #[arg(long, default_value_t = 16)]
        size: usize,
        /// Channels and side used for the per-block checks.
        #[arg(long, default_value_t = 4)]
        block_channels: usize,
        #[arg(long, default_value_t = 8)]
        block_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Debug: negate the adjoint of this op, which must make the check fail.
        #[arg(long, value_name = "OP")]
        corrupt_adjoint: Option<String>,
    },
    /// Build a freshly initialized model and write it as a checkpoint.
    Init {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Precision::F32)]
        precision: Precision,
    },
    /// Train on a pair folder (`blur/` and `sharp/` with matching names).
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV; defaults to the checkpoint path with a `.csv` extension.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Precision::F32)]
        precision: Precision,
    },
    /// Restore one image.
    Deblur {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean PSNR and SSIM of restored pairs against their sharp targets.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Write synthetic blur pairs in the pair folder layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Time FSAS, windowed attention and the quadratic oracle over square sizes.
    Bench {
        /// Comma-separated square sides.
        #[arg(long, value_delimiter = ',', default_values_t = freqdeblur_bench::DEFAULT_SIZES)]
        sizes: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [Mechanism::Fsas, Mechanism::WindowAttention, Mechanism::QuadraticOracle])]
        mechanisms: Vec<Mechanism>,
        #[arg(long, value_enum, default_value_t = Precision::F32)]
        precision: Precision,
        #[arg(long, default_value_t = BenchConfig::default().channels)]
        channels: usize,
        #[arg(long, default_value_t = BenchConfig::default().repeats)]
        repeats: usize,
        #[arg(long, default_value_t = BenchConfig::default().token_cap)]
        token_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "usage error: {e:#}"),
            CliError::Runtime(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

type CmdResult = Result<bool, CliError>;

fn usage(e: anyhow::Error) -> CliError {
    CliError::Usage(e)
}

fn load_config(args: &ConfigArgs) -> Result<CliConfig, CliError> {
    load_config_over(CliConfig::default(), args)
}

fn load_config_over(base: CliConfig, args: &ConfigArgs) -> Result<CliConfig, CliError> {
    if let Some(p) = &args.config {
        if !p.is_file() {
            return Err(usage(anyhow!("config file {} not found", p.display())));
        }
    }
    let cfg = CliConfig::load_over(base, args.config.as_deref(), &args.set).map_err(usage)?;
    println!("# effective config");
    print!("{}", cfg.to_text());
    Ok(cfg)
}

fn cmd_oracle(cases: usize, precision: Precision, seed: u64) -> CmdResult {
    let outcomes = match precision {
        Precision::F32 => suites::oracle_suites::<f32>(cases, seed)?,
        Precision::F64 => suites::oracle_suites::<f64>(cases, seed)?,
    };
    println!(
        "{:<22} {:>6} {:>12} {:>10}  status",
        "suite", "cases", "max_rel_err", "tol"
    );
    let mut ok = true;
    for o in &outcomes {
        let status = match o.failing_seed {
            None => "ok".to_string(),
            Some(s) => format!("FAIL (seed {s})"),
        };
        println!(
            "{:<22} {:>6} {:>12.3e} {:>10.0e}  {status}",
            o.name, o.cases, o.max_err, o.tol
        );
        ok &= o.passed();
    }
    Ok(ok)
}

fn cmd_gradcheck(
    cfg: &CliConfig,
    size: usize,
    block_channels: usize,
    block_size: usize,
    seed: u64,
    corrupt: Option<String>,
) -> CmdResult {
    let opts = FiniteDiffOptions {
        corrupt_op: corrupt,
        ..Default::default()
    };
    let mut results = verify::block_suite(block_channels, block_size, seed, &opts)?;
    results.push(verify::network_check(&cfg.net, size, seed, &opts)?);
    let mut ok = true;
    for r in &results {
        println!("== {} ==", r.block);
        print!("{}", r.report);
        for f in r.report.failures() {
            println!(
                "FAIL {}: parameter {} max_rel_err {:.3e} > {:.0e}",
                r.block, f.name, f.max_rel_err, r.report.tol
            );
        }
        ok &= r.report.passed();
    }
    Ok(ok)
}

fn cmd_init(cfg: &CliConfig, out: &Path, precision: Precision) -> CmdResult {
    match precision {
        Precision::F32 => save_model(&Model::<f32>::build(cfg.net.clone(), cfg.train.seed)?, out)?,
        Precision::F64 => save_model(&Model::<f64>::build(cfg.net.clone(), cfg.train.seed)?, out)?,
    }
    println!("wrote {}", out.display());
    Ok(true)
}

fn train_typed<T: Scalar>(cfg: &CliConfig, data: &Path, out: &Path, metrics: &Path) -> CmdResult {
    let samples: Vec<ImageSample<T>> = pairs::load_pairs(data)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let mut model = Model::<T>::build(cfg.net.clone(), cfg.train.seed)?;
    println!(
        "{} pairs, {} parameters ({})",
        samples.len(),
        model.num_params(),
        T::NAME
    );
    let every = cfg.train.val_every;
    let log = train_loop(&mut model, &samples, &cfg.train, |r| {
        if let Some(p) = r.psnr {
            println!(
                "step {:>6}  lr {:.3e}  loss {:.6}  val psnr {:.3}",
                r.step, r.lr, r.loss, p
            );
        } else if r.step % every == 0 {
            println!("step {:>6}  lr {:.3e}  loss {:.6}", r.step, r.lr, r.loss);
        }
    })?;
    if let Some(p) = log.val_input_psnr {
        println!("held-out input psnr {p:.3}");
    }
    write_atomic(metrics, log.to_csv().as_bytes())?;
    save_model(&model, out)?;
    println!("wrote {} and {}", out.display(), metrics.display());
    Ok(true)
}

enum AnyModel {
    F32(Model<f32>),
    F64(Model<f64>),
}

fn load_any(path: &Path) -> anyhow::Result<AnyModel> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let wide = ck
        .entries
        .iter()
        .any(|e| matches!(e.data, EntryData::F64(_)));
    Ok(if wide {
        AnyModel::F64(load_model(path)?)
    } else {
        AnyModel::F32(load_model(path)?)
    })
}

fn deblur_typed<T: Scalar>(model: &Model<T>, input: &Path, out: &Path) -> anyhow::Result<()> {
    let x = load_image::<T>(input)?;
    let s = x.shape().to_vec();
    let y = model.forward(&x.reshape(&[1, s[0], s[1], s[2]])?)?;
    save_image(out, &y.reshape(&s)?)?;
    Ok(())
}

fn cmd_deblur(ckpt: &Path, input: &Path, out: &Path) -> CmdResult {
    match load_any(ckpt)? {
        AnyModel::F32(m) => deblur_typed(&m, input, out)?,
        AnyModel::F64(m) => deblur_typed(&m, input, out)?,
    }
    println!("wrote {}", out.display());
    Ok(true)
}

fn fmt_db(v: f64) -> String {
    if v.is_infinite() {
        "INF".into()
    } else {
        format!("{v:.3}")
    }
}

fn eval_typed<T: Scalar>(model: &Model<T>, dir: &Path) -> anyhow::Result<()> {
    let samples = pairs::load_pairs::<T>(dir)?;
    let (mut p_in, mut p_out, mut s_in, mut s_out) = (0.0, 0.0, 0.0, 0.0);
    for (name, s) in &samples {
        let sh = s.blurred.shape().to_vec();
        let y = model
            .forward(&s.blurred.clone().reshape(&[1, sh[0], sh[1], sh[2]])?)?
            .reshape(&sh)?
            .map(|v| v.clamp(T::zero(), T::one()));
        let (pi, po) = (psnr(&s.blurred, &s.sharp, 1.0)?, psnr(&y, &s.sharp, 1.0)?);
        let (si, so) = (ssim(&s.blurred, &s.sharp)?, ssim(&y, &s.sharp)?);
        println!(
            "{name}: psnr {} -> {}  ssim {si:.4} -> {so:.4}",
            fmt_db(pi),
            fmt_db(po)
        );
        p_in += pi;
        p_out += po;
        s_in += si;
        s_out += so;
    }
    let n = samples.len() as f64;
    println!("mean input psnr {}  ssim {:.4}", fmt_db(p_in / n), s_in / n);
    println!("mean psnr {}", fmt_db(p_out / n));
    println!("mean ssim {:.4}", s_out / n);
    Ok(())
}

fn cmd_eval(ckpt: &Path, dir: &Path) -> CmdResult {
    match load_any(ckpt)? {
        AnyModel::F32(m) => eval_typed(&m, dir)?,
        AnyModel::F64(m) => eval_typed(&m, dir)?,
    }
    Ok(true)
}

fn cmd_synth(out: &Path, n: usize, size: usize, seed: u64) -> CmdResult {
    let samples = synth_pairs::<f64>(n, size, seed)?;
    pairs::save_pairs(out, &samples)?;
    println!("wrote {n} pairs of {size}x{size} to {}", out.display());
    Ok(true)
}

fn bench_typed<T: Scalar>(
    mechs: &[Mechanism],
    sizes: &[(usize, usize)],
    cfg: &BenchConfig,
) -> anyhow::Result<BenchReport> {
    let mut report = BenchReport::default();
    for &m in mechs {
        report.merge(time_mechanism::<T>(m, sizes, cfg)?);
    }
    Ok(report)
}

fn cmd_bench(
    sides: &[usize],
    out: &Path,
    mechs: &[Mechanism],
    precision: Precision,
    cfg: &BenchConfig,
) -> CmdResult {
    if sides.is_empty() || sides.contains(&0) {
        return Err(usage(anyhow!("--sizes needs positive sides")));
    }
    let sizes = square_sizes(sides);
    let report = match precision {
        Precision::F32 => bench_typed::<f32>(mechs, &sizes, cfg)?,
        Precision::F64 => bench_typed::<f64>(mechs, &sizes, cfg)?,
    };
    write_atomic(out, report.to_csv().as_bytes())?;
    println!("cpu: {}  precision: {}", report.cpu, report.precision);
    for r in &report.rows {
        println!(
            "{:<18} {:>4}x{:<4} {:>10.3} ms  ops {:>12}  workset {:>10} B",
            r.mechanism.to_string(),
            r.height,
            r.width,
            r.median_ms,
            r.op_count,
            r.workset_bytes
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    match fit_slope(&report) {
        Ok(slopes) => {
            for (m, s) in slopes {
                println!("log-log slope {m}: {s:.3}");
            }
        }
        Err(e) => println!("slopes not fitted: {e}"),
    }
    println!("wrote {}", out.display());
    Ok(true)
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Oracle {
            cases,
            precision,
            seed,
        } => cmd_oracle(cases as usize, precision, seed),
        Command::Gradcheck {
            cfg,
            size,
            block_channels,
            block_size,
            seed,
            corrupt_adjoint,
        } => {
            let base = CliConfig {
                net: NetworkConfig::micro(),
                ..Default::default()
            };
            let cfg = load_config_over(base, &cfg)?;
            cmd_gradcheck(
                &cfg,
                size,
                block_channels,
                block_size,
                seed,
                corrupt_adjoint,
            )
        }
        Command::Init {
            cfg,
            out,
            precision,
        } => cmd_init(&load_config(&cfg)?, &out, precision),
        Command::Train {
            cfg,
            data,
            out,
            metrics,
            precision,
        } => {
            let cfg = load_config(&cfg)?;
            let metrics = metrics.unwrap_or_else(|| out.with_extension("csv"));
            match precision {
                Precision::F32 => train_typed::<f32>(&cfg, &data, &out, &metrics),
                Precision::F64 => train_typed::<f64>(&cfg, &data, &out, &metrics),
            }
        }
        Command::Deblur { ckpt, input, out } => cmd_deblur(&ckpt, &input, &out),
        Command::Eval { ckpt, pairs } => cmd_eval(&ckpt, &pairs),
        Command::Synth { out, n, size, seed } => cmd_synth(&out, n, size, seed),
        Command::Bench {
            sizes,
            out,
            mechanisms,
            precision,
            channels,
            repeats,
            token_cap,
            seed,
        } => {
            let cfg = BenchConfig {
                channels,
                repeats,
                token_cap,
                seed,
                ..Default::default()
            };
            cmd_bench(&sizes, &out, &mechanisms, precision, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 2,
                CliError::Runtime(_) => 1,
            })
        }
    }
}
