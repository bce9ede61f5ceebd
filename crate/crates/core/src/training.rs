//! Loss, Adam, cosine learning-rate schedule and the seeded training loop.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad, Gradients};
use crate::dataio::{psnr, ImageSample};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::network::{forward, parse_usize, Model, NetworkParams};
use crate::params::ParameterStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const METRICS_HEADER: &str = "step,lr,loss,psnr";

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_steps: usize,
    pub batch: usize,
    pub crop: usize,
    /// Weight of the frequency L1 term.
    pub loss_freq_weight: f64,
    pub seed: u64,
    pub val_every: usize,
    /// Random horizontal and vertical flips on top of random crops.
    pub flips: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_max: 1e-3,
            lr_min: 1e-7,
            total_steps: 2000,
            batch: 2,
            crop: 64,
            loss_freq_weight: 0.1,
            seed: 0,
            val_every: 100,
            flips: true,
        }
    }
}

fn parse_f64(field: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(field, format!("`{v}` is not a number")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 9] = [
        "lr_max",
        "lr_min",
        "total_steps",
        "batch",
        "crop",
        "loss_freq_weight",
        "seed",
        "val_every",
        "flips",
    ];

    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min.is_finite() && self.lr_max.is_finite() && self.lr_min >= 0.0) {
            return Err(Error::config(
                "lr_min",
                "learning rates must be finite and non-negative",
            ));
        }
        if self.lr_min > self.lr_max {
            return Err(Error::config(
                "lr_min",
                format!("{} exceeds lr_max {}", self.lr_min, self.lr_max),
            ));
        }
        for (field, v) in [
            ("total_steps", self.total_steps),
            ("batch", self.batch),
            ("crop", self.crop),
            ("val_every", self.val_every),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if !(self.loss_freq_weight >= 0.0 && self.loss_freq_weight.is_finite()) {
            return Err(Error::config(
                "loss_freq_weight",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "lr_max" => self.lr_max = parse_f64(key, v)?,
            "lr_min" => self.lr_min = parse_f64(key, v)?,
            "total_steps" => self.total_steps = parse_usize(key, v)?,
            "batch" => self.batch = parse_usize(key, v)?,
            "crop" => self.crop = parse_usize(key, v)?,
            "loss_freq_weight" => self.loss_freq_weight = parse_f64(key, v)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{v}` is not a u64")))?
            }
            "val_every" => self.val_every = parse_usize(key, v)?,
            "flips" => {
                self.flips = v
                    .parse()
                    .map_err(|_| Error::config(key, format!("`{v}` is not true/false")))?
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("lr_max", format!("{:e}", self.lr_max)),
            ("lr_min", format!("{:e}", self.lr_min)),
            ("total_steps", self.total_steps.to_string()),
            ("batch", self.batch.to_string()),
            ("crop", self.crop.to_string()),
            ("loss_freq_weight", self.loss_freq_weight.to_string()),
            ("seed", self.seed.to_string()),
            ("val_every", self.val_every.to_string()),
            ("flips", self.flips.to_string()),
        ]
    }
}

/// `mean|d| + weight * mean|F(d)|` with `d = pred - target`.
pub fn loss<T: Scalar, E: Exec<T>>(
    e: &mut E,
    pred: &E::Real,
    target: &E::Real,
    weight: T,
) -> Result<E::Real> {
    let d = e.sub(pred, target)?;
    let spatial = e.l1_mean(&d)?;
    if weight == T::zero() {
        return Ok(spatial);
    }
    let f = e.fft2(&d)?;
    let freq = e.complex_abs_mean(&f)?;
    let freq = e.scale(&freq, weight)?;
    e.add(&spatial, &freq)
}

pub fn loss_value<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, weight: f64) -> Result<T> {
    Ok(loss(&mut crate::exec::Eager, pred, target, T::from_f64(weight))?.data()[0])
}

/// Cosine annealing from `lr_max` at step 0 to `lr_min` at `total`; clamps past the end.
pub fn cosine_lr(step: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if step >= total {
        return lr_min;
    }
    let t = step as f64 / total as f64;
    lr_max - (lr_max - lr_min) * 0.5 * (1.0 - (PI * t).cos())
}

/// Adam first and second moments, one tensor per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: ParameterStore<T>,
    pub v: ParameterStore<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterStore<T>) -> Result<Self> {
        let mut m = ParameterStore::new();
        for (name, t) in params.iter() {
            m.insert(name, Tensor::zeros(t.shape())?)?;
        }
        Ok(Self {
            step: 0,
            v: m.clone(),
            m,
        })
    }
}

/// One bias-corrected Adam update. Fails without touching `params` when any
/// gradient is non-finite.
pub fn adam_step<T: Scalar>(
    params: &mut ParameterStore<T>,
    grads: &Gradients<T>,
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    for (name, g) in grads.iter() {
        if !g.all_finite() {
            return Err(Error::Training(format!(
                "non-finite gradient for `{name}` at step {}",
                state.step + 1
            )));
        }
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::shape("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
    let c1 = T::from_f64(1.0 - ADAM_BETA1.powi(t));
    let c2 = T::from_f64(1.0 - ADAM_BETA2.powi(t));
    let (lr, eps) = (T::from_f64(lr), T::from_f64(ADAM_EPS));
    for (name, g) in grads.iter() {
        let m = state.m.get_mut(name)?.data_mut();
        let v = state.v.get_mut(name)?.data_mut();
        let p = params.get_mut(name)?.data_mut();
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = b1 * m[i] + (T::one() - b1) * gi;
            v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            p[i] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// Parameter update state carried across steps.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub adam: AdamState<T>,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
    /// Mean held-out PSNR, present on validation steps.
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
    /// Mean PSNR of the blurred held-out inputs against their sharp targets.
    pub val_input_psnr: Option<f64>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    pub fn last_psnr(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.psnr)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for r in &self.records {
            let p = r.psnr.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{:e},{},{}", r.step, r.lr, r.loss, p);
        }
        s
    }
}

/// Shuffles indices with `seed` and holds out 10% (at least one when `n >= 2`).
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5917));
    let n_val = if n >= 2 { (n / 10).max(1) } else { 0 };
    let val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    train.sort_unstable();
    let mut val = val;
    val.sort_unstable();
    (train, val)
}

fn crop_flip<T: Scalar>(
    t: &Tensor<T>,
    y0: usize,
    x0: usize,
    size: usize,
    fh: bool,
    fv: bool,
) -> Vec<T> {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let d = t.data();
    let mut out = Vec::with_capacity(3 * size * size);
    for c in 0..3 {
        for y in 0..size {
            let sy = if fv { y0 + size - 1 - y } else { y0 + y };
            for x in 0..size {
                let sx = if fh { x0 + size - 1 - x } else { x0 + x };
                out.push(d[c * h * w + sy * w + sx]);
            }
        }
    }
    out
}

/// Draws a `[batch, 3, crop, crop]` pair of blurred and sharp crops.
fn draw_batch<T: Scalar>(
    data: &[ImageSample<T>],
    train: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let min_side = train
        .iter()
        .map(|&i| data[i].sharp.shape()[1].min(data[i].sharp.shape()[2]))
        .min()
        .expect("non-empty training split");
    let size = cfg.crop.min(min_side);
    let mut xb = Vec::with_capacity(cfg.batch * 3 * size * size);
    let mut yb = Vec::with_capacity(xb.capacity());
    for _ in 0..cfg.batch {
        let s = &data[train[rng.gen_range(0..train.len())]];
        let (h, w) = (s.sharp.shape()[1], s.sharp.shape()[2]);
        let y0 = rng.gen_range(0..=h - size);
        let x0 = rng.gen_range(0..=w - size);
        let (fh, fv) = if cfg.flips {
            (rng.gen_bool(0.5), rng.gen_bool(0.5))
        } else {
            (false, false)
        };
        xb.extend(crop_flip(&s.blurred, y0, x0, size, fh, fv));
        yb.extend(crop_flip(&s.sharp, y0, x0, size, fh, fv));
    }
    let shape = [cfg.batch, 3, size, size];
    Ok((Tensor::from_vec(&shape, xb)?, Tensor::from_vec(&shape, yb)?))
}

fn check_samples<T: Scalar>(data: &[ImageSample<T>]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    for (i, s) in data.iter().enumerate() {
        match s.sharp.shape() {
            [3, _, _] if s.blurred.shape() == s.sharp.shape() => {}
            _ => {
                return Err(Error::Training(format!(
                    "pair {i}: expected matching [3, H, W] images, got {:?} and {:?}",
                    s.blurred.shape(),
                    s.sharp.shape()
                )))
            }
        }
    }
    Ok(())
}

/// Mean PSNR of `model` outputs on the pairs at `indices`.
pub fn mean_psnr<T: Scalar>(
    model: &Model<T>,
    data: &[ImageSample<T>],
    indices: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let s = &data[i];
        let x = s
            .blurred
            .clone()
            .reshape(&[1, 3, s.blurred.shape()[1], s.blurred.shape()[2]])?;
        let y = model.forward(&x)?;
        total += psnr(&y.reshape(s.sharp.shape())?, &s.sharp, 1.0)?;
    }
    Ok(total / indices.len() as f64)
}

/// One forward/backward pass; returns the loss and parameter gradients.
pub fn loss_and_grad<T: Scalar>(
    model: &Model<T>,
    x: &Tensor<T>,
    y: &Tensor<T>,
    weight: f64,
) -> Result<(T, Gradients<T>)> {
    grad(&model.params, |tape, p| {
        let np = NetworkParams::bind(&model.cfg, p)?;
        let xv = tape.constant(x.clone());
        let yv = tape.constant(y.clone());
        let pred = forward(tape, &model.cfg, &np, &xv)?;
        loss(tape, &pred, &yv, T::from_f64(weight))
    })
}

/// Trains `model` in place. The seed drives the split, crops, flips and batch
/// order, so equal inputs give a bit-identical log. `observe` sees every record.
pub fn train_loop<T: Scalar>(
    model: &mut Model<T>,
    data: &[ImageSample<T>],
    cfg: &TrainConfig,
    mut observe: impl FnMut(&StepRecord),
) -> Result<TrainLog> {
    cfg.validate()?;
    check_samples(data)?;
    let (train, val) = split_indices(data.len(), cfg.seed);
    let mut state = TrainState {
        adam: AdamState::new(&model.params)?,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut log = TrainLog {
        val_input_psnr: if val.is_empty() {
            None
        } else {
            let mut total = 0.0;
            for &i in &val {
                total += psnr(&data[i].blurred, &data[i].sharp, 1.0)?;
            }
            Some(total / val.len() as f64)
        },
        train_indices: train.clone(),
        val_indices: val.clone(),
        records: Vec::with_capacity(cfg.total_steps),
    };
    for step in 0..cfg.total_steps {
        let lr = cosine_lr(step, cfg.total_steps, cfg.lr_max, cfg.lr_min);
        let (x, y) = draw_batch(data, &train, cfg, &mut state.rng)?;
        let (l, g) = loss_and_grad(model, &x, &y, cfg.loss_freq_weight)?;
        if !l.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss at step {}",
                step + 1
            )));
        }
        adam_step(&mut model.params, &g, &mut state.adam, lr)?;
        let done = step + 1;
        let psnr = if !val.is_empty() && (done % cfg.val_every == 0 || done == cfg.total_steps) {
            Some(mean_psnr(model, data, &val)?)
        } else {
            None
        };
        let rec = StepRecord {
            step: done,
            lr,
            loss: l.as_f64(),
            psnr,
        };
        observe(&rec);
        log.records.push(rec);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::synth_pairs;
    use crate::network::NetworkConfig;

    #[test]
    fn loss_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Tensor::<f64>::uniform(&[1, 3, 8, 8], 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(loss_value(&a, &a, 0.1).unwrap(), 0.0);
        let b = a.map(|v| v - 0.25);
        assert!((loss_value(&a, &b, 0.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Tensor::<f64>::uniform(&[2, 3, 8, 8], 0.0, 1.0, &mut rng).unwrap();
        let b = Tensor::<f64>::uniform(&[2, 3, 8, 8], 0.0, 1.0, &mut rng).unwrap();
        let d = a.sub(&b).unwrap();
        let spatial: f64 = d.data().iter().map(|v| v.abs()).sum::<f64>() / d.len() as f64;
        let mut freq = 0.0;
        for plane in d.data().chunks(64) {
            for u in 0..8 {
                for v in 0..8 {
                    let (mut re, mut im) = (0.0, 0.0);
                    for y in 0..8 {
                        for x in 0..8 {
                            let ang = -2.0 * PI * ((u * y) as f64 / 8.0 + (v * x) as f64 / 8.0);
                            re += plane[y * 8 + x] * ang.cos();
                            im += plane[y * 8 + x] * ang.sin();
                        }
                    }
                    freq += (re * re + im * im).sqrt();
                }
            }
        }
        let expect = spatial + 0.1 * freq / d.len() as f64;
        assert!((loss_value(&a, &b, 0.1).unwrap() - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn loss_rejects_shape_mismatch() {
        let a = Tensor::<f32>::zeros(&[1, 3, 8, 8]).unwrap();
        let b = Tensor::<f32>::zeros(&[1, 3, 8, 4]).unwrap();
        assert!(loss_value(&a, &b, 0.1).is_err());
    }

    #[test]
    fn schedule_boundaries() {
        assert_eq!(cosine_lr(0, 2000, 1e-3, 1e-7), 1e-3);
        assert_eq!(cosine_lr(2000, 2000, 1e-3, 1e-7), 1e-7);
        assert_eq!(cosine_lr(2500, 2000, 1e-3, 1e-7), 1e-7);
        assert!((cosine_lr(1000, 2000, 1e-3, 1e-7) - 5.0005e-4).abs() < 1e-15);
        let lrs: Vec<f64> = (0..=2000).map(|s| cosine_lr(s, 2000, 1e-3, 1e-7)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    fn store(v: f64) -> ParameterStore<f64> {
        let mut s = ParameterStore::new();
        s.insert("w", Tensor::from_vec(&[1], vec![v]).unwrap())
            .unwrap();
        s
    }

    fn grads(g: f64) -> Gradients<f64> {
        let mut gr = Gradients::default();
        gr.entries
            .insert("w".into(), Tensor::from_vec(&[1], vec![g]).unwrap());
        gr
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let mut p = store(0.0);
        let mut st = AdamState::new(&p).unwrap();
        adam_step(&mut p, &grads(1.0), &mut st, 1e-3).unwrap();
        assert!((p.get("w").unwrap().data()[0] + 1e-3).abs() < 1e-10);
        let mut q = store(0.7);
        let mut st = AdamState::new(&q).unwrap();
        adam_step(&mut q, &grads(0.0), &mut st, 1e-3).unwrap();
        assert_eq!(q.get("w").unwrap().data()[0], 0.7);
    }

    #[test]
    fn adam_two_steps_match_scalar_reference() {
        let (g, lr, theta0) = (0.37, 2e-3, 0.5);
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            theta -= lr * mh / (vh.sqrt() + 1e-8);
        }
        let mut p = store(theta0);
        let mut st = AdamState::new(&p).unwrap();
        for _ in 0..2 {
            adam_step(&mut p, &grads(g), &mut st, lr).unwrap();
        }
        assert!((p.get("w").unwrap().data()[0] - theta).abs() < 1e-10);
    }

    #[test]
    fn adam_halts_on_nan() {
        let mut p = store(1.0);
        let mut st = AdamState::new(&p).unwrap();
        let err = adam_step(&mut p, &grads(f64::NAN), &mut st, 1e-3).unwrap_err();
        assert!(err.to_string().contains("`w`"));
        assert_eq!(p.get("w").unwrap().data()[0], 1.0);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn split_holds_out_ten_percent() {
        let (t, v) = split_indices(20, 3);
        assert_eq!((t.len(), v.len()), (18, 2));
        assert!(v.iter().all(|i| !t.contains(i)));
        assert_eq!(split_indices(20, 3), (t, v));
        assert_eq!(split_indices(1, 0).1.len(), 0);
    }

    #[test]
    fn config_keys_round_trip() {
        let mut c = TrainConfig::default();
        let src = TrainConfig {
            seed: 9,
            lr_max: 2e-3,
            flips: false,
            ..Default::default()
        };
        for (k, v) in src.to_pairs() {
            c.set(k, &v).unwrap();
        }
        assert_eq!(c.seed, 9);
        assert_eq!(c.lr_max, 2e-3);
        assert!(!c.flips);
        assert!(c.set("momentum", "1").is_err());
        let bad = TrainConfig {
            lr_min: 1.0,
            ..Default::default()
        };
        assert!(
            matches!(bad.validate(), Err(Error::Config { ref field, .. }) if field == "lr_min")
        );
        let bad = TrainConfig {
            batch: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn tiny() -> (Model<f32>, Vec<ImageSample<f32>>, TrainConfig) {
        let model = Model::<f32>::build(NetworkConfig::micro(), 0).unwrap();
        let data = synth_pairs(6, 16, 4).unwrap();
        let cfg = TrainConfig {
            total_steps: 6,
            crop: 16,
            val_every: 3,
            seed: 11,
            ..Default::default()
        };
        (model, data, cfg)
    }

    #[test]
    fn training_is_deterministic() {
        let (m0, data, cfg) = tiny();
        let (mut a, mut b) = (m0.clone(), m0);
        let la = train_loop(&mut a, &data, &cfg, |_| {}).unwrap();
        let lb = train_loop(&mut b, &data, &cfg, |_| {}).unwrap();
        let bits = |l: &TrainLog| l.losses().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&la), bits(&lb));
        assert_eq!(a, b);
        assert_eq!(la.records.iter().filter(|r| r.psnr.is_some()).count(), 2);
    }

    #[test]
    fn frequency_term_changes_the_trajectory() {
        let (m0, data, cfg) = tiny();
        let (mut a, mut b) = (m0.clone(), m0);
        let la = train_loop(&mut a, &data, &cfg, |_| {}).unwrap();
        let lb = train_loop(
            &mut b,
            &data,
            &TrainConfig {
                loss_freq_weight: 0.0,
                ..cfg
            },
            |_| {},
        )
        .unwrap();
        assert_ne!(la.losses(), lb.losses());
    }

    #[test]
    fn fresh_model_loss_equals_input_loss() {
        let (model, data, _) = tiny();
        let s = &data[0];
        let x = s.blurred.clone().reshape(&[1, 3, 16, 16]).unwrap();
        let y = s.sharp.clone().reshape(&[1, 3, 16, 16]).unwrap();
        let out = model.forward(&x).unwrap();
        assert_eq!(
            loss_value(&out, &y, 0.1).unwrap(),
            loss_value(&x, &y, 0.1).unwrap()
        );
    }

    #[test]
    fn empty_dataset_rejected() {
        let (mut model, _, cfg) = tiny();
        assert!(matches!(
            train_loop(&mut model, &[], &cfg, |_| {}),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn metrics_csv_layout() {
        let (mut model, data, cfg) = tiny();
        let log = train_loop(&mut model, &data, &cfg, |_| {}).unwrap();
        let csv = log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "step,lr,loss,psnr");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].ends_with(','));
        assert!(!lines[3].ends_with(','));
    }
}
