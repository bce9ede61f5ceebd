use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ops::reflect_index;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A synthetic blur pair together with the kernel that produced it.
#[derive(Clone, Debug)]
pub struct ImageSample<T> {
    pub blurred: Tensor<T>,
    pub sharp: Tensor<T>,
    pub kernel: Tensor<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlurKind {
    Gaussian,
    LinearMotion,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Blur {
    Delta,
    Gaussian {
        sigma: f64,
    },
    /// `angle` in radians, measured counter-clockwise from the +x axis.
    LinearMotion {
        length: f64,
        angle: f64,
    },
}

pub const SIGMA_RANGE: (f64, f64) = (0.5, 3.0);
pub const LENGTH_RANGE: (f64, f64) = (3.0, 15.0);

impl Blur {
    /// Draws parameters uniformly from the desk ranges.
    pub fn sample<R: Rng + ?Sized>(kind: BlurKind, rng: &mut R) -> Blur {
        match kind {
            BlurKind::Gaussian => Blur::Gaussian {
                sigma: rng.gen_range(SIGMA_RANGE.0..=SIGMA_RANGE.1),
            },
            BlurKind::LinearMotion => Blur::LinearMotion {
                length: rng.gen_range(LENGTH_RANGE.0..=LENGTH_RANGE.1),
                angle: rng.gen_range(0.0..PI),
            },
        }
    }

    /// Nonnegative unit-sum `[k, k]` kernel with odd `k`.
    pub fn kernel(&self) -> Result<Tensor<f64>> {
        match *self {
            Blur::Delta => Tensor::ones(&[1, 1]),
            Blur::Gaussian { sigma } => gaussian_kernel(sigma),
            Blur::LinearMotion { length, angle } => motion_kernel(length, angle),
        }
    }
}

fn normalized(k: usize, mut data: Vec<f64>) -> Result<Tensor<f64>> {
    let total: f64 = data.iter().sum();
    for v in &mut data {
        *v /= total;
    }
    Tensor::from_vec(&[k, k], data)
}

/// Sampled Gaussian of size `2 * ceil(3 sigma) + 1`.
pub fn gaussian_kernel(sigma: f64) -> Result<Tensor<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::arg(
            "gaussian_kernel",
            format!("sigma must be positive, got {sigma}"),
        ));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let k = (2 * r + 1) as usize;
    let mut data = Vec::with_capacity(k * k);
    for y in -r..=r {
        for x in -r..=r {
            data.push((-((x * x + y * y) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    normalized(k, data)
}

/// Rasterized line segment of `length` pixels through the kernel centre.
pub fn motion_kernel(length: f64, angle: f64) -> Result<Tensor<f64>> {
    if !(length >= 1.0 && length.is_finite()) {
        return Err(Error::arg(
            "motion_kernel",
            format!("length must be at least 1, got {length}"),
        ));
    }
    if !angle.is_finite() {
        return Err(Error::arg("motion_kernel", "angle must be finite"));
    }
    let half = (length - 1.0) / 2.0;
    let r = half.ceil() as isize;
    let k = (2 * r + 1) as usize;
    let mut data = vec![0.0; k * k];
    let samples = (length * 16.0).ceil() as usize + 1;
    let (s, c) = angle.sin_cos();
    for i in 0..samples {
        let t = if samples == 1 {
            0.0
        } else {
            -half + 2.0 * half * i as f64 / (samples - 1) as f64
        };
        let x = (r as f64 + t * c).round().clamp(0.0, (k - 1) as f64) as usize;
        let y = (r as f64 - t * s).round().clamp(0.0, (k - 1) as f64) as usize;
        data[y * k + x] += 1.0;
    }
    normalized(k, data)
}

/// Convolves every channel of a `[C, H, W]` image with `kernel`, reflect padding at the borders.
pub fn convolve<T: Scalar>(img: &Tensor<T>, kernel: &Tensor<f64>) -> Result<Tensor<T>> {
    let (c, h, w) = match img.shape() {
        [c, h, w] => (*c, *h, *w),
        s => return Err(Error::invalid_shape("convolve", s, "expected [C, H, W]")),
    };
    let k = match kernel.shape() {
        [a, b] if a == b && a % 2 == 1 => *a,
        s => {
            return Err(Error::invalid_shape(
                "convolve",
                s,
                "kernel must be square with odd extent",
            ))
        }
    };
    let r = (k / 2) as isize;
    let taps: Vec<(isize, isize, f64)> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| (i as isize - r, j as isize - r, kernel.data()[i * k + j]))
        .filter(|t| t.2 != 0.0)
        .collect();
    let src = img.data();
    let mut out = Vec::with_capacity(img.len());
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for &(dy, dx, kv) in &taps {
                    let yy = reflect_index(y - dy, h);
                    let xx = reflect_index(x - dx, w);
                    acc += kv * plane[yy * w + xx].as_f64();
                }
                out.push(T::from_f64(acc));
            }
        }
    }
    Tensor::from_vec(img.shape(), out)
}

pub fn apply_blur<T: Scalar>(sharp: &Tensor<T>, blur: &Blur) -> Result<ImageSample<T>> {
    let kernel = blur.kernel()?;
    let blurred = convolve(sharp, &kernel)?.map(|v| v.max(T::zero()).min(T::one()));
    Ok(ImageSample {
        blurred,
        sharp: sharp.clone(),
        kernel: kernel.cast(),
    })
}

/// Blurs `sharp` with parameters of `kind` drawn from `seed`.
pub fn synth_blur<T: Scalar>(
    sharp: &Tensor<T>,
    kind: BlurKind,
    seed: u64,
) -> Result<ImageSample<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apply_blur(sharp, &Blur::sample(kind, &mut rng))
}

/// Piecewise-smooth RGB test image: a colour gradient with rectangles, discs and stripes.
pub fn synth_sharp<T: Scalar, R: Rng + ?Sized>(
    h: usize,
    w: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if h == 0 || w == 0 {
        return Err(Error::arg("synth_sharp", "image extents must be positive"));
    }
    let mut img = vec![0.0f64; 3 * h * w];
    let g0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.1..0.5));
    let g1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..0.9));
    let theta = rng.gen_range(0.0..2.0 * PI);
    let (s, c) = theta.sin_cos();
    let diag = (h * h + w * w) as f64;
    let diag = diag.sqrt().max(1.0);
    for y in 0..h {
        for x in 0..w {
            let t = ((x as f64 * c + y as f64 * s) / diag + 1.0) / 2.0;
            for ch in 0..3 {
                img[ch * h * w + y * w + x] = g0[ch] + (g1[ch] - g0[ch]) * t;
            }
        }
    }
    let shapes = rng.gen_range(4..9);
    for _ in 0..shapes {
        let color: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let ry = rng.gen_range(0.08..0.3) * h as f64;
        let rx = rng.gen_range(0.08..0.3) * w as f64;
        let kind = rng.gen_range(0..3);
        let period = rng.gen_range(3.0..8.0);
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
                let inside = match kind {
                    0 => dy.abs() <= 1.0 && dx.abs() <= 1.0,
                    1 => dy * dy + dx * dx <= 1.0,
                    _ => {
                        dy.abs() <= 1.0
                            && dx.abs() <= 1.0
                            && ((x as f64 / period).floor() as i64) % 2 == 0
                    }
                };
                if inside {
                    for ch in 0..3 {
                        img[ch * h * w + y * w + x] = color[ch];
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[3, h, w], img.into_iter().map(T::from_f64).collect())
}

/// `n` sharp/blurred pairs of `size` x `size`, alternating Gaussian and motion blur.
pub fn synth_pairs<T: Scalar>(n: usize, size: usize, seed: u64) -> Result<Vec<ImageSample<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let sharp = synth_sharp(size, size, &mut rng)?;
            let kind = if i % 2 == 0 {
                BlurKind::Gaussian
            } else {
                BlurKind::LinearMotion
            };
            apply_blur(&sharp, &Blur::sample(kind, &mut rng))
        })
        .collect()
}
