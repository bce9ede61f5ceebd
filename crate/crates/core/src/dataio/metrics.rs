use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `10 log10(peak^2 / MSE)`; identical inputs give `f64::INFINITY`.
pub fn psnr<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, peak: f64) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("psnr", a.shape(), b.shape()));
    }
    if a.is_empty() {
        return Err(Error::arg("psnr", "empty input"));
    }
    let se: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum();
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Channel-mean grayscale planes of a `[C, H, W]` or `[B, C, H, W]` tensor.
fn gray_planes<T: Scalar>(t: &Tensor<T>) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let (b, c, h, w) = match t.shape() {
        [c, h, w] => (1, *c, *h, *w),
        [b, c, h, w] => (*b, *c, *h, *w),
        s => {
            return Err(Error::invalid_shape(
                "ssim",
                s,
                "expected [C, H, W] or [B, C, H, W]",
            ))
        }
    };
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid_shape(
            "ssim",
            t.shape(),
            "image smaller than the 11x11 window",
        ));
    }
    let d = t.data();
    let planes = (0..b)
        .map(|bi| {
            (0..h * w)
                .map(|i| {
                    (0..c)
                        .map(|ci| d[(bi * c + ci) * h * w + i].as_f64())
                        .sum::<f64>()
                        / c as f64
                })
                .collect()
        })
        .collect();
    Ok((planes, h, w))
}

fn window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = g.iter().sum();
    g.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode filtering with the normalized Gaussian window.
fn filter(plane: &[f64], h: usize, w: usize, g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|j| g[j] * plane[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean single-scale SSIM on channel-mean grayscale, peak 1.
pub fn ssim<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape("ssim", a.shape(), b.shape()));
    }
    let (pa, h, w) = gray_planes(a)?;
    let (pb, _, _) = gray_planes(b)?;
    let g = window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, y) in pa.iter().zip(&pb) {
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let (mx, my) = (filter(x, h, w, &g), filter(y, h, w, &g));
        let (sxx, syy, sxy) = (
            filter(&xx, h, w, &g),
            filter(&yy, h, w, &g),
            filter(&xy, h, w, &g),
        );
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(seed: u64) -> Tensor<f64> {
        Tensor::uniform(&[3, 16, 16], 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = random(1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        let c = a.map(|v| v - 0.1);
        assert!((psnr(&a, &c, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!((psnr(&a, &b, 255.0).unwrap() - (20.0 + 20.0 * 255f64.log10())).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let a = random(2);
        let noise = random(3).map(|v| v - 0.5);
        let mut last = f64::INFINITY;
        for amp in [0.01, 0.05, 0.2] {
            let b = a.add(&noise.scale(amp)).unwrap();
            let p = psnr(&a, &b, 1.0).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor::<f64>::zeros(&[3, 12, 12]).unwrap();
        let b = Tensor::<f64>::zeros(&[3, 12, 13]).unwrap();
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(ssim(&a, &b).is_err());
        let small = Tensor::<f64>::zeros(&[3, 10, 20]).unwrap();
        assert!(ssim(&small, &small).is_err());
    }

    #[test]
    fn ssim_identity_negative_and_symmetry() {
        let a = random(4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let neg = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &neg).unwrap() < 1.0);
        let b = random(5);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ssim_constant_images_luminance_only() {
        let (u, v) = (0.4, 0.5);
        let a = Tensor::<f64>::full(&[3, 13, 17], u).unwrap();
        let b = Tensor::<f64>::full(&[3, 13, 17], v).unwrap();
        let c1 = 0.01f64 * 0.01;
        let expect = (2.0 * u * v + c1) / (u * u + v * v + c1);
        assert!((ssim(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn window_matches_direct_gaussian() {
        let g = window();
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((g[5] / g[6] - (1.0 / (2.0 * 1.5 * 1.5f64)).exp()).abs() < 1e-12);
    }
}
