use crate::counter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-6;

fn check<T: Scalar>(
    x: &Tensor<T>,
    scale: &Tensor<T>,
    offset: &Tensor<T>,
) -> Result<(usize, usize, usize)> {
    let (b, c, h, w) = x.dims4("layer_norm")?;
    if scale.shape() != [c] {
        return Err(Error::shape("layer_norm scale", x.shape(), scale.shape()));
    }
    if offset.shape() != [c] {
        return Err(Error::shape("layer_norm offset", x.shape(), offset.shape()));
    }
    Ok((b, c, h * w))
}

/// Normalizes across channels independently at every `(batch, y, x)`
/// position, using the biased variance.
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    scale: &Tensor<T>,
    offset: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (b, c, hw) = check(x, scale, offset)?;
    let eps = T::from_f64(LAYER_NORM_EPS);
    let inv_c = T::one() / T::from_usize(c);
    let xd = x.data();
    let mut out = vec![T::zero(); x.len()];
    for bi in 0..b {
        let base = bi * c * hw;
        for p in 0..hw {
            let at = |ch: usize| base + ch * hw + p;
            let mean = (0..c).map(|ch| xd[at(ch)]).sum::<T>() * inv_c;
            let var = (0..c)
                .map(|ch| {
                    let d = xd[at(ch)] - mean;
                    d * d
                })
                .sum::<T>()
                * inv_c;
            let rstd = T::one() / (var + eps).sqrt();
            for ch in 0..c {
                out[at(ch)] = (xd[at(ch)] - mean) * rstd * scale.data()[ch] + offset.data()[ch];
            }
        }
    }
    counter::add_arith(x.len() * 4);
    Tensor::from_vec(x.shape(), out)
}

/// Returns `(dx, dscale, doffset)`.
pub fn layer_norm_backward<T: Scalar>(
    x: &Tensor<T>,
    scale: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (b, c, hw) = check(x, scale, scale)?;
    if dy.shape() != x.shape() {
        return Err(Error::shape("layer_norm_backward", x.shape(), dy.shape()));
    }
    let eps = T::from_f64(LAYER_NORM_EPS);
    let inv_c = T::one() / T::from_usize(c);
    let (xd, gd, sd) = (x.data(), dy.data(), scale.data());
    let mut dx = vec![T::zero(); x.len()];
    let mut ds = vec![T::zero(); c];
    let mut doff = vec![T::zero(); c];
    let mut xhat = vec![T::zero(); c];
    let mut gh = vec![T::zero(); c];
    for bi in 0..b {
        let base = bi * c * hw;
        for p in 0..hw {
            let at = |ch: usize| base + ch * hw + p;
            let mean = (0..c).map(|ch| xd[at(ch)]).sum::<T>() * inv_c;
            let var = (0..c)
                .map(|ch| {
                    let d = xd[at(ch)] - mean;
                    d * d
                })
                .sum::<T>()
                * inv_c;
            let rstd = T::one() / (var + eps).sqrt();
            let mut mean_g = T::zero();
            let mut mean_gx = T::zero();
            for ch in 0..c {
                xhat[ch] = (xd[at(ch)] - mean) * rstd;
                let g = gd[at(ch)];
                ds[ch] += g * xhat[ch];
                doff[ch] += g;
                gh[ch] = g * sd[ch];
                mean_g += gh[ch];
                mean_gx += gh[ch] * xhat[ch];
            }
            mean_g *= inv_c;
            mean_gx *= inv_c;
            for ch in 0..c {
                dx[at(ch)] = rstd * (gh[ch] - mean_g - xhat[ch] * mean_gx);
            }
        }
    }
    Ok((
        Tensor::from_vec(x.shape(), dx)?,
        Tensor::from_vec(&[c], ds)?,
        Tensor::from_vec(&[c], doff)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(c: usize) -> (Tensor<f64>, Tensor<f64>) {
        (Tensor::ones(&[c]).unwrap(), Tensor::zeros(&[c]).unwrap())
    }

    #[test]
    fn two_point_symmetry() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 1, 1], vec![1.0, 3.0]).unwrap();
        let (s, o) = unit(2);
        let y = layer_norm(&x, &s, &o).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-5);
        assert!((y.data()[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn constant_vector_maps_to_zero() {
        let x = Tensor::<f64>::full(&[1, 4, 2, 2], 3.5).unwrap();
        let (s, o) = unit(4);
        let y = layer_norm(&x, &s, &o).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_eight_channel_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::<f64>::uniform(&[1, 8, 1, 1], -3.0, 5.0, &mut rng).unwrap();
        let (s, o) = unit(8);
        let y = layer_norm(&x, &s, &o).unwrap();
        let mean = y.mean();
        let var = y
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / 8.0;
        assert!(mean.abs() < 1e-6);
        assert!((var - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_mismatched_params() {
        let x = Tensor::<f32>::zeros(&[1, 3, 2, 2]).unwrap();
        let s = Tensor::ones(&[2]).unwrap();
        assert!(layer_norm(&x, &s, &s).is_err());
    }
}
