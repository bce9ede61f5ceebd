use crate::error::{Error, Result};
use crate::ops::conv::conv_pointwise;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `[B, C, H, W] -> [B, 4C, H/2, W/2]`; output channel `4c + 2dy + dx` holds
/// the pixels at offset `(dy, dx)` of each 2x2 cell of input channel `c`.
pub fn space_to_depth<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, h, w) = x.dims4("space_to_depth")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::invalid_shape(
            "space_to_depth",
            x.shape(),
            "height and width must be even",
        ));
    }
    let (ho, wo) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = Vec::with_capacity(x.len());
    for bi in 0..b {
        for ch in 0..c {
            let plane = &xd[(bi * c + ch) * h * w..(bi * c + ch + 1) * h * w];
            for dy in 0..2 {
                for dx in 0..2 {
                    for y in 0..ho {
                        for xx in 0..wo {
                            out.push(plane[(2 * y + dy) * w + 2 * xx + dx]);
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[b, 4 * c, ho, wo], out)
}

/// Inverse of [`space_to_depth`].
pub fn depth_to_space<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c4, h, w) = x.dims4("depth_to_space")?;
    if c4 % 4 != 0 {
        return Err(Error::invalid_shape(
            "depth_to_space",
            x.shape(),
            "channels must be a multiple of 4",
        ));
    }
    let c = c4 / 4;
    let (ho, wo) = (2 * h, 2 * w);
    let xd = x.data();
    let mut out = vec![T::zero(); x.len()];
    for bi in 0..b {
        for ch in 0..c {
            let dst = &mut out[(bi * c + ch) * ho * wo..(bi * c + ch + 1) * ho * wo];
            for dy in 0..2 {
                for dx in 0..2 {
                    let src_c = bi * c4 + 4 * ch + 2 * dy + dx;
                    let src = &xd[src_c * h * w..(src_c + 1) * h * w];
                    for y in 0..h {
                        for xx in 0..w {
                            dst[(2 * y + dy) * wo + 2 * xx + dx] = src[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[b, c, ho, wo], out)
}

pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::arg("concat_channels", "nothing to concatenate"))?;
    let (b, _, h, w) = first.dims4("concat_channels")?;
    let mut total = 0;
    for p in parts {
        let (pb, pc, ph, pw) = p.dims4("concat_channels")?;
        if (pb, ph, pw) != (b, h, w) {
            return Err(Error::shape("concat_channels", first.shape(), p.shape()));
        }
        total += pc;
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(b * total * hw);
    for bi in 0..b {
        for p in parts {
            let pc = p.shape()[1];
            out.extend_from_slice(&p.data()[bi * pc * hw..(bi + 1) * pc * hw]);
        }
    }
    Tensor::from_vec(&[b, total, h, w], out)
}

/// Splits the channel axis into consecutive groups of the given sizes.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, sizes: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (b, c, h, w) = x.dims4("split_channels")?;
    if sizes.iter().sum::<usize>() != c || sizes.contains(&0) {
        return Err(Error::arg(
            "split_channels",
            format!("group sizes {sizes:?} do not partition {c} channels"),
        ));
    }
    let hw = h * w;
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        let mut data = Vec::with_capacity(b * s * hw);
        for bi in 0..b {
            let off = (bi * c + start) * hw;
            data.extend_from_slice(&x.data()[off..off + s * hw]);
        }
        out.push(Tensor::from_vec(&[b, s, h, w], data)?);
        start += s;
    }
    Ok(out)
}

/// Space-to-depth followed by a 1x1 projection `4C -> 2C`.
pub fn downsample<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>) -> Result<Tensor<T>> {
    conv_pointwise(&space_to_depth(x)?, weight, None)
}

/// 1x1 projection `C -> 2C` followed by depth-to-space.
pub fn upsample<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>) -> Result<Tensor<T>> {
    depth_to_space(&conv_pointwise(x, weight, None)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_contracts() {
        let x = Tensor::<f32>::zeros(&[1, 2, 16, 16]).unwrap();
        let wd = Tensor::zeros(&[4, 8, 1, 1]).unwrap();
        assert_eq!(downsample(&x, &wd).unwrap().shape(), &[1, 4, 8, 8]);
        let y = Tensor::<f32>::zeros(&[1, 4, 8, 8]).unwrap();
        let wu = Tensor::zeros(&[8, 4, 1, 1]).unwrap();
        assert_eq!(upsample(&y, &wu).unwrap().shape(), &[1, 2, 16, 16]);
    }

    #[test]
    fn odd_extent_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 2, 7, 8]).unwrap();
        assert!(space_to_depth(&x).is_err());
    }

    #[test]
    fn permutation_round_trip_with_identity_convs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f64>::uniform(&[2, 3, 6, 4], -1.0, 1.0, &mut rng).unwrap();
        assert_eq!(depth_to_space(&space_to_depth(&x).unwrap()).unwrap(), x);

        // identity 1x1 convs around the permutation keep every pixel
        let eye = |n: usize| {
            Tensor::<f64>::from_fn(&[n, n, 1, 1], |i| f64::from(u8::from(i[0] == i[1]))).unwrap()
        };
        let down = conv_pointwise(&space_to_depth(&x).unwrap(), &eye(12), None).unwrap();
        let up = depth_to_space(&conv_pointwise(&down, &eye(12), None).unwrap()).unwrap();
        assert_eq!(up, x);
    }

    #[test]
    fn split_concat_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Tensor::<f32>::uniform(&[2, 6, 3, 3], -1.0, 1.0, &mut rng).unwrap();
        let parts = split_channels(&x, &[2, 1, 3]).unwrap();
        let refs: Vec<_> = parts.iter().collect();
        assert_eq!(concat_channels(&refs).unwrap(), x);
        assert!(split_channels(&x, &[2, 2]).is_err());
    }
}
