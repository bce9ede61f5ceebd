use crate::error::{Error, Result};
use crate::ops::reflect_index;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Bookkeeping needed to fold a patch stack back onto its plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchLayout {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub patch: usize,
}

impl PatchLayout {
    pub fn padded_height(&self) -> usize {
        self.height.div_ceil(self.patch) * self.patch
    }

    pub fn padded_width(&self) -> usize {
        self.width.div_ceil(self.patch) * self.patch
    }

    pub fn grid(&self) -> (usize, usize) {
        (
            self.padded_height() / self.patch,
            self.padded_width() / self.patch,
        )
    }

    pub fn num_patches(&self) -> usize {
        let (gy, gx) = self.grid();
        gy * gx
    }

    pub fn patch_shape(&self) -> [usize; 5] {
        [
            self.batch,
            self.num_patches(),
            self.channels,
            self.patch,
            self.patch,
        ]
    }

    pub fn plane_shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.height, self.width]
    }
}

/// Pads the bottom and right borders by mirror reflection.
pub fn reflect_pad<T: Scalar>(x: &Tensor<T>, pad_h: usize, pad_w: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = x.dims4("reflect_pad")?;
    if pad_h == 0 && pad_w == 0 {
        return Ok(x.clone());
    }
    if (pad_h > 0 && pad_h >= h) || (pad_w > 0 && pad_w >= w) {
        return Err(Error::invalid_shape(
            "reflect_pad",
            x.shape(),
            format!("padding ({pad_h}, {pad_w}) must be smaller than the extent"),
        ));
    }
    let (hp, wp) = (h + pad_h, w + pad_w);
    let xd = x.data();
    let mut out = Vec::with_capacity(b * c * hp * wp);
    for plane in 0..b * c {
        let src = &xd[plane * h * w..(plane + 1) * h * w];
        for y in 0..hp {
            let sy = reflect_index(y as isize, h);
            for xx in 0..wp {
                out.push(src[sy * w + reflect_index(xx as isize, w)]);
            }
        }
    }
    Tensor::from_vec(&[b, c, hp, wp], out)
}

/// Adjoint of [`reflect_pad`]: folds gradient from the mirrored border back
/// onto its source pixels.
pub fn reflect_pad_backward<T: Scalar>(dy: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (b, c, hp, wp) = dy.dims4("reflect_pad_backward")?;
    if hp < h || wp < w {
        return Err(Error::shape(
            "reflect_pad_backward",
            dy.shape(),
            &[b, c, h, w],
        ));
    }
    let gd = dy.data();
    let mut dx = vec![T::zero(); b * c * h * w];
    for plane in 0..b * c {
        let src = &gd[plane * hp * wp..(plane + 1) * hp * wp];
        let dst = &mut dx[plane * h * w..(plane + 1) * h * w];
        for y in 0..hp {
            let sy = reflect_index(y as isize, h);
            for xx in 0..wp {
                dst[sy * w + reflect_index(xx as isize, w)] += src[y * wp + xx];
            }
        }
    }
    Tensor::from_vec(&[b, c, h, w], dx)
}

/// Keeps the top-left `h x w` window.
pub fn crop<T: Scalar>(x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (b, c, hp, wp) = x.dims4("crop")?;
    if h > hp || w > wp || h == 0 || w == 0 {
        return Err(Error::shape("crop", x.shape(), &[b, c, h, w]));
    }
    if h == hp && w == wp {
        return Ok(x.clone());
    }
    let xd = x.data();
    let mut out = Vec::with_capacity(b * c * h * w);
    for plane in 0..b * c {
        for y in 0..h {
            let row = plane * hp * wp + y * wp;
            out.extend_from_slice(&xd[row..row + w]);
        }
    }
    Tensor::from_vec(&[b, c, h, w], out)
}

/// Adjoint of [`crop`]: zero-embeds into the original extent.
pub fn crop_backward<T: Scalar>(dy: &Tensor<T>, hp: usize, wp: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = dy.dims4("crop_backward")?;
    if h > hp || w > wp {
        return Err(Error::shape("crop_backward", dy.shape(), &[b, c, hp, wp]));
    }
    if h == hp && w == wp {
        return Ok(dy.clone());
    }
    let gd = dy.data();
    let mut out = vec![T::zero(); b * c * hp * wp];
    for plane in 0..b * c {
        for y in 0..h {
            let dst = plane * hp * wp + y * wp;
            out[dst..dst + w].copy_from_slice(&gd[(plane * h + y) * w..(plane * h + y + 1) * w]);
        }
    }
    Tensor::from_vec(&[b, c, hp, wp], out)
}

fn tile<T: Scalar>(x: &Tensor<T>, layout: &PatchLayout) -> Result<Tensor<T>> {
    let (b, c, hp, wp) = x.dims4("unfold_patches")?;
    let p = layout.patch;
    let (gy, gx) = (hp / p, wp / p);
    let xd = x.data();
    let mut out = Vec::with_capacity(x.len());
    for bi in 0..b {
        for py in 0..gy {
            for px in 0..gx {
                for ch in 0..c {
                    let plane = (bi * c + ch) * hp * wp;
                    for y in 0..p {
                        let row = plane + (py * p + y) * wp + px * p;
                        out.extend_from_slice(&xd[row..row + p]);
                    }
                }
            }
        }
    }
    Tensor::from_vec(&layout.patch_shape(), out)
}

fn untile<T: Scalar>(patches: &Tensor<T>, layout: &PatchLayout) -> Result<Tensor<T>> {
    if patches.shape() != layout.patch_shape() {
        return Err(Error::shape(
            "fold_patches",
            patches.shape(),
            &layout.patch_shape(),
        ));
    }
    let (b, c, p) = (layout.batch, layout.channels, layout.patch);
    let (hp, wp) = (layout.padded_height(), layout.padded_width());
    let (gy, gx) = layout.grid();
    let pd = patches.data();
    let mut out = vec![T::zero(); b * c * hp * wp];
    let mut src = 0;
    for bi in 0..b {
        for py in 0..gy {
            for px in 0..gx {
                for ch in 0..c {
                    let plane = (bi * c + ch) * hp * wp;
                    for y in 0..p {
                        let row = plane + (py * p + y) * wp + px * p;
                        out[row..row + p].copy_from_slice(&pd[src..src + p]);
                        src += p;
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[b, c, hp, wp], out)
}

/// Tiles `[B, C, H, W]` into non-overlapping `patch x patch` tiles laid out
/// as `[B, num_patches, C, patch, patch]`, patches in row-major grid order.
/// Planes whose extents are not multiples of `patch` are reflect-padded on
/// the bottom/right first; the padding is recorded in the returned layout.
pub fn unfold_patches<T: Scalar>(x: &Tensor<T>, patch: usize) -> Result<(Tensor<T>, PatchLayout)> {
    let (b, c, h, w) = x.dims4("unfold_patches")?;
    if patch == 0 {
        return Err(Error::arg("unfold_patches", "patch size must be >= 1"));
    }
    let layout = PatchLayout {
        batch: b,
        channels: c,
        height: h,
        width: w,
        patch,
    };
    let (ph, pw) = (layout.padded_height() - h, layout.padded_width() - w);
    if (ph > 0 && ph >= h) || (pw > 0 && pw >= w) {
        return Err(Error::invalid_shape(
            "unfold_patches",
            x.shape(),
            format!("patch {patch} exceeds what reflect padding can reach"),
        ));
    }
    let padded = reflect_pad(x, ph, pw)?;
    Ok((tile(&padded, &layout)?, layout))
}

pub fn unfold_patches_backward<T: Scalar>(
    dy: &Tensor<T>,
    layout: &PatchLayout,
) -> Result<Tensor<T>> {
    let padded = untile(dy, layout)?;
    reflect_pad_backward(&padded, layout.height, layout.width)
}

/// Inverse of [`unfold_patches`]; padding is cropped away.
pub fn fold_patches<T: Scalar>(patches: &Tensor<T>, layout: &PatchLayout) -> Result<Tensor<T>> {
    let padded = untile(patches, layout)?;
    crop(&padded, layout.height, layout.width)
}

pub fn fold_patches_backward<T: Scalar>(dy: &Tensor<T>, layout: &PatchLayout) -> Result<Tensor<T>> {
    if dy.shape() != layout.plane_shape() {
        return Err(Error::shape(
            "fold_patches_backward",
            dy.shape(),
            &layout.plane_shape(),
        ));
    }
    let padded = crop_backward(dy, layout.padded_height(), layout.padded_width())?;
    tile(&padded, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor<f32> {
        Tensor::uniform(shape, -1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn patch_counts() {
        let (p, l) = unfold_patches(&random(&[1, 1, 16, 16], 0), 8).unwrap();
        assert_eq!(p.shape(), &[1, 4, 1, 8, 8]);
        assert_eq!(l.num_patches(), 4);
    }

    #[test]
    fn single_patch_is_the_plane() {
        let x = random(&[1, 2, 8, 8], 1);
        let (p, l) = unfold_patches(&x, 8).unwrap();
        assert_eq!(p.data(), x.data());
        assert_eq!(fold_patches(&p, &l).unwrap(), x);
    }

    #[test]
    fn padded_round_trip() {
        let x = random(&[2, 3, 9, 9], 2);
        let (p, l) = unfold_patches(&x, 8).unwrap();
        assert_eq!(p.shape(), &[2, 4, 3, 8, 8]);
        assert_eq!(fold_patches(&p, &l).unwrap(), x);
    }

    #[test]
    fn row_major_patch_order() {
        let x = Tensor::<f64>::from_fn(&[1, 1, 4, 4], |i| (i[2] * 4 + i[3]) as f64).unwrap();
        let (p, _) = unfold_patches(&x, 2).unwrap();
        // patch 1 is the top-right tile
        assert_eq!(&p.data()[4..8], &[2.0, 3.0, 6.0, 7.0]);
    }

    #[test]
    fn oversize_patch_rejected() {
        assert!(unfold_patches(&random(&[1, 1, 3, 3], 3), 8).is_err());
        assert!(unfold_patches(&random(&[1, 1, 3, 3], 3), 0).is_err());
    }

    #[test]
    fn fold_rejects_inconsistent_layout() {
        let (p, mut l) = unfold_patches(&random(&[1, 1, 16, 16], 4), 8).unwrap();
        l.height = 32;
        assert!(fold_patches(&p, &l).is_err());
    }

    #[test]
    fn reflect_pad_is_mirror() {
        let x = Tensor::<f64>::from_vec(&[1, 1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let p = reflect_pad(&x, 0, 2).unwrap();
        assert_eq!(p.data(), &[1.0, 2.0, 3.0, 2.0, 1.0]);
    }
}
