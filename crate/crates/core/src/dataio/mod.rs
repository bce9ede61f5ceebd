//! Image files, synthetic blur pairs, quality metrics and the checkpoint container.

mod blur;
mod checkpoint;
mod metrics;
mod ppm;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use blur::{
    apply_blur, convolve, gaussian_kernel, motion_kernel, synth_blur, synth_pairs, synth_sharp,
    Blur, BlurKind, ImageSample, LENGTH_RANGE, SIGMA_RANGE,
};
pub use checkpoint::{
    config_text, load_checkpoint, load_model, parse_config_text, save_checkpoint, save_model,
    Checkpoint, Entry, EntryData, META_CONFIG, META_PREFIX,
};
pub use metrics::{psnr, ssim};
pub use ppm::{decode_ppm, encode_ppm, load_ppm, quantize, save_ppm};

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| {
        Error::arg(
            "write_atomic",
            format!("{} has no file name", path.display()),
        )
    })?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn extension(path: &Path) -> String {
    path.extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default()
}

/// Loads a `[3, H, W]` image; `.ppm` always, `.png` with the `png` feature.
pub fn load_image<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    match extension(path).as_str() {
        "ppm" => load_ppm(path),
        #[cfg(feature = "png")]
        "png" => png::load_png(path),
        e => Err(Error::arg(
            "load_image",
            format!("unsupported image extension `{e}`"),
        )),
    }
}

pub fn save_image<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    match extension(path).as_str() {
        "ppm" => save_ppm(path, t),
        #[cfg(feature = "png")]
        "png" => png::save_png(path, t),
        e => Err(Error::arg(
            "save_image",
            format!("unsupported image extension `{e}`"),
        )),
    }
}

#[cfg(feature = "png")]
mod png {
    use std::path::Path;

    use crate::error::{Error, Result};
    use crate::scalar::Scalar;
    use crate::tensor::Tensor;

    fn img_err(e: image::ImageError) -> Error {
        Error::arg("png", e.to_string())
    }

    pub fn load_png<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
        let img = image::open(path).map_err(img_err)?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw = img.into_raw();
        let mut data = vec![T::zero(); 3 * h * w];
        for (i, px) in raw.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[c * h * w + i] = T::from_f64(f64::from(px[c]) / 255.0);
            }
        }
        Tensor::from_vec(&[3, h, w], data)
    }

    pub fn save_png<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
        let (h, w) = match t.shape() {
            [3, h, w] => (*h, *w),
            s => return Err(Error::invalid_shape("save_png", s, "expected [3, H, W]")),
        };
        let d = t.data();
        let raw: Vec<u8> = (0..h * w)
            .flat_map(|i| (0..3).map(move |c| super::quantize(d[c * h * w + i])))
            .collect();
        let buf = image::RgbImage::from_raw(w as u32, h as u32, raw).expect("buffer size");
        let mut bytes = std::io::Cursor::new(Vec::new());
        buf.write_to(&mut bytes, image::ImageFormat::Png)
            .map_err(img_err)?;
        super::write_atomic(path, bytes.get_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_dispatch_by_extension() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::<f32>::full(&[3, 4, 5], 0.2).unwrap();
        let p = dir.path().join("a.PPM");
        save_image(&p, &t).unwrap();
        let back: Tensor<f32> = load_image(&p).unwrap();
        assert_eq!(encode_ppm(&back).unwrap(), encode_ppm(&t).unwrap());
        assert!(save_image(&dir.path().join("a.bmp"), &t).is_err());
    }

    #[cfg(feature = "png")]
    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t =
            Tensor::<f32>::from_fn(&[3, 4, 5], |i| (i[0] * 20 + i[1] * 5 + i[2]) as f32 / 255.0)
                .unwrap();
        let p = dir.path().join("a.png");
        save_image(&p, &t).unwrap();
        let back: Tensor<f32> = load_image(&p).unwrap();
        assert_eq!(encode_ppm(&back).unwrap(), encode_ppm(&t).unwrap());
    }
}
