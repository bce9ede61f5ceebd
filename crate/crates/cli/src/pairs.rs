//! Pair folders: `DIR/blur/<name>` and `DIR/sharp/<name>` with matching names.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use freqdeblur_core::dataio::{load_image, save_image, ImageSample};
use freqdeblur_core::{Scalar, Tensor};

pub const BLUR_DIR: &str = "blur";
pub const SHARP_DIR: &str = "sharp";

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("ppm") | Some("png")
    )
}

/// File names present in `blur/`, sorted; each must have a partner in `sharp/`.
pub fn pair_names(dir: &Path) -> anyhow::Result<Vec<String>> {
    let blur = dir.join(BLUR_DIR);
    let mut names = Vec::new();
    for entry in
        std::fs::read_dir(&blur).with_context(|| format!("cannot list {}", blur.display()))?
    {
        let path = entry?.path();
        if path.is_file() && is_image(&path) {
            if let Some(n) = path.file_name().and_then(|n| n.to_str()) {
                names.push(n.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        bail!("no images in {}", blur.display());
    }
    for n in &names {
        let s = dir.join(SHARP_DIR).join(n);
        if !s.is_file() {
            bail!("{} has no sharp partner {}", n, s.display());
        }
    }
    Ok(names)
}

pub fn load_pairs<T: Scalar>(dir: &Path) -> anyhow::Result<Vec<(String, ImageSample<T>)>> {
    pair_names(dir)?
        .into_iter()
        .map(|n| {
            let bp = dir.join(BLUR_DIR).join(&n);
            let sp = dir.join(SHARP_DIR).join(&n);
            let blurred: Tensor<T> =
                load_image(&bp).with_context(|| format!("loading {}", bp.display()))?;
            let sharp: Tensor<T> =
                load_image(&sp).with_context(|| format!("loading {}", sp.display()))?;
            if blurred.shape() != sharp.shape() {
                bail!(
                    "{n}: blurred {:?} and sharp {:?} differ in shape",
                    blurred.shape(),
                    sharp.shape()
                );
            }
            // the generating kernel is not stored on disk
            let kernel = Tensor::from_vec(&[1, 1], vec![T::one()])?;
            Ok((
                n,
                ImageSample {
                    blurred,
                    sharp,
                    kernel,
                },
            ))
        })
        .collect()
}

pub fn save_pairs<T: Scalar>(
    dir: &Path,
    samples: &[ImageSample<T>],
) -> anyhow::Result<Vec<PathBuf>> {
    for sub in [BLUR_DIR, SHARP_DIR] {
        std::fs::create_dir_all(dir.join(sub))
            .with_context(|| format!("cannot create {}", dir.join(sub).display()))?;
    }
    let mut written = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{i:04}.ppm");
        save_image(&dir.join(BLUR_DIR).join(&name), &s.blurred)?;
        save_image(&dir.join(SHARP_DIR).join(&name), &s.sharp)?;
        written.push(dir.join(BLUR_DIR).join(name));
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use freqdeblur_core::dataio::synth_pairs;

    #[test]
    fn save_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let samples = synth_pairs::<f32>(3, 16, 2).unwrap();
        save_pairs(dir.path(), &samples).unwrap();
        let back = load_pairs::<f32>(dir.path()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].0, "0000.ppm");
        assert_eq!(back[2].1.sharp.shape(), &[3, 16, 16]);
    }

    #[test]
    fn missing_partner_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let samples = synth_pairs::<f32>(2, 16, 2).unwrap();
        save_pairs(dir.path(), &samples).unwrap();
        std::fs::remove_file(dir.path().join(SHARP_DIR).join("0001.ppm")).unwrap();
        assert!(load_pairs::<f32>(dir.path()).is_err());
    }
}
