use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn fail(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        format: "ppm",
        offset: offset as u64,
        reason: reason.into(),
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(fail(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| fail(start, format!("{what} out of range")))
    }
}

/// Decodes a binary 8-bit PPM into a `[3, H, W]` tensor with values `v / 255`.
pub fn decode_ppm<T: Scalar>(bytes: &[u8]) -> Result<Tensor<T>> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(fail(0, "missing P6 magic"));
    }
    let mut hd = Header { bytes, pos: 2 };
    let width = hd.number("width")?;
    let height = hd.number("height")?;
    let maxval = hd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(fail(hd.pos, "zero image extent"));
    }
    if maxval != 255 {
        return Err(fail(hd.pos, format!("maxval {maxval} is not 255")));
    }
    if !bytes.get(hd.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(fail(hd.pos, "expected one whitespace byte after maxval"));
    }
    let start = hd.pos + 1;
    let need = width * height * 3;
    let payload = &bytes[start.min(bytes.len())..];
    if payload.len() < need {
        return Err(fail(
            bytes.len(),
            format!("truncated payload: {} of {need} bytes", payload.len()),
        ));
    }
    if payload.len() > need {
        return Err(fail(start + need, "trailing bytes after payload"));
    }
    let inv = 1.0 / 255.0;
    let mut data = vec![T::zero(); need];
    for (i, px) in payload.chunks_exact(3).enumerate() {
        for (c, &v) in px.iter().enumerate() {
            data[c * width * height + i] = T::from_f64(f64::from(v) * inv);
        }
    }
    Tensor::from_vec(&[3, height, width], data)
}

/// Quantizes with `floor(v * 255 + 0.5)`, clamped to `0..=255`.
pub fn quantize<T: Scalar>(v: T) -> u8 {
    let q = (v.as_f64() * 255.0 + 0.5).floor();
    if q.is_nan() {
        0
    } else {
        q.clamp(0.0, 255.0) as u8
    }
}

pub fn encode_ppm<T: Scalar>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let (h, w) = match t.shape() {
        [3, h, w] => (*h, *w),
        s => return Err(Error::invalid_shape("encode_ppm", s, "expected [3, H, W]")),
    };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    let d = t.data();
    out.reserve(h * w * 3);
    for i in 0..h * w {
        for c in 0..3 {
            out.push(quantize(d[c * h * w + i]));
        }
    }
    Ok(out)
}

pub fn load_ppm<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    decode_ppm(&fs::read(path)?)
}

pub fn save_ppm<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    super::write_atomic(path, &encode_ppm(t)?)
}
