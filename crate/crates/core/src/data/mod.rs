//! Image ingestion, preprocessing and dataset handling.

mod manifest;
pub mod pnm;
pub(crate) mod split;
pub mod synthetic;

pub use manifest::{load_manifest, Manifest, ManifestEntry};
pub use pnm::{load_image, save_image};
pub use split::{split_dataset, Split};
pub use synthetic::generate_synthetic_corpus;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::Tensor;

/// 8-bit raster, row-major with interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::argument(format!("image size {width}x{height} is empty")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::argument(format!("{channels} channels; expected 1 or 3")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::argument(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, 1, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }
}

/// BT.601 luma, rounded half up.
pub fn rgb_to_gray(img: &Image) -> Result<Image> {
    if img.channels != 3 {
        return Err(Error::argument(format!(
            "rgb_to_gray needs 3 channels, got {}",
            img.channels
        )));
    }
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|px| {
            let weighted = 299 * u32::from(px[0]) + 587 * u32::from(px[1]) + 114 * u32::from(px[2]);
            ((weighted + 500) / 1000).min(255) as u8
        })
        .collect();
    Image::new(img.width, img.height, 1, pixels)
}

/// Source coordinate and blend weight for each destination index, using
/// half-pixel centers: `src = (dst + 0.5) * in / out - 0.5`, clamped.
fn sample_positions(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    let last = (in_len - 1) as f64;
    (0..out_len)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

fn round_to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Bilinear resize of a single-channel image.
pub fn resize_bilinear(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    if img.channels != 1 {
        return Err(Error::argument("resize_bilinear expects a grayscale image"));
    }
    if out_w == 0 || out_h == 0 {
        return Err(Error::argument(format!("target size {out_w}x{out_h} is empty")));
    }
    if (out_w, out_h) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, out_w);
    let ys = sample_positions(img.height, out_h);
    let px = |x: usize, y: usize| f64::from(img.pixels[y * img.width + x]);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
            let bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
            out.push(round_to_u8(top * (1.0 - fy) + bottom * fy));
        }
    }
    Image::new(out_w, out_h, 1, out)
}

/// A preprocessed network input with its class index.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    /// `[size, size, 1]`, values in `[0, 1]`.
    pub input: Tensor,
    pub label: usize,
}

/// Resizes to `size x size` and scales pixels into `[0, 1]`.
pub fn image_to_tensor(img: &Image, size: usize) -> Result<Tensor> {
    let gray;
    let img = if img.channels == 3 {
        gray = rgb_to_gray(img)?;
        &gray
    } else {
        img
    };
    let resized = resize_bilinear(img, size, size)?;
    Tensor::from_vec(
        [size, size, 1],
        resized.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )
}

pub fn to_sample(img: &Image, size: usize, label: usize) -> Result<LabeledSample> {
    Ok(LabeledSample {
        input: image_to_tensor(img, size)?,
        label,
    })
}

/// Loads and preprocesses every manifest entry, in manifest order.
pub fn load_samples(manifest: &Manifest, size: usize) -> Result<Vec<LabeledSample>> {
    par::map(manifest.entries(), |entry| {
        let img = load_image(manifest.resolve(entry))?;
        to_sample(&img, size, entry.class)
    })
    .into_iter()
    .collect()
}
