//! Image containers and codecs.
//!
//! Samples are `f64` in `[0, 1]`, row-major with interleaved channels.
//! Quantization to 8 bits only happens in [`read_image`] / [`write_image`].

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!(
                "images have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::InvalidInput(format!(
                "{height}x{width}x{channels} image needs {} samples, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Image {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Image::new(height, width, channels, data)
    }

    /// Interleaves per-channel planes into an image.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        if planes.iter().any(|p| p.len() != height * width) {
            return Err(Error::InvalidInput("plane size mismatch".into()));
        }
        let mut data = vec![0.0; height * width * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        Image::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Copies out channel `c` as a row-major plane.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn planes(&self) -> Vec<Vec<f64>> {
        (0..self.channels).map(|c| self.plane(c)).collect()
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Rounds every sample to the nearest 8-bit level, as a write/read cycle would.
    pub fn quantized(&self) -> Self {
        self.map(|v| f64::from(quantize(v)) / 255.0)
    }

    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "image size mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Single-channel image whose samples may leave `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidInput(format!(
                "{height}x{width} gray image needs {} samples, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(GrayImage {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Wraps the samples as a 1-channel [`Image`] without clamping.
    pub fn into_image(self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data,
        }
    }
}

pub fn rgb2gray(img: &Image) -> Result<GrayImage> {
    if img.channels() != 3 {
        return Err(Error::InvalidInput(format!(
            "rgb2gray needs 3 channels, got {}",
            img.channels()
        )));
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| wr * px[0] + wg * px[1] + wb * px[2])
        .collect();
    GrayImage::new(img.height, img.width, data)
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Decodes an 8-bit PNG or binary PNM (P5/P6). Alpha channels are dropped.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let (height, width) = (decoded.height() as usize, decoded.width() as usize);
    let (channels, bytes) = match decoded.color() {
        ColorType::L8 | ColorType::La8 => (1, decoded.into_luma8().into_raw()),
        ColorType::Rgb8 | ColorType::Rgba8 => (3, decoded.into_rgb8().into_raw()),
        other => {
            return Err(Error::UnsupportedDepth {
                path: path.to_path_buf(),
                color: format!("{other:?}"),
            })
        }
    };
    let data = bytes.into_iter().map(|b| f64::from(b) / 255.0).collect();
    Image::new(height, width, channels, data)
}

/// Encodes by extension: `.png`, or `.pgm`/`.ppm`/`.pnm` as binary anymap.
pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
    let (w, h) = (img.width as u32, img.height as u32);
    let color = if img.channels == 3 {
        ExtendedColorType::Rgb8
    } else {
        ExtendedColorType::L8
    };
    let encode_err = |e: image::ImageError| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    };
    match ext.as_str() {
        "png" => {
            let dynamic = if img.channels == 3 {
                image::RgbImage::from_raw(w, h, bytes).map(DynamicImage::ImageRgb8)
            } else {
                image::GrayImage::from_raw(w, h, bytes).map(DynamicImage::ImageLuma8)
            }
            .ok_or_else(|| Error::InvalidInput("buffer does not match dimensions".into()))?;
            dynamic
                .save_with_format(path, ImageFormat::Png)
                .map_err(encode_err)
        }
        "pgm" | "ppm" | "pnm" => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let subtype = if img.channels == 3 {
                PnmSubtype::Pixmap(SampleEncoding::Binary)
            } else {
                PnmSubtype::Graymap(SampleEncoding::Binary)
            };
            PnmEncoder::new(BufWriter::new(file))
                .with_subtype(subtype)
                .write_image(&bytes, w, h, color)
                .map_err(encode_err)
        }
        _ => Err(Error::UnsupportedFormat(path.to_path_buf())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gray_of_white_equal_and_red() {
        let white = Image::filled(2, 3, 3, 1.0).unwrap();
        assert!(rgb2gray(&white).unwrap().data().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let v = 0.37;
        let equal = Image::filled(2, 2, 3, v).unwrap();
        assert!(rgb2gray(&equal).unwrap().data().iter().all(|&g| (g - v).abs() < 1e-15));

        let red = Image::from_fn(2, 2, 3, |_, _, c| if c == 0 { 1.0 } else { 0.0 }).unwrap();
        assert!(rgb2gray(&red).unwrap().data().iter().all(|&g| g == 0.299));
    }

    #[test]
    fn gray_rejects_single_channel() {
        let g = Image::filled(2, 2, 1, 0.5).unwrap();
        assert!(matches!(rgb2gray(&g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constructor_checks_length_and_channels() {
        assert!(Image::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn planes_roundtrip() {
        let img = Image::from_fn(3, 4, 3, |y, x, c| (y * 100 + x * 10 + c) as f64).unwrap();
        let back = Image::from_planes(3, 4, &img.planes()).unwrap();
        assert_eq!(img, back);
        assert_eq!(img.plane(2)[5], 112.0);
    }

    proptest! {
        #[test]
        fn gray_is_positively_homogeneous(
            px in proptest::collection::vec(0.0f64..1.0, 12),
            a in 0.0f64..1.0,
        ) {
            let img = Image::new(2, 2, 3, px).unwrap();
            let scaled = img.map(|v| a * v);
            let g1 = rgb2gray(&scaled).unwrap();
            let g0 = rgb2gray(&img).unwrap();
            for (x, y) in g1.data().iter().zip(g0.data()) {
                prop_assert!((x - a * y).abs() < 1e-14);
            }
        }
    }
}
