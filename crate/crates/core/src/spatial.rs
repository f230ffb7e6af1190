//! Gaussian low-pass filtering and grayscale high-frequency extraction.
//!
//! The low-pass is a correlation with a unit-sum Gaussian kernel using
//! reflect padding (`d c b | a b c d | c b a`). The high-frequency image is
//! the grayscale image minus its low-pass, so it is signed.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::raster::{rgb2gray, GrayImage, Image};

pub const DEFAULT_KERNEL_SIZE: usize = 63;

/// Kernel sizes swept in the hyper-parameter study.
pub const KERNEL_SIZE_SWEEP: [usize; 6] = [7, 21, 35, 57, 63, 67];

/// σ used for a kernel of `size` taps: the support spans ±3σ.
pub fn sigma_for_size(size: usize) -> f64 {
    size as f64 / 6.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    sigma: f64,
    weights: Vec<f64>,
    taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let radius = (size / 2) as isize;
        let denom = 2.0 * sigma * sigma;
        let mut weights = Vec::with_capacity(size * size);
        for m in -radius..=radius {
            for n in -radius..=radius {
                weights.push((-((m * m + n * n) as f64) / denom).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let mut taps: Vec<f64> = (-radius..=radius)
            .map(|m| (-((m * m) as f64) / denom).exp())
            .collect();
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);

        Ok(GaussianKernel {
            size,
            sigma,
            weights,
            taps,
        })
    }

    /// Kernel of `size` taps with σ = size / 6.
    pub fn for_size(size: usize) -> Result<Self> {
        GaussianKernel::new(size, sigma_for_size(size))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Row-major `size × size` weights; index `(m + r) * size + (n + r)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, m: isize, n: isize) -> f64 {
        let r = (self.size / 2) as isize;
        self.weights[((m + r) as usize) * self.size + (n + r) as usize]
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Separable correlation of one plane. The normalized 2-D Gaussian factors
/// exactly into the outer product of the normalized 1-D taps, and reflection
/// acts per axis, so this equals the direct 2-D sum.
fn lowpass_plane(height: usize, width: usize, plane: &[f64], kernel: &GaussianKernel) -> Vec<f64> {
    let r = (kernel.size / 2) as isize;
    let taps = &kernel.taps;
    let mut rows = vec![0.0; height * width];
    for y in 0..height {
        let src = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * src[reflect(x as isize + k as isize - r, width)];
            }
            rows[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; height * width];
    for y in 0..height {
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, t) in taps.iter().enumerate() {
            let sy = reflect(y as isize + k as isize - r, height);
            let src = &rows[sy * width..(sy + 1) * width];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

fn ensure_non_empty(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput("cannot filter an empty image".into()));
    }
    Ok(())
}

/// Per-channel Gaussian low-pass.
pub fn lowpass(img: &Image, kernel: &GaussianKernel) -> Result<Image> {
    ensure_non_empty(img.height(), img.width())?;
    let planes = img.planes();
    let filtered = par::map(Exec::Auto, &planes, |p| {
        lowpass_plane(img.height(), img.width(), p, kernel)
    });
    Image::from_planes(img.height(), img.width(), &filtered)
}

pub fn lowpass_gray(img: &GrayImage, kernel: &GaussianKernel) -> Result<GrayImage> {
    ensure_non_empty(img.height(), img.width())?;
    let out = lowpass_plane(img.height(), img.width(), img.data(), kernel);
    GrayImage::new(img.height(), img.width(), out)
}

/// `rgb2gray(x) - lowpass(rgb2gray(x))` with a `kernel_size` kernel.
pub fn high_freq(img: &Image, kernel_size: usize) -> Result<GrayImage> {
    let kernel = GaussianKernel::for_size(kernel_size)?;
    high_freq_with(img, &kernel)
}

/// Single-channel inputs are taken as already gray.
pub fn high_freq_with(img: &Image, kernel: &GaussianKernel) -> Result<GrayImage> {
    let gray = match img.channels() {
        1 => GrayImage::new(img.height(), img.width(), img.data().to_vec())?,
        _ => rgb2gray(img)?,
    };
    let low = lowpass_gray(&gray, kernel)?;
    let data = gray
        .data()
        .iter()
        .zip(low.data())
        .map(|(g, l)| g - l)
        .collect();
    GrayImage::new(gray.height(), gray.width(), data)
}

/// Maps a signed high-frequency image to a storable 3-channel image:
/// `clamp(v + 0.5)` replicated over R, G and B.
pub fn to_network_input(high: &GrayImage) -> Image {
    let data = high
        .data()
        .iter()
        .flat_map(|&v| {
            let s = (v + 0.5).clamp(0.0, 1.0);
            [s, s, s]
        })
        .collect();
    Image::new(high.height(), high.width(), 3, data).expect("3x replication matches dimensions")
}

pub fn high_freq_for_network(img: &Image, kernel_size: usize) -> Result<Image> {
    Ok(to_network_input(&high_freq(img, kernel_size)?))
}
