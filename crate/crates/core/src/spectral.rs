//! Two-step high-pass filter.
//!
//! Per channel: forward DFT, shift DC to the center, zero every bin closer
//! than `d` to the center, split into amplitude and phase, scale them by
//! `alpha` and `beta`, recombine as `A·e^{+jP}`, shift back, inverse DFT and
//! keep the real part clamped to `[0, 1]`.
//!
//! The forward transform is unnormalized,
//! `F(u,v) = Σ_h Σ_w x(h,w)·exp(-2πj(hu/H + wv/W))`, and the inverse carries
//! the `1/(HW)` factor.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng as _;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::raster::{rgb2gray, Image};

/// Severity levels as fractions of the short image side, in percent.
pub const SEVERITY_PERCENT: [u32; 5] = [1, 2, 3, 4, 5];

/// Amplitude and phase scaling factors drawn during augmentation.
pub const SCALING_LEVELS: [f64; 5] = [0.6, 0.7, 0.8, 0.9, 1.0];

/// The five filter diameters for an `height × width` image:
/// `min(height, width) × {0.01, …, 0.05}`.
pub fn severity_levels(height: usize, width: usize) -> [f64; 5] {
    let side = height.min(width) as f64;
    SEVERITY_PERCENT.map(|p| side * f64::from(p) / 100.0)
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<Fft2>>>;

/// Cached pair of 1-D plans for an `height × width` grid.
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    /// Shared plan for this grid size.
    pub fn cached(height: usize, width: usize) -> Arc<Fft2> {
        static PLANS: OnceLock<PlanCache> = OnceLock::new();
        let mut plans = PLANS
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner());
        plans
            .entry((height, width))
            .or_insert_with(|| Arc::new(Fft2::new(height, width)))
            .clone()
    }

    fn run(&self, buf: &mut [Complex64], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        let (h, w) = (self.height, self.width);
        assert_eq!(buf.len(), h * w, "buffer does not match the planned grid");
        row.process(buf);
        let mut t = vec![Complex64::default(); h * w];
        for y in 0..h {
            for x in 0..w {
                t[x * h + y] = buf[y * w + x];
            }
        }
        col.process(&mut t);
        for x in 0..w {
            for y in 0..h {
                buf[y * w + x] = t[x * h + y];
            }
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, self.row_fwd.as_ref(), self.col_fwd.as_ref());
    }

    /// Inverse transform including the `1/(HW)` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, self.row_inv.as_ref(), self.col_inv.as_ref());
        let scale = 1.0 / (self.height * self.width) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }
}

/// Forward DFT of one real row-major plane.
pub fn dft2(height: usize, width: usize, plane: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Fft2::cached(height, width).forward(&mut buf);
    buf
}

/// Inverse DFT; the result is complex because edited spectra need not be
/// conjugate symmetric.
pub fn idft2(height: usize, width: usize, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    Fft2::cached(height, width).inverse(&mut buf);
    buf
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Natural,
    Centered,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    height: usize,
    width: usize,
    coeffs: Vec<Vec<Complex64>>,
    layout: Layout,
}

/// Circularly shifts a plane by (`dy`, `dx`).
fn roll(height: usize, width: usize, src: &[Complex64], dy: usize, dx: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); src.len()];
    for y in 0..height {
        let ty = (y + dy) % height;
        for x in 0..width {
            out[ty * width + (x + dx) % width] = src[y * width + x];
        }
    }
    out
}

impl Spectrum {
    pub fn new(height: usize, width: usize, coeffs: Vec<Vec<Complex64>>, layout: Layout) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| c.len() != height * width) {
            return Err(Error::InvalidInput("spectrum planes do not match dimensions".into()));
        }
        Ok(Spectrum {
            height,
            width,
            coeffs,
            layout,
        })
    }

    /// Per-channel forward transform, natural layout.
    pub fn forward(img: &Image) -> Result<Self> {
        if img.height() == 0 || img.width() == 0 {
            return Err(Error::InvalidInput("cannot transform an empty image".into()));
        }
        let coeffs = img
            .planes()
            .iter()
            .map(|p| dft2(img.height(), img.width(), p))
            .collect();
        Spectrum::new(img.height(), img.width(), coeffs, Layout::Natural)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn plane(&self, c: usize) -> &[Complex64] {
        &self.coeffs[c]
    }

    pub fn planes(&self) -> &[Vec<Complex64>] {
        &self.coeffs
    }

    pub fn into_planes(self) -> Vec<Vec<Complex64>> {
        self.coeffs
    }

    fn expect_layout(&self, layout: Layout) -> Result<()> {
        if self.layout != layout {
            return Err(Error::InvalidState(format!(
                "expected {layout:?} spectrum, found {:?}",
                self.layout
            )));
        }
        Ok(())
    }

    /// Moves DC from `(0, 0)` to `(⌊H/2⌋, ⌊W/2⌋)`.
    pub fn center(&self) -> Result<Spectrum> {
        self.expect_layout(Layout::Natural)?;
        let (h, w) = (self.height, self.width);
        Ok(Spectrum {
            coeffs: self.coeffs.iter().map(|p| roll(h, w, p, h / 2, w / 2)).collect(),
            layout: Layout::Centered,
            ..*self
        })
    }

    pub fn uncenter(&self) -> Result<Spectrum> {
        self.expect_layout(Layout::Centered)?;
        let (h, w) = (self.height, self.width);
        Ok(Spectrum {
            coeffs: self
                .coeffs
                .iter()
                .map(|p| roll(h, w, p, h - h / 2, w - w / 2))
                .collect(),
            layout: Layout::Natural,
            ..*self
        })
    }

    /// Per-channel inverse transform of a natural-layout spectrum.
    pub fn inverse(&self) -> Result<Vec<Vec<Complex64>>> {
        self.expect_layout(Layout::Natural)?;
        Ok(self
            .coeffs
            .iter()
            .map(|p| idft2(self.height, self.width, p))
            .collect())
    }

    /// Σ|F|² over all channels.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn apply_mask(&mut self, mask: &FilterMask) -> Result<()> {
        self.expect_layout(Layout::Centered)?;
        if mask.height != self.height || mask.width != self.width {
            return Err(Error::InvalidInput(format!(
                "{}x{} mask on {}x{} spectrum",
                mask.height, mask.width, self.height, self.width
            )));
        }
        for plane in &mut self.coeffs {
            for (c, &m) in plane.iter_mut().zip(&mask.values) {
                *c *= m;
            }
        }
        Ok(())
    }
}

/// Polar form of a spectrum; phase lies in `(-π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmpPhase {
    height: usize,
    width: usize,
    layout: Layout,
    pub amplitude: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
}

fn principal_phase(c: Complex64) -> f64 {
    let p = c.im.atan2(c.re);
    if p <= -PI {
        PI
    } else {
        p
    }
}

impl AmpPhase {
    pub fn from_spectrum(spec: &Spectrum) -> Self {
        AmpPhase {
            height: spec.height,
            width: spec.width,
            layout: spec.layout,
            amplitude: spec
                .coeffs
                .iter()
                .map(|p| p.iter().map(|c| c.re.hypot(c.im)).collect())
                .collect(),
            phase: spec
                .coeffs
                .iter()
                .map(|p| p.iter().map(|&c| principal_phase(c)).collect())
                .collect(),
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// `A·e^{+jP}`.
    pub fn recombine(&self) -> Spectrum {
        let coeffs = self
            .amplitude
            .iter()
            .zip(&self.phase)
            .map(|(a, p)| {
                a.iter()
                    .zip(p)
                    .map(|(&a, &p)| Complex64::from_polar(a, p))
                    .collect()
            })
            .collect();
        Spectrum {
            height: self.height,
            width: self.width,
            coeffs,
            layout: self.layout,
        }
    }

    /// Amplitude times `alpha`, phase times `beta`, both in `(0, 1]`.
    pub fn scaled(&self, alpha: f64, beta: f64) -> Result<AmpPhase> {
        check_factor("alpha", alpha)?;
        check_factor("beta", beta)?;
        let scale = |grid: &Vec<Vec<f64>>, k: f64| -> Vec<Vec<f64>> {
            grid.iter()
                .map(|p| p.iter().map(|v| v * k).collect())
                .collect()
        };
        Ok(AmpPhase {
            amplitude: scale(&self.amplitude, alpha),
            phase: scale(&self.phase, beta),
            ..*self
        })
    }
}

fn check_factor(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// High-pass mask over a centered spectrum: `½(1 + sgn(dist − d))`, where
/// `dist` is the Euclidean distance to `(⌊H/2⌋, ⌊W/2⌋)`. `d = 0` passes
/// everything.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterMask {
    height: usize,
    width: usize,
    diameter: f64,
    values: Vec<f64>,
}

impl FilterMask {
    pub fn highpass(height: usize, width: usize, d: f64) -> Result<Self> {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "diameter must be finite and non-negative, got {d}"
            )));
        }
        let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
        let values = (0..height)
            .flat_map(|u| (0..width).map(move |v| (u, v)))
            .map(|(u, v)| {
                if d == 0.0 {
                    return 1.0;
                }
                let dist = ((u as f64 - cy).powi(2) + (v as f64 - cx).powi(2)).sqrt();
                let sgn = if dist > d {
                    1.0
                } else if dist < d {
                    -1.0
                } else {
                    0.0
                };
                0.5 * (1.0 + sgn)
            })
            .collect();
        Ok(FilterMask {
            height,
            width,
            diameter: d,
            values,
        })
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.width + v]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub d: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl AugmentParams {
    pub fn new(d: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = AugmentParams { d, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// All-pass, unscaled.
    pub fn identity() -> Self {
        AugmentParams {
            d: 0.0,
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "diameter must be finite and non-negative, got {}",
                self.d
            )));
        }
        check_factor("alpha", self.alpha)?;
        check_factor("beta", self.beta)
    }
}

/// Which parts of the two-step filter a sampler randomizes; a disabled
/// scaling step is pinned to 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerToggles {
    pub amplitude_scaling: bool,
    pub phase_scaling: bool,
}

impl Default for SamplerToggles {
    fn default() -> Self {
        SamplerToggles {
            amplitude_scaling: true,
            phase_scaling: true,
        }
    }
}

/// Draws a diameter uniformly from the five non-zero severity levels and
/// `alpha`, `beta` independently from [`SCALING_LEVELS`].
pub fn sample_params<R: rand::Rng + ?Sized>(rng: &mut R, height: usize, width: usize) -> AugmentParams {
    sample_params_with(rng, height, width, SamplerToggles::default())
}

pub fn sample_params_with<R: rand::Rng + ?Sized>(
    rng: &mut R,
    height: usize,
    width: usize,
    toggles: SamplerToggles,
) -> AugmentParams {
    let levels = severity_levels(height, width);
    let d = levels[rng.random_range(0..levels.len())];
    let alpha = SCALING_LEVELS[rng.random_range(0..SCALING_LEVELS.len())];
    let beta = SCALING_LEVELS[rng.random_range(0..SCALING_LEVELS.len())];
    AugmentParams {
        d,
        alpha: if toggles.amplitude_scaling { alpha } else { 1.0 },
        beta: if toggles.phase_scaling { beta } else { 1.0 },
    }
}

/// Runs the filter and returns each channel's complex spatial result before
/// the real-part projection.
pub fn two_step_highpass_complex(img: &Image, params: &AugmentParams) -> Result<Vec<Vec<Complex64>>> {
    params.validate()?;
    let mask = FilterMask::highpass(img.height(), img.width(), params.d)?;
    let mut centered = Spectrum::forward(img)?.center()?;
    centered.apply_mask(&mask)?;
    let scaled = AmpPhase::from_spectrum(&centered).scaled(params.alpha, params.beta)?;
    scaled.recombine().uncenter()?.inverse()
}

/// Real parts before clamping, one plane per channel.
pub fn two_step_highpass_unclamped(img: &Image, params: &AugmentParams) -> Result<Vec<Vec<f64>>> {
    Ok(two_step_highpass_complex(img, params)?
        .into_iter()
        .map(|p| p.into_iter().map(|c| c.re).collect())
        .collect())
}

pub fn two_step_highpass(img: &Image, params: &AugmentParams) -> Result<Image> {
    let planes = two_step_highpass_unclamped(img, params)?;
    Ok(Image::from_planes(img.height(), img.width(), &planes)?.clamped())
}

/// Filters a batch, image `i` with `params[i]`.
pub fn two_step_batch(exec: Exec, images: &[Image], params: &[AugmentParams]) -> Result<Vec<Image>> {
    if images.len() != params.len() {
        return Err(Error::InvalidInput(format!(
            "{} images but {} parameter sets",
            images.len(),
            params.len()
        )));
    }
    par::map_range(exec, images.len(), |i| two_step_highpass(&images[i], &params[i]))
        .into_iter()
        .collect()
}

/// Display images for the grayscale spectrum in centered layout:
/// amplitude as `ln(1 + A)` scaled so the maximum is 1, phase mapped
/// linearly from `(-π, π]` to `(0, 1]`.
pub fn spectrum_display(img: &Image) -> Result<(Image, Image)> {
    let gray = if img.channels() == 3 {
        rgb2gray(img)?.into_image()
    } else {
        img.clone()
    };
    let ap = AmpPhase::from_spectrum(&Spectrum::forward(&gray)?.center()?);
    let log_amp: Vec<f64> = ap.amplitude[0].iter().map(|a| a.ln_1p()).collect();
    let peak = log_amp.iter().copied().fold(0.0, f64::max);
    let amp = log_amp
        .iter()
        .map(|v| if peak > 0.0 { v / peak } else { 0.0 })
        .collect();
    let phase = ap.phase[0].iter().map(|p| (p + PI) / (2.0 * PI)).collect();
    Ok((
        Image::new(img.height(), img.width(), 1, amp)?,
        Image::new(img.height(), img.width(), 1, phase)?,
    ))
}

/// Stateful sampler for one worker.
pub struct ParamSampler {
    rng: crate::seed::Rng,
    toggles: SamplerToggles,
}

impl ParamSampler {
    pub fn new(seed: u64) -> Self {
        ParamSampler {
            rng: crate::seed::rng(seed),
            toggles: SamplerToggles::default(),
        }
    }

    pub fn with_toggles(seed: u64, toggles: SamplerToggles) -> Self {
        ParamSampler {
            rng: crate::seed::rng(seed),
            toggles,
        }
    }

    pub fn sample(&mut self, height: usize, width: usize) -> AugmentParams {
        sample_params_with(&mut self.rng, height, width, self.toggles)
    }

    pub fn uniform_unit(&mut self) -> f64 {
        self.rng.random()
    }
}
