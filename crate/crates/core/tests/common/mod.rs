//! Independent reference implementations used as test oracles. Nothing here
//! calls into the code paths it checks.
#![allow(dead_code)]

use std::f64::consts::PI;

use freqgen::raster::Image;
use rand::Rng;
use rustfft::num_complex::Complex64;

/// Direct double-sum DFT, `O((HW)²)`.
pub fn naive_dft(h: usize, w: usize, x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for xx in 0..w {
                    let angle = sign * 2.0 * PI * ((y * u) as f64 / h as f64 + (xx * v) as f64 / w as f64);
                    acc += x[y * w + xx] * Complex64::new(angle.cos(), angle.sin());
                }
            }
            out[u * w + v] = if inverse { acc / (h * w) as f64 } else { acc };
        }
    }
    out
}

pub fn real_to_complex(x: &[f64]) -> Vec<Complex64> {
    x.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Eq.-style mask value straight from the sign function.
pub fn mask_value(h: usize, w: usize, u: usize, v: usize, d: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let du = u as f64 - (h / 2) as f64;
    let dv = v as f64 - (w / 2) as f64;
    let dist = (du * du + dv * dv).sqrt();
    let diff = dist - d;
    let sgn = if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
    0.5 * (1.0 + sgn)
}

/// Straight-line two-step filter on one plane using the naive DFT.
/// Returns the complex spatial result before the real-part projection.
pub fn naive_two_step_plane(h: usize, w: usize, plane: &[f64], d: f64, alpha: f64, beta: f64) -> Vec<Complex64> {
    let spec = naive_dft(h, w, &real_to_complex(plane), false);
    // centered[(u + h/2) % h][(v + w/2) % w] = natural[u][v]
    let mut centered = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            centered[((u + h / 2) % h) * w + (v + w / 2) % w] = spec[u * w + v];
        }
    }
    for u in 0..h {
        for v in 0..w {
            let c = centered[u * w + v] * mask_value(h, w, u, v, d);
            let amp = (c.re * c.re + c.im * c.im).sqrt();
            let mut phase = c.im.atan2(c.re);
            if phase <= -PI {
                phase = PI;
            }
            let (a, p) = (alpha * amp, beta * phase);
            centered[u * w + v] = Complex64::new(a * p.cos(), a * p.sin());
        }
    }
    let mut natural = vec![Complex64::new(0.0, 0.0); h * w];
    for u in 0..h {
        for v in 0..w {
            natural[u * w + v] = centered[((u + h / 2) % h) * w + (v + w / 2) % w];
        }
    }
    naive_dft(h, w, &natural, true)
}

/// Mirror padding index without edge repetition, by explicit bouncing.
pub fn mirror(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Unnormalized-then-normalized Gaussian weights, `size × size`.
pub fn gaussian_weights(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut w = vec![];
    for m in -r..=r {
        for n in -r..=r {
            w.push((-((m * m + n * n) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Direct 2-D correlation with mirror padding, `O(H·W·g²)`.
pub fn naive_lowpass(h: usize, w: usize, plane: &[f64], size: usize, sigma: f64) -> Vec<f64> {
    let weights = gaussian_weights(size, sigma);
    let r = (size / 2) as isize;
    let mut out = vec![0.0; h * w];
    for p in 0..h as isize {
        for q in 0..w as isize {
            let mut acc = 0.0;
            for m in -r..=r {
                for n in -r..=r {
                    let wt = weights[((m + r) as usize) * size + (n + r) as usize];
                    acc += wt * plane[mirror(p + m, h) * w + mirror(q + n, w)];
                }
            }
            out[p as usize * w + q as usize] = acc;
        }
    }
    out
}

pub fn random_image<R: Rng>(rng: &mut R, h: usize, w: usize, c: usize) -> Image {
    Image::new(h, w, c, (0..h * w * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Smooth blobs plus fine texture, standing in for a natural photograph.
pub fn natural_image(h: usize, w: usize) -> Image {
    Image::from_fn(h, w, 3, |y, x, c| {
        let (fy, fx) = (y as f64 / h as f64, x as f64 / w as f64);
        let smooth = 0.5 + 0.3 * (2.0 * PI * (fx + 0.3 * c as f64)).sin() * (PI * fy).cos();
        let edge = if (fx - 0.6).powi(2) + (fy - 0.4).powi(2) < 0.04 { 0.2 } else { 0.0 };
        let texture = 0.05 * ((x * 7 + y * 13 + c * 5) % 11) as f64 / 11.0;
        (smooth + edge + texture).clamp(0.0, 1.0)
    })
    .unwrap()
}

pub fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
