//! Procedural four-domain shape dataset.
//!
//! Three classes (disk, square, triangle) are drawn on 32×32 canvases. The
//! background hue predicts the class within a domain, but each domain maps
//! hues to classes differently, so the hue is a shortcut that does not
//! transfer. Shapes are achromatic and their geometry is sampled identically
//! in every domain.

use rand::Rng;

use crate::raster::Image;
use crate::seed;

pub const IMAGE_SIZE: usize = 32;
pub const NUM_CLASSES: usize = 3;
pub const NUM_DOMAINS: usize = 4;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["disk", "square", "triangle"];
pub const DOMAIN_NAMES: [&str; NUM_DOMAINS] = ["solid", "gradient", "noise", "inverted"];

/// Probability that a background uses its class's hue rather than a random one.
pub const DEFAULT_SPURIOUS_STRENGTH: f64 = 0.95;

// Muted tints around mid-gray, so hue is a weak but clean signal.
const PALETTE: [[f64; 3]; 3] = [[0.59, 0.41, 0.41], [0.41, 0.575, 0.425], [0.41, 0.44, 0.605]];

/// Hue index assigned to `class` in `domain`.
pub fn class_hue(domain: usize, class: usize) -> usize {
    match domain {
        0 => class,
        1 => (class + 1) % 3,
        2 => (class + 2) % 3,
        _ => [1, 0, 2][class],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSample {
    pub image: Image,
    pub label: usize,
    pub domain: usize,
}

/// Everything random about one sample, drawn before rendering.
#[derive(Clone, Debug, PartialEq)]
struct Recipe {
    label: usize,
    domain: usize,
    hue: usize,
    bg: [f64; 3],
    fg: [f64; 3],
    center: (f64, f64),
    radius: f64,
    gradient_dir: f64,
    noise_seed: u64,
}

fn luma(c: &[f64; 3]) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

fn recipe(rng: &mut seed::Rng, label: usize, domain: usize, spurious: f64) -> Recipe {
    let hue = if rng.random::<f64>() < spurious {
        class_hue(domain, label)
    } else {
        rng.random_range(0..3)
    };
    let bg = PALETTE[hue].map(|v| v + rng.random_range(-0.03..0.03));
    // Achromatic foreground, so color statistics come from the background.
    let fg = loop {
        let g = rng.random::<f64>();
        if (g - luma(&bg)).abs() >= 0.4 {
            break [g; 3];
        }
    };
    let mid = IMAGE_SIZE as f64 / 2.0;
    Recipe {
        label,
        domain,
        hue,
        bg,
        fg,
        center: (mid + rng.random_range(-1.0..1.0), mid + rng.random_range(-1.0..1.0)),
        radius: rng.random_range(11.0..13.0),
        gradient_dir: rng.random_range(0.0..std::f64::consts::TAU),
        noise_seed: rng.random(),
    }
}

/// Whether `(y, x)` lies inside the class shape centered at `center`.
fn inside(label: usize, y: f64, x: f64, center: (f64, f64), r: f64) -> bool {
    let (dy, dx) = (y - center.0, x - center.1);
    match label {
        0 => dy * dy + dx * dx <= r * r,
        1 => dy.abs() <= 0.85 * r && dx.abs() <= 0.85 * r,
        _ => {
            // Upward triangle, apex at -r, base at +0.7r.
            let top = -r;
            let base = 0.7 * r;
            if dy < top || dy > base {
                return false;
            }
            let half = (dy - top) / (base - top) * r;
            dx.abs() <= half
        }
    }
}

/// Fraction of a pixel covered by the shape, 4×4 supersampled.
fn coverage(rec: &Recipe, y: usize, x: usize) -> f64 {
    let mut hits = 0;
    for sy in 0..4 {
        for sx in 0..4 {
            let py = y as f64 + (sy as f64 + 0.5) / 4.0;
            let px = x as f64 + (sx as f64 + 0.5) / 4.0;
            if inside(rec.label, py, px, rec.center, rec.radius) {
                hits += 1;
            }
        }
    }
    hits as f64 / 16.0
}

fn render(rec: &Recipe, neutral_background: bool) -> Image {
    let n = IMAGE_SIZE;
    let mut noise = seed::rng(rec.noise_seed);
    let (dir_y, dir_x) = (rec.gradient_dir.sin(), rec.gradient_dir.cos());
    let mut data = Vec::with_capacity(n * n * 3);
    for y in 0..n {
        for x in 0..n {
            let bg: [f64; 3] = if neutral_background {
                [0.5; 3]
            } else {
                match rec.domain {
                    1 => {
                        let t = ((y as f64 / (n - 1) as f64 - 0.5) * dir_y
                            + (x as f64 / (n - 1) as f64 - 0.5) * dir_x)
                            / std::f64::consts::SQRT_2
                            + 0.5;
                        rec.bg.map(|v| v * (0.6 + 0.8 * t))
                    }
                    2 => rec.bg.map(|v| v + noise.random_range(-0.3..0.3)),
                    _ => rec.bg,
                }
            };
            let cov = coverage(rec, y, x);
            let mut px = [0.0; 3];
            for c in 0..3 {
                px[c] = cov * rec.fg[c] + (1.0 - cov) * bg[c];
            }
            if rec.domain == 3 && !neutral_background {
                // Flip lightness, keep chroma.
                let shift = 1.0 - 2.0 * luma(&px);
                px = px.map(|v| v + shift);
            }
            data.extend(px.map(|v| v.clamp(0.0, 1.0)));
        }
    }
    Image::new(n, n, 3, data).expect("canvas dimensions are consistent")
}

fn recipes(seed_value: u64, n_per_domain_class: usize, spurious: f64) -> Vec<Recipe> {
    let mut out = Vec::with_capacity(NUM_DOMAINS * NUM_CLASSES * n_per_domain_class);
    for domain in 0..NUM_DOMAINS {
        for label in 0..NUM_CLASSES {
            for i in 0..n_per_domain_class {
                let idx = ((domain * NUM_CLASSES + label) * n_per_domain_class + i) as u64;
                let mut rng = seed::rng(seed::derive(seed_value, idx));
                out.push(recipe(&mut rng, label, domain, spurious));
            }
        }
    }
    out
}

/// `n_per_domain_class` samples for each (domain, class) pair, ordered by
/// domain, then class.
pub fn synth_dataset(seed_value: u64, n_per_domain_class: usize) -> Vec<DomainSample> {
    synth_dataset_with(seed_value, n_per_domain_class, DEFAULT_SPURIOUS_STRENGTH)
}

pub fn synth_dataset_with(seed_value: u64, n_per_domain_class: usize, spurious: f64) -> Vec<DomainSample> {
    build(seed_value, n_per_domain_class, spurious, false)
}

/// The same shapes as [`synth_dataset_with`] on a neutral mid-gray
/// background, with no domain styling.
pub fn synth_foreground_only(seed_value: u64, n_per_domain_class: usize, spurious: f64) -> Vec<DomainSample> {
    build(seed_value, n_per_domain_class, spurious, true)
}

fn build(seed_value: u64, n: usize, spurious: f64, neutral: bool) -> Vec<DomainSample> {
    let recipes = recipes(seed_value, n, spurious);
    crate::par::map(crate::par::Exec::Auto, &recipes, |r| DomainSample {
        image: render(r, neutral),
        label: r.label,
        domain: r.domain,
    })
}

/// Background hue of each sample, for diagnostics.
pub fn background_hues(seed_value: u64, n_per_domain_class: usize, spurious: f64) -> Vec<usize> {
    recipes(seed_value, n_per_domain_class, spurious)
        .iter()
        .map(|r| r.hue)
        .collect()
}
