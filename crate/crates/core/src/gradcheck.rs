//! Central-difference gradient checks for the Tail Interaction layer and
//! the harness model.

use ndarray::{Array2, Array3};
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::harness::data::synth_dataset;
use crate::harness::model::{Model, ModelConfig};
use crate::raster::Image;
use crate::seed;
use crate::tail::{TailInteraction, TailParams};

pub const EPSILON: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

/// Relative error with an absolute floor for entries that are both ~0.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn normal_array2(rng: &mut seed::Rng, shape: (usize, usize), scale: f64) -> Array2<f64> {
    let n = Normal::new(0.0, scale).expect("positive scale");
    Array2::from_shape_simple_fn(shape, || n.sample(rng))
}

fn tail_param(layer: &mut TailInteraction, k: usize) -> &mut [f64] {
    let p = layer.params_mut();
    let m = match k {
        0 => &mut p.query,
        1 => &mut p.keys,
        _ => &mut p.values,
    };
    m.as_slice_mut().expect("standard layout")
}

/// Checks the layer alone on `L = Σ G ⊙ TI(X)` with B=2, N=5, S=4, z=3.
pub fn check_tail(seed_value: u64) -> Result<Vec<GradCheck>> {
    let (b, n, s, z) = (2, 5, 4, 3);
    let mut rng = seed::rng(seed_value);
    let mut layer = TailInteraction::new(TailParams {
        query: normal_array2(&mut rng, (z, z), 0.7),
        keys: normal_array2(&mut rng, (s, z), 0.7),
        values: normal_array2(&mut rng, (s, z), 1.0),
    })?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let x = Array3::from_shape_simple_fn((b, n, z), || unit.sample(&mut rng));
    let g = Array3::from_shape_simple_fn((b, n, z), || unit.sample(&mut rng));
    let loss = |l: &TailInteraction, x: &Array3<f64>| -> Result<f64> { Ok((l.forward(x)?.0 * &g).sum()) };

    let (_, cache) = layer.forward(&x)?;
    let grads = layer.backward(&g, &cache)?;

    let mut worst = 0.0f64;
    let mut xs = x.clone();
    for i in 0..x.len() {
        let orig = xs.as_slice().expect("standard layout")[i];
        xs.as_slice_mut().expect("standard layout")[i] = orig + EPSILON;
        let up = loss(&layer, &xs)?;
        xs.as_slice_mut().expect("standard layout")[i] = orig - EPSILON;
        let down = loss(&layer, &xs)?;
        xs.as_slice_mut().expect("standard layout")[i] = orig;
        let numeric = (up - down) / (2.0 * EPSILON);
        worst = worst.max(rel_error(grads.input.as_slice().expect("standard layout")[i], numeric));
    }
    let mut report = vec![GradCheck { name: "tail.input".into(), max_rel_error: worst }];

    for (k, (name, analytic)) in [("query", grads.query), ("keys", grads.keys), ("values", grads.values)]
        .into_iter()
        .enumerate()
    {
        let mut worst = 0.0f64;
        for i in 0..analytic.len() {
            let orig = tail_param(&mut layer, k)[i];
            tail_param(&mut layer, k)[i] = orig + EPSILON;
            let up = loss(&layer, &x)?;
            tail_param(&mut layer, k)[i] = orig - EPSILON;
            let down = loss(&layer, &x)?;
            tail_param(&mut layer, k)[i] = orig;
            let numeric = (up - down) / (2.0 * EPSILON);
            worst = worst.max(rel_error(analytic.as_slice().expect("standard layout")[i], numeric));
        }
        report.push(GradCheck { name: format!("tail.{name}"), max_rel_error: worst });
    }
    Ok(report)
}

/// Checks the whole model (two stacked Tail Interaction layers) on the
/// cross-entropy of a 4-sample batch of dataset images.
pub fn check_model(seed_value: u64) -> Result<Vec<GradCheck>> {
    let images: Vec<Image> = synth_dataset(seed_value, 1)
        .into_iter()
        .step_by(3)
        .take(4)
        .map(|s| s.image)
        .collect();
    let refs: Vec<&Image> = images.iter().collect();
    let labels = [0, 1, 2, 1];
    let cfg = ModelConfig {
        patch: 8,
        embed_dim: 5,
        unit_size: 3,
        tail_layers: 2,
        classes: 3,
    };
    let mut model = Model::new(cfg, 3, &mut seed::rng(seed::derive(seed_value, 1)))?;
    let (_, grads) = model.loss_and_grads(&refs, &labels)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
    let mut names = vec!["embed.weight".to_string(), "embed.bias".to_string()];
    for l in 0..cfg.tail_layers {
        names.extend(["query", "keys", "values"].map(|p| format!("tail{l}.{p}")));
    }
    names.extend(["head.weight".to_string(), "head.bias".to_string()]);

    let mut report = Vec::with_capacity(names.len());
    for (t, (name, expected)) in names.into_iter().zip(&analytic).enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in expected.iter().enumerate() {
            let orig = model.tensors_mut()[t][i];
            model.tensors_mut()[t][i] = orig + EPSILON;
            let up = model.loss(&refs, &labels)?;
            model.tensors_mut()[t][i] = orig - EPSILON;
            let down = model.loss(&refs, &labels)?;
            model.tensors_mut()[t][i] = orig;
            worst = worst.max(rel_error(a, (up - down) / (2.0 * EPSILON)));
        }
        report.push(GradCheck { name, max_rel_error: worst });
    }
    Ok(report)
}
