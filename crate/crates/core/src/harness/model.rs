//! Patch classifier with an optional Tail Interaction stack at its end.
//!
//! `image → 4×4 patches → linear(z) → ReLU → [Tail Interaction]* → mean over
//! tokens → linear(K) → softmax`, trained with cross-entropy. Every layer
//! has a hand-written backward pass.

use ndarray::{Array1, Array2, Array3, Axis};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::raster::Image;
use crate::tail::{TailCache, TailInteraction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub patch: usize,
    pub embed_dim: usize,
    pub unit_size: usize,
    /// Number of sequential Tail Interaction layers; 0 disables the module.
    pub tail_layers: usize,
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch: 8,
            embed_dim: 48,
            unit_size: 16,
            tail_layers: 1,
            classes: super::data::NUM_CLASSES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    embed_w: Array2<f64>,
    embed_b: Array1<f64>,
    tails: Vec<TailInteraction>,
    head_w: Array2<f64>,
    head_b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub embed_w: Array2<f64>,
    pub embed_b: Array1<f64>,
    /// `(query, keys, values)` per tail layer.
    pub tails: Vec<[Array2<f64>; 3]>,
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

impl ModelGrads {
    /// Flat views in the same order as [`Model::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![
            self.embed_w.as_slice().unwrap(),
            self.embed_b.as_slice().unwrap(),
        ];
        for t in &self.tails {
            out.extend(t.iter().map(|a| a.as_slice().unwrap()));
        }
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        out
    }
}

struct ForwardState {
    patches: Array2<f64>,
    embed_pre: Array2<f64>,
    tail_caches: Vec<TailCache>,
    pooled: Array2<f64>,
    probs: Array2<f64>,
}

/// Splits images into non-overlapping `patch × patch` tokens, centered
/// around zero. Row `b * N + t` holds token `t` of image `b`.
fn patchify(images: &[&Image], patch: usize) -> Result<(Array2<f64>, usize)> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
    let (h, w, c) = (first.height(), first.width(), first.channels());
    if h % patch != 0 || w % patch != 0 {
        return Err(Error::InvalidInput(format!(
            "{h}x{w} image is not divisible into {patch}x{patch} patches"
        )));
    }
    let (ph, pw) = (h / patch, w / patch);
    let tokens = ph * pw;
    let dim = patch * patch * c;
    let mut out = Array2::zeros((images.len() * tokens, dim));
    for (b, img) in images.iter().enumerate() {
        if (img.height(), img.width(), img.channels()) != (h, w, c) {
            return Err(Error::InvalidInput("images in a batch must share a shape".into()));
        }
        for ty in 0..ph {
            for tx in 0..pw {
                let mut row = out.row_mut(b * tokens + ty * pw + tx);
                let mut f = 0;
                for dy in 0..patch {
                    for dx in 0..patch {
                        for ch in 0..c {
                            row[f] = img.get(ty * patch + dy, tx * patch + dx, ch) - 0.5;
                            f += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((out, tokens))
}

impl Model {
    /// He-style init for the dense layers; Tail Interaction layers use their
    /// own initializer.
    pub fn new<R: rand::Rng + ?Sized>(config: ModelConfig, input_channels: usize, rng: &mut R) -> Result<Self> {
        if config.patch == 0 || config.embed_dim == 0 || config.classes < 2 {
            return Err(Error::InvalidParameter("degenerate model configuration".into()));
        }
        let dim = config.patch * config.patch * input_channels;
        let z = config.embed_dim;
        let embed = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("finite std");
        let head = Normal::new(0.0, (1.0 / z as f64).sqrt()).expect("finite std");
        let embed_w = Array2::from_shape_simple_fn((z, dim), || embed.sample(rng));
        let tails = (0..config.tail_layers)
            .map(|_| TailInteraction::init(z, config.unit_size, rng).map(|t| t.with_exec(Exec::Sequential)))
            .collect::<Result<Vec<_>>>()?;
        let head_w = Array2::from_shape_simple_fn((config.classes, z), || head.sample(rng));
        Ok(Model {
            config,
            embed_w,
            embed_b: Array1::zeros(z),
            tails,
            head_w,
            head_b: Array1::zeros(config.classes),
        })
    }

    pub fn config(&self) -> ModelConfig {
        self.config
    }

    pub fn tails(&self) -> &[TailInteraction] {
        &self.tails
    }

    pub fn parameter_count(&self) -> usize {
        self.embed_w.len()
            + self.embed_b.len()
            + self.tails.iter().map(|t| t.params().len()).sum::<usize>()
            + self.head_w.len()
            + self.head_b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.embed_w.iter().chain(&self.embed_b).chain(&self.head_w).chain(&self.head_b).all(|v| v.is_finite())
            && self.tails.iter().all(|t| t.params().to_flat().iter().all(|v| v.is_finite()))
    }

    /// Flat mutable views of every parameter tensor, in a fixed order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.embed_w.as_slice_mut().unwrap(),
            self.embed_b.as_slice_mut().unwrap(),
        ];
        for t in &mut self.tails {
            let p = t.params_mut();
            out.push(p.query.as_slice_mut().unwrap());
            out.push(p.keys.as_slice_mut().unwrap());
            out.push(p.values.as_slice_mut().unwrap());
        }
        out.push(self.head_w.as_slice_mut().unwrap());
        out.push(self.head_b.as_slice_mut().unwrap());
        out
    }

    fn forward_state(&self, images: &[&Image]) -> Result<ForwardState> {
        let (patches, tokens) = patchify(images, self.config.patch)?;
        if patches.ncols() != self.embed_w.ncols() {
            return Err(Error::InvalidInput(format!(
                "patch features {} do not match the embedding input {}",
                patches.ncols(),
                self.embed_w.ncols()
            )));
        }
        let b = images.len();
        let z = self.config.embed_dim;
        let embed_pre = patches.dot(&self.embed_w.t()) + &self.embed_b;
        let mut hidden = embed_pre
            .mapv(|v| v.max(0.0))
            .into_shape_with_order((b, tokens, z))
            .expect("row count is b * tokens");
        let mut tail_caches = Vec::with_capacity(self.tails.len());
        for tail in &self.tails {
            let (next, cache) = tail.forward(&hidden)?;
            hidden = next;
            tail_caches.push(cache);
        }
        let pooled = hidden.mean_axis(Axis(1)).expect("at least one token");
        let logits = pooled.dot(&self.head_w.t()) + &self.head_b;
        let mut probs = logits;
        for mut row in probs.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Ok(ForwardState {
            patches,
            embed_pre,
            tail_caches,
            pooled,
            probs,
        })
    }

    /// Class probabilities, `B × K`.
    pub fn predict_proba(&self, images: &[&Image]) -> Result<Array2<f64>> {
        Ok(self.forward_state(images)?.probs)
    }

    pub fn predict(&self, images: &[&Image]) -> Result<Vec<usize>> {
        let probs = self.predict_proba(images)?;
        Ok(probs
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
                    .0
            })
            .collect())
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, images: &[&Image], labels: &[usize]) -> Result<f64> {
        let state = self.forward_state(images)?;
        cross_entropy(&state.probs, labels)
    }

    pub fn loss_and_grads(&self, images: &[&Image], labels: &[usize]) -> Result<(f64, ModelGrads)> {
        let state = self.forward_state(images)?;
        let loss = cross_entropy(&state.probs, labels)?;
        let b = images.len();
        let z = self.config.embed_dim;
        let tokens = state.patches.nrows() / b;

        let mut d_logits = state.probs.clone();
        for (i, &y) in labels.iter().enumerate() {
            d_logits[[i, y]] -= 1.0;
        }
        d_logits /= b as f64;
        let head_w = d_logits.t().dot(&state.pooled);
        let head_b = d_logits.sum_axis(Axis(0));
        let d_pooled = d_logits.dot(&self.head_w);

        let mut d_hidden = Array3::zeros((b, tokens, z));
        for (mut item, g) in d_hidden.outer_iter_mut().zip(d_pooled.rows()) {
            let g = &g / tokens as f64;
            item.rows_mut().into_iter().for_each(|mut r| r.assign(&g));
        }
        let mut tails = vec![];
        for (tail, cache) in self.tails.iter().zip(&state.tail_caches).rev() {
            let g = tail.backward(&d_hidden, cache)?;
            d_hidden = g.input;
            tails.push([g.query, g.keys, g.values]);
        }
        tails.reverse();

        let mut d_embed = d_hidden
            .into_shape_with_order((b * tokens, z))
            .expect("contiguous gradient");
        ndarray::Zip::from(&mut d_embed)
            .and(&state.embed_pre)
            .for_each(|g, &pre| {
                if pre <= 0.0 {
                    *g = 0.0
                }
            });
        let embed_w = d_embed.t().dot(&state.patches);
        let embed_b = d_embed.sum_axis(Axis(0));
        Ok((
            loss,
            ModelGrads {
                embed_w,
                embed_b,
                tails,
                head_w,
                head_b,
            },
        ))
    }
}

fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    if labels.len() != probs.nrows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} samples",
            labels.len(),
            probs.nrows()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in probs.rows().into_iter().zip(labels) {
        if y >= row.len() {
            return Err(Error::InvalidInput(format!("label {y} out of range")));
        }
        total -= row[y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / labels.len() as f64)
}

/// SGD with momentum and L2 weight decay.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64, nesterov: bool) -> Self {
        Sgd {
            learning_rate,
            momentum,
            weight_decay,
            nesterov,
            velocity: vec![],
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &ModelGrads) {
        let grads = grads.tensors();
        let mut params = model.tensors_mut();
        if self.velocity.is_empty() {
            self.velocity = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        }
        for ((p, g), v) in params.iter_mut().zip(&grads).zip(&mut self.velocity) {
            for ((w, &g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                let g = g + self.weight_decay * *w;
                *v = self.momentum * *v + g;
                let step = if self.nesterov { g + self.momentum * *v } else { *v };
                *w -= self.learning_rate * step;
            }
        }
    }
}
