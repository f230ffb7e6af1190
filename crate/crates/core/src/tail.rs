//! Tail Interaction attention.
//!
//! For each batch item with tokens `X` (`N × z`):
//!
//! ```text
//! Q  = X · Wqᵀ                  query projection, no bias
//! M  = Q · Kᵀ                   N × S affinities against the key unit
//! Â  = softmax over tokens      each column of M sums to 1
//! A  = Â / rowsum(Â)            each row sums to 1
//! Y  = ReLU(A · V + X)          value unit, residual from the raw input
//! ```
//!
//! Cost is `O(N·S·z)`, linear in the token count. [`TailInteraction::backward`]
//! is the exact gradient of this map.

use std::io::Read;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis, Zip};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::par::{self, Exec};

pub const DEFAULT_UNIT_SIZE: usize = 64;

const MAGIC: &[u8; 4] = b"FGTI";
const FORMAT_VERSION: u32 = 1;

/// Column softmax followed by row l1 normalization.
pub fn dual_normalize(m: ArrayView2<f64>) -> Array2<f64> {
    dual_normalize_parts(m).0
}

/// Returns `(A, Â, rowsum(Â))`.
fn dual_normalize_parts(m: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    // Row-major sweeps only: strided column walks fall out of cache at large N.
    let mut col_max = Array1::from_elem(m.ncols(), f64::NEG_INFINITY);
    for row in m.rows() {
        Zip::from(&mut col_max).and(&row).for_each(|a, &b| *a = a.max(b));
    }
    let mut soft = m.to_owned();
    let mut col_sum = Array1::<f64>::zeros(m.ncols());
    for mut row in soft.rows_mut() {
        Zip::from(&mut row).and(&col_max).for_each(|v, &mx| *v = (*v - mx).exp());
        col_sum += &row;
    }
    for mut row in soft.rows_mut() {
        row /= &col_sum;
    }
    let row_sums = soft.sum_axis(Axis(1));
    let mut attn = soft.clone();
    for (mut row, &r) in attn.rows_mut().into_iter().zip(&row_sums) {
        row.mapv_inplace(|v| v / r);
    }
    (attn, soft, row_sums)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TailParams {
    /// `z × z` query projection.
    pub query: Array2<f64>,
    /// `S × z` key interaction unit.
    pub keys: Array2<f64>,
    /// `S × z` value interaction unit.
    pub values: Array2<f64>,
}

impl TailParams {
    pub fn channels(&self) -> usize {
        self.query.nrows()
    }

    pub fn unit_size(&self) -> usize {
        self.keys.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let z = self.query.nrows();
        let s = self.keys.nrows();
        if z == 0 || s == 0 {
            return Err(Error::InvalidInput("empty interaction parameters".into()));
        }
        if self.query.ncols() != z || self.keys.ncols() != z || self.values.dim() != (s, z) {
            return Err(Error::InvalidInput(format!(
                "inconsistent shapes: query {:?}, keys {:?}, values {:?}",
                self.query.dim(),
                self.keys.dim(),
                self.values.dim()
            )));
        }
        let all_finite = self
            .query
            .iter()
            .chain(&self.keys)
            .chain(&self.values)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite interaction parameters".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.query.len() + self.keys.len() + self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view order: query, keys, values, each row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.query
            .iter()
            .chain(&self.keys)
            .chain(&self.values)
            .copied()
            .collect()
    }

    /// Serializes as a 16-byte header (`FGTI`, format version, z, S as
    /// little-endian u32) followed by the flat parameters as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.channels() as u32).to_le_bytes());
        out.extend_from_slice(&(self.unit_size() as u32).to_le_bytes());
        for v in self.to_flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("interaction parameter blob: {m}"));
        let mut header = [0u8; 16];
        bytes.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        if word(4) != FORMAT_VERSION {
            return Err(bad(&format!("unsupported version {}", word(4))));
        }
        let (z, s) = (word(8) as usize, word(12) as usize);
        let count = z * z + 2 * s * z;
        if bytes.len() != 8 * count {
            return Err(bad(&format!("expected {} payload bytes, got {}", 8 * count, bytes.len())));
        }
        let flat: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = TailParams {
            query: Array2::from_shape_vec((z, z), flat[..z * z].to_vec()).unwrap(),
            keys: Array2::from_shape_vec((s, z), flat[z * z..z * z + s * z].to_vec()).unwrap(),
            values: Array2::from_shape_vec((s, z), flat[z * z + s * z..].to_vec()).unwrap(),
        };
        params.validate()?;
        Ok(params)
    }
}

/// Gradients with respect to the layer input and each parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct TailGrads {
    pub input: Array3<f64>,
    pub query: Array2<f64>,
    pub keys: Array2<f64>,
    pub values: Array2<f64>,
}

struct ItemCache {
    input: Array2<f64>,
    projected: Array2<f64>,
    attn: Array2<f64>,
    soft: Array2<f64>,
    row_sums: Array1<f64>,
    pre_act: Array2<f64>,
}

/// Intermediates from one forward pass, bound to the layer state that
/// produced them.
pub struct TailCache {
    layer_id: u64,
    version: u64,
    items: Vec<ItemCache>,
}

impl TailCache {
    /// Attention maps, `B × N × S`.
    pub fn attention(&self) -> Array3<f64> {
        let b = self.items.len();
        let (n, s) = self.items[0].attn.dim();
        let mut out = Array3::zeros((b, n, s));
        for (i, item) in self.items.iter().enumerate() {
            out.slice_mut(s![i, .., ..]).assign(&item.attn);
        }
        out
    }
}

static NEXT_LAYER_ID: AtomicU64 = AtomicU64::new(1);

pub struct TailInteraction {
    params: TailParams,
    id: u64,
    version: u64,
    exec: Exec,
}

impl Clone for TailInteraction {
    fn clone(&self) -> Self {
        TailInteraction {
            params: self.params.clone(),
            id: NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
            exec: self.exec,
        }
    }
}

impl std::fmt::Debug for TailInteraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TailInteraction")
            .field("channels", &self.params.channels())
            .field("unit_size", &self.params.unit_size())
            .finish()
    }
}

impl TailInteraction {
    pub fn new(params: TailParams) -> Result<Self> {
        params.validate()?;
        Ok(TailInteraction {
            params,
            id: NEXT_LAYER_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
            exec: Exec::Auto,
        })
    }

    /// Identity query projection; key and value units drawn from
    /// `N(0, 1/z)`.
    pub fn init<R: rand::Rng + ?Sized>(channels: usize, unit_size: usize, rng: &mut R) -> Result<Self> {
        if channels == 0 || unit_size == 0 {
            return Err(Error::InvalidParameter("channels and unit size must be positive".into()));
        }
        let normal = Normal::new(0.0, 1.0 / (channels as f64).sqrt()).expect("finite std");
        let keys = Array2::from_shape_simple_fn((unit_size, channels), || normal.sample(rng));
        let values = Array2::from_shape_simple_fn((unit_size, channels), || normal.sample(rng));
        TailInteraction::new(TailParams {
            query: Array2::eye(channels),
            keys,
            values,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn params(&self) -> &TailParams {
        &self.params
    }

    /// Mutable access; invalidates every outstanding cache.
    pub fn params_mut(&mut self) -> &mut TailParams {
        self.version += 1;
        &mut self.params
    }

    pub fn channels(&self) -> usize {
        self.params.channels()
    }

    pub fn unit_size(&self) -> usize {
        self.params.unit_size()
    }

    pub fn forward(&self, input: &Array3<f64>) -> Result<(Array3<f64>, TailCache)> {
        let (b, n, z) = input.dim();
        if z != self.channels() {
            return Err(Error::InvalidInput(format!(
                "feature map has {z} channels, layer expects {}",
                self.channels()
            )));
        }
        if b == 0 || n == 0 {
            return Err(Error::InvalidInput("empty feature map".into()));
        }
        let p = &self.params;
        let items = par::map_range(self.exec, b, |i| {
            let x = input.index_axis(Axis(0), i).to_owned();
            let projected = x.dot(&p.query.t());
            let affinity = projected.dot(&p.keys.t());
            let (attn, soft, row_sums) = dual_normalize_parts(affinity.view());
            let pre_act = attn.dot(&p.values) + &x;
            ItemCache {
                input: x,
                projected,
                attn,
                soft,
                row_sums,
                pre_act,
            }
        });
        let mut out = Array3::zeros((b, n, z));
        for (i, item) in items.iter().enumerate() {
            out.index_axis_mut(Axis(0), i)
                .assign(&item.pre_act.mapv(|v| v.max(0.0)));
        }
        Ok((
            out,
            TailCache {
                layer_id: self.id,
                version: self.version,
                items,
            },
        ))
    }

    pub fn backward(&self, grad_out: &Array3<f64>, cache: &TailCache) -> Result<TailGrads> {
        if cache.layer_id != self.id || cache.version != self.version {
            return Err(Error::InvalidState(
                "cache was produced by a different layer state".into(),
            ));
        }
        let (b, n, z) = grad_out.dim();
        if b != cache.items.len() || cache.items.first().map(|c| c.input.dim()) != Some((n, z)) {
            return Err(Error::InvalidState(format!(
                "gradient shape {:?} does not match the cached forward pass",
                grad_out.dim()
            )));
        }
        let p = &self.params;
        let per_item = par::map_range(self.exec, b, |i| {
            let c = &cache.items[i];
            let mut d_pre = grad_out.index_axis(Axis(0), i).to_owned();
            Zip::from(&mut d_pre)
                .and(&c.pre_act)
                .for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0
                    }
                });
            let d_values = c.attn.t().dot(&d_pre);
            let d_attn = d_pre.dot(&p.values.t());

            // Row normalization: A = Â / r.
            let mut d_soft = d_attn.clone();
            for ((mut row, a_row), &r) in d_soft
                .rows_mut()
                .into_iter()
                .zip(c.attn.rows())
                .zip(&c.row_sums)
            {
                let dot = row.dot(&a_row);
                row.mapv_inplace(|g| (g - dot) / r);
            }

            // Column softmax.
            let mut d_aff = d_soft;
            for (mut col, s_col) in d_aff.columns_mut().into_iter().zip(c.soft.columns()) {
                let dot = col.dot(&s_col);
                Zip::from(&mut col).and(&s_col).for_each(|g, &s| *g = s * (*g - dot));
            }

            let d_keys = d_aff.t().dot(&c.projected);
            let d_proj = d_aff.dot(&p.keys);
            let d_query = d_proj.t().dot(&c.input);
            let d_input = d_pre + d_proj.dot(&p.query);
            (d_input, d_query, d_keys, d_values)
        });

        let mut grads = TailGrads {
            input: Array3::zeros((b, n, z)),
            query: Array2::zeros(p.query.dim()),
            keys: Array2::zeros(p.keys.dim()),
            values: Array2::zeros(p.values.dim()),
        };
        // Fixed-order reduction keeps results independent of scheduling.
        for (i, (d_input, d_query, d_keys, d_values)) in per_item.into_iter().enumerate() {
            grads.input.index_axis_mut(Axis(0), i).assign(&d_input);
            grads.query += &d_query;
            grads.keys += &d_keys;
            grads.values += &d_values;
        }
        Ok(grads)
    }
}

/// Median wall-clock seconds of one forward pass at a given token count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub tokens: usize,
    pub median_secs: f64,
}

/// Times [`TailInteraction::forward`] on random inputs for each token count.
pub fn complexity_probe(
    token_counts: &[usize],
    unit_size: usize,
    channels: usize,
    batch: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    let mut rng = crate::seed::rng(seed);
    let layer = TailInteraction::init(channels, unit_size, &mut rng)?.with_exec(Exec::Sequential);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    token_counts
        .iter()
        .map(|&n| {
            let input = Array3::from_shape_simple_fn((batch, n, channels), || normal.sample(&mut rng));
            layer.forward(&input)?;
            let mut times = Vec::with_capacity(runs);
            for _ in 0..runs.max(1) {
                let start = Instant::now();
                let out = layer.forward(&input)?;
                times.push(start.elapsed().as_secs_f64());
                std::hint::black_box(out);
            }
            times.sort_by(f64::total_cmp);
            Ok(ProbeRow {
                tokens: n,
                median_secs: times[times.len() / 2],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dual_normalize_single_entry() {
        for m in [-50.0, 0.0, 3.0, 700.0] {
            assert_eq!(dual_normalize(array![[m]].view()), array![[1.0]]);
        }
    }

    #[test]
    fn dual_normalize_constant_is_uniform() {
        let m = Array2::from_elem((5, 4), 2.5);
        let a = dual_normalize(m.view());
        assert!(a.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn dual_normalize_survives_huge_logits() {
        let m = array![[1000.0, -1000.0], [999.0, 0.0], [-1e6, 1e6]];
        let a = dual_normalize(m.view());
        assert!(a.iter().all(|v| v.is_finite() && *v >= 0.0));
        for row in a.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut rng = crate::seed::rng(1);
        let layer = TailInteraction::init(3, 4, &mut rng).unwrap();
        let x = Array3::zeros((1, 2, 5));
        assert!(matches!(layer.forward(&x), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = crate::seed::rng(1);
        let mut layer = TailInteraction::init(3, 4, &mut rng).unwrap();
        let x = Array3::from_elem((2, 5, 3), 0.3);
        let (y, cache) = layer.forward(&x).unwrap();
        assert!(layer.backward(&y, &cache).is_ok());
        assert!(matches!(
            layer.backward(&Array3::zeros((2, 4, 3)), &cache),
            Err(Error::InvalidState(_))
        ));
        let other = layer.clone();
        assert!(matches!(other.backward(&y, &cache), Err(Error::InvalidState(_))));
        layer.params_mut().keys[[0, 0]] += 1.0;
        assert!(matches!(layer.backward(&y, &cache), Err(Error::InvalidState(_))));
    }

    #[test]
    fn init_uses_identity_query() {
        let mut rng = crate::seed::rng(9);
        let layer = TailInteraction::init(6, 3, &mut rng).unwrap();
        assert_eq!(layer.params().query, Array2::eye(6));
        assert_eq!(layer.params().keys.dim(), (3, 6));
    }

    #[test]
    fn blob_rejects_corruption() {
        let mut rng = crate::seed::rng(2);
        let layer = TailInteraction::init(2, 3, &mut rng).unwrap();
        let bytes = layer.params().to_bytes();
        assert_eq!(bytes.len(), 16 + 8 * (4 + 12));
        assert!(TailParams::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(TailParams::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[4] = 9;
        assert!(TailParams::from_bytes(&bad).is_err());
    }
}
