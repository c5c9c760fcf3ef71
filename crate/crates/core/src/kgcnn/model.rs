//! Parameters, forward pass, and backpropagation for the dual-channel CNN.
//!
//! Per channel: a valid 1-D convolution with ReLU, max-pooled over the
//! positions whose window holds no padding (position 0 alone when the
//! channel is shorter than the kernel). The two pooled vectors are
//! concatenated and fed through `fc1 -> dropout -> ReLU -> fc2 -> softmax`.
//!
//! Pad rows are zero vectors, so windows are evaluated over real rows only;
//! this is arithmetically identical to convolving the padded matrix and
//! masking the pad windows out of the pool.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DiseaseLabel;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 2;
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub filters: usize,
    pub kernel: usize,
    pub hidden: usize,
    pub dropout_keep: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub max_words: usize,
    pub max_cuis: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// When false the concept channel is fed no input (ablation).
    pub use_concepts: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            filters: 256,
            kernel: 5,
            hidden: 128,
            dropout_keep: 0.8,
            lr: 0.001,
            batch: 64,
            epochs: 30,
            max_words: 64,
            max_cuis: 128,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            use_concepts: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.filters == 0 || self.kernel == 0 || self.hidden == 0 {
            return bad("filters, kernel and hidden must be positive");
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad("dropout_keep must lie in (0, 1]");
        }
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if self.max_words == 0 || self.max_cuis == 0 {
            return bad("max_words and max_cuis must be positive");
        }
        Ok(())
    }

    /// Padded channel length: the configured maximum, raised to the kernel
    /// width when shorter.
    pub fn padded_len(&self, max_len: usize) -> usize {
        max_len.max(self.kernel)
    }
}

/// One input channel: a row-major `len × dim` matrix of the real
/// (non-pad) rows, plus the padded length the channel is defined over.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub rows: Vec<f64>,
    pub len: usize,
    pub dim: usize,
    pub padded_len: usize,
}

impl ChannelMatrix {
    pub fn new(rows: Vec<f64>, dim: usize, padded_len: usize) -> Self {
        let len = rows.len() / dim;
        debug_assert_eq!(rows.len(), len * dim);
        debug_assert!(len <= padded_len);
        Self {
            rows,
            len,
            dim,
            padded_len,
        }
    }

    pub fn empty(dim: usize, padded_len: usize) -> Self {
        Self::new(Vec::new(), dim, padded_len)
    }

    /// `true` at real rows, `false` at pad rows.
    pub fn pad_mask(&self) -> Vec<bool> {
        (0..self.padded_len).map(|i| i < self.len).collect()
    }

    /// Pool positions: windows lying entirely on real rows, or position 0 if
    /// there are fewer real rows than the kernel.
    pub fn pool_positions(&self, kernel: usize) -> usize {
        self.len.max(kernel) - kernel + 1
    }
}

/// Embedded inputs for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInput {
    pub words: ChannelMatrix,
    pub cuis: ChannelMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub word_conv: Vec<f64>,
    pub word_bias: Vec<f64>,
    pub cui_conv: Vec<f64>,
    pub cui_bias: Vec<f64>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 8] = [
    "word_conv",
    "word_bias",
    "cui_conv",
    "cui_bias",
    "fc1_w",
    "fc1_b",
    "fc2_w",
    "fc2_b",
];

impl Params {
    pub fn zeros(cfg: &ModelConfig, word_dim: usize, cui_dim: usize) -> Self {
        let (f, k, h) = (cfg.filters, cfg.kernel, cfg.hidden);
        Self {
            word_conv: vec![0.0; f * k * word_dim],
            word_bias: vec![0.0; f],
            cui_conv: vec![0.0; f * k * cui_dim],
            cui_bias: vec![0.0; f],
            fc1_w: vec![0.0; h * 2 * f],
            fc1_b: vec![0.0; h],
            fc2_w: vec![0.0; NUM_CLASSES * h],
            fc2_b: vec![0.0; NUM_CLASSES],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(cfg: &ModelConfig, word_dim: usize, cui_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg, word_dim, cui_dim);
        let (f, k, h) = (cfg.filters, cfg.kernel, cfg.hidden);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in w.iter_mut() {
                *x = rng.gen_range(-limit..limit);
            }
        };
        fill(&mut p.word_conv, k * word_dim, k * f);
        fill(&mut p.cui_conv, k * cui_dim, k * f);
        fill(&mut p.fc1_w, 2 * f, h);
        fill(&mut p.fc2_w, h, NUM_CLASSES);
        p
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<f64>| vec![0.0; v.len()];
        Self {
            word_conv: z(&self.word_conv),
            word_bias: z(&self.word_bias),
            cui_conv: z(&self.cui_conv),
            cui_bias: z(&self.cui_bias),
            fc1_w: z(&self.fc1_w),
            fc1_b: z(&self.fc1_b),
            fc2_w: z(&self.fc2_w),
            fc2_b: z(&self.fc2_b),
        }
    }

    pub fn tensors(&self) -> [&Vec<f64>; 8] {
        [
            &self.word_conv,
            &self.word_bias,
            &self.cui_conv,
            &self.cui_bias,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [
            &mut self.word_conv,
            &mut self.word_bias,
            &mut self.cui_conv,
            &mut self.cui_bias,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
            &mut self.fc2_b,
        ]
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgCnnModel {
    pub config: ModelConfig,
    pub word_dim: usize,
    pub cui_dim: usize,
    pub class_index: [DiseaseLabel; 2],
    pub params: Params,
}

#[derive(Debug, Clone, Default)]
struct ChannelCache {
    /// Best pool position per filter.
    argmax: Vec<usize>,
    /// Pre-activation maximum per filter.
    peak: Vec<f64>,
}

/// Activations recorded by `forward` for use by `backward`.
#[derive(Debug, Clone)]
pub struct Cache {
    word: ChannelCache,
    cui: ChannelCache,
    h0: Vec<f64>,
    z1: Vec<f64>,
    /// Dropout scale per hidden unit: 0 or 1/keep in training, 1 otherwise.
    pub dropout: Vec<f64>,
    a1: Vec<f64>,
    pub probs: [f64; NUM_CLASSES],
}

impl Cache {
    /// Concatenated pooled features: word filters then concept filters.
    pub fn pooled(&self) -> &[f64] {
        &self.h0
    }
}

pub fn softmax(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Cross-entropy of one example with the probability floored at 1e-12.
pub fn cross_entropy(probs: &[f64; NUM_CLASSES], gold: usize) -> f64 {
    -probs[gold].max(PROB_FLOOR).ln()
}

/// Mean cross-entropy over a batch.
pub fn batch_loss(probs: &[[f64; NUM_CLASSES]], gold: &[usize]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    probs
        .iter()
        .zip(gold)
        .map(|(p, &g)| cross_entropy(p, g))
        .sum::<f64>()
        / probs.len() as f64
}

fn conv_pool(x: &ChannelMatrix, weights: &[f64], bias: &[f64], kernel: usize) -> ChannelCache {
    let filters = bias.len();
    let dim = x.dim;
    let positions = x.pool_positions(kernel);
    let mut argmax = vec![0; filters];
    let mut peak = vec![f64::NEG_INFINITY; filters];
    for t in 0..positions {
        let rows = kernel.min(x.len.saturating_sub(t));
        let window = &x.rows[t * dim..(t + rows) * dim];
        for f in 0..filters {
            let w = &weights[f * kernel * dim..f * kernel * dim + rows * dim];
            let mut s = bias[f];
            for (a, b) in w.iter().zip(window) {
                s += a * b;
            }
            if s > peak[f] {
                peak[f] = s;
                argmax[f] = t;
            }
        }
    }
    ChannelCache { argmax, peak }
}

impl KgCnnModel {
    pub fn new(config: ModelConfig, word_dim: usize, cui_dim: usize, class_index: [DiseaseLabel; 2], params: Params) -> Self {
        Self {
            config,
            word_dim,
            cui_dim,
            class_index,
            params,
        }
    }

    fn check_input(&self, input: &EncodedInput) -> Result<()> {
        let k = self.config.kernel;
        for (name, ch, dim) in [("word", &input.words, self.word_dim), ("concept", &input.cuis, self.cui_dim)] {
            if ch.dim != dim {
                return Err(Error::Internal(format!(
                    "{name} channel has dimension {}, model expects {dim}",
                    ch.dim
                )));
            }
            if ch.padded_len < k || ch.len > ch.padded_len {
                return Err(Error::Internal(format!(
                    "{name} channel of padded length {} cannot hold {} rows under kernel {k}",
                    ch.padded_len, ch.len
                )));
            }
        }
        Ok(())
    }

    /// Forward pass. `dropout` supplies the RNG in training mode; `None`
    /// disables dropout.
    pub fn forward<R: Rng>(&self, input: &EncodedInput, dropout: Option<&mut R>) -> Result<Cache> {
        let keep = self.config.dropout_keep;
        let mask: Vec<f64> = match dropout {
            Some(rng) => (0..self.config.hidden)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect(),
            None => vec![1.0; self.config.hidden],
        };
        self.forward_with_mask(input, mask)
    }

    /// Forward pass with an explicit dropout scale vector.
    pub fn forward_with_mask(&self, input: &EncodedInput, dropout: Vec<f64>) -> Result<Cache> {
        self.check_input(input)?;
        let cfg = &self.config;
        let p = &self.params;
        let (f, h) = (cfg.filters, cfg.hidden);
        if dropout.len() != h {
            return Err(Error::Internal("dropout mask length differs from hidden size".into()));
        }

        let word = conv_pool(&input.words, &p.word_conv, &p.word_bias, cfg.kernel);
        let cui = conv_pool(&input.cuis, &p.cui_conv, &p.cui_bias, cfg.kernel);
        let h0: Vec<f64> = word.peak.iter().chain(&cui.peak).map(|&v| v.max(0.0)).collect();

        let mut z1 = p.fc1_b.clone();
        for (j, z) in z1.iter_mut().enumerate() {
            let row = &p.fc1_w[j * 2 * f..(j + 1) * 2 * f];
            *z += row.iter().zip(&h0).map(|(a, b)| a * b).sum::<f64>();
        }
        let a1: Vec<f64> = z1.iter().zip(&dropout).map(|(z, m)| (z * m).max(0.0)).collect();

        let mut z2 = [0.0; NUM_CLASSES];
        for (c, z) in z2.iter_mut().enumerate() {
            let row = &p.fc2_w[c * h..(c + 1) * h];
            *z = p.fc2_b[c] + row.iter().zip(&a1).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(Cache {
            word,
            cui,
            h0,
            z1,
            dropout,
            a1,
            probs: softmax(z2),
        })
    }

    /// Accumulates `scale · ∂loss/∂θ` for one example into `grads`.
    /// Embeddings are inputs, not parameters, and receive no gradient.
    pub fn backward(&self, input: &EncodedInput, cache: &Cache, gold: usize, scale: f64, grads: &mut Params) {
        let cfg = &self.config;
        let p = &self.params;
        let (f, h, k) = (cfg.filters, cfg.hidden, cfg.kernel);

        let mut dz2 = cache.probs;
        dz2[gold] -= 1.0;
        for d in dz2.iter_mut() {
            *d *= scale;
        }

        let mut da1 = vec![0.0; h];
        for c in 0..NUM_CLASSES {
            grads.fc2_b[c] += dz2[c];
            let row = &p.fc2_w[c * h..(c + 1) * h];
            let grow = &mut grads.fc2_w[c * h..(c + 1) * h];
            for j in 0..h {
                grow[j] += dz2[c] * cache.a1[j];
                da1[j] += dz2[c] * row[j];
            }
        }

        let mut dh0 = vec![0.0; 2 * f];
        for j in 0..h {
            let m = cache.dropout[j];
            if cache.z1[j] * m <= 0.0 {
                continue;
            }
            let dz1 = da1[j] * m;
            grads.fc1_b[j] += dz1;
            let row = &p.fc1_w[j * 2 * f..(j + 1) * 2 * f];
            let grow = &mut grads.fc1_w[j * 2 * f..(j + 1) * 2 * f];
            for i in 0..2 * f {
                grow[i] += dz1 * cache.h0[i];
                dh0[i] += dz1 * row[i];
            }
        }

        let channels = [
            (&input.words, &cache.word, &dh0[..f], &mut grads.word_conv, &mut grads.word_bias),
            (&input.cuis, &cache.cui, &dh0[f..], &mut grads.cui_conv, &mut grads.cui_bias),
        ];
        for (x, cc, dpool, gw, gb) in channels {
            let dim = x.dim;
            for filter in 0..f {
                if cc.peak[filter] <= 0.0 || dpool[filter] == 0.0 {
                    continue;
                }
                let g = dpool[filter];
                gb[filter] += g;
                let t = cc.argmax[filter];
                let rows = k.min(x.len.saturating_sub(t));
                let window = &x.rows[t * dim..(t + rows) * dim];
                let gwin = &mut gw[filter * k * dim..filter * k * dim + rows * dim];
                for (gv, xv) in gwin.iter_mut().zip(window) {
                    *gv += g * xv;
                }
            }
        }
    }

    /// Argmax class with ties going to the first class, and its probability.
    pub fn predict(&self, input: &EncodedInput) -> Result<(DiseaseLabel, f64)> {
        let cache = self.forward_with_mask(input, vec![1.0; self.config.hidden])?;
        let [p0, p1] = cache.probs;
        Ok(if p1 > p0 {
            (self.class_index[1], p1)
        } else {
            (self.class_index[0], p0)
        })
    }
}
