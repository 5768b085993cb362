//! Hashed bag-of-tokens encoder with a contrastive projection and a sigmoid
//! correctness head.
//!
//! An input is the token stream `tokenize(problem) ++ [SEP] ++ tokenize(code)`.
//! Each token is hashed with 64-bit FNV-1a into one of `vocab_buckets` rows of
//! the embedding table, and the rows are mean-pooled into `h` (length
//! `embed_dim`). The contrastive embedding is `h · projection` (length
//! `proj_dim`); the correctness probability is `σ(logit_weight · h + logit_bias)`.
//!
//! Both losses have exact analytic gradients here; `training` checks them
//! against central finite differences.

mod checkpoint;

use std::borrow::Borrow;

use rand::Rng;

use crate::error::{Error, Result};
use crate::textmetrics::tokenize;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Separator between problem and code tokens.
pub const SEP_TOKEN: &str = "[SEP]";
pub const DEFAULT_MARGIN: f64 = 2.0;
/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `token`.
pub fn fnv1a64(token: &str) -> u64 {
    token.bytes().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab_buckets: usize,
    pub embed_dim: usize,
    pub proj_dim: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            vocab_buckets: 4096,
            embed_dim: 16,
            proj_dim: 2,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vocab_buckets", self.vocab_buckets),
            ("embed_dim", self.embed_dim),
            ("proj_dim", self.proj_dim),
        ] {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Bucket ids of one (problem, code) input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded(Vec<usize>);

impl Encoded {
    pub fn from_buckets(buckets: Vec<usize>) -> Self {
        Encoded(buckets)
    }

    pub fn buckets(&self) -> &[usize] {
        &self.0
    }
}

/// Two encoded inputs and their label (1 = same functionality).
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair {
    pub a: Encoded,
    pub b: Encoded,
    pub label: u8,
}

/// An encoded input with its correctness label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInput {
    pub input: Encoded,
    pub label: u8,
}

/// All trainable weights. Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    dims: ModelDims,
    /// `vocab_buckets × embed_dim`
    pub embedding: Vec<f64>,
    /// `embed_dim × proj_dim`
    pub projection: Vec<f64>,
    /// `embed_dim`
    pub logit_weight: Vec<f64>,
    pub logit_bias: f64,
}

/// Gradient of a loss with respect to every parameter, laid out like
/// [`EncoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub embedding: Vec<f64>,
    pub projection: Vec<f64>,
    pub logit_weight: Vec<f64>,
    pub logit_bias: f64,
}

impl Gradient {
    pub fn zeros(dims: ModelDims) -> Self {
        Gradient {
            embedding: vec![0.0; dims.vocab_buckets * dims.embed_dim],
            projection: vec![0.0; dims.embed_dim * dims.proj_dim],
            logit_weight: vec![0.0; dims.embed_dim],
            logit_bias: 0.0,
        }
    }

    /// Entry `idx` in the flat order embedding, projection, logit weight, bias.
    pub fn get(&self, idx: usize) -> f64 {
        flat_get(
            &self.embedding,
            &self.projection,
            &self.logit_weight,
            self.logit_bias,
            idx,
        )
    }

    pub fn len(&self) -> usize {
        self.embedding.len() + self.projection.len() + self.logit_weight.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_abs(&self) -> f64 {
        self.embedding
            .iter()
            .chain(&self.projection)
            .chain(&self.logit_weight)
            .chain(std::iter::once(&self.logit_bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Accumulates `scale * dh / len` into every row touched by `input`.
    fn scatter(&mut self, input: &Encoded, dh: &[f64], embed_dim: usize) {
        if input.0.is_empty() {
            return;
        }
        let inv = 1.0 / input.0.len() as f64;
        for &row in &input.0 {
            let dst = &mut self.embedding[row * embed_dim..(row + 1) * embed_dim];
            for (d, g) in dst.iter_mut().zip(dh) {
                *d += g * inv;
            }
        }
    }
}

fn flat_get(emb: &[f64], proj: &[f64], w: &[f64], b: f64, idx: usize) -> f64 {
    let mut i = idx;
    for block in [emb, proj, w] {
        if i < block.len() {
            return block[i];
        }
        i -= block.len();
    }
    assert_eq!(i, 0, "parameter index {idx} out of range");
    b
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl EncoderParams {
    pub fn zeros(dims: ModelDims) -> Result<Self> {
        dims.validate()?;
        Ok(EncoderParams {
            dims,
            embedding: vec![0.0; dims.vocab_buckets * dims.embed_dim],
            projection: vec![0.0; dims.embed_dim * dims.proj_dim],
            logit_weight: vec![0.0; dims.embed_dim],
            logit_bias: 0.0,
        })
    }

    /// Weights drawn uniformly from `[-scale, scale]`, bias zero.
    pub fn random<R: Rng + ?Sized>(dims: ModelDims, scale: f64, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        for v in p
            .embedding
            .iter_mut()
            .chain(&mut p.projection)
            .chain(&mut p.logit_weight)
        {
            *v = rng.gen_range(-scale..=scale);
        }
        Ok(p)
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn num_params(&self) -> usize {
        self.embedding.len() + self.projection.len() + self.logit_weight.len() + 1
    }

    pub fn get(&self, idx: usize) -> f64 {
        flat_get(
            &self.embedding,
            &self.projection,
            &self.logit_weight,
            self.logit_bias,
            idx,
        )
    }

    pub fn set(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for block in [
            &mut self.embedding,
            &mut self.projection,
            &mut self.logit_weight,
        ] {
            if i < block.len() {
                block[i] = value;
                return;
            }
            i -= block.len();
        }
        assert_eq!(i, 0, "parameter index {idx} out of range");
        self.logit_bias = value;
    }

    pub fn is_finite(&self) -> bool {
        self.embedding
            .iter()
            .chain(&self.projection)
            .chain(&self.logit_weight)
            .all(|v| v.is_finite())
            && self.logit_bias.is_finite()
    }

    /// Plain gradient-descent step: `θ ← θ − lr · ∇`.
    pub fn apply_gradient(&mut self, grad: &Gradient, lr: f64) {
        let step = |p: &mut [f64], g: &[f64]| {
            for (p, g) in p.iter_mut().zip(g) {
                *p -= lr * g;
            }
        };
        step(&mut self.embedding, &grad.embedding);
        step(&mut self.projection, &grad.projection);
        step(&mut self.logit_weight, &grad.logit_weight);
        self.logit_bias -= lr * grad.logit_bias;
    }

    pub fn encode(&self, problem: &str, code: &str) -> Encoded {
        let buckets = self.dims.vocab_buckets as u64;
        let bucket = |tok: &str| (fnv1a64(tok) % buckets) as usize;
        let mut out: Vec<usize> = tokenize(problem).iter().map(bucket).collect();
        out.push(bucket(SEP_TOKEN));
        out.extend(tokenize(code).iter().map(bucket));
        Encoded(out)
    }

    /// Mean of the embedding rows of `input`; zero for an empty input.
    pub fn pooled(&self, input: &Encoded) -> Vec<f64> {
        let de = self.dims.embed_dim;
        let mut h = vec![0.0; de];
        if input.0.is_empty() {
            return h;
        }
        for &row in &input.0 {
            for (acc, v) in h.iter_mut().zip(&self.embedding[row * de..(row + 1) * de]) {
                *acc += v;
            }
        }
        let inv = 1.0 / input.0.len() as f64;
        h.iter_mut().for_each(|v| *v *= inv);
        h
    }

    /// `h · projection`.
    pub fn project(&self, h: &[f64]) -> Vec<f64> {
        let dc = self.dims.proj_dim;
        let mut z = vec![0.0; dc];
        for (i, hi) in h.iter().enumerate() {
            for (zj, pij) in z.iter_mut().zip(&self.projection[i * dc..(i + 1) * dc]) {
                *zj += hi * pij;
            }
        }
        z
    }

    /// `projection · g`, the back-projection of a contrastive-space gradient.
    fn back_project(&self, g: &[f64]) -> Vec<f64> {
        let dc = self.dims.proj_dim;
        (0..self.dims.embed_dim)
            .map(|i| {
                self.projection[i * dc..(i + 1) * dc]
                    .iter()
                    .zip(g)
                    .map(|(p, g)| p * g)
                    .sum()
            })
            .collect()
    }

    pub fn embed_encoded(&self, input: &Encoded) -> Vec<f64> {
        self.project(&self.pooled(input))
    }

    /// Contrastive-space embedding of a (problem, code) input.
    pub fn embed(&self, problem: &str, code: &str) -> Vec<f64> {
        self.embed_encoded(&self.encode(problem, code))
    }

    pub fn distance_encoded(&self, a: &Encoded, b: &Encoded) -> f64 {
        euclidean(&self.embed_encoded(a), &self.embed_encoded(b))
    }

    /// Euclidean distance between the embeddings of two (problem, code) inputs.
    pub fn pair_distance(&self, a: (&str, &str), b: (&str, &str)) -> f64 {
        self.distance_encoded(&self.encode(a.0, a.1), &self.encode(b.0, b.1))
    }

    pub fn logit_encoded(&self, input: &Encoded) -> f64 {
        let h = self.pooled(input);
        dot(&self.logit_weight, &h) + self.logit_bias
    }

    pub fn prob_encoded(&self, input: &Encoded) -> f64 {
        sigmoid(self.logit_encoded(input))
    }

    /// Probability that `code` is a correct solution of `problem`.
    pub fn predict_prob(&self, problem: &str, code: &str) -> f64 {
        self.prob_encoded(&self.encode(problem, code))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-pair contrastive term: `d²` for label 1, `max(0, m − d)²` for label 0.
fn contrastive_term(d: f64, label: u8, margin: f64) -> f64 {
    if label == 1 {
        d * d
    } else {
        let gap = (margin - d).max(0.0);
        gap * gap
    }
}

/// Mean margin contrastive loss over `pairs`.
pub fn contrastive_loss<P: Borrow<EncodedPair>>(
    params: &EncoderParams,
    pairs: &[P],
    margin: f64,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let p = p.borrow();
            contrastive_term(params.distance_encoded(&p.a, &p.b), p.label, margin)
        })
        .sum();
    total / pairs.len() as f64
}

/// Analytic gradient of [`contrastive_loss`]. The hinge is given zero
/// subgradient at `d = m`, and a label-0 pair at `d = 0` contributes nothing.
pub fn contrastive_grad<P: Borrow<EncodedPair>>(
    params: &EncoderParams,
    pairs: &[P],
    margin: f64,
) -> Gradient {
    let dims = params.dims;
    let mut grad = Gradient::zeros(dims);
    if pairs.is_empty() {
        return grad;
    }
    let inv_n = 1.0 / pairs.len() as f64;
    let dc = dims.proj_dim;

    for p in pairs {
        let p = p.borrow();
        let ha = params.pooled(&p.a);
        let hb = params.pooled(&p.b);
        let dh: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| x - y).collect();
        let diff = params.project(&dh);
        let d = diff.iter().map(|v| v * v).sum::<f64>().sqrt();

        // ∂L/∂diff, where diff = (ha − hb)·P
        let coef = if p.label == 1 {
            2.0
        } else if d > 0.0 && d < margin {
            -2.0 * (margin - d) / d
        } else {
            0.0
        };
        if coef == 0.0 {
            continue;
        }
        let g: Vec<f64> = diff.iter().map(|v| coef * v * inv_n).collect();

        for (i, dhi) in dh.iter().enumerate() {
            for (gp, gj) in grad.projection[i * dc..(i + 1) * dc].iter_mut().zip(&g) {
                *gp += dhi * gj;
            }
        }
        let up = params.back_project(&g);
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        grad.scatter(&p.a, &up, dims.embed_dim);
        grad.scatter(&p.b, &down, dims.embed_dim);
    }
    grad
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Mean binary cross-entropy of the correctness head.
pub fn bce_loss<S: Borrow<LabeledInput>>(params: &EncoderParams, samples: &[S]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let total: f64 = samples
        .iter()
        .map(|s| {
            let s = s.borrow();
            let p = clamp_prob(params.prob_encoded(&s.input));
            if s.label == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / samples.len() as f64
}

/// Analytic gradient of [`bce_loss`]. Clamped probabilities have zero
/// gradient; the projection never receives one.
pub fn bce_grad<S: Borrow<LabeledInput>>(params: &EncoderParams, samples: &[S]) -> Gradient {
    let dims = params.dims;
    let mut grad = Gradient::zeros(dims);
    if samples.is_empty() {
        return grad;
    }
    let inv_k = 1.0 / samples.len() as f64;
    for s in samples {
        let s = s.borrow();
        let h = params.pooled(&s.input);
        let p = sigmoid(dot(&params.logit_weight, &h) + params.logit_bias);
        if !(PROB_EPS..=1.0 - PROB_EPS).contains(&p) {
            continue;
        }
        // ∂L/∂logit = p − y
        let g = (p - f64::from(s.label)) * inv_k;
        for (gw, hi) in grad.logit_weight.iter_mut().zip(&h) {
            *gw += g * hi;
        }
        grad.logit_bias += g;
        let dh: Vec<f64> = params.logit_weight.iter().map(|w| g * w).collect();
        grad.scatter(&s.input, &dh, dims.embed_dim);
    }
    grad
}

/// A non-empty batch of labeled pairs with its margin.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pairs: Vec<EncodedPair>,
    margin: f64,
}

impl PairBatch {
    pub fn new(pairs: Vec<EncodedPair>, margin: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::usage("pair batch is empty"));
        }
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::usage(format!(
                "margin must be positive, got {margin}"
            )));
        }
        if let Some(p) = pairs.iter().find(|p| p.label > 1) {
            return Err(Error::usage(format!(
                "pair label {} is not binary",
                p.label
            )));
        }
        Ok(PairBatch { pairs, margin })
    }

    pub fn pairs(&self) -> &[EncodedPair] {
        &self.pairs
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn loss(&self, params: &EncoderParams) -> f64 {
        contrastive_loss(params, &self.pairs, self.margin)
    }

    pub fn grad(&self, params: &EncoderParams) -> Gradient {
        contrastive_grad(params, &self.pairs, self.margin)
    }
}
