//! Two-phase training: contrastive refinement of the encoder over labeled
//! pairs, then the correctness head over labeled samples.
//!
//! Every run is a pure function of its inputs and [`TrainConfig`]: the seed
//! drives initialization and shuffling through ChaCha8, and the loops are
//! single-threaded.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::CodeSample;
use crate::error::{Error, Result};
use crate::model::{
    bce_grad, bce_loss, contrastive_grad, contrastive_loss, Encoded, EncodedPair, EncoderParams,
    Gradient, LabeledInput, ModelDims,
};
use crate::pairing::ContrastPair;

/// Half-width of the uniform initialization range.
pub const INIT_SCALE: f64 = 0.05;
/// Central-difference step of the gradient check.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the elementwise relative error in the gradient check.
pub const FD_REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs_contrastive: usize,
    pub epochs_classifier: usize,
    pub batch_size: usize,
    pub dims: ModelDims,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            margin: crate::model::DEFAULT_MARGIN,
            learning_rate: 0.05,
            epochs_contrastive: 40,
            epochs_classifier: 20,
            batch_size: 32,
            dims: ModelDims::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::usage(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("epochs_contrastive", self.epochs_contrastive),
            ("epochs_classifier", self.epochs_classifier),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be positive")));
            }
        }
        self.dims.validate()
    }

    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::usage(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "epochs_contrastive" => self.epochs_contrastive = parse(key, value)?,
            "epochs_classifier" => self.epochs_classifier = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "vocab_buckets" => self.dims.vocab_buckets = parse(key, value)?,
            "embed_dim" => self.dims.embed_dim = parse(key, value)?,
            "proj_dim" => self.dims.proj_dim = parse(key, value)?,
            _ => return Err(Error::usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

/// Mean pair distances after one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    /// Mean distance over label-1 (correct/correct) pairs.
    pub cc: f64,
    /// Mean distance over label-0 (error/correct) pairs.
    pub ec: f64,
}

pub type DistanceTrace = Vec<TraceRecord>;

/// Mean C-C and E-C distances over a pair set. A class with no pairs reports 0.
pub fn mean_distances(params: &EncoderParams, pairs: &[EncodedPair]) -> (f64, f64) {
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for p in pairs {
        let k = usize::from(p.label == 1);
        sums[k] += params.distance_encoded(&p.a, &p.b);
        counts[k] += 1;
    }
    let mean = |k: usize| {
        if counts[k] == 0 {
            0.0
        } else {
            sums[k] / counts[k] as f64
        }
    };
    (mean(1), mean(0))
}

pub fn encode_pairs(params: &EncoderParams, pairs: &[ContrastPair]) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            a: params.encode(&p.problem, &p.code_a),
            b: params.encode(&p.problem, &p.code_b),
            label: p.label,
        })
        .collect()
}

fn step(params: &mut EncoderParams, grad: &Gradient, lr: f64) -> Result<()> {
    params.apply_gradient(grad, lr);
    if params.is_finite() {
        Ok(())
    } else {
        Err(Error::Invariant("parameters became non-finite".into()))
    }
}

/// Seeded initialization shared by the CLI and tests.
pub fn init_params(config: &TrainConfig) -> Result<EncoderParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    EncoderParams::random(config.dims, INIT_SCALE, &mut rng)
}

/// Contrastive phase. Returns the trained parameters and one distance record
/// per epoch.
pub fn train_contrastive(
    pairs: &[ContrastPair],
    config: &TrainConfig,
) -> Result<(EncoderParams, DistanceTrace)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::usage("contrastive training needs at least one pair"));
    }
    if let Some(p) = pairs.iter().find(|p| p.label > 1) {
        return Err(Error::Data(format!(
            "pair for problem {} has non-binary label {}",
            p.problem_id, p.label
        )));
    }
    let mut params = init_params(config)?;
    let encoded = encode_pairs(&params, pairs);
    let trace = train_contrastive_encoded(&mut params, &encoded, config)?;
    Ok((params, trace))
}

/// Contrastive phase over already-encoded pairs, continuing from `params`.
pub fn train_contrastive_encoded(
    params: &mut EncoderParams,
    pairs: &[EncodedPair],
    config: &TrainConfig,
) -> Result<DistanceTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs_contrastive);

    for epoch in 1..=config.epochs_contrastive {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let grad = contrastive_grad(params, &batch, config.margin);
            step(params, &grad, config.learning_rate)?;
        }
        let (cc, ec) = mean_distances(params, pairs);
        trace.push(TraceRecord { epoch, cc, ec });
    }
    Ok(trace)
}

/// A (problem, code) input with its correctness label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledCode {
    pub problem: String,
    pub code: String,
    pub label: u8,
}

impl From<&CodeSample> for LabeledCode {
    fn from(s: &CodeSample) -> Self {
        LabeledCode {
            problem: s.problem.clone(),
            code: s.code.clone(),
            label: s.verdict.label(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierRun {
    pub params: EncoderParams,
    /// Full-set cross-entropy before the first update.
    pub initial_loss: f64,
    /// Full-set cross-entropy after each epoch.
    pub loss_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Classifier phase, continuing from `init`.
///
/// Each batch holds equal numbers of positive and negative samples (one extra
/// slot alternates between classes for odd sizes), drawn by cycling through
/// per-class lists reshuffled every epoch. With a single class present the
/// run proceeds on that class alone and records a warning.
pub fn train_classifier(
    samples: &[LabeledCode],
    init: &EncoderParams,
    config: &TrainConfig,
) -> Result<ClassifierRun> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::usage(
            "classifier training needs at least one sample",
        ));
    }
    if let Some(s) = samples.iter().find(|s| s.label > 1) {
        return Err(Error::Data(format!(
            "sample has non-binary label {}",
            s.label
        )));
    }

    let mut params = init.clone();
    let encoded: Vec<LabeledInput> = samples
        .iter()
        .map(|s| LabeledInput {
            input: params.encode(&s.problem, &s.code),
            label: s.label,
        })
        .collect();

    let mut pos: Vec<usize> = (0..encoded.len())
        .filter(|&i| encoded[i].label == 1)
        .collect();
    let mut neg: Vec<usize> = (0..encoded.len())
        .filter(|&i| encoded[i].label == 0)
        .collect();
    let mut warnings = Vec::new();
    if pos.is_empty() || neg.is_empty() {
        let msg = format!(
            "classifier training data has only {} samples; predictions will drift toward that label",
            if pos.is_empty() { "negative" } else { "positive" }
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);
    let batch_len = config.batch_size.min(encoded.len());
    let batches = encoded.len().div_ceil(batch_len);
    let initial_loss = bce_loss(&params, &encoded);
    let mut loss_trace = Vec::with_capacity(config.epochs_classifier);

    for _ in 0..config.epochs_classifier {
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let (mut pc, mut nc) = (0usize, 0usize);
        for b in 0..batches {
            let mut batch: Vec<&LabeledInput> = Vec::with_capacity(batch_len);
            for slot in 0..batch_len {
                let want_pos = if pos.is_empty() {
                    false
                } else if neg.is_empty() {
                    true
                } else {
                    (slot + b) % 2 == 0
                };
                let idx = if want_pos {
                    pc += 1;
                    pos[(pc - 1) % pos.len()]
                } else {
                    nc += 1;
                    neg[(nc - 1) % neg.len()]
                };
                batch.push(&encoded[idx]);
            }
            let grad = bce_grad(&params, &batch);
            step(&mut params, &grad, config.learning_rate)?;
        }
        loss_trace.push(bce_loss(&params, &encoded));
    }

    Ok(ClassifierRun {
        params,
        initial_loss,
        loss_trace,
        warnings,
    })
}

/// Worst elementwise relative deviation of each analytic gradient from
/// central differences.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub trials: usize,
    pub contrastive: f64,
    pub bce: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.contrastive.max(self.bce)
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_REL_FLOOR)
}

/// Compares `grad` with central differences of `loss` over every parameter.
pub fn compare_with_finite_differences<F>(params: &EncoderParams, grad: &Gradient, loss: F) -> f64
where
    F: Fn(&EncoderParams) -> f64,
{
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..params.num_params() {
        let orig = params.get(i);
        probe.set(i, orig + FD_STEP);
        let up = loss(&probe);
        probe.set(i, orig - FD_STEP);
        let down = loss(&probe);
        probe.set(i, orig);
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(grad.get(i), numeric));
    }
    worst
}

/// Contrastive and cross-entropy gradient errors for one explicit case.
pub fn check_case(
    params: &EncoderParams,
    pairs: &[EncodedPair],
    samples: &[LabeledInput],
    margin: f64,
) -> (f64, f64) {
    let c =
        compare_with_finite_differences(params, &contrastive_grad(params, pairs, margin), |p| {
            contrastive_loss(p, pairs, margin)
        });
    let b = compare_with_finite_differences(params, &bce_grad(params, samples), |p| {
        bce_loss(p, samples)
    });
    (c, b)
}

fn random_input<R: Rng>(rng: &mut R, vocab: usize) -> Encoded {
    let len = rng.gen_range(0..=5);
    let mut b: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
    // Sorted so equal multisets pool to bitwise-equal vectors.
    b.sort_unstable();
    Encoded::from_buckets(b)
}

/// Randomized gradient check: each trial draws dimensions up to 8, parameters
/// in [-0.5, 0.5], up to 6 pairs and up to 6 labeled samples from the seed.
pub fn finite_diff_check(config: &TrainConfig, trials: usize) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::usage("trials must be at least 1"));
    }
    if !(config.margin > 0.0 && config.margin.is_finite()) {
        return Err(Error::usage(format!(
            "margin must be positive, got {}",
            config.margin
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = GradCheckReport {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let dims = ModelDims {
            vocab_buckets: rng.gen_range(2..=8),
            embed_dim: rng.gen_range(1..=8),
            proj_dim: rng.gen_range(1..=8),
        };
        let mut params = EncoderParams::random(dims, 0.5, &mut rng)?;
        params.logit_bias = rng.gen_range(-0.5..=0.5);

        let pairs: Vec<EncodedPair> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let a = random_input(&mut rng, dims.vocab_buckets);
                let mut b = random_input(&mut rng, dims.vocab_buckets);
                // Distinct multisets keep label-0 pairs off the d = 0 kink.
                while b == a {
                    b = random_input(&mut rng, dims.vocab_buckets);
                }
                EncodedPair {
                    a,
                    b,
                    label: rng.gen_range(0..=1),
                }
            })
            .collect();
        let samples: Vec<LabeledInput> = (0..rng.gen_range(1..=6))
            .map(|_| LabeledInput {
                input: random_input(&mut rng, dims.vocab_buckets),
                label: rng.gen_range(0..=1),
            })
            .collect();

        let (c, b) = check_case(&params, &pairs, &samples, config.margin);
        report.contrastive = report.contrastive.max(c);
        report.bce = report.bce.max(b);
    }
    Ok(report)
}
