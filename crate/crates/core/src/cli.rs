//! Command-line front end.
//!
//! Every command reads record files, writes its outputs atomically to
//! `--out`, prints a short summary on stdout and diagnostics on stderr.
//! Exit status: 0 on success, 1 on usage errors, 2 on data/format errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::augment::augment_dataset;
use crate::corpus::{
    corpus_stats, load_corpus, load_triples, read_records, write_records, CodeSample,
};
use crate::error::{Error, Result};
use crate::evalrank::{
    classification_metrics, classify, pass_at_1, rank_candidates, CandidateSet, EvalReport,
    DEFAULT_CLASSIFY_THRESHOLD,
};
use crate::model::{load_checkpoint, save_checkpoint, EncoderParams};
use crate::pairing::{build_triples, mine_pairs, ContrastPair, DEFAULT_THRESHOLD};
use crate::training::{
    finite_diff_check, init_params, train_classifier, train_contrastive, LabeledCode, TrainConfig,
};

/// Environment variable consulted for the seed when no flag or config entry sets it.
pub const SEED_ENV: &str = "CONDOR_SEED";
/// Largest relative gradient error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "condor", version, about = "Code discriminator pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dataset statistics of a repair-triple file
    Stats {
        #[arg(long)]
        triples: PathBuf,
        /// Also write the statistics as one JSON record
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mine labeled contrastive pairs from a corpus
    MinePairs {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Build buggy→correct repair triples from submission histories
    BuildTriples {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Generate deduplicated intermediate versions from repair triples
    Augment {
        #[arg(long)]
        triples: PathBuf,
        /// Existing training samples to deduplicate against
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contrastive phase: train the encoder on labeled pairs
    TrainContrastive {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch mean C-C / E-C distances
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Classifier phase: train the correctness head on labeled samples
    TrainClassifier {
        /// Corpus files (repeatable), e.g. the original samples plus augmentation output
        #[arg(long, required = true)]
        samples: Vec<PathBuf>,
        /// Checkpoint from the contrastive phase; seeded initialization otherwise
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Correctness probability and thresholded prediction per sample
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLASSIFY_THRESHOLD)]
        threshold: f64,
    },
    /// Pick the most likely correct candidate of every set
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass@1 over candidate sets and precision/recall/F1 over labeled samples
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Labeled samples for classification metrics; defaults to the flattened candidates
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CLASSIFY_THRESHOLD)]
        threshold: f64,
    },
    /// Contrastive-space coordinates of every sample, for plotting
    EmbedDump {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients with central finite differences
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Debug, Args, Default)]
struct TrainArgs {
    /// `key = value` config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs_contrastive: Option<usize>,
    #[arg(long)]
    epochs_classifier: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    vocab_buckets: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    proj_dim: Option<usize>,
}

/// Applies `key = value` lines; `#` starts a comment.
pub fn apply_config_file(config: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err =
            |message: String| Error::Usage(format!("{}:{}: {message}", path.display(), idx + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
        config
            .set(key.trim(), value.trim())
            .map_err(|e| err(e.to_string()))?;
    }
    Ok(())
}

impl TrainArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            c.seed = v.trim().parse().map_err(|_| {
                Error::usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?;
        }
        if let Some(path) = &self.config {
            apply_config_file(&mut c, path)?;
        }
        macro_rules! flag {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field {
                    c.$($target)+ = v;
                }
            };
        }
        flag!(seed => seed);
        flag!(margin => margin);
        flag!(learning_rate => learning_rate);
        flag!(epochs_contrastive => epochs_contrastive);
        flag!(epochs_classifier => epochs_classifier);
        flag!(batch_size => batch_size);
        flag!(vocab_buckets => dims.vocab_buckets);
        flag!(embed_dim => dims.embed_dim);
        flag!(proj_dim => dims.proj_dim);
        c.validate()?;
        Ok(c)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

fn guard_output(out: &Path, inputs: &[&Path]) -> Result<()> {
    if let Some(i) = inputs.iter().find(|i| same_file(out, i)) {
        return Err(Error::usage(format!(
            "--out {} would overwrite input {}",
            out.display(),
            i.display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ScoreRecord<'a> {
    problem_id: &'a str,
    prob: f64,
    pred: u8,
}

#[derive(Serialize)]
struct EmbedRecord<'a> {
    problem_id: &'a str,
    verdict: &'static str,
    x: f64,
    y: f64,
}

/// Contrastive-space coordinates of each sample. Requires a 2-D projection.
pub fn embed_dump(params: &EncoderParams, samples: &[CodeSample], out: &Path) -> Result<()> {
    if params.dims().proj_dim != 2 {
        return Err(Error::usage(format!(
            "embed-dump needs a 2-dimensional contrastive space but the model has proj_dim = {}; \
             retrain with --proj-dim 2",
            params.dims().proj_dim
        )));
    }
    let records: Vec<EmbedRecord> = samples
        .iter()
        .map(|s| {
            let z = params.embed(&s.problem, &s.code);
            EmbedRecord {
                problem_id: &s.problem_id,
                verdict: s.verdict.as_str(),
                x: z[0],
                y: z[1],
            }
        })
        .collect();
    write_records(out, &records)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Stats { triples, out } => {
            let ts = load_triples(&triples)?;
            let stats = corpus_stats(&ts);
            println!("{stats}");
            if let Some(out) = out {
                guard_output(&out, &[&triples])?;
                write_records(&out, &[stats])?;
            }
        }
        Command::MinePairs {
            samples,
            out,
            threshold,
        } => {
            guard_output(&out, &[&samples])?;
            let corpus = load_corpus(&samples)?;
            let pairs = mine_pairs(&corpus, threshold)?;
            write_records(&out, &pairs)?;
            let cc = pairs.iter().filter(|p| p.label == 1).count();
            println!(
                "{} pairs ({cc} C-C, {} E-C) from {} samples at threshold {threshold}",
                pairs.len(),
                pairs.len() - cc,
                corpus.len()
            );
        }
        Command::BuildTriples {
            samples,
            out,
            threshold,
        } => {
            guard_output(&out, &[&samples])?;
            let corpus = load_corpus(&samples)?;
            let triples = build_triples(&corpus, threshold)?;
            write_records(&out, &triples)?;
            println!("{} triples from {} samples", triples.len(), corpus.len());
        }
        Command::Augment {
            triples,
            samples,
            out,
        } => {
            let mut inputs = vec![triples.as_path()];
            inputs.extend(samples.as_deref());
            guard_output(&out, &inputs)?;
            let ts = load_triples(&triples)?;
            let existing = match &samples {
                Some(p) => load_corpus(p)?,
                None => Vec::new(),
            };
            let new = augment_dataset(&ts, &existing)?;
            write_records(&out, &new)?;
            println!(
                "{} intermediate samples from {} triples",
                new.len(),
                ts.len()
            );
        }
        Command::TrainContrastive {
            pairs,
            out,
            trace,
            train,
        } => {
            guard_output(&out, &[&pairs])?;
            if let Some(t) = &trace {
                guard_output(t, &[&pairs])?;
            }
            let config = train.resolve()?;
            let data: Vec<ContrastPair> = read_records(&pairs)?;
            let (params, tr) = train_contrastive(&data, &config)?;
            save_checkpoint(&params, &out)?;
            if let Some(t) = trace {
                write_records(&t, &tr)?;
            }
            if let Some(last) = tr.last() {
                println!(
                    "{} epochs on {} pairs: mean C-C distance {:.4}, mean E-C distance {:.4}",
                    last.epoch,
                    data.len(),
                    last.cc,
                    last.ec
                );
            }
        }
        Command::TrainClassifier {
            samples,
            init,
            out,
            train,
        } => {
            let mut inputs: Vec<&Path> = samples.iter().map(PathBuf::as_path).collect();
            inputs.extend(init.as_deref());
            guard_output(&out, &inputs)?;
            let config = train.resolve()?;
            let mut data: Vec<LabeledCode> = Vec::new();
            for path in &samples {
                data.extend(load_corpus(path)?.iter().map(LabeledCode::from));
            }
            let start = match &init {
                Some(p) => {
                    let params = load_checkpoint(p)?;
                    if params.dims() != config.dims {
                        log::info!(
                            "using dimensions of {} instead of the configured ones",
                            p.display()
                        );
                    }
                    params
                }
                None => init_params(&config)?,
            };
            let run = train_classifier(&data, &start, &config)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            save_checkpoint(&run.params, &out)?;
            println!(
                "{} samples, {} epochs: cross-entropy {:.4} -> {:.4}",
                data.len(),
                run.loss_trace.len(),
                run.initial_loss,
                run.loss_trace.last().copied().unwrap_or(run.initial_loss)
            );
        }
        Command::Score {
            model,
            samples,
            out,
            threshold,
        } => {
            guard_output(&out, &[&model, &samples])?;
            let params = load_checkpoint(&model)?;
            let corpus = load_corpus(&samples)?;
            let inputs: Vec<(&str, &str)> = corpus
                .iter()
                .map(|s| (s.problem.as_str(), s.code.as_str()))
                .collect();
            let preds = classify(&params, &inputs, threshold)?;
            let records: Vec<ScoreRecord> = corpus
                .iter()
                .zip(&preds)
                .map(|(s, &pred)| ScoreRecord {
                    problem_id: &s.problem_id,
                    prob: params.predict_prob(&s.problem, &s.code),
                    pred,
                })
                .collect();
            write_records(&out, &records)?;
            let positive = preds.iter().filter(|&&p| p == 1).count();
            println!(
                "{} samples scored, {positive} predicted correct",
                corpus.len()
            );
        }
        Command::Rank {
            model,
            candidates,
            out,
        } => {
            guard_output(&out, &[&model, &candidates])?;
            let params = load_checkpoint(&model)?;
            let sets: Vec<CandidateSet> = read_records(&candidates)?;
            let results = rank_candidates(&params, &sets)?;
            write_records(&out, &results)?;
            println!("{} candidate sets ranked", results.len());
        }
        Command::Evaluate {
            model,
            candidates,
            samples,
            threshold,
        } => {
            let params = load_checkpoint(&model)?;
            let sets: Option<Vec<CandidateSet>> =
                candidates.as_deref().map(read_records).transpose()?;
            let mut report = EvalReport::default();
            if let Some(sets) = &sets {
                let results = rank_candidates(&params, sets)?;
                report.pass_at_1 = Some(pass_at_1(sets, &results)?);
            }
            let labeled: Option<Vec<(String, String, u8)>> = match (&samples, &sets) {
                (Some(p), _) => Some(
                    load_corpus(p)?
                        .into_iter()
                        .map(|s| (s.problem, s.code, s.verdict.label()))
                        .collect(),
                ),
                (None, Some(sets)) => Some(flatten_labeled(sets)?),
                (None, None) => {
                    return Err(Error::usage("evaluate needs --candidates and/or --samples"));
                }
            };
            if let Some(labeled) = labeled {
                let inputs: Vec<(&str, &str)> = labeled
                    .iter()
                    .map(|(p, c, _)| (p.as_str(), c.as_str()))
                    .collect();
                let labels: Vec<u8> = labeled.iter().map(|(_, _, y)| *y).collect();
                let preds = classify(&params, &inputs, threshold)?;
                report.metrics = Some(classification_metrics(&preds, &labels)?);
            }
            println!("{report}");
        }
        Command::EmbedDump {
            model,
            samples,
            out,
        } => {
            guard_output(&out, &[&model, &samples])?;
            let params = load_checkpoint(&model)?;
            let corpus = load_corpus(&samples)?;
            embed_dump(&params, &corpus, &out)?;
            println!("{} points written to {}", corpus.len(), out.display());
        }
        Command::Gradcheck { trials, train } => {
            let config = train.resolve()?;
            let report = finite_diff_check(&config, trials)?;
            println!(
                "{} trials: max relative error contrastive {:.3e}, cross-entropy {:.3e}",
                report.trials, report.contrastive, report.bce
            );
            if report.worst() >= GRADCHECK_TOLERANCE {
                return Err(Error::Data(format!(
                    "gradient check failed: {:.3e} >= {GRADCHECK_TOLERANCE:e}",
                    report.worst()
                )));
            }
        }
    }
    std::io::stdout().flush().ok();
    Ok(())
}

fn flatten_labeled(sets: &[CandidateSet]) -> Result<Vec<(String, String, u8)>> {
    let mut out = Vec::new();
    for set in sets {
        for (i, c) in set.candidates.iter().enumerate() {
            let label = c.label.ok_or_else(|| {
                Error::Data(format!(
                    "candidate {i} of set {} has no label",
                    set.problem_id
                ))
            })?;
            out.push((set.problem.clone(), c.code.clone(), label));
        }
    }
    Ok(out)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
