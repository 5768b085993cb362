//! Candidate selection and evaluation metrics.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::EncoderParams;

pub const DEFAULT_CLASSIFY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// The candidate solutions generated for one problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub problem_id: String,
    pub problem: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub problem_id: String,
    pub probs: Vec<f64>,
    pub selected: usize,
}

/// Index of the largest value; ties go to the lowest index.
pub fn select(probs: &[f64]) -> Result<usize> {
    let (first, rest) = probs
        .split_first()
        .ok_or_else(|| Error::usage("cannot select from an empty candidate list"))?;
    let mut best = (0, *first);
    for (i, &p) in rest.iter().enumerate() {
        if p > best.1 {
            best = (i + 1, p);
        }
    }
    Ok(best.0)
}

/// Scores every candidate and picks the most likely correct one per set.
pub fn rank_candidates(params: &EncoderParams, sets: &[CandidateSet]) -> Result<Vec<RankResult>> {
    sets.par_iter()
        .map(|set| {
            let probs: Vec<f64> = set
                .candidates
                .iter()
                .map(|c| params.predict_prob(&set.problem, &c.code))
                .collect();
            let selected = select(&probs).map_err(|_| {
                Error::usage(format!(
                    "candidate set {} has no candidates",
                    set.problem_id
                ))
            })?;
            Ok(RankResult {
                problem_id: set.problem_id.clone(),
                probs,
                selected,
            })
        })
        .collect()
}

/// Fraction of sets whose selected candidate is labeled correct.
pub fn pass_at_1(sets: &[CandidateSet], results: &[RankResult]) -> Result<f64> {
    if sets.len() != results.len() {
        return Err(Error::Data(format!(
            "{} candidate sets but {} rank results",
            sets.len(),
            results.len()
        )));
    }
    if sets.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (set, res) in sets.iter().zip(results) {
        if set.problem_id != res.problem_id {
            return Err(Error::Data(format!(
                "rank result {} does not line up with candidate set {}",
                res.problem_id, set.problem_id
            )));
        }
        if let Some(i) = set.candidates.iter().position(|c| c.label.is_none()) {
            return Err(Error::Data(format!(
                "candidate {i} of set {} has no label",
                set.problem_id
            )));
        }
        let chosen = set.candidates.get(res.selected).ok_or_else(|| {
            Error::Data(format!(
                "selected index {} out of range for set {}",
                res.selected, set.problem_id
            ))
        })?;
        if chosen.label == Some(1) {
            hits += 1;
        }
    }
    Ok(hits as f64 / sets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn from_predictions(preds: &[u8], labels: &[u8]) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::usage(format!(
                "{} predictions but {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &y) in preds.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    /// Precision, recall and F1; any 0/0 is taken as 0.
    pub fn metrics(&self) -> ClassificationMetrics {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassificationMetrics {
            precision,
            recall,
            f1,
        }
    }
}

pub fn classification_metrics(preds: &[u8], labels: &[u8]) -> Result<ClassificationMetrics> {
    Ok(ConfusionMatrix::from_predictions(preds, labels)?.metrics())
}

/// Predicts 1 wherever the correctness probability reaches `threshold`.
pub fn classify(
    params: &EncoderParams,
    samples: &[(&str, &str)],
    threshold: f64,
) -> Result<Vec<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::usage(format!(
            "classification threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(samples
        .par_iter()
        .map(|(problem, code)| u8::from(params.predict_prob(problem, code) >= threshold))
        .collect())
}

/// Plain-text evaluation table, percentages to two decimals.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalReport {
    pub pass_at_1: Option<f64>,
    pub metrics: Option<ClassificationMetrics>,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct =
            |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", 100.0 * v));
        let m = self.metrics;
        let cells = [
            ("Pass@1", pct(self.pass_at_1)),
            ("Precision", pct(m.map(|m| m.precision))),
            ("Recall", pct(m.map(|m| m.recall))),
            ("F1", pct(m.map(|m| m.f1))),
        ];
        let header: Vec<String> = cells
            .iter()
            .map(|(h, v)| format!("{h:>w$}", w = h.len().max(v.len())))
            .collect();
        let row: Vec<String> = cells
            .iter()
            .map(|(h, v)| format!("{v:>w$}", w = h.len().max(v.len())))
            .collect();
        writeln!(f, "{}", header.join("  "))?;
        write!(f, "{}", row.join("  "))
    }
}
