//! Similarity-based sampling of same-problem submissions.
//!
//! [`mine_pairs`] produces labeled contrastive pairs: two correct codes
//! (label 1) or an erroneous code with a correct one (label 0). Pairs of two
//! erroneous codes are never built. [`build_triples`] produces buggy→correct
//! repair triples from the submission history of a user group.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CodeSample, RepairTriple, Verdict};
use crate::error::{Error, Result};
use crate::textmetrics::{jaccard_sets, tokenize, TokenSeq};

pub const DEFAULT_THRESHOLD: f64 = 0.9;

/// Two same-problem codes with a same/different-functionality label.
///
/// For label 0 the erroneous code is always `code_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastPair {
    pub problem_id: String,
    pub problem: String,
    pub code_a: String,
    pub code_b: String,
    pub label: u8,
    #[serde(rename = "jaccard")]
    pub similarity: f64,
}

fn check_threshold(threshold: f64) -> Result<()> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )))
    }
}

/// Sample indices grouped by problem id; ids sorted, indices in input order.
fn by_problem(samples: &[CodeSample]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(&s.problem_id).or_default().push(i);
    }
    groups.into_values().collect()
}

fn token_seqs(samples: &[CodeSample]) -> Vec<TokenSeq> {
    samples.par_iter().map(|s| tokenize(&s.code)).collect()
}

/// Builds C-C (label 1) and E-C (label 0) pairs whose Jaccard similarity is at
/// least `threshold`. Byte-identical codes are skipped.
pub fn mine_pairs(samples: &[CodeSample], threshold: f64) -> Result<Vec<ContrastPair>> {
    check_threshold(threshold)?;
    let tokens = token_seqs(samples);
    let sets: Vec<HashSet<&str>> = tokens.iter().map(TokenSeq::token_set).collect();

    let pairs = by_problem(samples)
        .par_iter()
        .map(|idx| {
            let mut out = Vec::new();
            for (n, &i) in idx.iter().enumerate() {
                for &j in &idx[n + 1..] {
                    let (si, sj) = (&samples[i], &samples[j]);
                    let (a, b, label) = match (si.verdict, sj.verdict) {
                        (Verdict::Error, Verdict::Error) => continue,
                        (Verdict::Correct, Verdict::Correct) => (i, j, 1),
                        (Verdict::Error, Verdict::Correct) => (i, j, 0),
                        (Verdict::Correct, Verdict::Error) => (j, i, 0),
                    };
                    if si.code == sj.code {
                        continue;
                    }
                    let similarity = jaccard_sets(&sets[a], &sets[b]);
                    if similarity < threshold {
                        continue;
                    }
                    out.push(ContrastPair {
                        problem_id: samples[a].problem_id.clone(),
                        problem: samples[a].problem.clone(),
                        code_a: samples[a].code.clone(),
                        code_b: samples[b].code.clone(),
                        label,
                        similarity,
                    });
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(pairs)
}

/// Pairs every erroneous submission with every later correct submission from
/// the same problem and group, keeping those with Jaccard ≥ `threshold`.
pub fn build_triples(samples: &[CodeSample], threshold: f64) -> Result<Vec<RepairTriple>> {
    check_threshold(threshold)?;
    let tokens = token_seqs(samples);
    let sets: Vec<HashSet<&str>> = tokens.iter().map(TokenSeq::token_set).collect();

    let triples = by_problem(samples)
        .par_iter()
        .map(|idx| {
            let mut out = Vec::new();
            for &e in idx {
                let buggy = &samples[e];
                if buggy.verdict != Verdict::Error {
                    continue;
                }
                for &c in idx {
                    let fixed = &samples[c];
                    if fixed.verdict != Verdict::Correct
                        || fixed.group != buggy.group
                        || fixed.order <= buggy.order
                        || fixed.code == buggy.code
                    {
                        continue;
                    }
                    if jaccard_sets(&sets[e], &sets[c]) < threshold {
                        continue;
                    }
                    out.push(RepairTriple {
                        problem_id: buggy.problem_id.clone(),
                        problem: buggy.problem.clone(),
                        buggy: buggy.code.clone(),
                        correct: fixed.code.clone(),
                    });
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(triples)
}
