//! Partially-fixed intermediate versions of buggy code.
//!
//! The line diff between a buggy and a correct version is cut into hunks:
//! maximal runs of changed lines, with no context. Applying the hunks one at
//! a time in document order walks from the buggy code to the correct code;
//! every strict prefix of that walk is an intermediate version that is still
//! treated as erroneous.
//!
//! Lines keep their terminators, so applying every hunk reproduces the
//! target byte for byte, including a missing final newline.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{CodeSample, Origin, RepairTriple, Verdict};
use crate::error::{Error, Result};

/// One modification step: replace `old_lines`, starting at 1-based line
/// `old_start` of the source, with `new_lines`.
///
/// A pure insertion has no `old_lines` and goes before source line
/// `old_start` (one past the last line appends).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: usize,
    pub old_lines: Vec<String>,
    pub new_lines: Vec<String>,
}

impl Hunk {
    fn old_end(&self) -> usize {
        self.old_start + self.old_lines.len()
    }

    fn line_delta(&self) -> isize {
        self.new_lines.len() as isize - self.old_lines.len() as isize
    }
}

/// Ordered hunks turning `source` into `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffScript {
    pub hunks: Vec<Hunk>,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntermediateVersion {
    pub code: String,
    /// Number of leading hunks applied, `1..n`.
    pub applied_count: usize,
}

/// Splits text into lines that keep their `\n`.
pub fn split_lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Equal,
    Delete,
    Insert,
}

/// Minimal edit script between two line lists via an LCS table over the
/// region left after trimming the common prefix and suffix. Within a changed
/// run deletions come before insertions.
fn line_ops(a: &[&str], b: &[&str]) -> Vec<Op> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (ma, mb) = (&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix]);

    // lcs[i][j] = LCS length of ma[i..] and mb[j..]
    let (n, m) = (ma.len(), mb.len());
    let width = m + 1;
    let mut lcs = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * width + j] = if ma[i] == mb[j] {
                lcs[(i + 1) * width + j + 1] + 1
            } else {
                lcs[(i + 1) * width + j].max(lcs[i * width + j + 1])
            };
        }
    }

    let mut ops = vec![Op::Equal; prefix];
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && ma[i] == mb[j] {
            ops.push(Op::Equal);
            i += 1;
            j += 1;
        } else if j == m || (i < n && lcs[(i + 1) * width + j] >= lcs[i * width + j + 1]) {
            ops.push(Op::Delete);
            i += 1;
        } else {
            ops.push(Op::Insert);
            j += 1;
        }
    }
    ops.extend(std::iter::repeat_n(Op::Equal, suffix));
    ops
}

/// Positional split of a single hunk into per-line steps: removed line `i`
/// pairs with inserted line `i`; leftover lines of the longer side become
/// pure deletions or pure insertions, in order.
fn split_hunk(h: &Hunk) -> Vec<Hunk> {
    let (old, new) = (&h.old_lines, &h.new_lines);
    let paired = old.len().min(new.len());
    let mut out = Vec::with_capacity(old.len().max(new.len()));
    for k in 0..paired {
        out.push(Hunk {
            old_start: h.old_start + k,
            old_lines: vec![old[k].clone()],
            new_lines: vec![new[k].clone()],
        });
    }
    for (k, line) in old.iter().enumerate().skip(paired) {
        out.push(Hunk {
            old_start: h.old_start + k,
            old_lines: vec![line.clone()],
            new_lines: Vec::new(),
        });
    }
    for line in new.iter().skip(paired) {
        out.push(Hunk {
            old_start: h.old_start + paired,
            old_lines: Vec::new(),
            new_lines: vec![line.clone()],
        });
    }
    out
}

/// Diffs `buggy` against `correct` into zero-context hunks. A diff made of a
/// single hunk is split further into one step per line.
pub fn compute_hunks(buggy: &str, correct: &str) -> DiffScript {
    let (a, b) = (split_lines(buggy), split_lines(correct));
    let mut hunks: Vec<Hunk> = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut open: Option<Hunk> = None;

    for op in line_ops(&a, &b) {
        match op {
            Op::Equal => {
                hunks.extend(open.take());
                i += 1;
                j += 1;
            }
            Op::Delete => {
                open.get_or_insert_with(|| new_hunk(i))
                    .old_lines
                    .push(a[i].to_owned());
                i += 1;
            }
            Op::Insert => {
                open.get_or_insert_with(|| new_hunk(i))
                    .new_lines
                    .push(b[j].to_owned());
                j += 1;
            }
        }
    }
    hunks.extend(open);

    if hunks.len() == 1 {
        hunks = split_hunk(&hunks[0]);
    }
    DiffScript {
        hunks,
        source: buggy.to_owned(),
        target: correct.to_owned(),
    }
}

fn new_hunk(zero_based_old: usize) -> Hunk {
    Hunk {
        old_start: zero_based_old + 1,
        old_lines: Vec::new(),
        new_lines: Vec::new(),
    }
}

impl DiffScript {
    /// Applies the first `count` hunks to the source.
    pub fn apply_prefix(&self, count: usize) -> Result<String> {
        let mut lines: Vec<String> = split_lines(&self.source)
            .into_iter()
            .map(str::to_owned)
            .collect();
        let mut shift: isize = 0;
        let mut prev_end = 1usize;
        for (k, h) in self.hunks.iter().take(count).enumerate() {
            if h.old_lines.is_empty() && h.new_lines.is_empty() {
                return Err(Error::Invariant(format!("hunk {k} is empty")));
            }
            if h.old_start < prev_end {
                return Err(Error::Invariant(format!(
                    "hunk {k} at line {} overlaps the previous hunk",
                    h.old_start
                )));
            }
            let at = (h.old_start as isize - 1 + shift) as usize;
            let end = at + h.old_lines.len();
            if end > lines.len() || lines[at..end] != h.old_lines[..] {
                return Err(Error::Invariant(format!(
                    "hunk {k} does not match the source at line {}",
                    h.old_start
                )));
            }
            lines.splice(at..end, h.new_lines.iter().cloned());
            shift += h.line_delta();
            prev_end = h.old_end();
        }
        Ok(lines.concat())
    }
}

/// The `n - 1` strict intermediates between source and target, in order.
///
/// Fails if applying every hunk does not reproduce the target.
pub fn generate_intermediates(script: &DiffScript) -> Result<Vec<IntermediateVersion>> {
    let n = script.hunks.len();
    let full = script.apply_prefix(n)?;
    if full != script.target {
        return Err(Error::Invariant(
            "applying every hunk does not reproduce the target".into(),
        ));
    }
    (1..n)
        .map(|k| {
            Ok(IntermediateVersion {
                code: script.apply_prefix(k)?,
                applied_count: k,
            })
        })
        .collect()
}

/// Strips trailing whitespace from every line. Used as the dedup key.
pub fn normalize_for_dedup(code: &str) -> String {
    split_lines(code)
        .into_iter()
        .map(|line| {
            let trimmed = line.trim_end();
            if line.ends_with('\n') {
                format!("{trimmed}\n")
            } else {
                trimmed.to_owned()
            }
        })
        .collect()
}

/// Turns each triple's intermediates into new error-labeled samples.
///
/// Intermediates that collide, after normalization, with an existing sample
/// of the same problem, with an endpoint of any triple, or with an
/// intermediate already emitted are dropped. Only the new samples are
/// returned.
pub fn augment_dataset(
    triples: &[RepairTriple],
    existing: &[CodeSample],
) -> Result<Vec<CodeSample>> {
    let mut seen: HashSet<(String, String)> = existing
        .iter()
        .map(|s| (s.problem_id.clone(), normalize_for_dedup(&s.code)))
        .collect();

    for t in triples {
        for endpoint in [&t.buggy, &t.correct] {
            seen.insert((t.problem_id.clone(), normalize_for_dedup(endpoint)));
        }
    }

    let mut out = Vec::new();
    for t in triples {
        let script = compute_hunks(&t.buggy, &t.correct);
        for iv in generate_intermediates(&script)? {
            let key = (t.problem_id.clone(), normalize_for_dedup(&iv.code));
            if !seen.insert(key) {
                continue;
            }
            let mut sample = CodeSample::new(&t.problem_id, &t.problem, iv.code, Verdict::Error)
                .with_group("", iv.applied_count as u64);
            sample.origin = Some(Origin::Intermediate);
            out.push(sample);
        }
    }
    Ok(out)
}
