//! Corpus data model, line-delimited JSON record I/O, and dataset statistics.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmetrics::{edit_distance, red_tokens, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Error,
}

impl Verdict {
    /// Binary correctness label: 1 for correct, 0 for erroneous.
    pub fn label(self) -> u8 {
        match self {
            Verdict::Correct => 1,
            Verdict::Error => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::Error => "error",
        }
    }
}

/// Marks samples that were synthesized rather than submitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Intermediate,
}

/// One submission: a problem, a piece of code, and whether it passed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSample {
    pub problem_id: String,
    pub problem: String,
    pub code: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub group: String,
    #[serde(default)]
    pub order: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
}

impl CodeSample {
    pub fn new(
        problem_id: impl Into<String>,
        problem: impl Into<String>,
        code: impl Into<String>,
        verdict: Verdict,
    ) -> Self {
        CodeSample {
            problem_id: problem_id.into(),
            problem: problem.into(),
            code: code.into(),
            verdict,
            group: String::new(),
            order: 0,
            origin: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>, order: u64) -> Self {
        self.group = group.into();
        self.order = order;
        self
    }

    fn normalize(&mut self) {
        self.problem = normalize_newlines(&self.problem);
        self.code = normalize_newlines(&self.code);
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.code.trim().is_empty() {
            return Err("field `code` is empty".into());
        }
        Ok(())
    }
}

/// A buggy submission paired with a later correct one for the same problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairTriple {
    pub problem_id: String,
    pub problem: String,
    pub buggy: String,
    pub correct: String,
}

impl RepairTriple {
    fn normalize(&mut self) {
        self.problem = normalize_newlines(&self.problem);
        self.buggy = normalize_newlines(&self.buggy);
        self.correct = normalize_newlines(&self.correct);
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.buggy == self.correct {
            return Err("fields `buggy` and `correct` are identical".into());
        }
        Ok(())
    }
}

/// Converts CRLF and lone CR line endings to LF.
pub fn normalize_newlines(text: &str) -> String {
    if !text.contains('\r') {
        return text.to_owned();
    }
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Reads one JSON record per line. Blank lines are skipped; errors carry the
/// 1-based line number and serde's description of the offending field.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(path, &text)
}

pub(crate) fn parse_records<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str(line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Writes records one per line through a temp file renamed into place.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        for r in records {
            serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Creates `path` via a sibling temp file and rename, so readers never see a
/// partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_err = |e| Error::io(path, e);
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn load_validated<T, N, V>(path: &Path, normalize: N, validate: V) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    N: Fn(&mut T),
    V: Fn(&T) -> std::result::Result<(), String>,
{
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |message: String| Error::Record {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let mut rec: T = serde_json::from_str(line).map_err(|e| record_err(e.to_string()))?;
        normalize(&mut rec);
        validate(&rec).map_err(record_err)?;
        out.push(rec);
    }
    Ok(out)
}

/// Loads submissions in file order, normalizing line endings.
pub fn load_corpus(path: &Path) -> Result<Vec<CodeSample>> {
    load_validated(path, CodeSample::normalize, CodeSample::validate)
}

pub fn load_triples(path: &Path) -> Result<Vec<RepairTriple>> {
    load_validated(path, RepairTriple::normalize, RepairTriple::validate)
}

/// Aggregate statistics over a set of repair triples, one row of the
/// dataset summary table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub problem_count: usize,
    pub sample_count: usize,
    pub avg_problem_tokens: f64,
    pub avg_buggy_tokens: f64,
    pub avg_correct_tokens: f64,
    pub avg_edit_distance: f64,
    pub avg_relative_edit_distance: f64,
}

pub fn corpus_stats(triples: &[RepairTriple]) -> CorpusStats {
    if triples.is_empty() {
        return CorpusStats::default();
    }
    let problems: HashSet<&str> = triples.iter().map(|t| t.problem_id.as_str()).collect();

    let (mut problem_tokens, mut buggy_tokens, mut correct_tokens) = (0usize, 0usize, 0usize);
    let (mut ed_sum, mut red_sum) = (0usize, 0.0f64);
    for t in triples {
        let buggy = tokenize(&t.buggy);
        let correct = tokenize(&t.correct);
        problem_tokens += tokenize(&t.problem).len();
        buggy_tokens += buggy.len();
        correct_tokens += correct.len();
        ed_sum += edit_distance(&buggy, &correct);
        red_sum += red_tokens(&buggy, &correct);
    }

    let n = triples.len() as f64;
    CorpusStats {
        problem_count: problems.len(),
        sample_count: triples.len(),
        avg_problem_tokens: problem_tokens as f64 / n,
        avg_buggy_tokens: buggy_tokens as f64 / n,
        avg_correct_tokens: correct_tokens as f64 / n,
        avg_edit_distance: ed_sum as f64 / n,
        avg_relative_edit_distance: red_sum / n,
    }
}

impl CorpusStats {
    pub const COLUMNS: [&'static str; 7] = [
        "#Problem",
        "#Sample",
        "#AvgTokens.Problem",
        "#AvgTokens.Buggy",
        "#AvgTokens.Correct",
        "#AvgEditDistance",
        "#AvgRelativeEditDistance",
    ];
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = [
            self.problem_count.to_string(),
            self.sample_count.to_string(),
            format!("{:.2}", self.avg_problem_tokens),
            format!("{:.2}", self.avg_buggy_tokens),
            format!("{:.2}", self.avg_correct_tokens),
            format!("{:.2}", self.avg_edit_distance),
            format!("{:.2}", self.avg_relative_edit_distance),
        ];
        let widths: Vec<usize> = Self::COLUMNS
            .iter()
            .zip(&values)
            .map(|(c, v)| c.len().max(v.len()))
            .collect();
        let header: Vec<String> = Self::COLUMNS
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let row: Vec<String> = values
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v:>w$}"))
            .collect();
        writeln!(f, "{}", header.join("  "))?;
        write!(f, "{}", row.join("  "))
    }
}
