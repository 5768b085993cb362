//! Seeded generator of toy corpora with known structure.
//!
//! Every problem gets its own identifiers, literals and description. Its
//! correct solutions call [`FIX_TOKEN`] on one line; an erroneous variant
//! calls one of [`BUG_MARKERS`] there instead, so an error/correct pair from
//! the same base differs by exactly one token. Correct variants of one
//! problem differ only in a trailing comment word. Some erroneous variants
//! also change a literal on another line, giving two-hunk diffs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CodeSample, Verdict};
use crate::evalrank::{Candidate, CandidateSet};
use crate::pairing::{mine_pairs, ContrastPair, DEFAULT_THRESHOLD};
use crate::training::LabeledCode;

pub const FIX_TOKEN: &str = "validated";
pub const BUG_MARKERS: [&str; 6] = [
    "truncated",
    "rounded",
    "shifted",
    "negated",
    "halved",
    "skipped",
];
const COMMENT_WORDS: [&str; 8] = [
    "reviewed", "tested", "simple", "baseline", "fast", "clean", "stable", "draft",
];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut s = String::new();
    for _ in 0..syllables {
        s.push(*CONSONANTS.choose(rng).expect("non-empty") as char);
        s.push(*VOWELS.choose(rng).expect("non-empty") as char);
    }
    s
}

/// One generated problem: a description and a code template.
#[derive(Debug, Clone)]
pub struct Problem {
    pub id: String,
    pub description: String,
    idents: Vec<String>,
    numbers: Vec<u32>,
    alt_number: u32,
}

impl Problem {
    pub fn random<R: Rng>(rng: &mut R, id: impl Into<String>) -> Self {
        let mut idents: Vec<String> = Vec::new();
        while idents.len() < 9 {
            let w = word(rng);
            if !idents.contains(&w) {
                idents.push(w);
            }
        }
        let mut numbers: Vec<u32> = Vec::new();
        while numbers.len() < 7 {
            let n = rng.gen_range(2..1000);
            if !numbers.contains(&n) {
                numbers.push(n);
            }
        }
        let alt_number = loop {
            let n = rng.gen_range(2..1000);
            if !numbers.contains(&n) {
                break n;
            }
        };
        let description = format!(
            "Given a list of {} {} and a bound, compute the {} {} of the list.",
            word(rng),
            word(rng),
            word(rng),
            word(rng)
        );
        Problem {
            id: id.into(),
            description,
            idents,
            numbers,
            alt_number,
        }
    }

    /// Renders the solution. `call` fills the checked line; `alt` swaps one
    /// literal on an earlier line; `comment` is the trailing comment word.
    pub fn code(&self, call: &str, alt: bool, comment: &str) -> String {
        let [f, a, b, acc, lim, i, tmp, flag, scale] =
            [0, 1, 2, 3, 4, 5, 6, 7, 8].map(|k| &self.idents[k]);
        let n = &self.numbers;
        let mul = if alt { self.alt_number } else { n[1] };
        format!(
            "def {f}({a}, {b}):\n\
             \x20   {acc} = {n0}\n\
             \x20   {lim} = len({a})\n\
             \x20   {scale} = {n5}\n\
             \x20   for {i} in range({lim}):\n\
             \x20       if {a}[{i}] > {b}:\n\
             \x20           {acc} = {acc} + {a}[{i}] * {mul}\n\
             \x20       else:\n\
             \x20           {acc} = {acc} - {n2}\n\
             \x20   {tmp} = {n3} * {b} + {n4}\n\
             \x20   {flag} = {acc} % {n6} == {scale}\n\
             \x20   {acc} = {call}({acc}, {tmp}, {flag})\n\
             \x20   return {acc}  # {comment}\n",
            n0 = n[0],
            n2 = n[2],
            n3 = n[3],
            n4 = n[4],
            n5 = n[5],
            n6 = n[6],
        )
    }
}

/// Submission histories for `problems` problems. Each problem has one user
/// group; for each of `correct_variants` comment words the group submits
/// `errors_per_variant` erroneous versions and then the correct one.
pub fn samples(
    problems: usize,
    correct_variants: usize,
    errors_per_variant: usize,
    seed: u64,
) -> Vec<CodeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for p in 0..problems {
        let prob = Problem::random(&mut rng, format!("s{seed}-p{p:03}"));
        let group = format!("u{p}");
        let mut order = 0u64;
        let comments: Vec<&str> = COMMENT_WORDS
            .choose_multiple(&mut rng, correct_variants.min(COMMENT_WORDS.len()))
            .copied()
            .collect();
        for comment in comments {
            let markers: Vec<&str> = BUG_MARKERS
                .choose_multiple(&mut rng, errors_per_variant.min(BUG_MARKERS.len()))
                .copied()
                .collect();
            for marker in markers {
                let alt = rng.gen_bool(0.5);
                out.push(
                    CodeSample::new(
                        &prob.id,
                        &prob.description,
                        prob.code(marker, alt, comment),
                        Verdict::Error,
                    )
                    .with_group(&group, order),
                );
                order += 1;
            }
            out.push(
                CodeSample::new(
                    &prob.id,
                    &prob.description,
                    prob.code(FIX_TOKEN, false, comment),
                    Verdict::Correct,
                )
                .with_group(&group, order),
            );
            order += 1;
        }
    }
    out
}

/// Pairs mined at the default threshold from [`samples`] with three correct
/// variants and two errors per variant.
pub fn contrastive_pairs(problems: usize, seed: u64) -> Vec<ContrastPair> {
    mine_pairs(&samples(problems, 3, 2, seed), DEFAULT_THRESHOLD).expect("threshold in range")
}

pub fn labeled_samples(problems: usize, seed: u64) -> Vec<LabeledCode> {
    samples(problems, 2, 2, seed)
        .iter()
        .map(LabeledCode::from)
        .collect()
}

/// Candidate sets with `k` candidates each (`k ≤ 1 + BUG_MARKERS.len()`),
/// exactly one correct at a random position. All candidates share one base,
/// so they differ pairwise by a single token.
pub fn candidate_sets(problems: usize, k: usize, seed: u64) -> Vec<CandidateSet> {
    assert!(
        (1..=1 + BUG_MARKERS.len()).contains(&k),
        "k must lie in 1..={}",
        1 + BUG_MARKERS.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..problems)
        .map(|p| {
            let prob = Problem::random(&mut rng, format!("c{seed}-p{p:03}"));
            let comment = *COMMENT_WORDS.choose(&mut rng).expect("non-empty");
            let mut candidates: Vec<Candidate> = BUG_MARKERS
                .choose_multiple(&mut rng, k - 1)
                .map(|m| Candidate {
                    code: prob.code(m, false, comment),
                    label: Some(0),
                })
                .collect();
            let at = rng.gen_range(0..=candidates.len());
            candidates.insert(
                at,
                Candidate {
                    code: prob.code(FIX_TOKEN, false, comment),
                    label: Some(1),
                },
            );
            CandidateSet {
                problem_id: prob.id.clone(),
                problem: prob.description.clone(),
                candidates,
            }
        })
        .collect()
}
