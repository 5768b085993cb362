//! Rule-based code tokenizer and the similarity metrics built on it.
//!
//! Tokenization rules, applied left to right:
//!
//! * whitespace separates tokens and is dropped;
//! * `_` separates identifier parts and is dropped;
//! * every other non-alphanumeric character is a token of its own;
//! * alphanumeric runs are split at lowercase→uppercase transitions and at
//!   letter↔digit transitions. Case is preserved.
//!
//! So `fooBar_baz2` becomes `[foo, Bar, baz, 2]` and `a = b+1` becomes
//! `[a, =, b, +, 1]`.

use std::collections::HashSet;

/// An ordered token sequence. Tokens are never empty and never contain whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    /// Distinct tokens.
    pub fn token_set(&self) -> HashSet<&str> {
        self.iter().collect()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    /// Builds a sequence from pre-split tokens. Empty or whitespace-bearing
    /// items are dropped to keep the type's invariant.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq(
            iter.into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty() && !t.chars().any(char::is_whitespace))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Lower,
    Upper,
    Caseless,
    Digit,
}

impl CharClass {
    fn of(c: char) -> Self {
        if c.is_numeric() {
            CharClass::Digit
        } else if c.is_lowercase() {
            CharClass::Lower
        } else if c.is_uppercase() {
            CharClass::Upper
        } else {
            CharClass::Caseless
        }
    }

    fn is_letter(self) -> bool {
        self != CharClass::Digit
    }
}

fn is_boundary(prev: CharClass, cur: CharClass) -> bool {
    (prev == CharClass::Lower && cur == CharClass::Upper)
        || (prev.is_letter() && cur == CharClass::Digit)
        || (prev == CharClass::Digit && cur.is_letter())
}

/// Splits source text into tokens. Deterministic and total.
pub fn tokenize(code: &str) -> TokenSeq {
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut prev: Option<CharClass> = None;

    let flush = |buf: &mut String, out: &mut Vec<String>| {
        if !buf.is_empty() {
            out.push(std::mem::take(buf));
        }
    };

    for c in code.chars() {
        if c.is_alphanumeric() {
            let class = CharClass::of(c);
            if prev.is_some_and(|p| is_boundary(p, class)) {
                flush(&mut buf, &mut out);
            }
            buf.push(c);
            prev = Some(class);
            continue;
        }
        flush(&mut buf, &mut out);
        prev = None;
        if !(c.is_whitespace() || c == '_') {
            out.push(c.to_string());
        }
    }
    flush(&mut buf, &mut out);
    TokenSeq(out)
}

/// Levenshtein distance over whole tokens with unit costs, in two rows of memory.
pub fn edit_distance(a: &TokenSeq, b: &TokenSeq) -> usize {
    levenshtein(a.tokens(), b.tokens())
}

/// Levenshtein distance over arbitrary comparable items.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // Iterate over the longer side so the rows are sized by the shorter one.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }

    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, x) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(x != y);
            let delete = prev[j + 1] + 1;
            let insert = cur[j] + 1;
            cur[j + 1] = substitute.min(delete).min(insert);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Jaccard similarity of the distinct-token sets. Two empty sequences score 1.0.
pub fn jaccard(a: &TokenSeq, b: &TokenSeq) -> f64 {
    jaccard_sets(&a.token_set(), &b.token_set())
}

pub(crate) fn jaccard_sets(a: &HashSet<&str>, b: &HashSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|t| large.contains(*t)).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Relative edit distance: token edit distance divided by the mean token
/// count of the two versions. Zero when both are empty.
pub fn red(buggy: &str, correct: &str) -> f64 {
    red_tokens(&tokenize(buggy), &tokenize(correct))
}

pub fn red_tokens(buggy: &TokenSeq, correct: &TokenSeq) -> f64 {
    let mean_len = (buggy.len() + correct.len()) as f64 / 2.0;
    if mean_len == 0.0 {
        return 0.0;
    }
    edit_distance(buggy, correct) as f64 / mean_len
}
