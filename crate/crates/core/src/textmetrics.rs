//! Tokenization, BLEU and Pearson correlation.
//!
//! BLEU follows the sacreBLEU 1.5.0 conventions for the signature
//! `BLEU+c.mixed+#.1+s.exp+tok.13a`: mixed case, 13a tokenization and
//! exponential smoothing of zero-match orders. Sentence-level scores use the
//! effective n-gram order (orders for which the hypothesis has no n-grams are
//! dropped), corpus-level scores always use order 4.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NGRAM_ORDER: usize = 4;

/// An ordered list of surface tokens. Tokens never contain whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if let Some(bad) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
            return Err(Error::Validation(format!("invalid token {bad:?}")));
        }
        Ok(TokenSeq(tokens))
    }

    /// Split on whitespace; no other tokenization is applied.
    pub fn from_whitespace(text: &str) -> Self {
        TokenSeq(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl AsRef<[String]> for TokenSeq {
    fn as_ref(&self) -> &[String] {
        &self.0
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        TokenSeq::new(tokens)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(seq: TokenSeq) -> Self {
        seq.0
    }
}

impl<'a> FromIterator<&'a str> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        TokenSeq::from_whitespace(&iter.into_iter().collect::<Vec<_>>().join(" "))
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

static RULES_13A: LazyLock<[(Regex, &'static str); 4]> = LazyLock::new(|| {
    [
        // symbols
        (Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap(), " ${1} "),
        // period and comma unless preceded by a digit
        (Regex::new(r"([^0-9])([.,])").unwrap(), "${1} ${2} "),
        // period and comma unless followed by a digit
        (Regex::new(r"([.,])([^0-9])").unwrap(), " ${1} ${2}"),
        // dash preceded by a digit
        (Regex::new(r"([0-9])(-)").unwrap(), "${1} ${2} "),
    ]
});

/// The `13a` tokenizer (mteval-v13a). Case is preserved.
pub fn tokenize_13a(text: &str) -> TokenSeq {
    let mut line = text
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, replacement) in RULES_13A.iter() {
        line = re.replace_all(&line, *replacement).into_owned();
    }
    TokenSeq::from_whitespace(&line)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// Score in [0, 100].
    pub value: f64,
    /// Smoothed n-gram precisions for orders 1..=4, each in [0, 1].
    pub precisions: [f64; NGRAM_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Number of leading precisions that enter the geometric mean.
    pub effective_order: usize,
}

/// Sufficient statistics for BLEU; additive over sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub correct: [u64; NGRAM_ORDER],
    pub total: [u64; NGRAM_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn from_sentence<R: AsRef<[String]>>(hyp: &[String], refs: &[R]) -> Result<Self> {
        if refs.is_empty() {
            return Err(Error::invalid("at least one reference is required"));
        }
        let hyp_len = hyp.len();
        let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
        let mut closest: Option<(usize, usize)> = None;
        for reference in refs {
            let reference = reference.as_ref();
            let len = reference.len();
            let diff = hyp_len.abs_diff(len);
            closest = match closest {
                None => Some((diff, len)),
                Some((d, l)) if diff < d || (diff == d && len < l) => Some((diff, len)),
                keep => keep,
            };
            for (ngram, count) in ngram_counts(reference) {
                let slot = ref_counts.entry(ngram).or_insert(0);
                *slot = (*slot).max(count);
            }
        }
        let mut stats = BleuStats {
            hyp_len,
            ref_len: closest.map(|(_, l)| l).unwrap_or(0),
            ..Default::default()
        };
        for (ngram, count) in ngram_counts(hyp) {
            let n = ngram.len();
            stats.correct[n - 1] += count.min(ref_counts.get(ngram).copied().unwrap_or(0));
            stats.total[n - 1] += count;
        }
        Ok(stats)
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..NGRAM_ORDER {
            self.correct[n] += other.correct[n];
            self.total[n] += other.total[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Exponentially smoothed BLEU over these statistics.
    pub fn score(&self, use_effective_order: bool) -> BleuScore {
        let mut precisions = [0.0; NGRAM_ORDER];
        let mut smooth = 1.0;
        let mut effective_order = NGRAM_ORDER;
        for n in 0..NGRAM_ORDER {
            let total = self.total[n];
            if total == 0 {
                break;
            }
            if use_effective_order {
                effective_order = n + 1;
            }
            precisions[n] = if self.correct[n] == 0 {
                smooth *= 2.0;
                1.0 / (smooth * total as f64)
            } else {
                self.correct[n] as f64 / total as f64
            };
        }
        let brevity_penalty = if self.hyp_len < self.ref_len {
            if self.hyp_len > 0 {
                (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
            } else {
                0.0
            }
        } else {
            1.0
        };
        let log_mean = precisions[..effective_order]
            .iter()
            .map(|p| p.ln())
            .sum::<f64>()
            / effective_order as f64;
        let value = (100.0 * brevity_penalty * log_mean.exp()).clamp(0.0, 100.0);
        BleuScore {
            value,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len,
            ref_len: self.ref_len,
            effective_order,
        }
    }
}

fn ngram_counts(tokens: &[String]) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for n in 1..=NGRAM_ORDER.min(tokens.len()) {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Smoothed sentence BLEU against one or more references.
pub fn sentence_bleu<R: AsRef<[String]>>(hyp: &[String], refs: &[R]) -> Result<BleuScore> {
    Ok(BleuStats::from_sentence(hyp, refs)?.score(true))
}

/// Corpus BLEU with a single reference per hypothesis.
pub fn corpus_bleu<H: AsRef<[String]>, R: AsRef<[String]>>(hyps: &[H], refs: &[R]) -> Result<BleuScore> {
    corpus_bleu_multi(hyps, std::slice::from_ref(&refs))
}

/// Corpus BLEU over several parallel reference streams.
pub fn corpus_bleu_multi<H, S, R>(hyps: &[H], ref_streams: &[S]) -> Result<BleuScore>
where
    H: AsRef<[String]>,
    S: AsRef<[R]>,
    R: AsRef<[String]>,
{
    if hyps.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if ref_streams.is_empty() {
        return Err(Error::invalid("at least one reference stream is required"));
    }
    for stream in ref_streams {
        let len = stream.as_ref().len();
        if len != hyps.len() {
            return Err(Error::ParallelLengthMismatch {
                left: hyps.len(),
                right: len,
            });
        }
    }
    let mut stats = BleuStats::default();
    for (i, hyp) in hyps.iter().enumerate() {
        let refs: Vec<&[String]> = ref_streams.iter().map(|s| s.as_ref()[i].as_ref()).collect();
        stats.add(&BleuStats::from_sentence(hyp.as_ref(), &refs)?);
    }
    Ok(stats.score(false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    pub n: usize,
}

/// Product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<PearsonResult> {
    if xs.len() != ys.len() {
        return Err(Error::ParallelLengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!("need at least 2 samples, got {n}")));
    }
    let mean_x = xs.iter().sum::<f64>() / n as f64;
    let mean_y = ys.iter().sum::<f64>() / n as f64;
    let (mut cov, mut var_x, mut var_y) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 || !(var_x * var_y).is_finite() {
        return Err(Error::DegenerateSample("zero variance".into()));
    }
    let r = (cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0);
    Ok(PearsonResult { r, n })
}
