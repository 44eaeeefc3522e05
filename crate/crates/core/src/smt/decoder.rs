//! Stack decoding over phrase-table options.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::align::Link;
use super::lm::{NGramLm, BOS, EOS};
use super::phrase_table::{Orientation, PhraseTable, ReorderingTable, SCORE_FLOOR};
use crate::error::{Error, Result};
use crate::textmetrics::TokenSeq;

/// Translation options kept per source span, best first.
pub const OPTION_LIMIT: usize = 20;
pub const DEFAULT_BEAM: usize = 100;
pub const DEFAULT_DISTORTION_LIMIT: Option<usize> = Some(6);

/// Two scores closer than this are treated as equal; the lexicographically
/// smaller target string wins.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmtWeights {
    pub distortion: f64,
    pub lm: f64,
    pub lexical_reordering: f64,
    pub phrase_penalty: f64,
    /// Weights of `ln φ(t|s)`, `ln lex(t|s)`, `ln φ(s|t)`, `ln lex(s|t)`.
    pub translation_model: [f64; 4],
    pub word_penalty: f64,
}

impl Default for SmtWeights {
    fn default() -> Self {
        SmtWeights {
            distortion: 0.3,
            lm: 0.5,
            lexical_reordering: 0.3,
            phrase_penalty: 0.2,
            translation_model: [0.2; 4],
            word_penalty: -1.0,
        }
    }
}

impl SmtWeights {
    pub const DIM: usize = 9;

    /// `[distortion, lm, lexical_reordering, phrase_penalty, tm0..tm3, word_penalty]`.
    pub fn to_array(&self) -> [f64; Self::DIM] {
        let [a, b, c, d] = self.translation_model;
        [
            self.distortion,
            self.lm,
            self.lexical_reordering,
            self.phrase_penalty,
            a,
            b,
            c,
            d,
            self.word_penalty,
        ]
    }

    pub fn from_array(w: [f64; Self::DIM]) -> Self {
        SmtWeights {
            distortion: w[0],
            lm: w[1],
            lexical_reordering: w[2],
            phrase_penalty: w[3],
            translation_model: [w[4], w[5], w[6], w[7]],
            word_penalty: w[8],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.to_array();
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("weights must be finite".into()));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::Validation("at least one weight must be nonzero".into()));
        }
        Ok(())
    }

    pub fn dot(&self, c: &ComponentScores) -> f64 {
        self.distortion * c.distortion
            + self.lm * c.lm
            + self.lexical_reordering * c.lexical_reordering
            + self.phrase_penalty * c.phrase_penalty
            + self
                .translation_model
                .iter()
                .zip(&c.translation_model_parts)
                .map(|(w, s)| w * s)
                .sum::<f64>()
            + self.word_penalty * c.word_penalty
    }
}

/// Unweighted feature values of a derivation; every value is a natural log
/// or a count. `translation_model` is the sub-weighted sum of
/// `translation_model_parts`, so it enters the total with weight one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentScores {
    pub distortion: f64,
    pub lm: f64,
    pub lexical_reordering: f64,
    pub phrase_penalty: f64,
    pub translation_model: f64,
    pub word_penalty: f64,
    pub translation_model_parts: [f64; 4],
}

impl ComponentScores {
    /// The six named features in a fixed order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("distortion", self.distortion),
            ("lm", self.lm),
            ("lexical_reordering", self.lexical_reordering),
            ("phrase_penalty", self.phrase_penalty),
            ("translation_model", self.translation_model),
            ("word_penalty", self.word_penalty),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub source: Range<usize>,
    pub target: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmtHypothesis {
    pub target: TokenSeq,
    pub total_score: f64,
    pub components: ComponentScores,
    /// Segments in translation (target) order.
    pub segmentation: Vec<Segment>,
    /// `(source index, target index)` links, sorted.
    pub hard_alignment: Vec<Link>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub beam: usize,
    /// Maximum jump between consecutive phrases; `None` is unlimited.
    pub distortion_limit: Option<usize>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: DEFAULT_BEAM,
            distortion_limit: DEFAULT_DISTORTION_LIMIT,
        }
    }
}

/// Borrowed view of the tables a decode needs.
#[derive(Debug, Clone, Copy)]
pub struct DecoderTables<'a> {
    pub phrases: &'a PhraseTable,
    pub reordering: &'a ReorderingTable,
    pub lm: &'a NGramLm,
}

/// One way of translating a source span.
#[derive(Debug, Clone)]
pub struct TranslationOption {
    pub source: Range<usize>,
    pub target: Vec<String>,
    /// Natural logs of the four phrase scores.
    pub log_scores: [f64; 4],
    /// Natural logs of `p(orientation)` for monotone, swap, discontinuous.
    pub log_orientation: [f64; 3],
    pub alignment: Vec<Link>,
    pub pass_through: bool,
}

/// Collect the options for every span, adding a pass-through option for any
/// position that has no single-word entry.
pub fn collect_options(source: &[String], tables: DecoderTables<'_>, weights: &SmtWeights) -> Vec<TranslationOption> {
    let max_len = tables.phrases.max_phrase_len().max(1);
    let mut out = Vec::new();
    for start in 0..source.len() {
        for end in start + 1..=source.len().min(start + max_len) {
            let phrase = &source[start..end];
            let mut span_options: Vec<(f64, String, TranslationOption)> = tables
                .phrases
                .lookup(phrase)
                .iter()
                .map(|entry| {
                    let alignment = if entry.alignment.is_empty() {
                        (0..phrase.len())
                            .flat_map(|i| (0..entry.target.len()).map(move |j| (i, j)))
                            .collect()
                    } else {
                        entry.alignment.clone()
                    };
                    let option = TranslationOption {
                        source: start..end,
                        target: entry.target.clone(),
                        log_scores: entry.scores.map(f64::ln),
                        log_orientation: [Orientation::Monotone, Orientation::Swap, Orientation::Discontinuous]
                            .map(|o| tables.reordering.prob(phrase, &entry.target, o).max(SCORE_FLOOR).ln()),
                        alignment,
                        pass_through: false,
                    };
                    (option_estimate(&option, tables.lm, weights), entry.target.join(" "), option)
                })
                .collect();
            if span_options.is_empty() && end == start + 1 {
                let target = vec![source[start].clone()];
                let option = TranslationOption {
                    source: start..end,
                    log_orientation: [Orientation::Monotone, Orientation::Swap, Orientation::Discontinuous]
                        .map(|o| tables.reordering.prob(phrase, &target, o).max(SCORE_FLOOR).ln()),
                    target,
                    log_scores: [SCORE_FLOOR.ln(); 4],
                    alignment: vec![(0, 0)],
                    pass_through: true,
                };
                span_options.push((0.0, String::new(), option));
            }
            span_options.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            out.extend(span_options.into_iter().take(OPTION_LIMIT).map(|(_, _, o)| o));
        }
    }
    out
}

/// Context-free score estimate of an option, used for pruning only.
fn option_estimate(option: &TranslationOption, lm: &NGramLm, weights: &SmtWeights) -> f64 {
    let mut lm_score = 0.0;
    for (k, word) in option.target.iter().enumerate() {
        lm_score += lm.log_prob(&option.target[..k], word);
    }
    let tm: f64 = weights.translation_model.iter().zip(&option.log_scores).map(|(w, s)| w * s).sum();
    tm + weights.lm * lm_score - weights.phrase_penalty - weights.word_penalty * option.target.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Coverage(Vec<u64>);

impl Coverage {
    fn new(len: usize) -> Self {
        Coverage(vec![0; len.div_ceil(64).max(1)])
    }

    fn get(&self, i: usize) -> bool {
        self.0[i / 64] & (1 << (i % 64)) != 0
    }

    fn set_range(&mut self, range: Range<usize>) {
        for i in range {
            self.0[i / 64] |= 1 << (i % 64);
        }
    }

    fn is_free(&self, range: Range<usize>) -> bool {
        range.into_iter().all(|i| !self.get(i))
    }
}

/// Hypotheses that agree on coverage, LM context and previous span recombine.
type RecombinationKey = (Coverage, Vec<String>, Option<(usize, usize)>);

#[derive(Debug, Clone)]
struct Partial {
    score: f64,
    future: f64,
    components: ComponentScores,
    coverage: Coverage,
    context: Vec<String>,
    previous: Option<(usize, usize)>,
    target: Vec<String>,
    /// Option indices in translation order.
    used: Vec<usize>,
}

impl Partial {
    fn key(&self) -> RecombinationKey {
        (self.coverage.clone(), self.context.clone(), self.previous)
    }
}

/// `a` beats `b` on score, with near-ties going to the smaller target string.
fn beats(a_score: f64, a_target: &[String], b_score: f64, b_target: &[String]) -> bool {
    if (a_score - b_score).abs() <= SCORE_TIE_TOLERANCE {
        a_target.join(" ") < b_target.join(" ")
    } else {
        a_score > b_score
    }
}

/// Best future score for every span `[i, j)`, combining adjacent spans.
fn future_scores(n: usize, options: &[TranslationOption], lm: &NGramLm, weights: &SmtWeights) -> Vec<Vec<f64>> {
    let mut best = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for option in options {
        let estimate = option_estimate(option, lm, weights)
            + weights.lexical_reordering * option.log_orientation.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = &mut best[option.source.start][option.source.end];
        *cell = cell.max(estimate);
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            for k in i + 1..j {
                let combined = best[i][k] + best[k][j];
                if combined > best[i][j] {
                    best[i][j] = combined;
                }
            }
        }
    }
    best
}

fn future_of(coverage: &Coverage, n: usize, table: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i < n {
        if coverage.get(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && !coverage.get(i) {
            i += 1;
        }
        total += table[start][i];
    }
    total
}

/// Decode `source` with the given tables and weights.
pub fn decode(source: &[String], tables: DecoderTables<'_>, weights: &SmtWeights, options: DecodeOptions) -> Result<SmtHypothesis> {
    if options.beam == 0 {
        return Err(Error::invalid("beam must be at least 1"));
    }
    if source.is_empty() {
        return Err(Error::invalid("empty source sentence"));
    }
    let translation_options = collect_options(source, tables, weights);
    match search(source, &translation_options, tables, weights, options) {
        Some(h) => Ok(h),
        // a distortion limit can strand every partial hypothesis
        None => Ok(search(
            source,
            &translation_options,
            tables,
            weights,
            DecodeOptions {
                distortion_limit: None,
                ..options
            },
        )
        .expect("unlimited distortion always completes")),
    }
}

fn search(
    source: &[String],
    options: &[TranslationOption],
    tables: DecoderTables<'_>,
    weights: &SmtWeights,
    decode_options: DecodeOptions,
) -> Option<SmtHypothesis> {
    let n = source.len();
    let lm = tables.lm;
    let context_len = lm.order().saturating_sub(1).max(1);
    let future = future_scores(n, options, lm, weights);

    let mut stacks: Vec<Vec<Partial>> = vec![Vec::new(); n + 1];
    let mut index: Vec<HashMap<RecombinationKey, usize>> = vec![HashMap::new(); n + 1];
    let empty = Coverage::new(n);
    stacks[0].push(Partial {
        score: 0.0,
        future: future_of(&empty, n, &future),
        components: ComponentScores::default(),
        coverage: empty,
        context: vec![BOS.to_owned()],
        previous: None,
        target: Vec::new(),
        used: Vec::new(),
    });

    for covered in 0..n {
        let mut stack = std::mem::take(&mut stacks[covered]);
        stack.sort_by(|a, b| {
            (b.score + b.future)
                .total_cmp(&(a.score + a.future))
                .then_with(|| a.target.join(" ").cmp(&b.target.join(" ")))
        });
        stack.truncate(decode_options.beam);
        for partial in &stack {
            let prev_end = partial.previous.map_or(0, |p| p.1);
            for (oi, option) in options.iter().enumerate() {
                let span = option.source.clone();
                if !partial.coverage.is_free(span.clone()) {
                    continue;
                }
                let jump = span.start.abs_diff(prev_end);
                if decode_options.distortion_limit.is_some_and(|d| jump > d) {
                    continue;
                }
                let mut c = partial.components;
                c.distortion -= jump as f64;
                let orientation = Orientation::of(partial.previous, span.start, span.end);
                c.lexical_reordering += option.log_orientation[orientation as usize];
                c.phrase_penalty -= 1.0;
                c.word_penalty -= option.target.len() as f64;
                for k in 0..4 {
                    c.translation_model_parts[k] += option.log_scores[k];
                }
                c.translation_model = weights
                    .translation_model
                    .iter()
                    .zip(&c.translation_model_parts)
                    .map(|(w, s)| w * s)
                    .sum();
                let mut context = partial.context.clone();
                for word in &option.target {
                    c.lm += lm.log_prob(&context, word);
                    context.push(word.clone());
                }
                let now_covered = covered + span.len();
                if now_covered == n {
                    c.lm += lm.log_prob(&context, EOS);
                }
                if context.len() > context_len {
                    context.drain(..context.len() - context_len);
                }
                let mut coverage = partial.coverage.clone();
                coverage.set_range(span.clone());
                let mut target = partial.target.clone();
                target.extend(option.target.iter().cloned());
                let mut used = partial.used.clone();
                used.push(oi);
                let next = Partial {
                    score: weights.dot(&c),
                    future: future_of(&coverage, n, &future),
                    components: c,
                    coverage,
                    context,
                    previous: Some((span.start, span.end)),
                    target,
                    used,
                };
                let key = next.key();
                match index[now_covered].get(&key) {
                    Some(&at) => {
                        let existing = &stacks[now_covered][at];
                        if beats(next.score, &next.target, existing.score, &existing.target) {
                            stacks[now_covered][at] = next;
                        }
                    }
                    None => {
                        index[now_covered].insert(key, stacks[now_covered].len());
                        stacks[now_covered].push(next);
                    }
                }
            }
        }
    }

    let mut best: Option<&Partial> = None;
    for candidate in &stacks[n] {
        if best.is_none_or(|b| beats(candidate.score, &candidate.target, b.score, &b.target)) {
            best = Some(candidate);
        }
    }
    let best = best?;

    let mut segmentation = Vec::new();
    let mut hard_alignment = Vec::new();
    let mut offset = 0;
    for &oi in &best.used {
        let option = &options[oi];
        let target = offset..offset + option.target.len();
        for &(i, j) in &option.alignment {
            hard_alignment.push((option.source.start + i, target.start + j));
        }
        segmentation.push(Segment {
            source: option.source.clone(),
            target: target.clone(),
        });
        offset = target.end;
    }
    hard_alignment.sort_unstable();
    hard_alignment.dedup();
    Some(SmtHypothesis {
        target: TokenSeq::new(best.target.clone()).expect("phrase tokens contain no whitespace"),
        total_score: weights.dot(&best.components),
        components: best.components,
        segmentation,
        hard_alignment,
    })
}
