//! Retraining with expert corrections: archaic-term normalization, corpus
//! merging with up-weighting, before/after evaluation and a guarded swap of
//! the serving model.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use regex::{Captures, Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::corpus::{Direction, Language, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::qe::{build_kfold_dataset, gbt_train, GbtModel, GbtParams, SmtFoldPipeline};
use crate::smt::{dev_bleu, train_smt, DecodeOptions, SmtModel, SmtTrainConfig, SmtWeights};
use crate::textmetrics::TokenSeq;

pub const ALLOWED_REPEATS: [usize; 3] = [1, 5, 10];
/// The new model is served unless it loses more than this much dev BLEU.
pub const SWAP_TOLERANCE: f64 = 0.1;

/// Ordered whole-word replacements for archaic English.
#[derive(Debug, Clone)]
pub struct ArchaicMap {
    pairs: Vec<(String, String)>,
    pattern: Option<Regex>,
}

impl Default for ArchaicMap {
    fn default() -> Self {
        ArchaicMap::new(vec![("thy".into(), "your".into()), ("thou".into(), "you".into())]).expect("default map is valid")
    }
}

impl ArchaicMap {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        for (i, (term, replacement)) in pairs.iter().enumerate() {
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::Validation(format!("archaic term {term:?} must be a single word")));
            }
            if term.to_lowercase() != *term {
                return Err(Error::Validation(format!("archaic term {term:?} must be lowercase")));
            }
            if pairs[..i].iter().any(|(t, _)| t == term) {
                return Err(Error::Validation(format!("archaic term {term:?} listed twice")));
            }
            let produced = replacement.to_lowercase();
            if let Some((later, _)) = pairs.iter().find(|(t, _)| produced.split_whitespace().any(|w| w == t)) {
                return Err(Error::Validation(format!("replacement {replacement:?} contains archaic term {later:?}")));
            }
        }
        let pattern = if pairs.is_empty() {
            None
        } else {
            let mut terms: Vec<&str> = pairs.iter().map(|(t, _)| t.as_str()).collect();
            terms.sort_by_key(|t| std::cmp::Reverse(t.len()));
            let alternation: Vec<String> = terms.iter().map(|t| regex::escape(t)).collect();
            let re = RegexBuilder::new(&format!(r"\b(?:{})\b", alternation.join("|")))
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::invalid(e.to_string()))?;
            Some(re)
        };
        Ok(ArchaicMap { pairs, pattern })
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    /// One `archaic replacement...` pair per line; `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (term, replacement) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(origin, lineno + 1, "expected `term replacement`"))?;
            pairs.push((term.to_owned(), replacement.trim().to_owned()));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    fn replacement(&self, matched: &str) -> &str {
        let lower = matched.to_lowercase();
        &self.pairs.iter().find(|(t, _)| *t == lower).expect("pattern only matches map terms").1
    }
}

/// Replace archaic words in one pass. A capitalized match gets a capitalized
/// replacement; otherwise the replacement is used as written.
pub fn normalize_archaic(text: &str, map: &ArchaicMap) -> String {
    let Some(re) = &map.pattern else {
        return text.to_owned();
    };
    re.replace_all(text, |caps: &Captures<'_>| {
        let matched = &caps[0];
        let replacement = map.replacement(matched);
        if matched.chars().next().is_some_and(char::is_uppercase) {
            let mut chars = replacement.chars();
            chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default()
        } else {
            replacement.to_owned()
        }
    })
    .into_owned()
}

/// Normalize the English side of every pair.
pub fn normalize_corpus(corpus: &ParallelCorpus, map: &ArchaicMap) -> Result<ParallelCorpus> {
    let fix = |side: &TokenSeq| TokenSeq::from_whitespace(&normalize_archaic(&side.join(), map));
    let pairs = corpus
        .pairs
        .iter()
        .map(|p| match corpus.direction.target() {
            Language::En => SentencePair::new(p.source.clone(), fix(&p.target)),
            Language::Chr => SentencePair::new(fix(&p.source), p.target.clone()),
        })
        .collect::<Result<_>>()?;
    Ok(ParallelCorpus::new(corpus.direction, pairs))
}

/// `train` followed by `repeat` copies of `corrections`, re-oriented to the
/// training direction.
pub fn merge_corrections(train: &ParallelCorpus, corrections: &ParallelCorpus, repeat: usize) -> Result<ParallelCorpus> {
    if !ALLOWED_REPEATS.contains(&repeat) {
        return Err(Error::invalid(format!("repeat factor must be one of {ALLOWED_REPEATS:?}, got {repeat}")));
    }
    let corrections = corrections.oriented(train.direction);
    let mut pairs = Vec::with_capacity(train.len() + repeat * corrections.len());
    pairs.extend(train.pairs.iter().cloned());
    for _ in 0..repeat {
        pairs.extend(corrections.pairs.iter().cloned());
    }
    Ok(ParallelCorpus::new(train.direction, pairs))
}

/// Shared handle to the model currently being served. Replacement is a
/// pointer swap; readers holding the old `Arc` finish undisturbed.
#[derive(Debug)]
pub struct ServingSlot<T> {
    current: RwLock<Arc<T>>,
}

impl<T> ServingSlot<T> {
    pub fn new(value: T) -> Self {
        ServingSlot {
            current: RwLock::new(Arc::new(value)),
        }
    }

    pub fn get(&self) -> Arc<T> {
        self.current.read().clone()
    }

    pub fn replace(&self, value: T) -> Arc<T> {
        std::mem::replace(&mut *self.current.write(), Arc::new(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QeRebuild {
    pub k: usize,
    pub seed: u64,
    pub params: GbtParams,
}

#[derive(Debug, Clone)]
pub struct RetrainConfig {
    pub smt: SmtTrainConfig,
    pub weights: SmtWeights,
    pub decode: DecodeOptions,
    pub repeat: usize,
    /// Applied to the English side of training, correction and dev data.
    pub archaic: Option<ArchaicMap>,
    /// Rebuild the QE regressor for each swapped-in model.
    pub qe: Option<QeRebuild>,
    pub directions: Vec<Direction>,
}

impl Default for RetrainConfig {
    fn default() -> Self {
        RetrainConfig {
            smt: SmtTrainConfig::default(),
            weights: SmtWeights::default(),
            decode: DecodeOptions::default(),
            repeat: 1,
            archaic: Some(ArchaicMap::default()),
            qe: None,
            directions: Direction::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub direction: Direction,
    pub bleu_before: Option<f64>,
    pub bleu_after: Option<f64>,
    pub corrections_used: usize,
    pub repeat_factor: usize,
    pub swapped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainReport {
    pub directions: Vec<DirectionReport>,
}

impl RetrainReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for d in &self.directions {
            let fmt = |b: Option<f64>| b.map_or("n/a".to_string(), |b| format!("{b:.2}"));
            out.push_str(&format!(
                "{}: before {} after {} corrections {}x{} {}\n",
                d.direction,
                fmt(d.bleu_before),
                fmt(d.bleu_after),
                d.corrections_used,
                d.repeat_factor,
                match (&d.error, d.swapped) {
                    (Some(e), _) => format!("failed: {e}"),
                    (None, true) => "swapped".to_string(),
                    (None, false) => "kept old model".to_string(),
                }
            ));
        }
        out
    }
}

pub struct RetrainedModel {
    pub direction: Direction,
    pub model: SmtModel,
    pub qe: Option<GbtModel>,
}

pub struct RetrainOutcome {
    pub report: RetrainReport,
    /// Only directions whose new model passed the swap guard.
    pub accepted: Vec<RetrainedModel>,
}

fn train_and_score(corpus: &ParallelCorpus, dev: &ParallelCorpus, config: &RetrainConfig) -> Result<(SmtModel, f64)> {
    let mut model = train_smt(corpus, &config.smt)?;
    model.weights = config.weights;
    let bleu = dev_bleu(dev, model.tables(), &model.weights, config.decode)?;
    Ok((model, bleu))
}

fn retrain_direction(
    direction: Direction,
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    corrections: &ParallelCorpus,
    config: &RetrainConfig,
) -> (DirectionReport, Option<RetrainedModel>) {
    let mut report = DirectionReport {
        direction,
        bleu_before: None,
        bleu_after: None,
        corrections_used: corrections.len(),
        repeat_factor: config.repeat,
        swapped: false,
        error: None,
    };
    let train = train.oriented(direction);
    let dev = dev.oriented(direction);
    let attempt = (|| -> Result<Option<RetrainedModel>> {
        let merged = merge_corrections(&train, corrections, config.repeat)?;
        let (_, before) = train_and_score(&train, &dev, config)?;
        report.bleu_before = Some(before);
        let (model, after) = train_and_score(&merged, &dev, config)?;
        report.bleu_after = Some(after);
        if after < before - SWAP_TOLERANCE {
            return Ok(None);
        }
        let qe = match config.qe {
            Some(q) => {
                let pipeline = SmtFoldPipeline {
                    config: config.smt,
                    weights: config.weights,
                    decode: config.decode,
                };
                let data = build_kfold_dataset(&merged, q.k, q.seed, &pipeline)?;
                Some(gbt_train(&data, q.params)?)
            }
            None => None,
        };
        Ok(Some(RetrainedModel { direction, model, qe }))
    })();
    match attempt {
        Ok(accepted) => {
            report.swapped = accepted.is_some();
            (report, accepted)
        }
        Err(e) => {
            report.error = Some(e.to_string());
            (report, None)
        }
    }
}

/// Train a model on `train` and one on `train` plus corrections for each
/// configured direction, score both on `dev`, and accept the new model when
/// it passes the swap guard. Per-direction training failures are reported,
/// not returned.
pub fn retrain(
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    corrections: &ParallelCorpus,
    config: &RetrainConfig,
) -> Result<RetrainOutcome> {
    dev.ensure_non_empty()?;
    if !ALLOWED_REPEATS.contains(&config.repeat) {
        return Err(Error::invalid(format!("repeat factor must be one of {ALLOWED_REPEATS:?}")));
    }
    let (train, dev, corrections) = match &config.archaic {
        Some(map) => (
            normalize_corpus(train, map)?,
            normalize_corpus(dev, map)?,
            normalize_corpus(corrections, map)?,
        ),
        None => (train.clone(), dev.clone(), corrections.clone()),
    };
    let mut reports = Vec::new();
    let mut accepted = Vec::new();
    for &direction in &config.directions {
        let (report, model) = retrain_direction(direction, &train, &dev, &corrections.oriented(direction), config);
        reports.push(report);
        accepted.extend(model);
    }
    Ok(RetrainOutcome {
        report: RetrainReport { directions: reports },
        accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(pairs: &[(&str, &str)]) -> ParallelCorpus {
        ParallelCorpus::new(
            Direction::ChrEn,
            pairs.iter().map(|(s, t)| SentencePair::from_text(s, t).unwrap()).collect(),
        )
    }

    #[test]
    fn archaic_examples() {
        let map = ArchaicMap::default();
        assert_eq!(normalize_archaic("where art thou", &map), "where art you");
        assert_eq!(normalize_archaic("Thy word", &map), "Your word");
        assert_eq!(normalize_archaic("thousand", &map), "thousand");
        assert_eq!(normalize_archaic("THOU, thy!", &map), "You, your!");
    }

    #[test]
    fn archaic_map_rejects_cycles_and_case() {
        let pair = |a: &str, b: &str| (a.to_string(), b.to_string());
        assert!(ArchaicMap::new(vec![pair("thy", "thou"), pair("thou", "you")]).is_err());
        assert!(ArchaicMap::new(vec![pair("Thy", "your")]).is_err());
        let map = ArchaicMap::parse("# comment\nspeaketh speaks\nye you all\n", Path::new("m")).unwrap();
        assert_eq!(normalize_archaic("Ye speaketh", &map), "You all speaks");
        assert_eq!(normalize_archaic("anything", &ArchaicMap::new(vec![]).unwrap()), "anything");
    }

    #[test]
    fn merge_sizes() {
        let train = corpus(&[("a", "x"), ("b", "y"), ("c", "z")]);
        let corr = corpus(&[("a b", "x y")]);
        for r in ALLOWED_REPEATS {
            assert_eq!(merge_corrections(&train, &corr, r).unwrap().len(), 3 + r);
        }
        assert!(merge_corrections(&train, &corr, 2).is_err());
        let reversed = merge_corrections(&train.reversed(), &corr, 1).unwrap();
        assert_eq!(reversed.pairs[3].source.join(), "x y");
    }

    #[test]
    fn serving_slot_swaps_atomically() {
        let slot = ServingSlot::new(1);
        let held = slot.get();
        let old = slot.replace(2);
        assert_eq!((*held, *old, *slot.get()), (1, 1, 2));
    }

    #[test]
    fn empty_corrections_give_identical_scores() {
        let train = corpus(&[("a b", "x y"), ("a c", "x z"), ("b c", "y z"), ("c", "z")]);
        let dev = corpus(&[("a b c", "x y z")]);
        let empty = ParallelCorpus::new(Direction::ChrEn, vec![]);
        let out = retrain(&train, &dev, &empty, &RetrainConfig::default()).unwrap();
        for d in &out.report.directions {
            assert_eq!(d.bleu_before, d.bleu_after);
            assert!(d.swapped);
        }
        assert_eq!(out.accepted.len(), 2);
    }

    #[test]
    fn training_failure_is_reported() {
        let empty = ParallelCorpus::new(Direction::ChrEn, vec![]);
        let dev = corpus(&[("a", "x")]);
        let out = retrain(&empty, &dev, &empty, &RetrainConfig::default()).unwrap();
        assert!(out.report.directions.iter().all(|d| d.error.is_some() && !d.swapped));
        assert!(out.accepted.is_empty());
        assert!(retrain(&empty, &empty, &empty, &RetrainConfig::default()).is_err());
    }
}
