//! Seeded synthetic parallel data: a random syllabary/Latin lexicon with
//! Zipfian word frequencies, multi-word renderings, synonyms, inserted
//! function words and local reordering. Used for demos and end-to-end tests.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Direction, Language, ParallelCorpus, SentencePair};
use crate::dictionary::DictEntry;
use crate::error::{Error, Result};
use crate::textmetrics::TokenSeq;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub concepts: usize,
    pub zipf_exponent: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of swapping each adjacent pair on the English side.
    pub reorder_prob: f64,
    /// Fraction of concepts with a second English rendering.
    pub synonym_fraction: f64,
    /// Fraction of concepts rendered as two English words.
    pub multiword_fraction: f64,
    /// Probability of inserting an unaligned article before a word.
    pub article_prob: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 2024,
            concepts: 2500,
            zipf_exponent: 1.0,
            min_len: 2,
            max_len: 7,
            reorder_prob: 0.1,
            synonym_fraction: 0.05,
            multiword_fraction: 0.2,
            article_prob: 0.05,
        }
    }
}

impl SyntheticConfig {
    fn validate(&self) -> Result<()> {
        if self.concepts == 0 {
            return Err(Error::invalid("at least one concept is required"));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::invalid("sentence lengths must satisfy 1 <= min <= max"));
        }
        let probs = [self.reorder_prob, self.synonym_fraction, self.multiword_fraction, self.article_prob];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return Err(Error::invalid("zipf exponent must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub cherokee: String,
    /// First rendering is the primary one.
    pub english: Vec<Vec<String>>,
}

const ARTICLES: [&str; 2] = ["the", "a"];
const ONSETS: [&str; 14] = ["b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "w"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];

/// Unique random word built from `parts`, between two and three parts long.
fn fresh_word(rng: &mut ChaCha8Rng, seen: &mut HashSet<String>, mut part: impl FnMut(&mut ChaCha8Rng) -> String) -> String {
    loop {
        let n = rng.gen_range(2..=3);
        let word: String = (0..n).map(|_| part(rng)).collect();
        if seen.insert(word.clone()) {
            return word;
        }
    }
}

pub struct SyntheticLexicon {
    config: SyntheticConfig,
    concepts: Vec<Concept>,
    weights: WeightedIndex<f64>,
}

impl SyntheticLexicon {
    pub fn generate(config: SyntheticConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut seen_chr = HashSet::new();
        let mut seen_en: HashSet<String> = ARTICLES.iter().map(|s| s.to_string()).collect();
        let syllable = |rng: &mut ChaCha8Rng| char::from_u32(rng.gen_range(0x13A0..=0x13F4)).expect("syllabary").to_string();
        let latin = |rng: &mut ChaCha8Rng| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap());
        let mut concepts = Vec::with_capacity(config.concepts);
        for _ in 0..config.concepts {
            let cherokee = fresh_word(&mut rng, &mut seen_chr, syllable);
            let renderings = if rng.gen_bool(config.synonym_fraction) { 2 } else { 1 };
            let mut english = Vec::with_capacity(renderings);
            for _ in 0..renderings {
                let words = if rng.gen_bool(config.multiword_fraction) { 2 } else { 1 };
                english.push((0..words).map(|_| fresh_word(&mut rng, &mut seen_en, latin)).collect());
            }
            concepts.push(Concept { cherokee, english });
        }
        let ranks = (1..=config.concepts).map(|r| (r as f64).powf(-config.zipf_exponent));
        let weights = WeightedIndex::new(ranks).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(SyntheticLexicon {
            config,
            concepts,
            weights,
        })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> SentencePair {
        let len = rng.gen_range(self.config.min_len..=self.config.max_len);
        let picked: Vec<&Concept> = (0..len).map(|_| &self.concepts[self.weights.sample(rng)]).collect();
        let mut chunks: Vec<Vec<String>> = picked
            .iter()
            .map(|c| {
                // synonyms are the minority rendering
                let r = if c.english.len() > 1 && rng.gen_bool(0.3) { 1 } else { 0 };
                let mut chunk = Vec::new();
                if rng.gen_bool(self.config.article_prob) {
                    chunk.push(ARTICLES.choose(rng).unwrap().to_string());
                }
                chunk.extend(c.english[r].iter().cloned());
                chunk
            })
            .collect();
        let mut i = 0;
        while i + 1 < chunks.len() {
            if rng.gen_bool(self.config.reorder_prob) {
                chunks.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
        let source = TokenSeq::new(picked.iter().map(|c| c.cherokee.clone()).collect()).expect("generated tokens are clean");
        let target = TokenSeq::new(chunks.into_iter().flatten().collect()).expect("generated tokens are clean");
        SentencePair::new(source, target).expect("both sides non-empty")
    }

    /// `n` Cherokee to English pairs; the same seed and `n` always give the
    /// same corpus, and a longer corpus extends a shorter one.
    pub fn corpus(&self, n: usize) -> ParallelCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x5EED);
        ParallelCorpus::new(Direction::ChrEn, (0..n).map(|_| self.sentence(&mut rng)).collect())
    }

    /// Both directions of every concept's renderings.
    pub fn dictionary(&self) -> Vec<DictEntry> {
        let mut out = Vec::new();
        for c in &self.concepts {
            let glosses: Vec<String> = c.english.iter().map(|e| e.join(" ")).collect();
            out.push(DictEntry {
                headword: c.cherokee.clone(),
                language: Language::Chr,
                gloss: glosses.join("; "),
                notes: None,
            });
            for g in glosses {
                out.push(DictEntry {
                    headword: g,
                    language: Language::En,
                    gloss: c.cherokee.clone(),
                    notes: None,
                });
            }
        }
        out
    }
}

/// Convenience wrapper: generate a lexicon and draw `n` pairs from it.
pub fn synthetic_corpus(n: usize, config: &SyntheticConfig) -> Result<ParallelCorpus> {
    Ok(SyntheticLexicon::generate(config.clone())?.corpus(n))
}
