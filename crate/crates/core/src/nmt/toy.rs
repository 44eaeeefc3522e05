use std::path::Path;

use super::{Decoder, StepAttention, StepDistribution, EOS};
use crate::error::{Error, Result};
use crate::smt::LexicalTable;

/// Initial attention weight of source position `j` is `POSITION_PRIOR^j`.
const POSITION_PRIOR: f64 = 0.95;
/// Weight multiplier applied to a position each time it is the attention argmax.
const COVERAGE_DECAY: f64 = 0.5;
/// Slope of the logistic end-of-sequence rule.
const STOP_SLOPE: f64 = 4.0;

/// Lexical decoder: the next-token distribution mixes the lexical rows of the
/// source words, weighted by coverage that decays as words get attended.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDecoder {
    lex: LexicalTable,
    vocabulary: Vec<String>,
    eos_index: usize,
    /// Vocabulary indices of every token except the end-of-sequence symbol.
    words: Vec<usize>,
}

impl ToyDecoder {
    /// `lex` holds `t(target | source)`.
    pub fn new(lex: LexicalTable) -> Result<Self> {
        let vocabulary = lex.target_vocabulary();
        Self::with_vocabulary(lex, &vocabulary)
    }

    /// Decoder over an explicit target vocabulary; words the table never
    /// produces get the lexical floor probability.
    pub fn with_vocabulary(lex: LexicalTable, vocabulary: &[String]) -> Result<Self> {
        let mut vocabulary = vocabulary.to_vec();
        vocabulary.sort();
        vocabulary.dedup();
        if vocabulary.is_empty() {
            return Err(Error::invalid("lexical table has no target words"));
        }
        if vocabulary.iter().any(|w| w == EOS) {
            return Err(Error::invalid("lexical table contains the end-of-sequence symbol"));
        }
        vocabulary.push(EOS.to_owned());
        vocabulary.sort();
        let eos_index = vocabulary.iter().position(|w| w == EOS).expect("just inserted");
        let words = (0..vocabulary.len()).filter(|&i| i != eos_index).collect();
        Ok(ToyDecoder {
            lex,
            vocabulary,
            eos_index,
            words,
        })
    }

    pub fn lexical_table(&self) -> &LexicalTable {
        &self.lex
    }

    pub fn load(path: &Path, vocabulary: &[String]) -> Result<Self> {
        Self::with_vocabulary(LexicalTable::load(path)?, vocabulary)
    }

    /// Target vocabulary without the end-of-sequence symbol.
    pub fn target_words(&self) -> Vec<String> {
        self.words.iter().map(|&i| self.vocabulary[i].clone()).collect()
    }

    fn t(&self, target: &str, source: &str) -> f64 {
        if self.lex.contains_source(source) {
            self.lex.prob(target, source)
        } else {
            1.0 / self.words.len() as f64
        }
    }

    /// Coverage weights after replaying `prefix`, with the attention row of
    /// every replayed token.
    pub fn replay(&self, source: &[String], prefix: &[String]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut coverage: Vec<f64> = (0..source.len()).map(|j| POSITION_PRIOR.powi(j as i32)).collect();
        let mut rows = Vec::with_capacity(prefix.len());
        for y in prefix {
            let mass: Vec<f64> = source.iter().zip(&coverage).map(|(x, c)| c * self.t(y, x)).collect();
            let total: f64 = mass.iter().sum();
            let mut argmax = 0;
            for (j, &m) in mass.iter().enumerate() {
                if m > mass[argmax] {
                    argmax = j;
                }
            }
            rows.push(mass.iter().map(|m| m / total).collect());
            coverage[argmax] *= COVERAGE_DECAY;
        }
        (coverage, rows)
    }

    /// Probability of stopping after `prefix_len` tokens of an `source_len`-token source.
    pub fn stop_probability(prefix_len: usize, source_len: usize) -> f64 {
        let z = STOP_SLOPE * (prefix_len as f64 - source_len as f64 + 0.5);
        1.0 / (1.0 + (-z).exp())
    }
}

impl Decoder for ToyDecoder {
    fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    fn eos(&self) -> &str {
        EOS
    }

    fn eos_index(&self) -> usize {
        self.eos_index
    }

    fn step(&self, source: &[String], prefix: &[String]) -> StepDistribution {
        let (coverage, _) = self.replay(source, prefix);
        let coverage_total: f64 = coverage.iter().sum();
        let p_stop = Self::stop_probability(prefix.len(), source.len());
        let mut probabilities = vec![0.0; self.vocabulary.len()];
        let mut rows = vec![Vec::new(); self.vocabulary.len()];
        let mut total = 0.0;
        for &v in &self.words {
            let word = &self.vocabulary[v];
            let mass: Vec<f64> = source.iter().zip(&coverage).map(|(x, c)| c * self.t(word, x)).collect();
            let m: f64 = mass.iter().sum();
            rows[v] = mass.iter().map(|x| x / m).collect();
            probabilities[v] = m;
            total += m;
        }
        for &v in &self.words {
            probabilities[v] = (1.0 - p_stop) * probabilities[v] / total;
        }
        probabilities[self.eos_index] = p_stop;
        rows[self.eos_index] = coverage.iter().map(|c| c / coverage_total).collect();
        StepDistribution {
            probabilities,
            attention: StepAttention::PerToken(rows),
        }
    }
}
