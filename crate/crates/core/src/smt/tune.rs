//! Coordinate line search over decoding weights, maximizing dev corpus BLEU.

use rayon::prelude::*;

use super::decoder::{decode, DecodeOptions, DecoderTables, SmtWeights};
use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};
use crate::textmetrics::{corpus_bleu, TokenSeq};

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    /// Candidate values tried for each weight.
    pub grid: Vec<f64>,
    pub sweeps: usize,
    pub decode: DecodeOptions,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            grid: (0..21).map(|i| -1.0 + 0.1 * i as f64).collect(),
            sweeps: 3,
            decode: DecodeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub weights: SmtWeights,
    pub bleu_before: f64,
    pub bleu_after: f64,
}

/// Decode every dev source and return the corpus BLEU against the dev targets.
pub fn dev_bleu(dev: &ParallelCorpus, tables: DecoderTables<'_>, weights: &SmtWeights, options: DecodeOptions) -> Result<f64> {
    dev.ensure_non_empty()?;
    let hyps: Vec<TokenSeq> = dev
        .pairs
        .par_iter()
        .map(|pair| decode(&pair.source, tables, weights, options).map(|h| h.target))
        .collect::<Result<_>>()?;
    let refs: Vec<&TokenSeq> = dev.targets().collect();
    Ok(corpus_bleu(&hyps, &refs)?.value)
}

/// Greedy coordinate ascent: for each weight in turn, try every grid value
/// and keep it only if dev BLEU strictly improves.
pub fn tune_weights(
    dev: &ParallelCorpus,
    tables: DecoderTables<'_>,
    initial: &SmtWeights,
    config: &TuneConfig,
) -> Result<TuneReport> {
    if config.grid.is_empty() {
        return Err(Error::invalid("empty tuning grid"));
    }
    if config.grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("tuning grid values must be finite"));
    }
    initial.validate()?;
    let bleu_before = dev_bleu(dev, tables, initial, config.decode)?;
    let mut best = initial.to_array();
    let mut best_bleu = bleu_before;
    for _ in 0..config.sweeps {
        let mut improved = false;
        for coord in 0..SmtWeights::DIM {
            for &value in &config.grid {
                if value == best[coord] {
                    continue;
                }
                let mut candidate = best;
                candidate[coord] = value;
                if candidate.iter().all(|&w| w == 0.0) {
                    continue;
                }
                let bleu = dev_bleu(dev, tables, &SmtWeights::from_array(candidate), config.decode)?;
                if bleu > best_bleu {
                    best = candidate;
                    best_bleu = bleu;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(TuneReport {
        weights: SmtWeights::from_array(best),
        bleu_before,
        bleu_after: best_bleu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Direction, SentencePair};
    use crate::smt::lm::{train_lm, NGramLm};
    use crate::smt::phrase_table::{PhraseTable, ReorderingTable};

    fn v(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn setup() -> (PhraseTable, ReorderingTable, NGramLm) {
        let mut pt = PhraseTable::new();
        // corpus BLEU needs at least four tokens to be nonzero
        pt.insert(v("a"), v("x x x x"), [1.0; 4], vec![]);
        pt.insert(v("a"), v("y z y z y"), [1.0; 4], vec![]);
        let lm = train_lm(&[v("x x x x"), v("y z y z y")], 3, 0.75).unwrap();
        (pt, ReorderingTable::default(), lm)
    }

    fn dev(target: &str) -> ParallelCorpus {
        ParallelCorpus::new(Direction::ChrEn, vec![SentencePair::from_text("a", target).unwrap()])
    }

    #[test]
    fn picks_the_word_penalty_sign_that_wins() {
        let (pt, rt, lm) = setup();
        let tables = DecoderTables {
            phrases: &pt,
            reordering: &rt,
            lm: &lm,
        };
        // only the word penalty is active: +1 prefers the shorter output
        let initial = SmtWeights::from_array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let config = TuneConfig {
            grid: vec![-1.0, 1.0],
            ..TuneConfig::default()
        };
        let report = tune_weights(&dev("y z y z y"), tables, &initial, &config).unwrap();
        assert!(report.bleu_before < 10.0);
        assert_eq!(report.bleu_after, 100.0);
        // the first sign flip that selects the longer output is kept
        let flipped = report.weights.to_array();
        assert!(flipped.iter().any(|&w| w == -1.0));
        assert_eq!(dev_bleu(&dev("y z y z y"), tables, &report.weights, config.decode).unwrap(), 100.0);
    }

    #[test]
    fn perfect_dev_keeps_initial_weights() {
        let (pt, rt, lm) = setup();
        let tables = DecoderTables {
            phrases: &pt,
            reordering: &rt,
            lm: &lm,
        };
        let initial = SmtWeights::from_array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let report = tune_weights(&dev("x x x x"), tables, &initial, &TuneConfig::default()).unwrap();
        assert_eq!(report.weights, initial);
        assert_eq!(report.bleu_after, 100.0);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let (pt, rt, lm) = setup();
        let tables = DecoderTables {
            phrases: &pt,
            reordering: &rt,
            lm: &lm,
        };
        let config = TuneConfig {
            grid: vec![],
            ..TuneConfig::default()
        };
        assert!(tune_weights(&dev("x"), tables, &SmtWeights::default(), &config).is_err());
    }
}
