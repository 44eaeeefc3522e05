use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::Decoder;
use crate::error::{Error, Result};
use crate::textmetrics::TokenSeq;

pub const DEFAULT_NMT_BEAM: usize = 5;

/// Maximum number of emitted symbols (end-of-sequence included) for a
/// source of `source_len` tokens.
pub fn default_max_len(source_len: usize) -> usize {
    2 * source_len + 5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmtHypothesis {
    pub target: TokenSeq,
    /// One natural-log probability per target token; the end-of-sequence
    /// step is kept separately.
    pub token_logprobs: Vec<f64>,
    /// One row per target token over the source positions.
    pub attention: Vec<Vec<f64>>,
    /// Log-probability of the end-of-sequence step, absent when truncated.
    pub eos_logprob: Option<f64>,
    pub truncated: bool,
}

impl NmtHypothesis {
    /// Sum of the target token log-probabilities.
    pub fn logprob(&self) -> f64 {
        self.token_logprobs.iter().sum()
    }

    /// The score beam search maximizes: token log-probabilities plus the
    /// end-of-sequence step.
    pub fn search_score(&self) -> f64 {
        self.logprob() + self.eos_logprob.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
struct Beam {
    score: f64,
    tokens: Vec<String>,
    logprobs: Vec<f64>,
    attention: Vec<Vec<f64>>,
    eos_logprob: Option<f64>,
}

fn rank(a: &Beam, b: &Beam) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search without length normalization. Each step ranks every
/// expansion of the live hypotheses; end-of-sequence expansions ranked in the
/// top `beam` move to the finished list, and the `beam` best other
/// expansions stay live. The search stops once
/// no live hypothesis can beat the best finished one. The end-of-sequence
/// symbol is not allowed as the first step.
pub fn beam_search(decoder: &dyn Decoder, source: &[String], beam: usize, max_len: usize) -> Result<NmtHypothesis> {
    if beam == 0 {
        return Err(Error::invalid("beam must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    if source.is_empty() {
        return Err(Error::invalid("empty source sentence"));
    }
    let vocab = decoder.vocabulary();
    let eos = decoder.eos_index();
    let mut live = vec![Beam {
        score: 0.0,
        tokens: Vec::new(),
        logprobs: Vec::new(),
        attention: Vec::new(),
        eos_logprob: None,
    }];
    let mut finished: Vec<Beam> = Vec::new();
    for _ in 0..max_len {
        let mut candidates = Vec::with_capacity(live.len() * vocab.len());
        for hyp in &live {
            let step = decoder.step(source, &hyp.tokens);
            for (v, &p) in step.probabilities.iter().enumerate() {
                if v == eos && hyp.tokens.is_empty() {
                    continue;
                }
                let lp = p.ln();
                let mut next = Beam {
                    score: hyp.score + lp,
                    tokens: hyp.tokens.clone(),
                    logprobs: hyp.logprobs.clone(),
                    attention: hyp.attention.clone(),
                    eos_logprob: None,
                };
                if v == eos {
                    next.eos_logprob = Some(lp);
                } else {
                    next.tokens.push(vocab[v].clone());
                    next.logprobs.push(lp);
                    next.attention.push(step.attention_for(v).to_vec());
                }
                candidates.push(next);
            }
        }
        candidates.sort_by(rank);
        live.clear();
        for (position, c) in candidates.into_iter().enumerate() {
            if c.eos_logprob.is_some() {
                if position < beam {
                    finished.push(c);
                }
            } else if live.len() < beam {
                live.push(c);
            }
        }
        finished.sort_by(rank);
        let best_finished = finished.first().map(|b| b.score);
        let best_live = live.first().map(|b| b.score);
        match (best_finished, best_live) {
            (_, None) => break,
            (Some(f), Some(l)) if f >= l => break,
            _ => {}
        }
    }
    let (best, truncated) = match finished.into_iter().next() {
        Some(b) => (b, false),
        None => {
            live.sort_by(rank);
            (live.into_iter().next().expect("at least one live hypothesis"), true)
        }
    };
    Ok(NmtHypothesis {
        target: TokenSeq::new(best.tokens)?,
        token_logprobs: best.logprobs,
        attention: best.attention,
        eos_logprob: best.eos_logprob,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nmt::{StepAttention, StepDistribution, ToyDecoder};
    use crate::smt::LexicalTable;

    fn s(words: &str) -> Vec<String> {
        words.split_whitespace().map(str::to_owned).collect()
    }

    /// Emits "b a" then stops, with probability one at every step.
    struct Scripted {
        vocab: Vec<String>,
        script: Vec<usize>,
    }

    impl Decoder for Scripted {
        fn vocabulary(&self) -> &[String] {
            &self.vocab
        }
        fn eos(&self) -> &str {
            "</s>"
        }
        fn step(&self, source: &[String], prefix: &[String]) -> StepDistribution {
            let mut p = vec![1e-12; self.vocab.len()];
            let pick = self.script.get(prefix.len()).copied().unwrap_or(0);
            p[pick] = 1.0 - 1e-12 * (self.vocab.len() - 1) as f64;
            StepDistribution {
                probabilities: p,
                attention: StepAttention::Shared(vec![1.0 / source.len() as f64; source.len()]),
            }
        }
    }

    #[test]
    fn one_hot_decoder_same_for_any_beam() {
        let d = Scripted {
            vocab: s("</s> a b"),
            script: vec![2, 1, 0],
        };
        let narrow = beam_search(&d, &s("q r"), 1, 10).unwrap();
        let wide = beam_search(&d, &s("q r"), 5, 10).unwrap();
        assert_eq!(narrow, wide);
        assert_eq!(narrow.target.join(), "b a");
        assert!(!narrow.truncated);
        assert_eq!(narrow.attention, vec![vec![0.5, 0.5]; 2]);
    }

    #[test]
    fn never_stopping_decoder_is_truncated() {
        let d = Scripted {
            vocab: s("</s> a b"),
            script: vec![1; 100],
        };
        let h = beam_search(&d, &s("q"), 1, 4).unwrap();
        assert!(h.truncated);
        assert_eq!(h.target.len(), 4);
        assert_eq!(h.eos_logprob, None);
    }

    #[test]
    fn beam_one_is_greedy() {
        let lex = LexicalTable::from_rows([
            ("a", vec![("x", 0.6), ("y", 0.3), ("z", 0.1)]),
            ("b", vec![("x", 0.2), ("y", 0.5), ("z", 0.3)]),
        ])
        .unwrap();
        let d = ToyDecoder::new(lex).unwrap();
        let src = s("a b");
        let h = beam_search(&d, &src, 1, default_max_len(2)).unwrap();
        let mut prefix: Vec<String> = Vec::new();
        loop {
            let step = d.step(&src, &prefix);
            let mut best = None;
            for (v, &p) in step.probabilities.iter().enumerate() {
                if v == d.eos_index() && prefix.is_empty() {
                    continue;
                }
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((v, p));
                }
            }
            let (v, _) = best.unwrap();
            if v == d.eos_index() {
                break;
            }
            prefix.push(d.vocabulary()[v].clone());
        }
        assert_eq!(h.target.to_vec(), prefix);
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = Scripted {
            vocab: s("</s> a"),
            script: vec![],
        };
        assert!(beam_search(&d, &s("q"), 0, 3).is_err());
        assert!(beam_search(&d, &s("q"), 1, 0).is_err());
        assert!(beam_search(&d, &[], 1, 3).is_err());
    }
}
