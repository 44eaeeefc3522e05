use std::sync::Arc;

use super::{Decoder, StepAttention, StepDistribution};
use crate::error::{Error, Result};

/// Per-step probability-space average of several decoders.
#[derive(Clone)]
pub struct Ensemble {
    members: Vec<Arc<dyn Decoder>>,
}

impl std::fmt::Debug for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ensemble").field("members", &self.members.len()).finish()
    }
}

impl Ensemble {
    pub fn new(members: Vec<Arc<dyn Decoder>>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::invalid("ensemble needs at least one member"))?;
        if members
            .iter()
            .any(|m| m.vocabulary() != first.vocabulary() || m.eos() != first.eos())
        {
            return Err(Error::VocabularyMismatch);
        }
        Ok(Ensemble { members })
    }

    pub fn members(&self) -> &[Arc<dyn Decoder>] {
        &self.members
    }
}

impl Decoder for Ensemble {
    fn vocabulary(&self) -> &[String] {
        self.members[0].vocabulary()
    }

    fn eos(&self) -> &str {
        self.members[0].eos()
    }

    fn step(&self, source: &[String], prefix: &[String]) -> StepDistribution {
        if self.members.len() == 1 {
            return self.members[0].step(source, prefix);
        }
        let steps: Vec<StepDistribution> = self.members.iter().map(|m| m.step(source, prefix)).collect();
        let k = steps.len() as f64;
        let v = steps[0].probabilities.len();
        let mut probabilities: Vec<f64> = (0..v).map(|i| steps.iter().map(|s| s.probabilities[i]).sum::<f64>() / k).collect();
        let total: f64 = probabilities.iter().sum();
        probabilities.iter_mut().for_each(|p| *p /= total);
        let mean = |rows: Vec<&[f64]>| -> Vec<f64> {
            (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect()
        };
        let attention = if steps.iter().all(|s| matches!(s.attention, StepAttention::Shared(_))) {
            StepAttention::Shared(mean(steps.iter().map(|s| s.attention_for(0)).collect()))
        } else {
            StepAttention::PerToken((0..v).map(|t| mean(steps.iter().map(|s| s.attention_for(t)).collect())).collect())
        };
        StepDistribution {
            probabilities,
            attention,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed {
        vocab: Vec<String>,
        probs: Vec<f64>,
        row: Vec<f64>,
    }

    impl Decoder for Fixed {
        fn vocabulary(&self) -> &[String] {
            &self.vocab
        }
        fn eos(&self) -> &str {
            "</s>"
        }
        fn step(&self, _: &[String], _: &[String]) -> StepDistribution {
            StepDistribution {
                probabilities: self.probs.clone(),
                attention: StepAttention::Shared(self.row.clone()),
            }
        }
    }

    fn fixed(vocab: &[&str], probs: &[f64], row: &[f64]) -> Arc<dyn Decoder> {
        Arc::new(Fixed {
            vocab: vocab.iter().map(|w| w.to_string()).collect(),
            probs: probs.to_vec(),
            row: row.to_vec(),
        })
    }

    #[test]
    fn averages_two_members() {
        let e = Ensemble::new(vec![
            fixed(&["</s>", "a"], &[0.8, 0.2], &[1.0, 0.0]),
            fixed(&["</s>", "a"], &[0.4, 0.6], &[0.0, 1.0]),
        ])
        .unwrap();
        let step = e.step(&[], &[]);
        assert!((step.probabilities[0] - 0.6).abs() < 1e-15);
        assert!((step.probabilities[1] - 0.4).abs() < 1e-15);
        assert_eq!(step.attention, StepAttention::Shared(vec![0.5, 0.5]));
    }

    #[test]
    fn vocabulary_mismatch_is_an_error() {
        let err = Ensemble::new(vec![
            fixed(&["</s>", "a"], &[0.5, 0.5], &[1.0]),
            fixed(&["</s>", "b"], &[0.5, 0.5], &[1.0]),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::VocabularyMismatch));
        assert!(Ensemble::new(vec![]).is_err());
    }
}
