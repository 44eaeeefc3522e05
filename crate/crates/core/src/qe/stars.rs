use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmt::NmtHypothesis;
use crate::textmetrics::{pearson, PearsonResult};

/// A 0-5 star rating; `clipped` is set when the input was outside its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarRating {
    pub stars: f64,
    pub clipped: bool,
}

/// Predicted BLEU divided by 20, after clipping to [0, 100].
pub fn stars_from_bleu(predicted: f64) -> StarRating {
    let clamped = if predicted.is_nan() { 0.0 } else { predicted.clamp(0.0, 100.0) };
    StarRating {
        stars: clamped / 20.0,
        clipped: clamped != predicted,
    }
}

/// Five times the length-normalized sequence probability.
pub fn stars_from_prob(h: &NmtHypothesis) -> Result<f64> {
    if h.token_logprobs.is_empty() {
        return Err(Error::ZeroLengthHypothesis);
    }
    let mean = h.logprob() / h.token_logprobs.len() as f64;
    Ok((5.0 * mean.exp()).clamp(0.0, 5.0))
}

/// Pearson correlation between QE predictions and gold scores.
pub fn evaluate_qe(predictions: &[f64], gold: &[f64]) -> Result<PearsonResult> {
    pearson(predictions, gold)
}
