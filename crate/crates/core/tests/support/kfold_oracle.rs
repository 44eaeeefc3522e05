//! A fold pipeline whose "model" is the set of sources it was trained on,
//! so any row translated by a model that saw it is flagged in feature 0.

use std::collections::HashSet;

use mtloop_core::corpus::{Direction, ParallelCorpus, SentencePair};
use mtloop_core::qe::{build_kfold_dataset, fold_assignment, FeatureKind, FeatureVector, FoldPipeline};
use mtloop_core::textmetrics::TokenSeq;
use mtloop_core::Result;

pub struct Recorder;

impl FoldPipeline for Recorder {
    type Model = HashSet<String>;

    fn kind(&self) -> FeatureKind {
        FeatureKind::Nmt
    }

    fn train(&self, corpus: &ParallelCorpus) -> Result<HashSet<String>> {
        Ok(corpus.sources().map(|s| s.join()).collect())
    }

    fn translate(&self, model: &HashSet<String>, source: &TokenSeq) -> Result<(TokenSeq, FeatureVector)> {
        let seen = f64::from(u8::from(model.contains(&source.join())));
        let features = FeatureVector::new(FeatureKind::Nmt, vec![seen, model.len() as f64, 0.0, 0.0, 0.0, 0.0])?;
        Ok((source.clone(), features))
    }
}

pub fn numbered(n: usize) -> ParallelCorpus {
    let pairs = (0..n)
        .map(|i| SentencePair::from_text(&format!("s{i}"), &format!("t{i}")).unwrap())
        .collect();
    ParallelCorpus::new(Direction::ChrEn, pairs)
}

/// Folds are disjoint, exhaustive and balanced, and every row was
/// translated by the model trained on the other folds.
pub fn check_partition(n: usize, k: usize, seed: u64) {
    let folds = fold_assignment(n, k, seed).unwrap();
    assert_eq!(folds.len(), k);
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
    assert!(hi - lo <= 1, "n={n} k={k} sizes {sizes:?}");
    let mut all: Vec<usize> = folds.concat();
    all.sort_unstable();
    assert_eq!(all, (0..n).collect::<Vec<_>>(), "n={n} k={k}");

    let data = build_kfold_dataset(&numbered(n), k, seed, &Recorder).unwrap();
    assert_eq!(data.rows.len(), n);
    for row in &data.rows {
        assert_eq!(row.features[0], 0.0, "row {} translated by a model that saw it", row.index);
        assert_eq!(row.features[1] as usize, n - folds[row.fold].len());
        assert!(folds[row.fold].contains(&row.index));
    }
}
