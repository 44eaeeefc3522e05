//! Cross-validated proxy labels: every pair is translated by a model trained
//! on the other folds and labelled with its sentence BLEU.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nmt_features, smt_features, FeatureKind, FeatureVector};
use crate::corpus::{Direction, ParallelCorpus};
use crate::error::{Error, Result};
use crate::nmt::{train_nmt, NmtModel, NmtTrainConfig, DEFAULT_NMT_BEAM};
use crate::smt::{train_smt, DecodeOptions, SmtModel, SmtTrainConfig, SmtWeights};
use crate::textmetrics::{sentence_bleu, TokenSeq};

const DATASET_FORMAT: &str = "mtloop-qe-data/1";
pub const DEFAULT_FOLD_SEED: u64 = 17;

/// Shuffle `0..n` with a seeded generator and cut it into `k` contiguous
/// folds; the first `n % k` folds get one extra index. With `k > n` the
/// trailing folds are empty.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (size, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = size + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

/// Trains a translation model and featurizes its output.
pub trait FoldPipeline: Sync {
    type Model: Send + Sync;

    fn kind(&self) -> FeatureKind;

    fn train(&self, corpus: &ParallelCorpus) -> Result<Self::Model>;

    /// Translate one source sentence, returning the output and its features.
    fn translate(&self, model: &Self::Model, source: &TokenSeq) -> Result<(TokenSeq, FeatureVector)>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeRow {
    /// Position of the pair in the source corpus.
    pub index: usize,
    pub fold: usize,
    pub features: Vec<f64>,
    /// Smoothed sentence BLEU of the output against the reference.
    pub bleu: f64,
    pub hypothesis: TokenSeq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeDataset {
    pub format: String,
    pub kind: FeatureKind,
    pub direction: Direction,
    pub k: usize,
    pub seed: u64,
    pub rows: Vec<QeRow>,
}

impl QeDataset {
    pub fn new(kind: FeatureKind, direction: Direction, k: usize, seed: u64, rows: Vec<QeRow>) -> Result<Self> {
        let dataset = QeDataset {
            format: DATASET_FORMAT.to_owned(),
            kind,
            direction,
            k,
            seed,
            rows,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != DATASET_FORMAT {
            return Err(Error::Validation(format!("unsupported dataset format {:?}", self.format)));
        }
        if self.rows.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for row in &self.rows {
            if row.features.len() != self.kind.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.kind.dim(),
                    got: row.features.len(),
                });
            }
            if !(0.0..=100.0).contains(&row.bleu) {
                return Err(Error::Validation(format!("BLEU label {} outside [0, 100]", row.bleu)));
            }
        }
        Ok(())
    }

    /// Rows at the given positions, keeping the dataset metadata.
    pub fn select(&self, positions: &[usize]) -> QeDataset {
        QeDataset {
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let dataset: QeDataset = serde_json::from_str(&text)?;
        dataset.validate()?;
        Ok(dataset)
    }
}

/// Build a QE training set by k-fold cross-translation. Fold jobs run in
/// parallel; rows come back grouped by fold index, in shuffled order.
pub fn build_kfold_dataset<P: FoldPipeline>(corpus: &ParallelCorpus, k: usize, seed: u64, pipeline: &P) -> Result<QeDataset> {
    let folds = fold_assignment(corpus.len(), k, seed)?;
    let mut in_fold = vec![0; corpus.len()];
    for (f, fold) in folds.iter().enumerate() {
        for &i in fold {
            in_fold[i] = f;
        }
    }
    let per_fold: Vec<Vec<QeRow>> = folds
        .par_iter()
        .enumerate()
        .filter(|(_, fold)| !fold.is_empty())
        .map(|(f, fold)| {
            let complement: Vec<usize> = (0..corpus.len()).filter(|&i| in_fold[i] != f).collect();
            let model = pipeline.train(&corpus.subset(&complement))?;
            fold.iter()
                .map(|&i| {
                    let pair = &corpus.pairs[i];
                    let (output, features) = pipeline.translate(&model, &pair.source)?;
                    if features.kind != pipeline.kind() {
                        return Err(Error::Validation("pipeline produced features of the wrong kind".into()));
                    }
                    let bleu = sentence_bleu(&output, &[&pair.target])?.value;
                    Ok(QeRow {
                        index: i,
                        fold: f,
                        features: features.values,
                        bleu,
                        hypothesis: output,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    QeDataset::new(pipeline.kind(), corpus.direction, k, seed, per_fold.into_iter().flatten().collect())
}

/// Phrase-based models with fixed decoding weights.
#[derive(Debug, Clone, Default)]
pub struct SmtFoldPipeline {
    pub config: SmtTrainConfig,
    pub weights: SmtWeights,
    pub decode: DecodeOptions,
}

impl FoldPipeline for SmtFoldPipeline {
    type Model = SmtModel;

    fn kind(&self) -> FeatureKind {
        FeatureKind::Smt
    }

    fn train(&self, corpus: &ParallelCorpus) -> Result<SmtModel> {
        let mut model = train_smt(corpus, &self.config)?;
        model.weights = self.weights;
        Ok(model)
    }

    fn translate(&self, model: &SmtModel, source: &TokenSeq) -> Result<(TokenSeq, FeatureVector)> {
        let h = model.translate(source, self.decode)?;
        let features = smt_features(&h)?;
        Ok((h.target, features))
    }
}

/// Toy-decoder ensembles.
#[derive(Debug, Clone)]
pub struct NmtFoldPipeline {
    pub config: NmtTrainConfig,
    pub beam: usize,
}

impl Default for NmtFoldPipeline {
    fn default() -> Self {
        NmtFoldPipeline {
            config: NmtTrainConfig::default(),
            beam: DEFAULT_NMT_BEAM,
        }
    }
}

impl FoldPipeline for NmtFoldPipeline {
    type Model = NmtModel;

    fn kind(&self) -> FeatureKind {
        FeatureKind::Nmt
    }

    fn train(&self, corpus: &ParallelCorpus) -> Result<NmtModel> {
        train_nmt(corpus, &self.config)
    }

    fn translate(&self, model: &NmtModel, source: &TokenSeq) -> Result<(TokenSeq, FeatureVector)> {
        let h = model.translate(source, self.beam)?;
        let features = nmt_features(&h)?;
        Ok((h.target, features))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes_balanced() {
        let folds = fold_assignment(10, 3, 1).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(fold_assignment(10, 3, 1).unwrap(), folds);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(fold_assignment(3, 1, 0).is_err());
        assert!(fold_assignment(0, 3, 0).is_err());
        let sizes: Vec<usize> = fold_assignment(3, 5, 0).unwrap().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 1, 1, 0, 0]);
    }
}
