//! Quality estimation: hypothesis features, k-fold proxy labels, boosted
//! regression trees and star ratings.

mod features;
mod gbt;
mod kfold;
mod stars;

pub use features::{attention_entropy, nmt_features, smt_features, FeatureKind, FeatureVector};
pub use gbt::{gbt_train, GbtModel, GbtParams, TreeNode};
pub use kfold::{
    build_kfold_dataset, fold_assignment, FoldPipeline, NmtFoldPipeline, QeDataset, QeRow, SmtFoldPipeline,
    DEFAULT_FOLD_SEED,
};
pub use stars::{evaluate_qe, stars_from_bleu, stars_from_prob, StarRating};
