//! Squared-error gradient boosting with axis-aligned regression trees.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureKind, FeatureVector, QeDataset};
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "mtloop-gbt/1";
const BLEU_RANGE: (f64, f64) = (0.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub max_depth: usize,
    pub eta: f64,
    pub rounds: usize,
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf(f64),
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf(v) => *v,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] < *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn preorder(&self, out: &mut Vec<NodeRecord>) {
        match self {
            TreeNode::Leaf(v) => out.push(NodeRecord::Leaf { leaf: *v }),
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(NodeRecord::Split {
                    feature: *feature,
                    threshold: *threshold,
                });
                left.preorder(out);
                right.preorder(out);
            }
        }
    }

    fn from_preorder(nodes: &mut std::slice::Iter<'_, NodeRecord>, dim: usize) -> Result<TreeNode> {
        match nodes.next() {
            None => Err(Error::Validation("truncated tree".into())),
            Some(NodeRecord::Leaf { leaf }) => Ok(TreeNode::Leaf(*leaf)),
            Some(NodeRecord::Split { feature, threshold }) => {
                if *feature >= dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: feature + 1,
                    });
                }
                let left = Box::new(Self::from_preorder(nodes, dim)?);
                let right = Box::new(Self::from_preorder(nodes, dim)?);
                Ok(TreeNode::Split {
                    feature: *feature,
                    threshold: *threshold,
                    left,
                    right,
                })
            }
        }
    }
}

/// A node in the preorder serialization of a tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum NodeRecord {
    Split { feature: usize, threshold: f64 },
    Leaf { leaf: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    /// `None` for models fit on raw feature matrices.
    pub kind: Option<FeatureKind>,
    pub dim: usize,
    pub base: f64,
    pub params: GbtParams,
    pub trees: Vec<TreeNode>,
    /// Training mean squared error of the unclipped prediction after each round.
    pub train_mse: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    kind: Option<FeatureKind>,
    dim: usize,
    base: f64,
    eta: f64,
    max_depth: usize,
    rounds: usize,
    trees: Vec<Vec<NodeRecord>>,
}

fn cmp_rows(a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)) -> Ordering {
    for (x, y) in a.0.iter().zip(&b.0) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a.1.total_cmp(&b.1)
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Best split of `rows` (indices into `x`) on residuals `r`.
fn best_split(x: &[Vec<f64>], r: &[f64], rows: &[usize], dim: usize) -> Option<SplitChoice> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let parent = total * total / n;
    let mut best: Option<SplitChoice> = None;
    let mut order = rows.to_vec();
    for feature in 0..dim {
        order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..order.len() - 1 {
            left_sum += r[order[k]];
            let (lo, hi) = (x[order[k]][feature], x[order[k + 1]][feature]);
            if lo == hi {
                continue;
            }
            let nl = (k + 1) as f64;
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl + right_sum * right_sum / (n - nl) - parent;
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold <= lo {
                threshold = hi;
            }
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    gain,
                    feature,
                    threshold,
                });
            }
        }
    }
    best
}

fn grow(x: &[Vec<f64>], r: &[f64], rows: &[usize], dim: usize, depth_left: usize) -> TreeNode {
    let mean = rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len() as f64;
    if depth_left == 0 || rows.len() < 2 {
        return TreeNode::Leaf(mean);
    }
    match best_split(x, r, rows, dim) {
        None => TreeNode::Leaf(mean),
        Some(split) => {
            let (left, right): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| x[i][split.feature] < split.threshold);
            TreeNode::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(grow(x, r, &left, dim, depth_left - 1)),
                right: Box::new(grow(x, r, &right, dim, depth_left - 1)),
            }
        }
    }
}

impl GbtModel {
    /// Fit on a raw feature matrix. Rows are put in a canonical order first,
    /// so the model does not depend on the order of the input rows.
    pub fn fit(features: &[Vec<f64>], targets: &[f64], params: GbtParams) -> Result<Self> {
        params.validate()?;
        if features.len() != targets.len() {
            return Err(Error::ParallelLengthMismatch {
                left: features.len(),
                right: targets.len(),
            });
        }
        if features.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let dim = features[0].len();
        if let Some(bad) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if features.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::Validation("training data must be finite".into()));
        }
        let mut data: Vec<(Vec<f64>, f64)> = features.iter().cloned().zip(targets.iter().copied()).collect();
        data.sort_by(cmp_rows);
        let (x, y): (Vec<Vec<f64>>, Vec<f64>) = data.into_iter().unzip();
        let n = y.len();
        let base = y.iter().sum::<f64>() / n as f64;
        let mut prediction = vec![base; n];
        let all: Vec<usize> = (0..n).collect();
        let mut trees = Vec::with_capacity(params.rounds);
        let mut train_mse = Vec::with_capacity(params.rounds);
        for _ in 0..params.rounds {
            let residual: Vec<f64> = y.iter().zip(&prediction).map(|(t, p)| t - p).collect();
            let tree = grow(&x, &residual, &all, dim, params.max_depth);
            for (p, row) in prediction.iter_mut().zip(&x) {
                *p += params.eta * tree.predict(row);
            }
            train_mse.push(y.iter().zip(&prediction).map(|(t, p)| (t - p) * (t - p)).sum::<f64>() / n as f64);
            trees.push(tree);
        }
        Ok(GbtModel {
            kind: None,
            dim,
            base,
            params,
            trees,
            train_mse,
        })
    }

    /// `base + eta · Σ trees(x)` before clipping.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.base + self.params.eta * self.trees.iter().map(|t| t.predict(x)).sum::<f64>())
    }

    /// Prediction clipped to the BLEU range [0, 100].
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)?.clamp(BLEU_RANGE.0, BLEU_RANGE.1))
    }

    pub fn predict_features(&self, f: &FeatureVector) -> Result<f64> {
        if let Some(kind) = self.kind {
            if kind != f.kind {
                return Err(Error::Validation(format!("model expects {kind} features, got {}", f.kind)));
            }
        }
        self.predict(&f.values)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_owned(),
            kind: self.kind,
            dim: self.dim,
            base: self.base,
            eta: self.params.eta,
            max_depth: self.params.max_depth,
            rounds: self.params.rounds,
            trees: self
                .trees
                .iter()
                .map(|t| {
                    let mut nodes = Vec::new();
                    t.preorder(&mut nodes);
                    nodes
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Validation(format!("unsupported model format {:?}", file.format)));
        }
        if let Some(kind) = file.kind {
            if kind.dim() != file.dim {
                return Err(Error::DimensionMismatch {
                    expected: kind.dim(),
                    got: file.dim,
                });
            }
        }
        let params = GbtParams {
            max_depth: file.max_depth,
            eta: file.eta,
            rounds: file.rounds,
        };
        params.validate()?;
        let trees = file
            .trees
            .iter()
            .map(|nodes| {
                let mut it = nodes.iter();
                let tree = TreeNode::from_preorder(&mut it, file.dim)?;
                if it.next().is_some() {
                    return Err(Error::Validation("trailing nodes after tree".into()));
                }
                Ok(tree)
            })
            .collect::<Result<Vec<_>>>()?;
        if trees.len() != params.rounds {
            return Err(Error::Validation(format!("expected {} trees, found {}", params.rounds, trees.len())));
        }
        Ok(GbtModel {
            kind: file.kind,
            dim: file.dim,
            base: file.base,
            params,
            trees,
            train_mse: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }
}

/// Fit a regressor from feature vectors to sentence BLEU.
pub fn gbt_train(data: &QeDataset, params: GbtParams) -> Result<GbtModel> {
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = data.rows.iter().map(|r| (r.features.clone(), r.bleu)).unzip();
    let mut model = GbtModel::fit(&x, &y, params)?;
    if model.dim != data.kind.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.kind.dim(),
            got: model.dim,
        });
    }
    model.kind = Some(data.kind);
    Ok(model)
}
