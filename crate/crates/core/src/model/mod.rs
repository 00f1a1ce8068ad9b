//! Tree-family classifiers for missing-vs-active prediction.
//!
//! Four kinds share one [`TrainedModel`] container: a single CART tree, a
//! bagged random forest, discrete AdaBoost over stumps, and gradient
//! boosting on the logistic loss. The positive class is "missing".

mod ablation;
mod metrics;
mod split;
mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ablation::{default_combos, run_ablation, AblationOutcome, AblationRow, ABLATION_HEADER};
pub use metrics::{Confusion, EvalReport};
pub use split::{split, Partition, SplitSpec};
pub use tree::{grow, Criterion, Node, Presorted, Tree, TreeParams};

use crate::cohort::Label;
use crate::features::{FeatureError, FeatureMatrix, FeatureSet, GroupSet, MinMax};
use crate::ingest::EditorId;

pub const MODEL_FORMAT: &str = "wikichurn-model/1";
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;
/// Bound on the AdaBoost weighted error so stump weights stay finite.
pub const ADABOOST_EPS_FLOOR: f64 = 1e-10;
pub const NEWTON_LAMBDA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data holds a single class")]
    SingleClass,
    #[error("dataset has {0} rows; at least 5 are needed")]
    TooSmall(usize),
    #[error("train fraction {0} outside (0, 1)")]
    BadSplit(f64),
    #[error("column layout does not match the model: {0}")]
    LayoutMismatch(String),
    #[error("unknown classifier {0:?} (expected tree, forest, adaboost or gboost)")]
    UnknownKind(String),
    #[error("model file {path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    DecisionTree,
    RandomForest,
    AdaBoost,
    GradientBoost,
}

impl ModelKind {
    /// Fixed order, also used to break ablation ties.
    pub const ALL: [ModelKind; 4] = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::AdaBoost,
        ModelKind::GradientBoost,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            ModelKind::DecisionTree => "tree",
            ModelKind::RandomForest => "forest",
            ModelKind::AdaBoost => "adaboost",
            ModelKind::GradientBoost => "gboost",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s.to_ascii_lowercase())
            .ok_or_else(|| ModelError::UnknownKind(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub learning_rate: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { trees: 100, max_depth: 6, min_leaf: 2, learning_rate: 0.1 }
    }
}

/// A fitted classifier plus everything needed to rebuild its input rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub n_features: usize,
    pub groups: Option<GroupSet>,
    pub columns: Vec<String>,
    pub normalization: Option<MinMax>,
    pub common_words: Vec<String>,
    pub trees: Vec<Tree>,
    pub tree_weights: Vec<f64>,
    pub base_score: f64,
    pub metrics: Option<EvalReport>,
    /// Hash of the run configuration that produced the model, if any.
    #[serde(default)]
    pub config_hash: String,
}

pub fn class_index(label: Label) -> usize {
    match label {
        Label::Missing => 0,
        _ => 1,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Stump weight of a discrete AdaBoost round with weighted error `eps`.
pub fn adaboost_alpha(eps: f64) -> f64 {
    let e = eps.clamp(ADABOOST_EPS_FLOOR, 1.0 - ADABOOST_EPS_FLOOR);
    0.5 * ((1.0 - e) / e).ln()
}

/// Fits a model on raw rows. `missing[i]` is true for the positive class.
pub fn train(
    kind: ModelKind,
    rows: &[Vec<f64>],
    missing: &[bool],
    hp: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let n_pos = missing.iter().filter(|&&m| m).count();
    if rows.is_empty() || n_pos == 0 || n_pos == missing.len() {
        return Err(ModelError::SingleClass);
    }
    let width = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != width || r.iter().any(|x| !x.is_finite())) {
        return Err(ModelError::LayoutMismatch(format!(
            "ragged or non-finite row of width {}",
            r.len()
        )));
    }
    let data = Presorted::new(rows);
    let y: Vec<u8> = missing.iter().map(|&m| u8::from(m)).collect();
    let params = TreeParams {
        max_depth: hp.max_depth,
        min_leaf: hp.min_leaf,
        max_features: None,
    };
    let (trees, tree_weights, base_score) = match kind {
        ModelKind::DecisionTree => {
            let w = vec![1.0; y.len()];
            let t = grow::<ChaCha8Rng>(&data, Criterion::Gini { y: &y, w: &w }, params, None);
            (vec![t], vec![1.0], 0.0)
        }
        ModelKind::RandomForest => fit_forest(&data, &y, hp, params, seed),
        ModelKind::AdaBoost => fit_adaboost(&data, &y, hp),
        ModelKind::GradientBoost => fit_gboost(&data, &y, hp, params),
    };
    Ok(TrainedModel {
        format: MODEL_FORMAT.into(),
        kind,
        hyperparams: *hp,
        seed,
        n_features: width,
        groups: None,
        columns: Vec::new(),
        normalization: None,
        common_words: Vec::new(),
        trees,
        tree_weights,
        base_score,
        metrics: None,
        config_hash: String::new(),
    })
}

fn fit_forest(
    data: &Presorted,
    y: &[u8],
    hp: &Hyperparams,
    params: TreeParams,
    seed: u64,
) -> (Vec<Tree>, Vec<f64>, f64) {
    let n = y.len();
    let k = ((data.width() as f64).sqrt().round() as usize).max(1);
    let params = TreeParams { max_features: Some(k), ..params };
    let trees: Vec<Tree> = (0..hp.trees.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let mut w = vec![0.0; n];
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1.0;
            }
            grow(data, Criterion::Gini { y, w: &w }, params, Some(&mut rng))
        })
        .collect();
    let weights = vec![1.0 / trees.len() as f64; trees.len()];
    (trees, weights, 0.0)
}

fn fit_adaboost(data: &Presorted, y: &[u8], hp: &Hyperparams) -> (Vec<Tree>, Vec<f64>, f64) {
    let n = y.len();
    let mut w = vec![1.0 / n as f64; n];
    let stump = TreeParams { max_depth: 1, min_leaf: 1, max_features: None };
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..hp.trees.max(1) {
        let mut t = grow::<ChaCha8Rng>(data, Criterion::Gini { y, w: &w }, stump, None);
        for node in &mut t.nodes {
            if let Node::Leaf { value } = node {
                *value = if *value >= 0.5 { 1.0 } else { -1.0 };
            }
        }
        let h: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = data.cols.iter().map(|c| c[i]).collect();
                t.predict(&row)
            })
            .collect();
        let total: f64 = w.iter().sum();
        let err: f64 = (0..n)
            .filter(|&i| (h[i] > 0.0) != (y[i] == 1))
            .map(|i| w[i])
            .sum::<f64>()
            / total;
        if err >= 0.5 && !trees.is_empty() {
            break;
        }
        let alpha = adaboost_alpha(err);
        trees.push(t);
        alphas.push(alpha);
        if err <= ADABOOST_EPS_FLOOR || err >= 0.5 {
            break;
        }
        for i in 0..n {
            let yi = if y[i] == 1 { 1.0 } else { -1.0 };
            w[i] *= (-alpha * yi * h[i]).exp();
        }
        let s: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= s;
        }
    }
    (trees, alphas, 0.0)
}

fn fit_gboost(
    data: &Presorted,
    y: &[u8],
    hp: &Hyperparams,
    params: TreeParams,
) -> (Vec<Tree>, Vec<f64>, f64) {
    let n = y.len();
    let pos = y.iter().filter(|&&v| v == 1).count() as f64;
    let base = (pos / (n as f64 - pos)).ln();
    let mut f = vec![base; n];
    let mut trees = Vec::new();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| data.cols.iter().map(|c| c[i]).collect()).collect();
    for _ in 0..hp.trees.max(1) {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = (0..n).map(|i| p[i] - y[i] as f64).collect();
        let h: Vec<f64> = p.iter().map(|&q| (q * (1.0 - q)).max(1e-12)).collect();
        let t = grow::<ChaCha8Rng>(
            data,
            Criterion::Newton { g: &g, h: &h, lambda: NEWTON_LAMBDA },
            params,
            None,
        );
        for (fi, r) in f.iter_mut().zip(&rows) {
            *fi += hp.learning_rate * t.predict(r);
        }
        trees.push(t);
    }
    let weights = vec![hp.learning_rate; trees.len()];
    (trees, weights, base)
}

impl TrainedModel {
    pub fn width(&self) -> usize {
        self.n_features
    }

    /// Probability of the missing class for one prepared row.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let margin: f64 = self
            .trees
            .iter()
            .zip(&self.tree_weights)
            .map(|(t, w)| w * t.predict(row))
            .sum();
        match self.kind {
            // Rounding in the weighted sum can step just outside [0, 1].
            ModelKind::DecisionTree | ModelKind::RandomForest => margin.clamp(0.0, 1.0),
            ModelKind::AdaBoost => sigmoid(2.0 * margin),
            ModelKind::GradientBoost => sigmoid(self.base_score + margin),
        }
    }

    pub fn predict_label(&self, row: &[f64]) -> Label {
        if self.predict_proba(row) >= 0.5 {
            Label::Missing
        } else {
            Label::Active
        }
    }

    /// Rebuilds this model's normalized input rows from feature vectors.
    pub fn prepare(&self, set: &FeatureSet, rows: &[usize]) -> Result<FeatureMatrix, ModelError> {
        let groups = self
            .groups
            .as_ref()
            .ok_or_else(|| ModelError::LayoutMismatch("model has no feature groups".into()))?;
        let exclude: BTreeSet<String> = self.common_words.iter().cloned().collect();
        let m = set.assemble(rows, groups, &exclude)?;
        if m.columns != self.columns {
            return Err(ModelError::LayoutMismatch(format!(
                "{} columns offered, model expects {}",
                m.columns.len(),
                self.columns.len()
            )));
        }
        Ok(match &self.normalization {
            Some(mm) => m.normalize_with(mm),
            None => m,
        })
    }

    pub fn check_layout(&self, m: &FeatureMatrix) -> Result<(), ModelError> {
        if m.width() != self.n_features || (!self.columns.is_empty() && m.columns != self.columns) {
            return Err(ModelError::LayoutMismatch(format!(
                "matrix has {} columns, model expects {}",
                m.columns.len(),
                self.columns.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, m: &FeatureMatrix) -> Result<EvalReport, ModelError> {
        self.check_layout(m)?;
        let truth: Vec<usize> = m.labels.iter().map(|&l| class_index(l)).collect();
        let pred: Vec<usize> = m
            .rows
            .iter()
            .map(|r| class_index(self.predict_label(r)))
            .collect();
        Ok(EvalReport::from_labels(&truth, &pred))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedModel = serde_json::from_str(text).map_err(|e| ModelError::Format {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        if m.format != MODEL_FORMAT {
            return Err(ModelError::Format {
                path: "<string>".into(),
                message: format!("format {:?}, expected {MODEL_FORMAT:?}", m.format),
            });
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| ModelError::Format {
                path: parent.display().to_string(),
                message: e.to_string(),
            })?;
        }
        std::fs::write(path, self.to_json() + "\n").map_err(|e| ModelError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ModelError::Format { message, .. } => ModelError::Format {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

/// Fitting of a model from a feature set: common words and normalization
/// come from the training rows only.
#[derive(Debug, Clone)]
pub struct FitSpec {
    pub kind: ModelKind,
    pub groups: GroupSet,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub remove_common_words: bool,
}

pub fn fit_on_rows(
    set: &FeatureSet,
    train_rows: &[usize],
    spec: &FitSpec,
) -> Result<TrainedModel, ModelError> {
    let common = if spec.remove_common_words && spec.groups.contains(crate::features::Group::G2) {
        crate::features::common_words(&set.vectors, train_rows)
    } else {
        BTreeSet::new()
    };
    let raw = set.assemble(train_rows, &spec.groups, &common)?;
    let mm = MinMax::fit(&raw.rows);
    let norm = raw.normalize_with(&mm);
    let missing: Vec<bool> = norm.labels.iter().map(|&l| l == Label::Missing).collect();
    let mut model = train(spec.kind, &norm.rows, &missing, &spec.hyperparams, spec.seed)?;
    model.groups = Some(spec.groups.clone());
    model.columns = norm.columns;
    model.normalization = Some(mm);
    model.common_words = common.into_iter().collect();
    Ok(model)
}

/// Rows of a feature set that carry a missing/active label.
pub fn labeled_rows(set: &FeatureSet) -> Vec<usize> {
    set.vectors
        .iter()
        .enumerate()
        .filter(|(_, v)| v.label != Label::Unlabeled)
        .map(|(i, _)| i)
        .collect()
}

/// Splits the labeled rows of a feature set.
pub fn split_set(set: &FeatureSet, spec: &SplitSpec) -> Result<Partition, ModelError> {
    let rows = labeled_rows(set);
    let classes: Vec<usize> = rows.iter().map(|&i| class_index(set.vectors[i].label)).collect();
    let p = split(&classes, spec)?;
    Ok(Partition {
        train: p.train.into_iter().map(|i| rows[i]).collect(),
        test: p.test.into_iter().map(|i| rows[i]).collect(),
    })
}

/// Missing-class probability per editor, highest first (ties by editor).
pub fn score_editors(model: &TrainedModel, m: &FeatureMatrix) -> Result<Vec<(EditorId, f64)>, ModelError> {
    model.check_layout(m)?;
    let mut scored: Vec<(EditorId, f64)> = m
        .editors
        .iter()
        .zip(&m.rows)
        .map(|(e, r)| (e.clone(), model.predict_proba(r)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

/// Editors whose probability strictly exceeds `min_confidence`.
pub fn flag(scored: &[(EditorId, f64)], min_confidence: f64) -> Vec<(EditorId, f64)> {
    scored.iter().filter(|(_, p)| *p > min_confidence).cloned().collect()
}

#[cfg(test)]
mod tests;
