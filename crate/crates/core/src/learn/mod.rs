//! Binary classifiers over feature vectors and their evaluation.
//!
//! Five model kinds are available: k-nearest neighbours on z-scored
//! features, a CART decision tree, a random forest, level-wise gradient
//! boosting and leaf-wise histogram gradient boosting. Every model outputs a
//! score in `[0, 1]`; class 1 is predicted when the score is at least 0.5.
//!
//! Models persist as JSON:
//! `{"format": "routelens-model", "version": 1, "model": {...}}`, where
//! `model` holds the spec, the feature count and the fitted state (the
//! neighbour table for kNN, otherwise the node lists of the trees).

mod hist;
mod metrics;
pub(crate) mod tree;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use metrics::{f1, f_beta, parse_evaluation_csv, write_evaluation_csv, ConfusionMatrix, Evaluation, EvaluationRow};
pub use tree::{Node, Tree};

use crate::derive_seed;
use tree::GrowParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    DecisionTree,
    RandomForest,
    GradientBoostingLevelwise,
    GradientBoostingLeafwiseHist,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Knn,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoostingLevelwise,
        ModelKind::GradientBoostingLeafwiseHist,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoostingLevelwise => "gradient_boosting_levelwise",
            ModelKind::GradientBoostingLeafwiseHist => "gradient_boosting_leafwise_hist",
        }
    }

    pub fn is_tree_based(self) -> bool {
        self != ModelKind::Knn
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown classifier '{s}'"))
    }
}

/// How many features a tree considers at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> Option<usize> {
        match self {
            MaxFeatures::All => None,
            MaxFeatures::Sqrt => Some(((d as f64).sqrt().round() as usize).clamp(1, d.max(1))),
            MaxFeatures::Count(m) => Some(m.clamp(1, d.max(1))),
        }
    }
}

/// Hyperparameters. Fields a kind does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub k: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub n_bins: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        let mut s = ModelSpec {
            kind,
            k: 5,
            max_depth: 8,
            min_leaf: 5,
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::All,
            n_rounds: 200,
            learning_rate: 0.1,
            max_leaves: 31,
            n_bins: 64,
            seed: 0,
        };
        match kind {
            ModelKind::RandomForest => s.max_features = MaxFeatures::Sqrt,
            ModelKind::GradientBoostingLevelwise => {
                s.max_depth = 3;
                s.min_leaf = 1;
            }
            ModelKind::GradientBoostingLeafwiseHist => {
                // 31 leaves never reach depth 31, so depth is effectively unbounded
                s.max_depth = 31;
                s.min_leaf = 20;
            }
            ModelKind::Knn | ModelKind::DecisionTree => {}
        }
        s
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidParam(m.to_string()));
        match self.kind {
            ModelKind::Knn if self.k == 0 => bad("k must be at least 1"),
            ModelKind::RandomForest if self.n_trees == 0 => bad("n_trees must be at least 1"),
            ModelKind::GradientBoostingLevelwise | ModelKind::GradientBoostingLeafwiseHist
                if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) =>
            {
                bad("learning_rate must be positive")
            }
            ModelKind::GradientBoostingLeafwiseHist if self.max_leaves < 2 => bad("max_leaves must be at least 2"),
            ModelKind::GradientBoostingLeafwiseHist if !(2..=65535).contains(&self.n_bins) => {
                bad("n_bins must lie in 2..=65535")
            }
            _ if self.min_leaf == 0 => bad("min_leaf must be at least 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set holds a single class; {0} needs both")]
    SingleClass(ModelKind),
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("row {row}, feature {feature}: value is not finite")]
    NonFinite { row: usize, feature: usize },
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("labels must be 0 or 1, found {0}")]
    BadLabel(u8),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Fitted {
    Knn { mean: Vec<f64>, scale: Vec<f64>, rows: Vec<Vec<f64>>, labels: Vec<u8> },
    /// Score is the mean leaf value over the trees.
    Averaged { trees: Vec<Tree> },
    /// Score is the logistic sigmoid of `base` plus the summed leaf values.
    Boosted { base: f64, trees: Vec<Tree> },
}

/// Read-only view of a tree-based model's trees.
pub enum TreeEnsemble<'a> {
    Averaged(&'a [Tree]),
    Boosted { base: f64, trees: &'a [Tree] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_features: usize,
    fitted: Fitted,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_rows(x: &[Vec<f64>], d: usize) -> Result<(), LearnError> {
    for (r, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(LearnError::Dimension { expected: d, got: row.len() });
        }
        if let Some(f) = row.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite { row: r, feature: f });
        }
    }
    Ok(())
}

/// Fits `spec` to rows `x` with 0/1 labels `y`.
pub fn fit(spec: &ModelSpec, x: &[Vec<f64>], y: &[u8]) -> Result<TrainedModel, LearnError> {
    spec.validate()?;
    if x.is_empty() {
        return Err(LearnError::EmptyTrainingSet);
    }
    if x.len() != y.len() {
        return Err(LearnError::LengthMismatch { rows: x.len(), labels: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(LearnError::BadLabel(bad));
    }
    let d = x[0].len();
    check_rows(x, d)?;
    let n = x.len();
    let positives = y.iter().filter(|&&l| l == 1).count();
    if spec.kind.is_tree_based() && (positives == 0 || positives == n) {
        return Err(LearnError::SingleClass(spec.kind));
    }
    let target: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();

    let fitted = match spec.kind {
        ModelKind::Knn => {
            if spec.k > n {
                return Err(LearnError::KTooLarge { k: spec.k, n });
            }
            let mean: Vec<f64> = (0..d).map(|f| x.iter().map(|r| r[f]).sum::<f64>() / n as f64).collect();
            let scale: Vec<f64> = (0..d)
                .map(|f| {
                    let var = x.iter().map(|r| (r[f] - mean[f]).powi(2)).sum::<f64>() / n as f64;
                    if var > 0.0 {
                        var.sqrt()
                    } else {
                        1.0
                    }
                })
                .collect();
            let rows = x.iter().map(|r| standardize(r, &mean, &scale)).collect();
            Fitted::Knn { mean, scale, rows, labels: y.to_vec() }
        }
        ModelKind::DecisionTree => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let params = GrowParams {
                max_depth: spec.max_depth,
                min_leaf: spec.min_leaf,
                max_features: spec.max_features.resolve(d),
            };
            let leaf = |rows: &[usize]| mean_target(&target, rows);
            Fitted::Averaged { trees: vec![tree::grow(x, &target, (0..n).collect(), params, &leaf, &mut rng)] }
        }
        ModelKind::RandomForest => {
            let params = GrowParams {
                max_depth: spec.max_depth,
                min_leaf: spec.min_leaf,
                max_features: spec.max_features.resolve(d),
            };
            let trees = (0..spec.n_trees)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, t as u64));
                    let rows: Vec<usize> =
                        if spec.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
                    let leaf = |rows: &[usize]| mean_target(&target, rows);
                    tree::grow(x, &target, rows, params, &leaf, &mut rng)
                })
                .collect();
            Fitted::Averaged { trees }
        }
        ModelKind::GradientBoostingLevelwise | ModelKind::GradientBoostingLeafwiseHist => {
            let (base, trees) = boost(spec, x, &target, positives);
            Fitted::Boosted { base, trees }
        }
    };
    Ok(TrainedModel { spec: *spec, n_features: d, fitted })
}

fn mean_target(target: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64
}

fn standardize(row: &[f64], mean: &[f64], scale: &[f64]) -> Vec<f64> {
    row.iter().zip(mean).zip(scale).map(|((v, m), s)| (v - m) / s).collect()
}

/// Gradient boosting on the logistic loss: each round fits a regression tree
/// to the residuals `y - p` and sets every leaf to the Newton step
/// `sum(y - p) / sum(p (1 - p))` scaled by the learning rate.
fn boost(spec: &ModelSpec, x: &[Vec<f64>], y: &[f64], positives: usize) -> (f64, Vec<Tree>) {
    let n = x.len();
    let prior = positives as f64 / n as f64;
    let base = (prior / (1.0 - prior)).ln();
    let mut margin = vec![base; n];
    let mut trees = Vec::with_capacity(spec.n_rounds);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let hist = (spec.kind == ModelKind::GradientBoostingLeafwiseHist).then(|| {
        let binner = hist::Binner::fit(x, spec.n_bins);
        let binned = binner.transform(x);
        (binner, binned)
    });
    for _ in 0..spec.n_rounds {
        let p: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
        let residual: Vec<f64> = y.iter().zip(&p).map(|(y, p)| y - p).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let lr = spec.learning_rate;
        let leaf = |rows: &[usize]| {
            let g: f64 = rows.iter().map(|&i| residual[i]).sum();
            let h: f64 = rows.iter().map(|&i| hess[i]).sum();
            if h < 1e-150 {
                0.0
            } else {
                lr * g / h
            }
        };
        let t = match &hist {
            None => {
                let params = GrowParams { max_depth: spec.max_depth, min_leaf: spec.min_leaf, max_features: None };
                tree::grow(x, &residual, (0..n).collect(), params, &leaf, &mut rng)
            }
            Some((binner, binned)) => hist::grow_leafwise(
                binned,
                binner,
                &residual,
                (0..n).collect(),
                spec.max_leaves,
                spec.max_depth,
                spec.min_leaf,
                &leaf,
            ),
        };
        for (m, row) in margin.iter_mut().zip(x) {
            *m += t.predict(row);
        }
        trees.push(t);
    }
    (base, trees)
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    /// Probability-like score of class 1.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.n_features {
            return Err(LearnError::Dimension { expected: self.n_features, got: x.len() });
        }
        if let Some(f) = x.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite { row: 0, feature: f });
        }
        Ok(self.score(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<u8, LearnError> {
        Ok(u8::from(self.predict_score(x)? >= 0.5))
    }

    /// Score without input checks; `x` must have `n_features` finite values.
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Knn { mean, scale, rows, labels } => {
                let z = standardize(x, mean, scale);
                let mut dist: Vec<(f64, usize)> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                    .collect();
                let k = self.spec.k;
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, cmp);
                }
                let votes = dist[..k].iter().filter(|(_, i)| labels[*i] == 1).count();
                votes as f64 / k as f64
            }
            Fitted::Averaged { trees } => trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64,
            Fitted::Boosted { base, trees } => sigmoid(base + trees.iter().map(|t| t.predict(x)).sum::<f64>()),
        }
    }

    /// Raw additive output before the sigmoid, for boosted models.
    pub fn margin(&self, x: &[f64]) -> Option<f64> {
        match &self.fitted {
            Fitted::Boosted { base, trees } => Some(base + trees.iter().map(|t| t.predict(x)).sum::<f64>()),
            _ => None,
        }
    }

    pub fn trees(&self) -> Option<TreeEnsemble<'_>> {
        match &self.fitted {
            Fitted::Knn { .. } => None,
            Fitted::Averaged { trees } => Some(TreeEnsemble::Averaged(trees)),
            Fitted::Boosted { base, trees } => Some(TreeEnsemble::Boosted { base: *base, trees }),
        }
    }

    pub fn evaluate(&self, x: &[Vec<f64>], y: &[u8], beta: f64) -> Result<Evaluation, LearnError> {
        if x.is_empty() {
            return Err(LearnError::EmptyEvaluationSet);
        }
        if x.len() != y.len() {
            return Err(LearnError::LengthMismatch { rows: x.len(), labels: y.len() });
        }
        let predicted = x.iter().map(|r| self.predict(r)).collect::<Result<Vec<u8>, _>>()?;
        Ok(Evaluation::from_matrix(ConfusionMatrix::from_predictions(&predicted, y), beta))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { format: "routelens-model".into(), version: MODEL_FORMAT_VERSION, model: self.clone() };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::Format(e.to_string()))?;
        if file.format != "routelens-model" {
            return Err(LearnError::Format(format!("unexpected format tag '{}'", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Format(format!("unsupported version {}", file.version)));
        }
        Ok(file.model)
    }
}

/// Logistic loss of `model` on (x, y), averaged over rows.
pub fn log_loss(model: &TrainedModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
    let eps = 1e-15;
    x.iter()
        .zip(y)
        .map(|(r, &l)| {
            let p = model.score(r).clamp(eps, 1.0 - eps);
            if l == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / x.len() as f64
}
