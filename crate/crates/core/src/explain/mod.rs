//! Shapley attributions of classifier scores, their per-scenario mean
//! absolute values and the F1-weighted ranking across scenarios.
//!
//! Every estimator targets the same interventional game: the value of a
//! coalition U is the mean model score over background rows after the
//! features in U are set to the explained row's values.

mod shapley;
mod tree_shap;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use shapley::{shapley_exact, shapley_sample, value_function, EXACT_MAX_ACTIVE};
pub use tree_shap::{shapley_tree, PAIR_EXACT_MAX};

use crate::features::FEATURE_KEYS;
use crate::learn::{ModelKind, TrainedModel};
use crate::scenarios::{ScenarioDataset, ScenarioId};

/// Anything that maps a feature row to a score.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn score(&self, x: &[f64]) -> f64;
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, x: &[f64]) -> f64 {
        TrainedModel::score(self, x)
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    PermutationSampling,
    TreePath,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::PermutationSampling => "permutation_sampling",
            Estimator::TreePath => "tree_path",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Estimator::Exact),
            "sample" | "permutation_sampling" => Ok(Estimator::PermutationSampling),
            "tree" | "tree_path" => Ok(Estimator::TreePath),
            other => Err(format!("unknown estimator '{other}' (expected exact, sample or tree)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("{active} active features exceed the exact limit of {limit}; use the sampling estimator or a feature mask")]
    TooManyFeatures { active: usize, limit: usize },
    #[error("feature index {0} out of range")]
    FeatureOutOfRange(usize),
    #[error("n_permutations must be at least 1")]
    NoPermutations,
    #[error("tree estimator needs a tree-based model, got {0}")]
    NotATreeModel(ModelKind),
    #[error("no rows to explain")]
    EmptyExplainSet,
    #[error("duplicate scenario {0} in ranking input")]
    DuplicateScenario(ScenarioId),
    #[error("scenario importances disagree on feature count")]
    Ragged,
    #[error("row {0} is not a test row")]
    NotATestRow(usize),
}

pub(crate) fn check_inputs<P: Predictor + ?Sized>(
    model: &P,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<(), ExplainError> {
    let d = model.n_features();
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    for row in std::iter::once(x).chain(background.iter().map(Vec::as_slice)) {
        if row.len() != d {
            return Err(ExplainError::Dimension { expected: d, got: row.len() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub phis: Vec<f64>,
    /// Value of the empty coalition.
    pub base_value: f64,
    pub prediction: f64,
    pub estimator: Estimator,
    /// Subsets enumerated, permutations drawn or background rows walked.
    pub n_samples: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainSettings {
    pub estimator: Estimator,
    pub n_permutations: usize,
    pub background_size: usize,
    pub max_rows: usize,
    pub seed: u64,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        ExplainSettings {
            estimator: Estimator::TreePath,
            n_permutations: 200,
            background_size: 64,
            max_rows: 200,
            seed: 0,
        }
    }
}

/// Explains one row with the chosen estimator. Exact enumeration over more
/// than [`EXACT_MAX_ACTIVE`] features fails; no mask is applied here.
pub fn explain_row(
    model: &TrainedModel,
    x: &[f64],
    background: &[Vec<f64>],
    estimator: Estimator,
    n_permutations: usize,
    seed: u64,
) -> Result<Explanation, ExplainError> {
    match estimator {
        Estimator::Exact => shapley_exact(model, x, background, None),
        Estimator::PermutationSampling => shapley_sample(model, x, background, n_permutations, seed),
        Estimator::TreePath => shapley_tree(model, x, background),
    }
}

/// Background rows drawn without replacement from the training split.
pub fn background_rows(ds: &ScenarioDataset, size: usize, seed: u64) -> Vec<Vec<f64>> {
    let take = size.min(ds.train.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, ds.train.len(), take).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| ds.rows[ds.train[k]].values.to_vec()).collect()
}

/// The first `max_rows` test rows, in dataset order.
pub fn explain_set(ds: &ScenarioDataset, max_rows: usize) -> Vec<usize> {
    ds.test.iter().copied().take(max_rows).collect()
}

/// Explains `rows` of `ds` (which must be test rows). Row `k` of the result
/// explains `rows[k]`; permutation seeds are derived from the row index.
pub fn explain_rows(
    model: &TrainedModel,
    ds: &ScenarioDataset,
    rows: &[usize],
    settings: &ExplainSettings,
) -> Result<Vec<Explanation>, ExplainError> {
    if rows.is_empty() {
        return Err(ExplainError::EmptyExplainSet);
    }
    if let Some(&r) = rows.iter().find(|r| ds.test.binary_search(r).is_err()) {
        return Err(ExplainError::NotATestRow(r));
    }
    let background = background_rows(ds, settings.background_size, settings.seed);
    rows.par_iter()
        .map(|&r| {
            let seed = crate::derive_seed(settings.seed, r as u64);
            explain_row(model, &ds.rows[r].values, &background, settings.estimator, settings.n_permutations, seed)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioImportance {
    pub scenario: ScenarioId,
    /// Mean absolute Shapley value per feature.
    pub s: Vec<f64>,
    pub f1: f64,
    pub n_rows: usize,
}

impl ScenarioImportance {
    /// Indices of the `k` largest entries, ties by feature order.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.s.len()).collect();
        idx.sort_by(|&a, &b| self.s[b].total_cmp(&self.s[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

pub fn scenario_importance(
    scenario: ScenarioId,
    explanations: &[Explanation],
    f1: f64,
) -> Result<ScenarioImportance, ExplainError> {
    let first = explanations.first().ok_or(ExplainError::EmptyExplainSet)?;
    let d = first.phis.len();
    let mut s = vec![0.0; d];
    for e in explanations {
        if e.phis.len() != d {
            return Err(ExplainError::Ragged);
        }
        for (acc, p) in s.iter_mut().zip(&e.phis) {
            *acc += p.abs();
        }
    }
    s.iter_mut().for_each(|v| *v /= explanations.len() as f64);
    Ok(ScenarioImportance { scenario, s, f1, n_rows: explanations.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedImportance {
    pub y: Vec<f64>,
    /// Feature indices by descending `y`, ties by feature order.
    pub ranking: Vec<usize>,
    pub scenarios: Vec<ScenarioId>,
    /// Set when fewer than all eight scenarios contributed.
    pub subset_warning: Option<String>,
}

pub const SUBSET_WARNING: &str = "unified ranking over subset of M";

/// `y[j] = sum over scenarios of s_m[j] * f1_m`.
pub fn unified_ranking(imps: &[ScenarioImportance]) -> Result<UnifiedImportance, ExplainError> {
    let first = imps.first().ok_or(ExplainError::EmptyExplainSet)?;
    let d = first.s.len();
    let mut seen = BTreeSet::new();
    for imp in imps {
        if !seen.insert(imp.scenario) {
            return Err(ExplainError::DuplicateScenario(imp.scenario));
        }
        if imp.s.len() != d {
            return Err(ExplainError::Ragged);
        }
    }
    let mut y = vec![0.0; d];
    for imp in imps {
        for (acc, s) in y.iter_mut().zip(&imp.s) {
            *acc += s * imp.f1;
        }
    }
    let mut ranking: Vec<usize> = (0..d).collect();
    ranking.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    let subset_warning = (seen.len() < ScenarioId::ALL.len()).then(|| SUBSET_WARNING.to_string());
    Ok(UnifiedImportance { y, ranking, scenarios: seen.into_iter().collect(), subset_warning })
}

fn key(j: usize) -> String {
    FEATURE_KEYS.get(j).map_or_else(|| format!("f{j}"), |k| k.to_string())
}

/// Per-row explanation CSV: `row_id,<keys>,base_value,estimator,seed`.
pub fn write_explanations_csv(row_ids: &[usize], explanations: &[Explanation]) -> String {
    let d = explanations.first().map_or(0, |e| e.phis.len());
    let mut out = String::from("row_id,");
    for j in 0..d {
        out.push_str(&key(j));
        out.push(',');
    }
    out.push_str("base_value,estimator,seed\n");
    for (id, e) in row_ids.iter().zip(explanations) {
        out.push_str(&id.to_string());
        for p in &e.phis {
            out.push_str(&format!(",{p}"));
        }
        let seed = e.seed.map_or_else(String::new, |s| s.to_string());
        out.push_str(&format!(",{},{},{}\n", e.base_value, e.estimator, seed));
    }
    out
}

/// Parses the per-row explanation CSV back into (row id, phis, base value).
pub fn parse_explanations_csv(text: &str) -> Result<Vec<(usize, Vec<f64>, f64)>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty explanation file")?;
    let d = header.split(',').count().checked_sub(4).ok_or("short explanation header")?;
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != d + 4 {
                return Err(format!("expected {} fields in explanation row", d + 4));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
            let id = f[0].parse::<usize>().map_err(|e| format!("bad row id '{}': {e}", f[0]))?;
            let phis = f[1..=d].iter().map(|s| num(s)).collect::<Result<Vec<_>, _>>()?;
            Ok((id, phis, num(f[d + 1])?))
        })
        .collect()
}

/// Scenario importance CSV in long form: `scenario,feature,mean_abs_shap,f1`.
pub fn write_importance_csv(imps: &[ScenarioImportance]) -> String {
    let mut out = String::from("scenario,feature,mean_abs_shap,f1\n");
    for imp in imps {
        for (j, s) in imp.s.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", imp.scenario, key(j), s, imp.f1));
        }
    }
    out
}

/// Unified ranking CSV: `feature,y,rank` in rank order (rank 1 first).
pub fn write_ranking_csv(u: &UnifiedImportance) -> String {
    let mut out = String::from("feature,y,rank\n");
    for (r, &j) in u.ranking.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", key(j), u.y[j], r + 1));
    }
    out
}
