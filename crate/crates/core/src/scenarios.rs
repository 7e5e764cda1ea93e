//! Labelled scenario datasets.
//!
//! Every scenario keeps each instance's optimal-class solution as its single
//! positive row. The negative rows are the near-optimal solutions (strictly
//! positive gap) selected by the scenario: one heuristic's output for S1-S3,
//! or every solution whose gap strictly exceeds a threshold for S4-S8.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::model::SolutionSource;

pub const DEFAULT_THRESHOLDS: [f64; 5] = [2.0, 5.0, 7.0, 10.0, 15.0];
pub const DEFAULT_TEST_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::S1,
        ScenarioId::S2,
        ScenarioId::S3,
        ScenarioId::S4,
        ScenarioId::S5,
        ScenarioId::S6,
        ScenarioId::S7,
        ScenarioId::S8,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.index() + 1)
    }
}

impl FromStr for ScenarioId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown scenario '{s}' (expected S1..S8)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    Source(SolutionSource),
    GapAbove(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub selector: Selector,
}

impl ScenarioSpec {
    /// The standard eight scenarios with the given S4..S8 gap thresholds.
    pub fn standard_set(thresholds: [f64; 5]) -> Result<Vec<ScenarioSpec>, ScenarioError> {
        if thresholds.windows(2).any(|w| w[0] >= w[1]) || thresholds.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(ScenarioError::Thresholds(thresholds.to_vec()));
        }
        Ok(ScenarioId::ALL.iter().map(|&id| Self::with_thresholds(id, thresholds)).collect())
    }

    pub fn standard(id: ScenarioId) -> Self {
        Self::with_thresholds(id, DEFAULT_THRESHOLDS)
    }

    fn with_thresholds(id: ScenarioId, t: [f64; 5]) -> Self {
        let selector = match id {
            ScenarioId::S1 => Selector::Source(SolutionSource::Mnslite),
            ScenarioId::S2 => Selector::Source(SolutionSource::ClarkeWright),
            ScenarioId::S3 => Selector::Source(SolutionSource::Sweep),
            other => Selector::GapAbove(t[other.index() - 3]),
        };
        Self { id, selector }
    }

    /// Whether a near-optimal solution belongs to this scenario's negative class.
    pub fn selects(&self, source: SolutionSource, gap: f64) -> bool {
        if source == SolutionSource::OptimalProxy || gap <= 0.0 {
            return false;
        }
        match self.selector {
            Selector::Source(s) => s == source,
            Selector::GapAbove(t) => gap > t,
        }
    }
}

/// One solution of the corpus with its features and gap to the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSolution {
    pub features: FeatureVector,
    pub gap_percent: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario {0}: empty negative class")]
    EmptyNegativeClass(ScenarioId),
    #[error("scenario {0}: corpus has no optimal-class solutions")]
    EmptyPositiveClass(ScenarioId),
    #[error("instance {0} has {1} optimal-class solutions, expected exactly one")]
    PositiveCount(String, usize),
    #[error("test fraction must lie in (0, 1), got {0}")]
    TestFraction(f64),
    #[error("gap thresholds must be finite, non-negative and strictly increasing: {0:?}")]
    Thresholds(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDataset {
    pub spec: ScenarioSpec,
    pub rows: Vec<FeatureVector>,
    pub labels: Vec<u8>,
    pub gaps: Vec<f64>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl ScenarioDataset {
    pub fn matrix(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
        (idx.iter().map(|&i| self.rows[i].values.to_vec()).collect(), idx.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Assembles the dataset of `spec` from `corpus` and splits it with a
/// stratified seeded shuffle. Rows are ordered by `(instance_id, source)`.
pub fn build_scenario(
    corpus: &[LabeledSolution],
    spec: ScenarioSpec,
    test_fraction: f64,
    seed: u64,
) -> Result<ScenarioDataset, ScenarioError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ScenarioError::TestFraction(test_fraction));
    }
    let mut positives_per_instance = std::collections::BTreeMap::<&str, usize>::new();
    for s in corpus {
        let count = positives_per_instance.entry(&s.features.instance_id).or_default();
        if s.features.source == SolutionSource::OptimalProxy {
            *count += 1;
        }
    }
    if let Some((id, &c)) = positives_per_instance.iter().find(|(_, &c)| c != 1) {
        return Err(ScenarioError::PositiveCount(id.to_string(), c));
    }

    let mut chosen: Vec<&LabeledSolution> = corpus
        .iter()
        .filter(|s| s.features.source == SolutionSource::OptimalProxy || spec.selects(s.features.source, s.gap_percent))
        .collect();
    chosen.sort_by(|a, b| {
        a.features.instance_id.cmp(&b.features.instance_id).then(a.features.source.cmp(&b.features.source))
    });
    let labels: Vec<u8> = chosen.iter().map(|s| u8::from(s.features.source == SolutionSource::OptimalProxy)).collect();
    if !labels.contains(&1) {
        return Err(ScenarioError::EmptyPositiveClass(spec.id));
    }
    if !labels.contains(&0) {
        return Err(ScenarioError::EmptyNegativeClass(spec.id));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let take = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..take]);
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..labels.len()).filter(|i| test.binary_search(i).is_err()).collect();

    Ok(ScenarioDataset {
        spec,
        rows: chosen.iter().map(|s| s.features.clone()).collect(),
        gaps: chosen.iter().map(|s| s.gap_percent).collect(),
        labels,
        train,
        test,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassBalance {
    pub positives: usize,
    pub negatives: usize,
    /// Share of positive rows.
    pub ratio: f64,
}

pub fn class_balance(ds: &ScenarioDataset) -> ClassBalance {
    let positives = ds.labels.iter().filter(|&&l| l == 1).count();
    let negatives = ds.labels.len() - positives;
    let ratio = if ds.labels.is_empty() { 0.0 } else { positives as f64 / ds.labels.len() as f64 };
    ClassBalance { positives, negatives, ratio }
}

/// Split sidecar: one test-row index per line.
pub fn write_split(ds: &ScenarioDataset) -> String {
    ds.test.iter().map(|i| format!("{i}\n")).collect()
}

pub fn parse_split(text: &str) -> Result<Vec<usize>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<usize>().map_err(|e| format!("bad split index '{l}': {e}")))
        .collect()
}
