//! Structural analysis of capacitated vehicle routing solutions.
//!
//! The crate covers the whole analysis chain: CVRP instances and solutions
//! ([`model`]), construction heuristics and a tabu search that produce
//! solutions of graded quality ([`solvers`]), the 31 structural features
//! computed for an (instance, solution) pair ([`features`]), labelled
//! scenario datasets ([`scenarios`]), binary classifiers with their
//! precision/recall/F-beta evaluation ([`learn`]) and Shapley attributions
//! aggregated across scenarios ([`explain`]).

pub mod explain;
pub mod features;
pub mod learn;
pub mod model;
pub mod scenarios;
pub mod solvers;

pub use explain::{Estimator, Explanation, ScenarioImportance, UnifiedImportance};
pub use features::{FeatureVector, FEATURE_KEYS, N_FEATURES};
pub use learn::{ConfusionMatrix, Evaluation, ModelKind, ModelSpec, TrainedModel};
pub use model::{GeneratorConfig, Instance, Point, Solution, SolutionSource};
pub use scenarios::{ScenarioDataset, ScenarioId, ScenarioSpec};
pub use solvers::TabuConfig;

pub(crate) mod stats {
    /// Population mean; 0 for an empty slice.
    pub fn mean(xs: &[f64]) -> f64 {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    }

    /// Population standard deviation; 0 for fewer than two values.
    pub fn sd(xs: &[f64]) -> f64 {
        if xs.len() < 2 {
            return 0.0;
        }
        let m = mean(xs);
        let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        var.max(0.0).sqrt()
    }

    pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
        (mean(xs), sd(xs))
    }
}

/// Derives an independent stream seed from a base seed and a stream index
/// (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
