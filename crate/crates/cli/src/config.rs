//! Pipeline configuration, stored as TOML.

use std::path::{Path, PathBuf};

use routelens::explain::ExplainSettings;
use routelens::learn::{ModelKind, ModelSpec};
use routelens::model::{CustomerLayout, DemandLaw, DepotPosition};
use routelens::scenarios::DEFAULT_THRESHOLDS;
use routelens::{Estimator, ScenarioId, TabuConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    /// Absent when the corpus already exists under `out_dir`.
    pub corpus: Option<CorpusConfig>,
    pub solver: SolverConfig,
    pub scenarios: ScenarioConfig,
    pub learn: LearnConfig,
    pub explain: ExplainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_instances: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub depot_positions: Vec<DepotPosition>,
    pub customer_layouts: Vec<CustomerLayout>,
    pub demand_laws: Vec<DemandLaw>,
    pub route_sizes: Vec<usize>,
    pub seed: u64,
    /// Directory of `.vrp` instances, each optionally paired with a `.sol`
    /// file of the same stem holding its optimal solution. Replaces the
    /// generator when set.
    pub instance_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Tabu search producing the near-optimal `mnslite` solutions.
    pub mnslite: TabuConfig,
    /// Tabu search behind each optimal-proxy restart.
    pub proxy: TabuConfig,
    pub restarts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub test_fraction: f64,
    pub thresholds: [f64; 5],
    pub selected: Vec<ScenarioId>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub classifiers: Vec<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainConfig {
    pub estimator: Estimator,
    pub n_permutations: usize,
    pub background_size: usize,
    pub max_rows: usize,
    pub seed: u64,
}

impl ExplainConfig {
    pub fn settings(&self) -> ExplainSettings {
        ExplainSettings {
            estimator: self.estimator,
            n_permutations: self.n_permutations,
            background_size: self.background_size,
            max_rows: self.max_rows,
            seed: self.seed,
        }
    }
}

impl Default for PipelineConfig {
    /// Desk-scale defaults: 100 generated instances with 20 customers.
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            corpus: Some(CorpusConfig {
                n_instances: 100,
                n_min: 20,
                n_max: 20,
                depot_positions: vec![DepotPosition::Central, DepotPosition::Corner, DepotPosition::Random],
                customer_layouts: vec![CustomerLayout::Uniform, CustomerLayout::Clustered, CustomerLayout::Mixed],
                demand_laws: vec![DemandLaw::Unit, DemandLaw::UniformSmall, DemandLaw::QuadrantSkewed],
                route_sizes: vec![3, 5, 8],
                seed: 1,
                instance_dir: None,
            }),
            solver: SolverConfig {
                mnslite: TabuConfig { seed: 2, ..TabuConfig::default() },
                proxy: TabuConfig { seed: 3, ..TabuConfig::default() },
                restarts: 10,
            },
            scenarios: ScenarioConfig {
                test_fraction: 0.25,
                thresholds: DEFAULT_THRESHOLDS,
                selected: ScenarioId::ALL.to_vec(),
                seed: 4,
            },
            learn: LearnConfig { classifiers: ModelKind::ALL.iter().map(|&k| ModelSpec::default_for(k).with_seed(5)).collect() },
            explain: ExplainConfig {
                estimator: Estimator::TreePath,
                n_permutations: 200,
                background_size: 64,
                max_rows: 200,
                seed: 6,
            },
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Replaces every section seed with `seed`; each stage derives its own
    /// streams from its seed, so one value is enough.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(c) = &mut self.corpus {
            c.seed = seed;
        }
        self.solver.mnslite.seed = seed;
        self.solver.proxy.seed = seed;
        self.scenarios.seed = seed;
        for spec in &mut self.learn.classifiers {
            spec.seed = seed;
        }
        self.explain.seed = seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(c) = &self.corpus {
            if c.instance_dir.is_none() {
                if c.n_instances == 0 {
                    return bad("corpus.n_instances must be positive".into());
                }
                if c.n_min < 2 || c.n_min > c.n_max {
                    return bad(format!("corpus size range {}..={} is invalid (need 2 <= n_min <= n_max)", c.n_min, c.n_max));
                }
                if c.depot_positions.is_empty() || c.customer_layouts.is_empty() || c.demand_laws.is_empty() {
                    return bad("corpus generator axes must be non-empty".into());
                }
                if c.route_sizes.is_empty() || c.route_sizes.contains(&0) {
                    return bad("corpus.route_sizes must be non-empty and positive".into());
                }
            }
        }
        for (name, t) in [("mnslite", &self.solver.mnslite), ("proxy", &self.solver.proxy)] {
            t.validate().map_err(|e| CliError::Config(format!("solver.{name}: {e}")))?;
        }
        if self.solver.restarts < 10 {
            return bad(format!("solver.restarts must be at least 10, got {}", self.solver.restarts));
        }
        routelens::scenarios::ScenarioSpec::standard_set(self.scenarios.thresholds)
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.scenarios.test_fraction > 0.0 && self.scenarios.test_fraction < 1.0) {
            return bad(format!("scenarios.test_fraction must lie in (0, 1), got {}", self.scenarios.test_fraction));
        }
        if self.scenarios.selected.is_empty() {
            return bad("scenarios.selected must name at least one scenario".into());
        }
        let mut seen = self.scenarios.selected.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.scenarios.selected.len() {
            return bad("scenarios.selected lists a scenario twice".into());
        }
        if self.learn.classifiers.is_empty() {
            return bad("learn.classifiers must not be empty".into());
        }
        let mut kinds: Vec<ModelKind> = self.learn.classifiers.iter().map(|s| s.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.learn.classifiers.len() {
            return bad("learn.classifiers lists a kind twice".into());
        }
        for spec in &self.learn.classifiers {
            spec.validate().map_err(|e| CliError::Config(format!("learn.{}: {e}", spec.kind)))?;
        }
        if self.explain.background_size == 0 || self.explain.max_rows == 0 || self.explain.n_permutations == 0 {
            return bad("explain.background_size, max_rows and n_permutations must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut text = PipelineConfig::default().to_toml();
        text = text.replace("restarts = 10", "restarts = 3");
        assert!(matches!(PipelineConfig::from_toml(&text), Err(CliError::Config(m)) if m.contains("restarts")));
        let extra = format!("bogus = 1\n{}", PipelineConfig::default().to_toml());
        assert!(PipelineConfig::from_toml(&extra).is_err());
    }

    #[test]
    fn seed_override_reaches_every_section() {
        let mut cfg = PipelineConfig::default();
        cfg.override_seed(77);
        assert_eq!(cfg.corpus.as_ref().unwrap().seed, 77);
        assert!(cfg.learn.classifiers.iter().all(|s| s.seed == 77));
        assert_eq!((cfg.solver.proxy.seed, cfg.explain.seed, cfg.scenarios.seed), (77, 77, 77));
    }
}
