use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Instance, ModelError};

/// Which generator produced a solution. The declaration order is the
/// canonical row order used in every report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSource {
    OptimalProxy,
    Mnslite,
    ClarkeWright,
    Sweep,
}

impl SolutionSource {
    pub const ALL: [SolutionSource; 4] = [
        SolutionSource::OptimalProxy,
        SolutionSource::Mnslite,
        SolutionSource::ClarkeWright,
        SolutionSource::Sweep,
    ];

    pub const HEURISTICS: [SolutionSource; 3] =
        [SolutionSource::Mnslite, SolutionSource::ClarkeWright, SolutionSource::Sweep];

    pub fn as_str(self) -> &'static str {
        match self {
            SolutionSource::OptimalProxy => "optimal_proxy",
            SolutionSource::Mnslite => "mnslite",
            SolutionSource::ClarkeWright => "clarke_wright",
            SolutionSource::Sweep => "sweep",
        }
    }
}

impl fmt::Display for SolutionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolutionSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolutionSource::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| format!("unknown solution source '{s}'"))
    }
}

/// A set of routes over internal customer indices (`1..=n`).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub instance_id: String,
    pub routes: Vec<Vec<usize>>,
    pub objective: f64,
    pub source: SolutionSource,
    pub gap_percent: Option<f64>,
}

impl Solution {
    /// Builds a solution with its objective recomputed from the routes.
    /// Empty routes are dropped.
    pub fn from_routes(
        instance: &Instance,
        routes: Vec<Vec<usize>>,
        source: SolutionSource,
    ) -> Result<Self, ModelError> {
        let routes: Vec<Vec<usize>> = routes.into_iter().filter(|r| !r.is_empty()).collect();
        let objective = objective(instance, &routes)?;
        Ok(Self {
            instance_id: instance.id().to_string(),
            routes,
            objective,
            source,
            gap_percent: None,
        })
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap_percent = Some(gap);
        self
    }

    /// Checks every solution invariant against `instance`.
    pub fn validate(&self, instance: &Instance) -> Result<(), ModelError> {
        if self.instance_id != instance.id() {
            return Err(ModelError::InstanceMismatch {
                expected: instance.id().to_string(),
                found: self.instance_id.clone(),
            });
        }
        let n = instance.n();
        let mut seen = vec![false; n + 1];
        for (r, route) in self.routes.iter().enumerate() {
            if route.is_empty() {
                return Err(ModelError::EmptyRoute(r));
            }
            let mut load = 0u64;
            for &c in route {
                if c == 0 || c > n {
                    return Err(ModelError::UnknownCustomer(c));
                }
                if seen[c] {
                    return Err(ModelError::RepeatedCustomer(c));
                }
                seen[c] = true;
                load += instance.demand(c) as u64;
            }
            if load > instance.capacity() as u64 {
                return Err(ModelError::Overloaded { route: r, load, capacity: instance.capacity() });
            }
        }
        if let Some(c) = (1..=n).find(|&c| !seen[c]) {
            return Err(ModelError::MissingCustomer(c));
        }
        if self.routes.len() > instance.fleet_size() as usize {
            return Err(ModelError::TooManyRoutes { routes: self.routes.len(), fleet: instance.fleet_size() });
        }
        let recomputed = objective(instance, &self.routes)?;
        let tol = 1e-9 * recomputed.abs().max(1.0);
        if (recomputed - self.objective).abs() > tol {
            return Err(ModelError::ObjectiveMismatch { stored: self.objective, recomputed });
        }
        Ok(())
    }

    pub fn route_loads(&self, instance: &Instance) -> Vec<u64> {
        self.routes
            .iter()
            .map(|r| r.iter().map(|&c| instance.demand(c) as u64).sum())
            .collect()
    }
}

/// Length of depot -> route[0] -> ... -> route[k-1] -> depot.
pub fn route_length(instance: &Instance, route: &[usize]) -> f64 {
    let Some((&first, &last)) = route.first().zip(route.last()) else {
        return 0.0;
    };
    let inner: f64 = route.windows(2).map(|w| instance.dist(w[0], w[1])).sum();
    instance.dist(0, first) + inner + instance.dist(last, 0)
}

/// Total distance of a route set under the instance metric.
pub fn objective(instance: &Instance, routes: &[Vec<usize>]) -> Result<f64, ModelError> {
    let n = instance.n();
    let mut total = 0.0;
    for route in routes {
        if let Some(&bad) = route.iter().find(|&&c| c == 0 || c > n) {
            return Err(ModelError::UnknownCustomer(bad));
        }
        total += route_length(instance, route);
    }
    Ok(total)
}
