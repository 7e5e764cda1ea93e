//! Solution generators: Clarke-Wright savings, Sweep, a tabu multi-neighbourhood
//! search (`mns_lite`), an exact enumerator for small instances and the
//! optimal-class proxy built from them.

mod clarke_wright;
mod exact;
mod sweep;
mod tabu;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, ModelError, Solution, SolutionSource};

pub use clarke_wright::clarke_wright;
pub use exact::{solve_exact, EXACT_MAX_CUSTOMERS};
pub use sweep::{sweep, sweep_from_angle};
pub use tabu::mns_lite;

/// Largest instance for which [`optimal_proxy`] enumerates the true optimum.
pub const EXACT_PROXY_LIMIT: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("start solution is infeasible: {0}")]
    InfeasibleStart(ModelError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot fit {customers} customers into {fleet} vehicles")]
    FleetExceeded { customers: usize, fleet: u32 },
    #[error("instance has {0} customers; exact enumeration supports at most {EXACT_MAX_CUSTOMERS}")]
    TooLargeForExact(usize),
    #[error("gap requires solutions of the same instance ({near} vs {opt})")]
    InstanceMismatch { near: String, opt: String },
    #[error("optimal objective must be positive, got {0}")]
    NonPositiveOptimum(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    Relocate,
    Swap,
    TwoOpt,
    OrOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabuConfig {
    pub max_iterations: usize,
    pub tabu_tenure: usize,
    pub neighborhoods: Vec<Neighborhood>,
    pub seed: u64,
    pub time_budget_ms: u64,
}

impl Default for TabuConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tabu_tenure: 15,
            neighborhoods: vec![Neighborhood::Relocate, Neighborhood::Swap, Neighborhood::TwoOpt, Neighborhood::OrOpt],
            seed: 0,
            time_budget_ms: 600_000,
        }
    }
}

impl TabuConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iterations == 0 {
            return Err(SolverError::InvalidConfig("max_iterations must be positive".into()));
        }
        if self.tabu_tenure == 0 || self.tabu_tenure >= self.max_iterations {
            return Err(SolverError::InvalidConfig("tabu_tenure must be in 1..max_iterations".into()));
        }
        if self.neighborhoods.is_empty() {
            return Err(SolverError::InvalidConfig("at least one neighborhood is required".into()));
        }
        if self.time_budget_ms == 0 {
            return Err(SolverError::InvalidConfig("time_budget_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// How the positive-class solution of an instance was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalRegime {
    /// Proven optimum from exhaustive enumeration.
    Exact,
    /// Best of several tabu restarts.
    Restarts,
    /// Loaded from a published solution file.
    Provided,
}

impl OptimalRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimalRegime::Exact => "exact",
            OptimalRegime::Restarts => "restarts",
            OptimalRegime::Provided => "provided",
        }
    }
}

/// Relative excess of `near` over `opt`, in percent.
pub fn gap_to_optimal(near: &Solution, opt: &Solution) -> Result<f64, SolverError> {
    if near.instance_id != opt.instance_id {
        return Err(SolverError::InstanceMismatch { near: near.instance_id.clone(), opt: opt.instance_id.clone() });
    }
    if opt.objective <= 0.0 || !opt.objective.is_finite() {
        return Err(SolverError::NonPositiveOptimum(opt.objective));
    }
    Ok((near.objective - opt.objective) / opt.objective * 100.0)
}

/// Positive-class solution: exact optimum for up to [`EXACT_PROXY_LIMIT`]
/// customers, otherwise the best of `restarts` (at least 10) tabu runs from
/// distinct seeds and starts.
pub fn optimal_proxy(
    instance: &Instance,
    cfg: &TabuConfig,
    restarts: usize,
) -> Result<(Solution, OptimalRegime), SolverError> {
    cfg.validate()?;
    if instance.n() <= EXACT_PROXY_LIMIT {
        let mut sol = solve_exact(instance)?;
        sol.source = SolutionSource::OptimalProxy;
        return Ok((sol, OptimalRegime::Exact));
    }
    if restarts < 10 {
        return Err(SolverError::InvalidConfig(format!("optimal proxy needs at least 10 restarts, got {restarts}")));
    }
    let runs: Vec<Result<Solution, SolverError>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let seed = crate::derive_seed(cfg.seed, r as u64);
            let start = match r {
                0 => clarke_wright(instance)?,
                1 => sweep(instance)?,
                _ => {
                    let angle = (seed >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
                    sweep_from_angle(instance, angle)?
                }
            };
            mns_lite(instance, &start, &cfg.with_seed(seed))
        })
        .collect();
    let mut best: Option<Solution> = None;
    for run in runs {
        let sol = run?;
        if best.as_ref().is_none_or(|b| sol.objective < b.objective) {
            best = Some(sol);
        }
    }
    let mut best = best.expect("at least one restart");
    best.source = SolutionSource::OptimalProxy;
    best.gap_percent = Some(0.0);
    Ok((best, OptimalRegime::Restarts))
}

/// Improves a single route's visiting order with best-improvement 2-opt
/// until no improving reversal remains.
pub(crate) fn two_opt_route(instance: &Instance, route: &mut [usize]) {
    let len = route.len();
    if len < 3 {
        return;
    }
    let node = |route: &[usize], k: usize| if k == 0 || k == len + 1 { 0 } else { route[k - 1] };
    loop {
        let mut best = (-1e-10, 0, 0);
        for i in 1..len {
            for j in (i + 1)..=len {
                if i == 1 && j == len {
                    continue;
                }
                let (a, b, c, e) = (node(route, i - 1), node(route, i), node(route, j), node(route, j + 1));
                let delta = instance.dist(a, c) + instance.dist(b, e) - instance.dist(a, b) - instance.dist(c, e);
                if delta < best.0 {
                    best = (delta, i, j);
                }
            }
        }
        if best.1 == 0 {
            break;
        }
        route[best.1 - 1..best.2].reverse();
    }
}

/// Brings a route set within the fleet size: repeatedly dissolves the
/// lightest route whose customers all fit elsewhere (cheapest insertion),
/// falling back to a first-fit-decreasing packing.
pub(crate) fn fit_fleet(instance: &Instance, mut routes: Vec<Vec<usize>>) -> Result<Vec<Vec<usize>>, SolverError> {
    let fleet = instance.fleet_size() as usize;
    let q = instance.capacity() as u64;
    routes.retain(|r| !r.is_empty());
    while routes.len() > fleet {
        let loads: Vec<u64> = routes.iter().map(|r| r.iter().map(|&c| instance.demand(c) as u64).sum()).collect();
        let mut order: Vec<usize> = (0..routes.len()).collect();
        order.sort_by_key(|&r| (loads[r], r));
        let mut dissolved = false;
        for cand in order {
            let mut trial: Vec<Vec<usize>> =
                routes.iter().enumerate().filter(|&(r, _)| r != cand).map(|(_, r)| r.clone()).collect();
            let mut trial_loads: Vec<u64> =
                loads.iter().enumerate().filter(|&(r, _)| r != cand).map(|(_, &l)| l).collect();
            let mut members = routes[cand].clone();
            members.sort_by_key(|&c| (std::cmp::Reverse(instance.demand(c)), c));
            let mut ok = true;
            for c in members {
                let d = instance.demand(c) as u64;
                let mut best: Option<(f64, usize, usize)> = None;
                for (r, route) in trial.iter().enumerate() {
                    if trial_loads[r] + d > q {
                        continue;
                    }
                    for pos in 0..=route.len() {
                        let prev = if pos == 0 { 0 } else { route[pos - 1] };
                        let next = if pos == route.len() { 0 } else { route[pos] };
                        let cost = instance.dist(prev, c) + instance.dist(c, next) - instance.dist(prev, next);
                        if best.is_none_or(|(b, _, _)| cost < b) {
                            best = Some((cost, r, pos));
                        }
                    }
                }
                match best {
                    Some((_, r, pos)) => {
                        trial[r].insert(pos, c);
                        trial_loads[r] += d;
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                routes = trial;
                dissolved = true;
                break;
            }
        }
        if !dissolved {
            return pack_first_fit(instance);
        }
    }
    Ok(routes)
}

fn pack_first_fit(instance: &Instance) -> Result<Vec<Vec<usize>>, SolverError> {
    let q = instance.capacity() as u64;
    let mut customers: Vec<usize> = (1..=instance.n()).collect();
    customers.sort_by_key(|&c| (std::cmp::Reverse(instance.demand(c)), c));
    let mut bins: Vec<(u64, Vec<usize>)> = Vec::new();
    for c in customers {
        let d = instance.demand(c) as u64;
        match bins.iter_mut().find(|(l, _)| l + d <= q) {
            Some((l, members)) => {
                *l += d;
                members.push(c);
            }
            None => bins.push((d, vec![c])),
        }
    }
    if bins.len() > instance.fleet_size() as usize {
        return Err(SolverError::FleetExceeded { customers: instance.n(), fleet: instance.fleet_size() });
    }
    let depot = instance.depot();
    Ok(bins
        .into_iter()
        .map(|(_, mut members)| {
            members.sort_by(|&a, &b| {
                let pa = instance.point(a);
                let pb = instance.point(b);
                let ta = (pa.y - depot.y).atan2(pa.x - depot.x);
                let tb = (pb.y - depot.y).atan2(pb.x - depot.x);
                ta.total_cmp(&tb).then(a.cmp(&b))
            });
            two_opt_route(instance, &mut members);
            members
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, Point};

    fn sol(obj: f64, id: &str) -> Solution {
        Solution {
            instance_id: id.into(),
            routes: vec![],
            objective: obj,
            source: SolutionSource::Sweep,
            gap_percent: None,
        }
    }

    #[test]
    fn gap_examples() {
        assert!((gap_to_optimal(&sol(110.0, "a"), &sol(100.0, "a")).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(gap_to_optimal(&sol(100.0, "a"), &sol(100.0, "a")).unwrap(), 0.0);
        assert!((gap_to_optimal(&sol(103.5, "a"), &sol(100.0, "a")).unwrap() - 3.5).abs() < 1e-12);
        assert!(matches!(gap_to_optimal(&sol(1.0, "a"), &sol(1.0, "b")), Err(SolverError::InstanceMismatch { .. })));
        assert!(matches!(gap_to_optimal(&sol(1.0, "a"), &sol(0.0, "a")), Err(SolverError::NonPositiveOptimum(_))));
    }

    #[test]
    fn tabu_config_validation() {
        assert!(TabuConfig::default().validate().is_ok());
        let bad = TabuConfig { tabu_tenure: 10, max_iterations: 10, ..TabuConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TabuConfig { neighborhoods: vec![], ..TabuConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn proxy_of_single_customer() {
        let inst = Instance::new(
            "one",
            1,
            Point::default(),
            vec![Customer { id: 2, point: Point::new(3.0, 4.0), demand: 1 }],
            5,
            None,
            false,
        )
        .unwrap();
        let (s, regime) = optimal_proxy(&inst, &TabuConfig::default(), 10).unwrap();
        assert_eq!(regime, OptimalRegime::Exact);
        assert_eq!(s.routes, vec![vec![1]]);
        assert_eq!(s.objective, 10.0);
    }

    #[test]
    fn fleet_repair_dissolves_light_routes() {
        let customers = (0..6)
            .map(|i| Customer { id: i + 2, point: Point::new((i as f64 + 1.0) * 10.0, 5.0), demand: 1 })
            .collect();
        let inst = Instance::new("r", 1, Point::default(), customers, 3, Some(2), false).unwrap();
        let routes = fit_fleet(&inst, vec![vec![1, 2], vec![3, 4], vec![5, 6]]).unwrap();
        assert_eq!(routes.len(), 2);
        let s = Solution::from_routes(&inst, routes, SolutionSource::Sweep).unwrap();
        s.validate(&inst).unwrap();
    }
}
