//! Sweep construction: customers sorted by polar angle about the depot
//! (ties by radius), packed greedily into routes, each route then 2-opted.

use std::f64::consts::TAU;

use super::{fit_fleet, two_opt_route, SolverError};
use crate::model::{Instance, Solution, SolutionSource};

pub fn sweep(instance: &Instance) -> Result<Solution, SolverError> {
    sweep_from_angle(instance, 0.0)
}

/// Sweep starting at polar angle `start` (radians, counter-clockwise).
pub fn sweep_from_angle(instance: &Instance, start: f64) -> Result<Solution, SolverError> {
    let depot = instance.depot();
    let mut keyed: Vec<(f64, f64, usize)> = (1..=instance.n())
        .map(|c| {
            let p = instance.point(c);
            let (dx, dy) = (p.x - depot.x, p.y - depot.y);
            let radius = dx.hypot(dy);
            let theta = if radius == 0.0 { 0.0 } else { dy.atan2(dx) };
            ((theta - start).rem_euclid(TAU), radius, c)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let q = instance.capacity() as u64;
    let mut routes: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut load = 0u64;
    for (_, _, c) in keyed {
        let d = instance.demand(c) as u64;
        if load + d > q {
            routes.push(std::mem::take(&mut current));
            load = 0;
        }
        current.push(c);
        load += d;
    }
    if !current.is_empty() {
        routes.push(current);
    }
    for route in &mut routes {
        two_opt_route(instance, route);
    }
    let fitted = fit_fleet(instance, routes)?;
    Ok(Solution::from_routes(instance, fitted, SolutionSource::Sweep)?)
}
