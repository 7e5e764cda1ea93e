//! Exact optimum for small instances: Held-Karp over every capacity-feasible
//! customer subset, then a dynamic program over set partitions with at most
//! `fleet_size` parts.

use super::SolverError;
use crate::model::{Instance, Solution, SolutionSource};

pub const EXACT_MAX_CUSTOMERS: usize = 12;

pub fn solve_exact(instance: &Instance) -> Result<Solution, SolverError> {
    let n = instance.n();
    if n > EXACT_MAX_CUSTOMERS {
        return Err(SolverError::TooLargeForExact(n));
    }
    if n == 0 {
        return Ok(Solution::from_routes(instance, Vec::new(), SolutionSource::OptimalProxy)?);
    }
    let full = (1usize << n) - 1;
    let q = instance.capacity() as u64;
    let cust = |bit: usize| bit + 1;

    let mut load = vec![0u64; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        load[mask] = load[mask & (mask - 1)] + instance.demand(cust(low)) as u64;
    }

    // path[mask * n + last]: shortest depot -> ... -> last covering mask
    let mut path = vec![f64::INFINITY; (full + 1) * n];
    let mut parent = vec![u8::MAX; (full + 1) * n];
    for b in 0..n {
        path[(1 << b) * n + b] = instance.dist(0, cust(b));
    }
    for mask in 1..=full {
        if load[mask] > q {
            continue;
        }
        for last in 0..n {
            let cur = path[mask * n + last];
            if mask & (1 << last) == 0 || !cur.is_finite() {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nm = mask | (1 << next);
                if load[nm] > q {
                    continue;
                }
                let cand = cur + instance.dist(cust(last), cust(next));
                if cand < path[nm * n + next] {
                    path[nm * n + next] = cand;
                    parent[nm * n + next] = last as u8;
                }
            }
        }
    }
    let mut tour = vec![f64::INFINITY; full + 1];
    let mut tour_end = vec![0usize; full + 1];
    for mask in 1..=full {
        if load[mask] > q {
            continue;
        }
        for last in 0..n {
            if mask & (1 << last) == 0 {
                continue;
            }
            let c = path[mask * n + last] + instance.dist(cust(last), 0);
            if c < tour[mask] {
                tour[mask] = c;
                tour_end[mask] = last;
            }
        }
    }

    let max_routes = (instance.fleet_size() as usize).min(n);
    // best[k][mask]: cheapest cover of mask by exactly k routes
    let mut best = vec![vec![f64::INFINITY; full + 1]; max_routes + 1];
    let mut choice = vec![vec![0usize; full + 1]; max_routes + 1];
    best[0][0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // enumerate subsets that contain the lowest customer
        let mut sub = rest;
        loop {
            let part = sub | low;
            if tour[part].is_finite() {
                let remainder = mask ^ part;
                for k in 1..=max_routes {
                    let cand = tour[part] + best[k - 1][remainder];
                    if cand < best[k][mask] {
                        best[k][mask] = cand;
                        choice[k][mask] = part;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let (routes_used, _) = (1..=max_routes)
        .map(|k| (k, best[k][full]))
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    if routes_used == 0 {
        return Err(SolverError::FleetExceeded { customers: n, fleet: instance.fleet_size() });
    }

    let mut routes = Vec::with_capacity(routes_used);
    let (mut mask, mut k) = (full, routes_used);
    while mask != 0 {
        let part = choice[k][mask];
        routes.push(rebuild_tour(part, tour_end[part], n, &parent));
        mask ^= part;
        k -= 1;
    }
    Ok(Solution::from_routes(instance, routes, SolutionSource::OptimalProxy)?)
}

fn rebuild_tour(mut mask: usize, mut last: usize, n: usize, parent: &[u8]) -> Vec<usize> {
    let mut rev = Vec::new();
    loop {
        rev.push(last + 1);
        let p = parent[mask * n + last];
        mask ^= 1 << last;
        if mask == 0 {
            break;
        }
        last = p as usize;
    }
    rev.reverse();
    rev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Customer, Point};

    #[test]
    fn square_with_tight_capacity() {
        // four customers on the corners of a square around the depot, Q = 2
        let pts = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        let customers = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Customer { id: i as u32 + 2, point: Point::new(x, y), demand: 1 })
            .collect();
        let inst = Instance::new("sq", 1, Point::default(), customers, 2, None, false).unwrap();
        let s = solve_exact(&inst).unwrap();
        s.validate(&inst).unwrap();
        assert_eq!(s.routes.len(), 2);
        let expected = 4.0 * 2f64.sqrt() + 4.0;
        assert!((s.objective - expected).abs() < 1e-9);
    }

    #[test]
    fn refuses_large_instances() {
        let customers = (0..13)
            .map(|i| Customer { id: i + 2, point: Point::new(i as f64, 1.0), demand: 1 })
            .collect();
        let inst = Instance::new("big", 1, Point::default(), customers, 20, None, false).unwrap();
        assert_eq!(solve_exact(&inst).unwrap_err(), SolverError::TooLargeForExact(13));
    }
}
