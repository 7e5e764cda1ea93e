//! Parallel Clarke-Wright savings construction.
//!
//! Every customer starts on its own out-and-back route. Pairs are scanned in
//! descending order of `s(i, j) = d(0, i) + d(0, j) - d(i, j)`, ties broken
//! by the lower `i` then the lower `j`; two routes merge when `i` and `j` are
//! endpoints of different routes and the combined load fits.

use std::collections::VecDeque;

use super::{fit_fleet, SolverError};
use crate::model::{Instance, Solution, SolutionSource};

pub fn clarke_wright(instance: &Instance) -> Result<Solution, SolverError> {
    let n = instance.n();
    let q = instance.capacity() as u64;
    let mut routes: Vec<Option<VecDeque<usize>>> = (0..=n).map(|c| (c > 0).then(|| VecDeque::from([c]))).collect();
    let mut route_of: Vec<usize> = (0..=n).collect();
    let mut loads: Vec<u64> = (0..=n).map(|c| instance.demand(c) as u64).collect();

    let mut savings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..=n {
        for j in (i + 1)..=n {
            let s = instance.dist(0, i) + instance.dist(0, j) - instance.dist(i, j);
            if s >= 0.0 {
                savings.push((s, i, j));
            }
        }
    }
    savings.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    for &(_, i, j) in &savings {
        let (ri, rj) = (route_of[i], route_of[j]);
        if ri == rj || loads[ri] + loads[rj] > q {
            continue;
        }
        let a = routes[ri].as_ref().expect("live route");
        let b = routes[rj].as_ref().expect("live route");
        let i_terminal = a.front() == Some(&i) || a.back() == Some(&i);
        let j_terminal = b.front() == Some(&j) || b.back() == Some(&j);
        if !i_terminal || !j_terminal {
            continue;
        }
        let mut a = routes[ri].take().expect("live route");
        let mut b = routes[rj].take().expect("live route");
        if a.back() != Some(&i) {
            a.make_contiguous().reverse();
        }
        if b.front() != Some(&j) {
            b.make_contiguous().reverse();
        }
        for &c in &b {
            route_of[c] = ri;
        }
        a.extend(b);
        loads[ri] += loads[rj];
        routes[ri] = Some(a);
    }

    let merged: Vec<Vec<usize>> = routes.into_iter().flatten().map(Vec::from).collect();
    let fitted = fit_fleet(instance, merged)?;
    Ok(Solution::from_routes(instance, fitted, SolutionSource::ClarkeWright)?)
}
