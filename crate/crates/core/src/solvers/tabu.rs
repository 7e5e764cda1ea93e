//! Tabu multi-neighbourhood search.
//!
//! Each iteration scans every configured neighbourhood, evaluates moves by
//! constant-time cost deltas and applies the best admissible one. Edges
//! removed by a move stay tabu for `tabu_tenure` iterations; a move that
//! would re-insert a tabu edge is admissible only if it beats the best
//! solution found so far. Ties between equally good moves are broken by a
//! seeded random draw.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Neighborhood, SolverError, TabuConfig};
use crate::model::{route_length, Instance, Solution, SolutionSource};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
enum Move {
    /// Customer at padded position `p` of route `r` to slot `q` of route `s`.
    Relocate { r: usize, p: usize, s: usize, q: usize },
    Swap { r: usize, p: usize, s: usize, q: usize },
    /// Reverse padded positions `i..=j` of route `r`.
    TwoOpt { r: usize, i: usize, j: usize },
    /// Exchange the tails after the first `i` customers of `r` and `j` of `s`.
    TwoOptStar { r: usize, i: usize, s: usize, j: usize },
    OrOpt { r: usize, p: usize, len: usize, s: usize, q: usize, reversed: bool },
}

struct Candidate {
    delta: f64,
    mv: Move,
    removed: [(usize, usize); 4],
    n_removed: usize,
}

struct Search<'a> {
    inst: &'a Instance,
    routes: Vec<Vec<usize>>,
    loads: Vec<u64>,
    lengths: Vec<f64>,
    prefix: Vec<Vec<u64>>,
    tabu_until: Vec<usize>,
    stride: usize,
    iter: usize,
    cost: f64,
    best_cost: f64,
    rng: ChaCha8Rng,
    chosen: Option<Candidate>,
    ties: u32,
}

impl<'a> Search<'a> {
    #[inline]
    fn node(&self, r: usize, k: usize) -> usize {
        let route = &self.routes[r];
        if k == 0 || k > route.len() {
            0
        } else {
            route[k - 1]
        }
    }

    #[inline]
    fn d(&self, a: usize, b: usize) -> f64 {
        self.inst.dist(a, b)
    }

    #[inline]
    fn is_tabu(&self, a: usize, b: usize) -> bool {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.tabu_until[lo * self.stride + hi] > self.iter
    }

    fn consider(&mut self, delta: f64, mv: Move, added: &[(usize, usize)], removed: &[(usize, usize)]) {
        let aspiration = self.cost + delta < self.best_cost - EPS;
        if !aspiration && added.iter().any(|&(a, b)| self.is_tabu(a, b)) {
            return;
        }
        let mut rem = [(0, 0); 4];
        rem[..removed.len()].copy_from_slice(removed);
        let cand = Candidate { delta, mv, removed: rem, n_removed: removed.len() };
        match &self.chosen {
            None => {
                self.chosen = Some(cand);
                self.ties = 1;
            }
            Some(cur) if delta < cur.delta - 1e-12 => {
                self.chosen = Some(cand);
                self.ties = 1;
            }
            Some(cur) if delta <= cur.delta + 1e-12 => {
                self.ties += 1;
                if self.rng.gen_range(0..self.ties) == 0 {
                    self.chosen = Some(cand);
                }
            }
            _ => {}
        }
    }

    /// Index of the first empty route, if any; other empty routes are
    /// equivalent targets and skipped.
    fn first_empty(&self) -> Option<usize> {
        self.routes.iter().position(|r| r.is_empty())
    }

    fn skip_route(&self, s: usize, first_empty: Option<usize>) -> bool {
        self.routes[s].is_empty() && Some(s) != first_empty
    }

    fn scan_relocate(&mut self, first_empty: Option<usize>) {
        let q_cap = self.inst.capacity() as u64;
        for r in 0..self.routes.len() {
            let len_r = self.routes[r].len();
            for p in 1..=len_r {
                let u = self.node(r, p);
                let (a, b) = (self.node(r, p - 1), self.node(r, p + 1));
                let gain = self.d(a, b) - self.d(a, u) - self.d(u, b);
                let du = self.inst.demand(u) as u64;
                for s in 0..self.routes.len() {
                    if self.skip_route(s, first_empty) {
                        continue;
                    }
                    if s == r {
                        // slots of the route with u removed
                        for q in 0..len_r {
                            if q + 1 == p {
                                continue;
                            }
                            let at = |k: usize| if k < p { self.node(r, k) } else { self.node(r, k + 1) };
                            let (c, e) = (at(q), at(q + 1));
                            let delta = gain + self.d(c, u) + self.d(u, e) - self.d(c, e);
                            self.consider(delta, Move::Relocate { r, p, s, q }, &[(a, b), (c, u), (u, e)], &[
                                (a, u),
                                (u, b),
                                (c, e),
                            ]);
                        }
                    } else {
                        if self.loads[s] + du > q_cap {
                            continue;
                        }
                        for q in 0..=self.routes[s].len() {
                            let (c, e) = (self.node(s, q), self.node(s, q + 1));
                            let delta = gain + self.d(c, u) + self.d(u, e) - self.d(c, e);
                            self.consider(delta, Move::Relocate { r, p, s, q }, &[(a, b), (c, u), (u, e)], &[
                                (a, u),
                                (u, b),
                                (c, e),
                            ]);
                        }
                    }
                }
            }
        }
    }

    fn scan_swap(&mut self) {
        let q_cap = self.inst.capacity() as u64;
        let n_routes = self.routes.len();
        for r in 0..n_routes {
            for p in 1..=self.routes[r].len() {
                let u = self.node(r, p);
                let (a, b) = (self.node(r, p - 1), self.node(r, p + 1));
                let du = self.inst.demand(u) as u64;
                for s in r..n_routes {
                    let start = if s == r { p + 1 } else { 1 };
                    for q in start..=self.routes[s].len() {
                        let v = self.node(s, q);
                        let dv = self.inst.demand(v) as u64;
                        if s != r && (self.loads[r] - du + dv > q_cap || self.loads[s] - dv + du > q_cap) {
                            continue;
                        }
                        let (c, e) = (self.node(s, q - 1), self.node(s, q + 1));
                        if s == r && q == p + 1 {
                            let delta = self.d(a, v) + self.d(u, e) - self.d(a, u) - self.d(v, e);
                            self.consider(delta, Move::Swap { r, p, s, q }, &[(a, v), (u, e)], &[(a, u), (v, e)]);
                        } else {
                            let delta = self.d(a, v) + self.d(v, b) - self.d(a, u) - self.d(u, b) + self.d(c, u)
                                + self.d(u, e)
                                - self.d(c, v)
                                - self.d(v, e);
                            self.consider(
                                delta,
                                Move::Swap { r, p, s, q },
                                &[(a, v), (v, b), (c, u), (u, e)],
                                &[(a, u), (u, b), (c, v), (v, e)],
                            );
                        }
                    }
                }
            }
        }
    }

    fn scan_two_opt(&mut self, first_empty: Option<usize>) {
        let q_cap = self.inst.capacity() as u64;
        for r in 0..self.routes.len() {
            let len = self.routes[r].len();
            for i in 1..len {
                for j in (i + 1)..=len {
                    if i == 1 && j == len {
                        continue;
                    }
                    let (a, b, c, e) = (self.node(r, i - 1), self.node(r, i), self.node(r, j), self.node(r, j + 1));
                    let delta = self.d(a, c) + self.d(b, e) - self.d(a, b) - self.d(c, e);
                    self.consider(delta, Move::TwoOpt { r, i, j }, &[(a, c), (b, e)], &[(a, b), (c, e)]);
                }
            }
        }
        let n_routes = self.routes.len();
        for r in 0..n_routes {
            if self.routes[r].is_empty() {
                continue;
            }
            let len_r = self.routes[r].len();
            for s in (r + 1)..n_routes {
                if self.skip_route(s, first_empty) {
                    continue;
                }
                let len_s = self.routes[s].len();
                for i in 0..=len_r {
                    for j in 0..=len_s {
                        if (i == 0 && j == 0) || (i == len_r && j == len_s) {
                            continue;
                        }
                        let new_r = self.prefix[r][i] + (self.loads[s] - self.prefix[s][j]);
                        let new_s = self.prefix[s][j] + (self.loads[r] - self.prefix[r][i]);
                        if new_r > q_cap || new_s > q_cap {
                            continue;
                        }
                        let (x1, y1) = (self.node(r, i), self.node(r, i + 1));
                        let (x2, y2) = (self.node(s, j), self.node(s, j + 1));
                        let delta = self.d(x1, y2) + self.d(x2, y1) - self.d(x1, y1) - self.d(x2, y2);
                        self.consider(delta, Move::TwoOptStar { r, i, s, j }, &[(x1, y2), (x2, y1)], &[
                            (x1, y1),
                            (x2, y2),
                        ]);
                    }
                }
            }
        }
    }

    fn scan_or_opt(&mut self, first_empty: Option<usize>) {
        let q_cap = self.inst.capacity() as u64;
        for r in 0..self.routes.len() {
            let len_r = self.routes[r].len();
            for len in 2..=3usize {
                if len_r < len {
                    continue;
                }
                for p in 1..=(len_r + 1 - len) {
                    let first = self.node(r, p);
                    let last = self.node(r, p + len - 1);
                    let (a, b) = (self.node(r, p - 1), self.node(r, p + len));
                    let gain = self.d(a, b) - self.d(a, first) - self.d(last, b);
                    let seg_load = self.prefix[r][p + len - 1] - self.prefix[r][p - 1];
                    for s in 0..self.routes.len() {
                        if self.skip_route(s, first_empty) {
                            continue;
                        }
                        let slots = if s == r { len_r - len } else { self.routes[s].len() };
                        if s != r && self.loads[s] + seg_load > q_cap {
                            continue;
                        }
                        for q in 0..=slots {
                            if s == r && q + 1 == p {
                                continue;
                            }
                            let (c, e) = if s == r {
                                let at = |k: usize| if k < p { self.node(r, k) } else { self.node(r, k + len) };
                                (at(q), at(q + 1))
                            } else {
                                (self.node(s, q), self.node(s, q + 1))
                            };
                            for reversed in [false, true] {
                                let (h, t) = if reversed { (last, first) } else { (first, last) };
                                let delta = gain + self.d(c, h) + self.d(t, e) - self.d(c, e);
                                self.consider(
                                    delta,
                                    Move::OrOpt { r, p, len, s, q, reversed },
                                    &[(a, b), (c, h), (t, e)],
                                    &[(a, first), (last, b), (c, e)],
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    fn apply(&mut self, mv: Move) {
        let touched: [usize; 2] = match mv {
            Move::Relocate { r, p, s, q } => {
                let u = self.routes[r].remove(p - 1);
                self.routes[s].insert(q, u);
                [r, s]
            }
            Move::Swap { r, p, s, q } => {
                let u = self.routes[r][p - 1];
                let v = self.routes[s][q - 1];
                self.routes[r][p - 1] = v;
                self.routes[s][q - 1] = u;
                [r, s]
            }
            Move::TwoOpt { r, i, j } => {
                self.routes[r][i - 1..j].reverse();
                [r, r]
            }
            Move::TwoOptStar { r, i, s, j } => {
                let tail_r = self.routes[r].split_off(i);
                let tail_s = self.routes[s].split_off(j);
                self.routes[r].extend(tail_s);
                self.routes[s].extend(tail_r);
                [r, s]
            }
            Move::OrOpt { r, p, len, s, q, reversed } => {
                let mut seg: Vec<usize> = self.routes[r].drain(p - 1..p - 1 + len).collect();
                if reversed {
                    seg.reverse();
                }
                self.routes[s].splice(q..q, seg);
                [r, s]
            }
        };
        for &k in &touched {
            self.refresh(k);
        }
        self.cost = self.lengths.iter().sum();
    }

    fn refresh(&mut self, r: usize) {
        let route = &self.routes[r];
        let mut pre = Vec::with_capacity(route.len() + 1);
        pre.push(0u64);
        for &c in route {
            pre.push(pre.last().unwrap() + self.inst.demand(c) as u64);
        }
        self.loads[r] = *pre.last().unwrap();
        self.prefix[r] = pre;
        self.lengths[r] = route_length(self.inst, route);
    }
}

/// Tabu search from a feasible `start`. Never returns a worse objective than
/// `start`; if nothing better is found the start routes come back as is.
pub fn mns_lite(instance: &Instance, start: &Solution, cfg: &TabuConfig) -> Result<Solution, SolverError> {
    cfg.validate()?;
    start.validate(instance).map_err(SolverError::InfeasibleStart)?;

    let clock = Instant::now();
    let n_routes = start.routes.len();
    let stride = instance.n() + 1;
    let mut search = Search {
        inst: instance,
        routes: start.routes.clone(),
        loads: vec![0; n_routes],
        lengths: vec![0.0; n_routes],
        prefix: vec![Vec::new(); n_routes],
        tabu_until: vec![0; stride * stride],
        stride,
        iter: 0,
        cost: 0.0,
        best_cost: 0.0,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        chosen: None,
        ties: 0,
    };
    for r in 0..n_routes {
        search.refresh(r);
    }
    search.cost = search.lengths.iter().sum();
    search.best_cost = search.cost;
    let mut best_routes: Option<Vec<Vec<usize>>> = None;

    while search.iter < cfg.max_iterations {
        if clock.elapsed().as_millis() as u64 >= cfg.time_budget_ms {
            break;
        }
        let first_empty = search.first_empty();
        search.chosen = None;
        search.ties = 0;
        for nb in &cfg.neighborhoods {
            match nb {
                Neighborhood::Relocate => search.scan_relocate(first_empty),
                Neighborhood::Swap => search.scan_swap(),
                Neighborhood::TwoOpt => search.scan_two_opt(first_empty),
                Neighborhood::OrOpt => search.scan_or_opt(first_empty),
            }
        }
        let Some(cand) = search.chosen.take() else {
            break;
        };
        for &(a, b) in &cand.removed[..cand.n_removed] {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            search.tabu_until[lo * stride + hi] = search.iter + 1 + cfg.tabu_tenure;
        }
        search.apply(cand.mv);
        search.iter += 1;
        if search.cost < search.best_cost - EPS {
            search.best_cost = search.cost;
            best_routes = Some(search.routes.clone());
        }
    }

    match best_routes {
        Some(routes) => Ok(Solution::from_routes(instance, routes, SolutionSource::Mnslite)?),
        None => Ok(Solution { source: SolutionSource::Mnslite, gap_percent: None, ..start.clone() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{objective, CustomerLayout, DemandLaw, DepotPosition, GeneratorConfig};
    use crate::solvers::{clarke_wright, sweep};

    fn generated(n: usize, seed: u64) -> Instance {
        GeneratorConfig {
            n_customers: n,
            depot_position: DepotPosition::Random,
            customer_layout: CustomerLayout::Mixed,
            demand_law: DemandLaw::UniformSmall,
            target_route_size: 4,
            seed,
        }
        .generate()
    }

    #[test]
    fn improves_and_stays_feasible() {
        for seed in 0..10 {
            let inst = generated(25, seed);
            let start = sweep(&inst).unwrap();
            let cfg = TabuConfig { max_iterations: 200, seed, ..TabuConfig::default() };
            let out = mns_lite(&inst, &start, &cfg).unwrap();
            out.validate(&inst).unwrap();
            assert!(out.objective <= start.objective + 1e-9);
            assert!((objective(&inst, &out.routes).unwrap() - out.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let inst = generated(20, 3);
        let start = clarke_wright(&inst).unwrap();
        let cfg = TabuConfig { max_iterations: 150, seed: 42, ..TabuConfig::default() };
        assert_eq!(mns_lite(&inst, &start, &cfg).unwrap(), mns_lite(&inst, &start, &cfg).unwrap());
    }

    #[test]
    fn local_optimum_is_returned_unchanged() {
        use crate::model::{Customer, Point};
        // two customers far apart on opposite sides; separate routes are optimal
        let customers = vec![
            Customer { id: 2, point: Point::new(10.0, 0.0), demand: 3 },
            Customer { id: 3, point: Point::new(-10.0, 0.0), demand: 3 },
        ];
        let inst = Instance::new("lo", 1, Point::default(), customers, 4, Some(2), false).unwrap();
        let start = Solution::from_routes(&inst, vec![vec![1], vec![2]], SolutionSource::Sweep).unwrap();
        let out = mns_lite(&inst, &start, &TabuConfig { max_iterations: 50, ..TabuConfig::default() }).unwrap();
        assert_eq!(out.routes, start.routes);
        assert_eq!(out.objective, start.objective);
    }

    #[test]
    fn rejects_infeasible_start() {
        let inst = generated(8, 1);
        let start = Solution {
            instance_id: inst.id().into(),
            routes: vec![vec![1, 2]],
            objective: 0.0,
            source: SolutionSource::Sweep,
            gap_percent: None,
        };
        assert!(matches!(mns_lite(&inst, &start, &TabuConfig::default()), Err(SolverError::InfeasibleStart(_))));
    }

    /// Every neighbourhood alone must keep the delta bookkeeping exact.
    #[test]
    fn each_neighborhood_alone_is_consistent() {
        for nb in [Neighborhood::Relocate, Neighborhood::Swap, Neighborhood::TwoOpt, Neighborhood::OrOpt] {
            let inst = generated(18, 9);
            let start = sweep(&inst).unwrap();
            let cfg = TabuConfig { max_iterations: 60, neighborhoods: vec![nb], ..TabuConfig::default() };
            let out = mns_lite(&inst, &start, &cfg).unwrap();
            out.validate(&inst).unwrap();
            assert!(out.objective <= start.objective + 1e-9, "{nb:?}");
        }
    }
}
