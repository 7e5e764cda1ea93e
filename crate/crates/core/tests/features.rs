mod common;

use common::random_config;
use proptest::prelude::*;
use routelens::features::{extract, feature_index, DISTANCE_FEATURES, FEATURE_KEYS};
use routelens::model::{Customer, Instance, Point, Solution, SolutionSource};
use routelens::solvers::{clarke_wright, sweep};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn line_fixture() -> (Instance, Solution) {
    // customer k sits at (k, 0); routes alternate odd and even positions
    let customers =
        (1..=8).map(|k| Customer { id: k + 1, point: Point::new(k as f64, 0.0), demand: 1 }).collect();
    let inst = Instance::new("line8", 1, Point::new(0.0, -3.0), customers, 4, Some(2), false).unwrap();
    let sol = Solution::from_routes(&inst, vec![vec![1, 3, 5, 7], vec![2, 4, 6, 8]], SolutionSource::Sweep).unwrap();
    (inst, sol)
}

#[test]
fn neighbourhood_rank_fixture() {
    let (inst, sol) = line_fixture();
    // Every edge has length 2; the rank of its head is 1 + the number of
    // customers at distance 1 from the tail, other than the head itself.
    // route 1-3-5-7: 1->3: {2} = 2, 3->1: {2,4} = 3, 3->5: 3, 5->3: 3, 5->7: 3, 7->5: {6,8} = 3
    // route 2-4-6-8: 2->4: {1,3} = 3, 4->2: 3, 4->6: 3, 6->4: 3, 6->8: 3, 8->6: {7} = 2
    let expected = (2.0 + 3.0 * 5.0 + 3.0 * 5.0 + 2.0) / 12.0;
    let f = extract(&inst, &sol).unwrap();
    assert!((f.get("S18").unwrap() - expected).abs() < 1e-12);
    assert_eq!(f.get("S19").unwrap(), 1.0);
    assert_eq!(f.get("S20").unwrap(), 0.0);
    assert_eq!(f.get("I01").unwrap(), 8.0);
    assert_eq!(f.get("S07").unwrap(), 2.0 / 10.0);
}

fn heuristic(inst: &Instance, pick: bool) -> Solution {
    if pick {
        sweep(inst).unwrap()
    } else {
        clarke_wright(inst).unwrap()
    }
}

fn relabel(inst: &Instance, sol: &Solution, perm_seed: u64) -> (Instance, Solution) {
    // new position p holds old customer order[p]
    let n = inst.n();
    let mut order: Vec<usize> = (1..=n).collect();
    let mut s = perm_seed;
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        order.swap(i, (s >> 33) as usize % (i + 1));
    }
    let customers: Vec<Customer> = order
        .iter()
        .enumerate()
        .map(|(p, &old)| Customer { id: p as u32 + 2, point: inst.point(old), demand: inst.demand(old) })
        .collect();
    let mut new_index = vec![0; n + 1];
    for (p, &old) in order.iter().enumerate() {
        new_index[old] = p + 1;
    }
    let inst2 = Instance::new(inst.id(), 1, inst.depot(), customers, inst.capacity(), Some(inst.fleet_size()), false)
        .unwrap();
    let routes = sol.routes.iter().map(|r| r.iter().map(|&c| new_index[c]).collect()).collect();
    let sol2 = Solution::from_routes(&inst2, routes, sol.source).unwrap();
    (inst2, sol2)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 50, ..ProptestConfig::default() })]

    #[test]
    fn uniform_scaling_touches_only_distance_features(seed in 0u64..10_000, use_sweep: bool) {
        let inst = random_config(seed, 6, 30).generate();
        let sol = heuristic(&inst, use_sweep);
        let scaled = inst.map_points(|p| Point::new(2.5 * p.x, 2.5 * p.y)).unwrap();
        let a = extract(&inst, &sol).unwrap();
        let b = extract(&scaled, &Solution::from_routes(&scaled, sol.routes.clone(), sol.source).unwrap()).unwrap();
        for (j, key) in FEATURE_KEYS.iter().enumerate() {
            let factor = if DISTANCE_FEATURES.contains(key) { 2.5 } else { 1.0 };
            prop_assert!(close(b.values[j], factor * a.values[j]), "{key}: {} vs {}", b.values[j], a.values[j]);
        }
    }

    #[test]
    fn translation_changes_nothing(seed in 0u64..10_000, dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
        let inst = random_config(seed, 6, 25).generate();
        let sol = sweep(&inst).unwrap();
        let moved = inst.map_points(|p| Point::new(p.x + dx, p.y + dy)).unwrap();
        let a = extract(&inst, &sol).unwrap();
        let b = extract(&moved, &Solution::from_routes(&moved, sol.routes.clone(), sol.source).unwrap()).unwrap();
        for (j, key) in FEATURE_KEYS.iter().enumerate() {
            // coordinates near 1e3 lose a few ulps when shifted
            let tol = 1e-7 * a.values[j].abs().max(1.0);
            prop_assert!((a.values[j] - b.values[j]).abs() <= tol, "{key}: {} vs {}", a.values[j], b.values[j]);
        }
    }

    #[test]
    fn relabelling_customers_changes_nothing(seed in 0u64..10_000, perm in any::<u64>()) {
        let inst = random_config(seed, 6, 25).generate();
        let sol = clarke_wright(&inst).unwrap();
        let (inst2, sol2) = relabel(&inst, &sol, perm);
        let a = extract(&inst, &sol).unwrap();
        let b = extract(&inst2, &sol2).unwrap();
        for (j, key) in FEATURE_KEYS.iter().enumerate() {
            prop_assert!(close(a.values[j], b.values[j]), "{key}: {} vs {}", a.values[j], b.values[j]);
        }
    }

    #[test]
    fn reversing_routes_changes_nothing(seed in 0u64..10_000, mask in any::<u32>()) {
        let inst = random_config(seed, 6, 25).generate();
        let sol = sweep(&inst).unwrap();
        let routes = sol
            .routes
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut r = r.clone();
                if mask & (1 << (k % 32)) != 0 {
                    r.reverse();
                }
                r
            })
            .collect();
        let rev = Solution::from_routes(&inst, routes, sol.source).unwrap();
        let a = extract(&inst, &sol).unwrap();
        let b = extract(&inst, &rev).unwrap();
        for (j, key) in FEATURE_KEYS.iter().enumerate() {
            prop_assert!(close(a.values[j], b.values[j]), "{key}: {} vs {}", a.values[j], b.values[j]);
        }
    }
}

#[test]
fn distance_keys_are_known() {
    for key in DISTANCE_FEATURES {
        assert!(feature_index(key).is_some());
    }
}
