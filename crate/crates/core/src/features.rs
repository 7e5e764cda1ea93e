//! The 31 structural features of an (instance, solution) pair: nine
//! instance features `I01..I09` and 22 solution features `S01..S22`.
//!
//! All angles and distances are measured about the depot. Standard
//! deviations are population standard deviations, so single-route solutions
//! have every route-level SD equal to 0.
//!
//! | key | meaning |
//! |-----|---------|
//! | I01 | number of customers |
//! | I02 | fleet size |
//! | I03 | total demand / (fleet size x capacity) |
//! | I04, I05 | mean, SD of all customer-pair distances |
//! | I06, I07 | mean, SD of customer-depot distances |
//! | I08, I09 | mean, SD of each customer's absolute angular deviation from the demand-weighted circular mean direction |
//! | S01, S02 | route width: spread of the customers projected on the axis perpendicular to depot -> route centroid |
//! | S03, S04 | route span: angle of the smallest sector at the depot holding the route |
//! | S05, S06 | route depth: farthest customer from the depot |
//! | S07 | routes / solution edges |
//! | S08 | mean over routes of the longest edge |
//! | S09 | mean over routes of longest edge / route length |
//! | S10 | longest solution edge / mean solution edge |
//! | S11 | mean depot-adjacent edge length |
//! | S12 | mean demand of depot-adjacent customers |
//! | S13, S14 | demand of each route's deepest customer (largest demand among ties) |
//! | S15 | SD of route lengths |
//! | S16, S17 | distance from depot to route centroid |
//! | S18 | mean nearest-neighbour rank over customer-customer edges, both directions |
//! | S19, S20 | route load / capacity |
//! | S21, S22 | per-route maximum pairwise relatedness `1 / (1 + d / d_max)` |

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Instance, Point, Solution, SolutionSource};
use crate::stats::{mean, mean_sd};

pub const N_INSTANCE_FEATURES: usize = 9;
pub const N_SOLUTION_FEATURES: usize = 22;
pub const N_FEATURES: usize = N_INSTANCE_FEATURES + N_SOLUTION_FEATURES;

pub const FEATURE_KEYS: [&str; N_FEATURES] = [
    "I01", "I02", "I03", "I04", "I05", "I06", "I07", "I08", "I09", "S01", "S02", "S03", "S04", "S05", "S06", "S07",
    "S08", "S09", "S10", "S11", "S12", "S13", "S14", "S15", "S16", "S17", "S18", "S19", "S20", "S21", "S22",
];

/// Features that scale linearly with the coordinates; every other feature is
/// invariant under uniform scaling.
pub const DISTANCE_FEATURES: [&str; 13] =
    ["I04", "I05", "I06", "I07", "S01", "S02", "S05", "S06", "S08", "S11", "S15", "S16", "S17"];

pub fn feature_index(key: &str) -> Option<usize> {
    FEATURE_KEYS.iter().position(|k| *k == key)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("solution has no routes")]
    EmptySolution,
    #[error("solution is infeasible: {0}")]
    Infeasible(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub instance_id: String,
    pub source: SolutionSource,
    pub values: [f64; N_FEATURES],
}

impl FeatureVector {
    pub fn get(&self, key: &str) -> Option<f64> {
        feature_index(key).map(|i| self.values[i])
    }
}

fn angle_about(depot: Point, p: Point) -> f64 {
    let (dx, dy) = (p.x - depot.x, p.y - depot.y);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dy.atan2(dx)
    }
}

/// Absolute difference of two angles folded into `[0, pi]`.
fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

pub fn extract_instance_features(instance: &Instance) -> [f64; N_INSTANCE_FEATURES] {
    let n = instance.n();
    let mut pair = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..=n {
        for j in (i + 1)..=n {
            pair.push(instance.dist(i, j));
        }
    }
    let depot_d: Vec<f64> = (1..=n).map(|c| instance.dist(0, c)).collect();

    let depot = instance.depot();
    let angles: Vec<f64> = (1..=n).map(|c| angle_about(depot, instance.point(c))).collect();
    let (mut sx, mut sy, mut w) = (0.0, 0.0, 0.0);
    for (c, &t) in (1..=n).zip(&angles) {
        let q = instance.demand(c) as f64;
        sx += q * t.cos();
        sy += q * t.sin();
        w += q;
    }
    let direction = if sx.hypot(sy) <= 1e-12 * w.max(1.0) { 0.0 } else { sy.atan2(sx) };
    let deviations: Vec<f64> = angles.iter().map(|&t| angular_distance(t, direction)).collect();

    let (i04, i05) = mean_sd(&pair);
    let (i06, i07) = mean_sd(&depot_d);
    let (i08, i09) = mean_sd(&deviations);
    let fleet = instance.fleet_size() as f64;
    [
        n as f64,
        fleet,
        instance.total_demand() as f64 / (fleet * instance.capacity() as f64),
        i04,
        i05,
        i06,
        i07,
        i08,
        i09,
    ]
}

/// Per-route measurements feeding the route-level features.
struct RouteStats {
    width: f64,
    span: f64,
    depth: f64,
    max_edge: f64,
    length: f64,
    deepest_demand: f64,
    centroid_dist: f64,
    utilization: f64,
    relatedness: f64,
}

fn route_stats(instance: &Instance, route: &[usize], max_pair: f64) -> RouteStats {
    let depot = instance.depot();
    let pts: Vec<Point> = route.iter().map(|&c| instance.point(c)).collect();
    let k = pts.len() as f64;
    let centroid = Point::new(pts.iter().map(|p| p.x).sum::<f64>() / k, pts.iter().map(|p| p.y).sum::<f64>() / k);

    let (ax, ay) = (centroid.x - depot.x, centroid.y - depot.y);
    let norm = ax.hypot(ay);
    let (ux, uy) = if norm > 0.0 { (ax / norm, ay / norm) } else { (1.0, 0.0) };
    let (px, py) = (-uy, ux);
    let proj: Vec<f64> = pts.iter().map(|p| (p.x - depot.x) * px + (p.y - depot.y) * py).collect();
    let width = if route.len() < 2 {
        0.0
    } else {
        proj.iter().copied().fold(f64::MIN, f64::max) - proj.iter().copied().fold(f64::MAX, f64::min)
    };

    let span = if route.len() < 2 {
        0.0
    } else {
        let mut angles: Vec<f64> = pts.iter().map(|&p| angle_about(depot, p).rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let mut widest_gap = angles[0] + TAU - angles[angles.len() - 1];
        for w in angles.windows(2) {
            widest_gap = widest_gap.max(w[1] - w[0]);
        }
        (TAU - widest_gap).max(0.0)
    };

    // equally deep customers (shared grid points) resolve to the larger
    // demand, which does not depend on how customers are numbered
    let (mut depth, mut deepest) = (f64::MIN, route[0]);
    for &c in route {
        let d = instance.dist(0, c);
        let tie = near(d, depth);
        if (d > depth && !tie) || (tie && instance.demand(c) > instance.demand(deepest)) {
            depth = d;
            deepest = c;
        }
    }

    let mut max_edge = instance.dist(0, route[0]).max(instance.dist(*route.last().unwrap(), 0));
    let mut length = instance.dist(0, route[0]) + instance.dist(*route.last().unwrap(), 0);
    for w in route.windows(2) {
        let e = instance.dist(w[0], w[1]);
        max_edge = max_edge.max(e);
        length += e;
    }

    let mut closest = f64::INFINITY;
    for i in 0..route.len() {
        for j in (i + 1)..route.len() {
            closest = closest.min(instance.dist(route[i], route[j]));
        }
    }
    let relatedness = if route.len() < 2 {
        0.0
    } else if max_pair > 0.0 {
        1.0 / (1.0 + closest / max_pair)
    } else {
        1.0
    };

    let load: u64 = route.iter().map(|&c| instance.demand(c) as u64).sum();
    RouteStats {
        width,
        span,
        depth,
        max_edge,
        length,
        deepest_demand: instance.demand(deepest) as f64,
        centroid_dist: centroid.dist(depot),
        utilization: load as f64 / instance.capacity() as f64,
        relatedness,
    }
}

pub fn extract_solution_features(
    instance: &Instance,
    solution: &Solution,
) -> Result<[f64; N_SOLUTION_FEATURES], FeatureError> {
    if solution.routes.is_empty() {
        return Err(FeatureError::EmptySolution);
    }
    solution.validate(instance)?;
    let n = instance.n();
    let routes = &solution.routes;

    let mut max_pair: f64 = 0.0;
    for i in 1..=n {
        for j in (i + 1)..=n {
            max_pair = max_pair.max(instance.dist(i, j));
        }
    }
    let per_route: Vec<RouteStats> = routes.iter().map(|r| route_stats(instance, r, max_pair)).collect();
    let col = |f: fn(&RouteStats) -> f64| per_route.iter().map(f).collect::<Vec<f64>>();

    let (s01, s02) = mean_sd(&col(|r| r.width));
    let (s03, s04) = mean_sd(&col(|r| r.span));
    let (s05, s06) = mean_sd(&col(|r| r.depth));
    let n_edges: usize = routes.iter().map(|r| r.len() + 1).sum();
    let s07 = routes.len() as f64 / n_edges as f64;
    let s08 = mean(&col(|r| r.max_edge));
    let s09 = mean(&col(|r| if r.length > 0.0 { r.max_edge / r.length } else { 0.0 }));

    let total_length: f64 = per_route.iter().map(|r| r.length).sum();
    let longest = per_route.iter().map(|r| r.max_edge).fold(0.0, f64::max);
    let mean_edge = total_length / n_edges as f64;
    let s10 = if mean_edge > 0.0 { longest / mean_edge } else { 0.0 };

    let mut terminal_edges = Vec::with_capacity(2 * routes.len());
    let mut terminal_demands = Vec::with_capacity(2 * routes.len());
    for r in routes {
        for &c in [r[0], r[r.len() - 1]].iter() {
            terminal_edges.push(instance.dist(0, c));
            terminal_demands.push(instance.demand(c) as f64);
        }
    }
    let s11 = mean(&terminal_edges);
    let s12 = mean(&terminal_demands);
    let (s13, s14) = mean_sd(&col(|r| r.deepest_demand));
    let s15 = mean_sd(&col(|r| r.length)).1;
    let (s16, s17) = mean_sd(&col(|r| r.centroid_dist));

    let mut ranks = Vec::new();
    for r in routes {
        for w in r.windows(2) {
            ranks.push(neighbor_rank(instance, w[0], w[1]));
            ranks.push(neighbor_rank(instance, w[1], w[0]));
        }
    }
    let s18 = mean(&ranks);
    let (s19, s20) = mean_sd(&col(|r| r.utilization));
    let (s21, s22) = mean_sd(&col(|r| r.relatedness));

    Ok([
        s01, s02, s03, s04, s05, s06, s07, s08, s09, s10, s11, s12, s13, s14, s15, s16, s17, s18, s19, s20, s21, s22,
    ])
}

/// Distances this close are ties: shifting or scaling coordinates moves
/// equal distances apart by a few ulps.
fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Rank of `b` among `a`'s other customers sorted by distance (1 = nearest);
/// equidistant customers share the lower rank.
fn neighbor_rank(instance: &Instance, a: usize, b: usize) -> f64 {
    let dab = instance.dist(a, b);
    let closer =
        (1..=instance.n()).filter(|&c| c != a && c != b && instance.dist(a, c) < dab && !near(instance.dist(a, c), dab)).count();
    (closer + 1) as f64
}

pub fn extract(instance: &Instance, solution: &Solution) -> Result<FeatureVector, FeatureError> {
    let inst = extract_instance_features(instance);
    let sol = extract_solution_features(instance, solution)?;
    let mut values = [0.0; N_FEATURES];
    values[..N_INSTANCE_FEATURES].copy_from_slice(&inst);
    values[N_INSTANCE_FEATURES..].copy_from_slice(&sol);
    Ok(FeatureVector { instance_id: instance.id().to_string(), source: solution.source, values })
}

/// A row of the feature matrix CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: FeatureVector,
    pub label: u8,
}

pub fn feature_csv_header() -> String {
    let mut h = String::from("instance_id,source,label");
    for k in FEATURE_KEYS {
        h.push(',');
        h.push_str(k);
    }
    h
}

/// Feature matrix CSV, rows sorted by `(instance_id, source)`.
pub fn write_feature_csv(rows: &[FeatureRow]) -> String {
    let mut sorted: Vec<&FeatureRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.features.instance_id.cmp(&b.features.instance_id).then(a.features.source.cmp(&b.features.source))
    });
    let mut out = feature_csv_header();
    out.push('\n');
    for row in sorted {
        let _ = write!(out, "{},{},{}", row.features.instance_id, row.features.source, row.label);
        for v in row.features.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_feature_csv(text: &str) -> Result<Vec<FeatureRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty feature CSV")?;
    if header.trim() != feature_csv_header() {
        return Err("feature CSV header mismatch".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 + N_FEATURES {
            return Err(format!("row {}: expected {} columns, found {}", i + 2, 3 + N_FEATURES, cols.len()));
        }
        let source = cols[1].parse::<SolutionSource>()?;
        let label = cols[2].parse::<u8>().map_err(|e| format!("row {}: label: {e}", i + 2))?;
        let mut values = [0.0; N_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v = cols[3 + k].parse().map_err(|e| format!("row {}: {}: {e}", i + 2, FEATURE_KEYS[k]))?;
        }
        rows.push(FeatureRow {
            features: FeatureVector { instance_id: cols[0].to_string(), source, values },
            label,
        });
    }
    Ok(rows)
}
