//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use routelens::explain::{shapley_exact, shapley_sample, shapley_tree, unified_ranking, FnPredictor, Predictor};
use routelens::features::{extract, DISTANCE_FEATURES, FEATURE_KEYS};
use routelens::learn::{f_beta, fit, ModelKind, ModelSpec};
use routelens::model::{CustomerLayout, DemandLaw, DepotPosition};
use routelens::solvers::{clarke_wright, gap_to_optimal, mns_lite, optimal_proxy, solve_exact, sweep};
use routelens::{
    derive_seed, GeneratorConfig, Instance, Point, ScenarioId, ScenarioImportance, Solution, SolutionSource,
    TabuConfig,
};
use routelens_cli::corpus::{cmd_corpus, load_gaps};
use routelens_cli::{cmd_features, cmd_run_all, cmd_scenarios, cmd_train, PipelineConfig};

type Verdict = Result<String, String>;

fn check(cond: bool, msg: String) -> Verdict {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Published (scenario, classifier, precision, recall, F1) rows.
const PUBLISHED: [(u8, &str, f64, f64, f64); 48] = [
    (1, "knn", 0.476, 0.351, 0.404),
    (1, "decision tree", 0.537, 0.538, 0.538),
    (1, "random forest", 0.523, 0.500, 0.511),
    (1, "gradient boosting", 0.672, 0.661, 0.666),
    (1, "xgboost", 0.632, 0.621, 0.627),
    (1, "lightgbm", 0.652, 0.652, 0.652),
    (2, "knn", 0.609, 0.483, 0.539),
    (2, "decision tree", 0.742, 0.731, 0.736),
    (2, "random forest", 0.785, 0.807, 0.796),
    (2, "gradient boosting", 0.860, 0.905, 0.882),
    (2, "xgboost", 0.870, 0.907, 0.888),
    (2, "lightgbm", 0.854, 0.900, 0.876),
    (3, "knn", 0.913, 0.891, 0.902),
    (3, "decision tree", 0.990, 0.992, 0.990),
    (3, "random forest", 0.999, 0.996, 0.997),
    (3, "gradient boosting", 0.999, 0.999, 0.999),
    (3, "xgboost", 0.999, 0.998, 0.999),
    (3, "lightgbm", 0.998, 0.998, 0.998),
    (4, "knn", 0.430, 0.647, 0.517),
    (4, "decision tree", 0.545, 0.732, 0.625),
    (4, "random forest", 0.572, 0.910, 0.702),
    (4, "gradient boosting", 0.676, 0.907, 0.775),
    (4, "xgboost", 0.723, 0.837, 0.775),
    (4, "lightgbm", 0.660, 0.904, 0.763),
    (5, "knn", 0.620, 0.769, 0.686),
    (5, "decision tree", 0.765, 0.828, 0.791),
    (5, "random forest", 0.827, 0.892, 0.858),
    (5, "gradient boosting", 0.863, 0.963, 0.910),
    (5, "xgboost", 0.895, 0.951, 0.922),
    (5, "lightgbm", 0.856, 0.961, 0.906),
    (6, "knn", 0.720, 0.824, 0.768),
    (6, "decision tree", 0.841, 0.881, 0.863),
    (6, "random forest", 0.887, 0.962, 0.923),
    (6, "gradient boosting", 0.924, 0.979, 0.951),
    (6, "xgboost", 0.941, 0.978, 0.959),
    (6, "lightgbm", 0.924, 0.981, 0.952),
    (7, "knn", 0.827, 0.871, 0.848),
    (7, "decision tree", 0.928, 0.933, 0.930),
    (7, "random forest", 0.936, 0.991, 0.962),
    (7, "gradient boosting", 0.966, 0.991, 0.979),
    (7, "xgboost", 0.972, 0.994, 0.983),
    (7, "lightgbm", 0.967, 0.994, 0.980),
    (8, "knn", 0.895, 0.896, 0.895),
    (8, "decision tree", 0.980, 0.976, 0.978),
    (8, "random forest", 0.985, 0.998, 0.991),
    (8, "gradient boosting", 0.993, 0.999, 0.996),
    (8, "xgboost", 0.992, 0.998, 0.996),
    (8, "lightgbm", 0.992, 0.998, 0.995),
];

fn c1_metric_oracle() -> Verdict {
    let mut bad = Vec::new();
    for &(s, name, p, r, want) in &PUBLISHED {
        let got = f_beta(p, r, 1.0);
        if (got - want).abs() > 0.001 + 1e-12 {
            bad.push(format!("S{s} {name}: F1({p}, {r}) = {got:.5}, published {want}"));
        }
    }
    let ok = (f_beta(0.672, 0.661, 1.0) - 0.666).abs() <= 0.001 && (f_beta(0.895, 0.951, 1.0) - 0.922).abs() <= 0.001;
    check(
        bad.is_empty() && ok,
        if bad.is_empty() {
            format!("{} rows reproduced within 0.001", PUBLISHED.len())
        } else {
            format!("{}/{} rows off by more than 0.001: {}", bad.len(), PUBLISHED.len(), bad.join("; "))
        },
    )
}

fn rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn c2_shapley_axioms() -> Verdict {
    const FIXTURES: usize = 60;
    let kinds = [
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoostingLevelwise,
        ModelKind::GradientBoostingLeafwiseHist,
    ];
    let failures: Vec<String> = (0..FIXTURES)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
            let d = 3 + i % 6;
            let kind = kinds[i % kinds.len()];
            // trained tree model; the last feature is constant so never split on
            let mut x = rows(&mut rng, 150, d);
            for r in &mut x {
                r[d - 1] = 0.5;
            }
            let w: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<u8> =
                x.iter().map(|r| u8::from((0..d - 1).map(|j| w[j] * r[j]).sum::<f64>() + r[0] * r[d - 2] > 0.0)).collect();
            let spec = ModelSpec { max_depth: 3, min_leaf: 3, n_trees: 8, n_rounds: 15, ..ModelSpec::default_for(kind) }
                .with_seed(i as u64);
            let model = fit(&spec, &x, &y).expect("fixture trains");
            let bg: Vec<Vec<f64>> = x[..8].to_vec();
            let row = &x[100 + i % 50];
            let exact = shapley_exact(&model, row, &bg, None).expect("exact");
            let sum: f64 = exact.phis.iter().sum();
            if (sum - (exact.prediction - exact.base_value)).abs() > 1e-9 {
                out.push(format!("fixture {i} ({kind}, d={d}): efficiency off by {:e}", sum - (exact.prediction - exact.base_value)));
            }
            if exact.phis[d - 1].abs() > 1e-9 {
                out.push(format!("fixture {i}: dummy feature got {}", exact.phis[d - 1]));
            }
            let tree = shapley_tree(&model, row, &bg).expect("tree");
            let tree_err = tree.phis.iter().zip(&exact.phis).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if tree_err > 1e-9 {
                out.push(format!("fixture {i} ({kind}, d={d}): tree vs exact {tree_err:e}"));
            }
            let sampled = shapley_sample(&model, row, &bg, 20_000, derive_seed(7, i as u64)).expect("sample");
            let sample_err = sampled.phis.iter().zip(&exact.phis).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if sample_err > 0.02 {
                out.push(format!("fixture {i} ({kind}, d={d}): sampling error {sample_err}"));
            }

            // symmetric game: f is symmetric in features 0 and 1 and every
            // row has equal values there, so the two are exchangeable
            let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sym = FnPredictor {
                n_features: d,
                f: move |z: &[f64]| {
                    let rest: f64 = (2..d - 1).map(|j| a[j] * z[j]).sum();
                    (a[0] * (z[0] + z[1]) + z[0] * z[1] + rest).tanh() + rest * (z[0] * z[1]).abs()
                },
            };
            let mut tie = |r: &mut Vec<f64>| r[1] = r[0];
            let mut sbg = rows(&mut rng, 6, d);
            sbg.iter_mut().for_each(&mut tie);
            let mut sx: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            tie(&mut sx);
            let e = shapley_exact(&sym, &sx, &sbg, None).expect("exact");
            if (e.phis[0] - e.phis[1]).abs() > 1e-9 {
                out.push(format!("fixture {i}: symmetry broken, {} vs {}", e.phis[0], e.phis[1]));
            }
            let total: f64 = e.phis.iter().sum();
            if (total - (sym.score(&sx) - e.base_value)).abs() > 1e-9 || e.phis[d - 1] != 0.0 {
                out.push(format!("fixture {i}: symmetric game violates efficiency or dummy"));
            }
            out.into_iter()
        })
        .collect();
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{FIXTURES} model fixtures (d 3..=8) and {FIXTURES} symmetric games")
        } else {
            failures.join("; ")
        },
    )
}

fn fuzz_instance(seed: u64, n_lo: usize, n_hi: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GeneratorConfig {
        n_customers: rng.gen_range(n_lo..=n_hi),
        depot_position: [DepotPosition::Central, DepotPosition::Corner, DepotPosition::Random][rng.gen_range(0..3)],
        customer_layout: [CustomerLayout::Uniform, CustomerLayout::Clustered, CustomerLayout::Mixed][rng.gen_range(0..3)],
        demand_law: [DemandLaw::Unit, DemandLaw::UniformSmall, DemandLaw::QuadrantSkewed][rng.gen_range(0..3)],
        target_route_size: rng.gen_range(2..=10),
        seed: derive_seed(seed, 1),
    }
    .generate()
}

fn c3_solver_soundness() -> Verdict {
    const N: usize = 500;
    let tabu = TabuConfig::default();
    let results: Vec<Result<Option<(bool, bool)>, String>> = (0..N as u64)
        .into_par_iter()
        .map(|i| {
            let inst = fuzz_instance(derive_seed(2024, i), 5, 60);
            let err = |what: &str, e: &dyn std::fmt::Display| format!("instance {i} (n={}): {what}: {e}", inst.n());
            let cw = clarke_wright(&inst).map_err(|e| err("clarke_wright", &e))?;
            let sw = sweep(&inst).map_err(|e| err("sweep", &e))?;
            let ml = mns_lite(&inst, &sw, &tabu.with_seed(i)).map_err(|e| err("mnslite", &e))?;
            let (px, _) = optimal_proxy(&inst, &tabu.with_seed(derive_seed(9, i)), 10).map_err(|e| err("proxy", &e))?;
            for s in [&cw, &sw, &ml, &px] {
                s.validate(&inst).map_err(|e| err(s.source.as_str(), &e))?;
            }
            if inst.n() > 7 {
                return Ok(None);
            }
            let opt = solve_exact(&inst).map_err(|e| err("exact", &e))?;
            let gaps_ok = [&cw, &sw, &ml, &px].iter().all(|s| gap_to_optimal(s, &opt).map_or(false, |g| g >= -1e-9));
            let ml_optimal = gap_to_optimal(&ml, &opt).map_or(false, |g| g <= 1e-9);
            Ok(Some((gaps_ok, ml_optimal)))
        })
        .collect();
    let mut small = 0;
    let mut gaps_ok = true;
    let mut hits = 0;
    for r in results {
        match r {
            Err(e) => return Err(e),
            Ok(Some((g, m))) => {
                small += 1;
                gaps_ok &= g;
                hits += usize::from(m);
            }
            Ok(None) => {}
        }
    }
    let share = if small == 0 { 0.0 } else { hits as f64 / small as f64 };
    check(
        gaps_ok && small > 0 && share >= 0.9,
        format!(
            "{N} instances valid for all four solvers; n <= 7: {small} instances, gaps >= 0: {gaps_ok}, mnslite optimal on {hits}/{small} ({:.1}%)",
            100.0 * share
        ),
    )
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

struct DeskCorpus {
    _dir: tempfile::TempDir,
    cfg: PipelineConfig,
}

fn desk_corpus() -> Result<DeskCorpus, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    let c = cfg.corpus.as_mut().expect("default has a corpus");
    c.n_instances = 200;
    c.n_min = 20;
    c.n_max = 40;
    cmd_corpus(&cfg, false).map_err(|e| e.to_string())?;
    cmd_features(&cfg).map_err(|e| e.to_string())?;
    cmd_scenarios(&cfg).map_err(|e| e.to_string())?;
    Ok(DeskCorpus { _dir: dir, cfg })
}

fn c4_trend(desk: &DeskCorpus) -> Verdict {
    let rows = cmd_train(&desk.cfg).map_err(|e| e.to_string())?;
    let ids = [ScenarioId::S4, ScenarioId::S5, ScenarioId::S6, ScenarioId::S7, ScenarioId::S8];
    let best: Vec<f64> = ids
        .iter()
        .map(|id| rows.iter().filter(|r| r.scenario == id.to_string()).map(|r| r.f1).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let drops: Vec<f64> = best.windows(2).filter(|w| w[1] < w[0]).map(|w| w[0] - w[1]).collect();
    let ok = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.02);
    let shown: Vec<String> = ids.iter().zip(&best).map(|(id, f)| format!("{id} {f:.3}")).collect();
    check(ok, format!("best F1 {}; inversions {:?}", shown.join(", "), drops))
}

fn c5_spread(desk: &DeskCorpus) -> Verdict {
    let gaps = load_gaps(&desk.cfg.out_dir, "acceptance").map_err(|e| e.to_string())?;
    let stats = |source: SolutionSource| {
        let mut v: Vec<f64> = gaps.iter().filter(|g| g.source == source).map(|g| g.gap_percent).collect();
        v.sort_by(f64::total_cmp);
        (quantile(&v, 0.5), quantile(&v, 0.75) - quantile(&v, 0.25))
    };
    let (ml_med, ml_iqr) = stats(SolutionSource::Mnslite);
    let (cw_med, cw_iqr) = stats(SolutionSource::ClarkeWright);
    let (sw_med, sw_iqr) = stats(SolutionSource::Sweep);
    check(
        sw_med > cw_med && sw_iqr > cw_iqr && sw_iqr > ml_iqr,
        format!(
            "median gap sweep {sw_med:.3}, clarke_wright {cw_med:.3}, mnslite {ml_med:.3}; IQR sweep {sw_iqr:.3}, clarke_wright {cw_iqr:.3}, mnslite {ml_iqr:.3}"
        ),
    )
}

fn c6_ranking() -> Verdict {
    let hand = [
        ScenarioImportance { scenario: ScenarioId::S1, s: vec![0.30, 0.10, 0.20], f1: 0.5, n_rows: 10 },
        ScenarioImportance { scenario: ScenarioId::S4, s: vec![0.05, 0.40, 0.20], f1: 0.9, n_rows: 10 },
    ];
    let u = unified_ranking(&hand).map_err(|e| e.to_string())?;
    // 0.30*0.5 + 0.05*0.9, 0.10*0.5 + 0.40*0.9, 0.20*0.5 + 0.20*0.9
    let want = [0.30 * 0.5 + 0.05 * 0.9, 0.10 * 0.5 + 0.40 * 0.9, 0.20 * 0.5 + 0.20 * 0.9];
    if u.y != want || u.ranking != [1, 2, 0] {
        return Err(format!("hand fixture: y {:?}, ranking {:?}", u.y, u.ranking));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    for t in 0..100 {
        let m = rng.gen_range(1..=8);
        let d = rng.gen_range(2..=31);
        let imps: Vec<ScenarioImportance> = (0..m)
            .map(|k| ScenarioImportance {
                scenario: ScenarioId::ALL[k],
                s: (0..d).map(|_| rng.gen_range(0.0..1.0)).collect(),
                f1: rng.gen_range(0.05..1.0),
                n_rows: 1,
            })
            .collect();
        let c = rng.gen_range(0.01..100.0);
        let scaled: Vec<ScenarioImportance> =
            imps.iter().map(|i| ScenarioImportance { f1: i.f1 * c, ..i.clone() }).collect();
        let a = unified_ranking(&imps).map_err(|e| e.to_string())?;
        let b = unified_ranking(&scaled).map_err(|e| e.to_string())?;
        if a.ranking != b.ranking {
            return Err(format!("fixture {t}: scaling by {c} changed the ranking"));
        }
    }
    Ok("hand fixture y = (0.195, 0.41, 0.28), ranking [1, 2, 0]; 100 scaled fixtures keep their order".into())
}

fn c7_features() -> Verdict {
    let customers = (1..=8)
        .map(|k| routelens::model::Customer { id: k + 1, point: Point::new(k as f64, 0.0), demand: 1 })
        .collect();
    let inst = Instance::new("line8", 1, Point::new(0.0, -3.0), customers, 4, Some(2), false).map_err(|e| e.to_string())?;
    let sol = Solution::from_routes(&inst, vec![vec![1, 3, 5, 7], vec![2, 4, 6, 8]], SolutionSource::Sweep)
        .map_err(|e| e.to_string())?;
    // rank of each edge head among its tail's neighbours, averaged over the
    // 12 directed customer-to-customer edges: two end edges rank 2, the rest 3
    let want = (2.0 + 3.0 * 10.0 + 2.0) / 12.0;
    let s18 = extract(&inst, &sol).map_err(|e| e.to_string())?.get("S18").expect("S18");
    if (s18 - want).abs() > 1e-12 {
        return Err(format!("line fixture S18 = {s18}, expected {want}"));
    }
    for t in 0..50u64 {
        let inst = fuzz_instance(derive_seed(77, t), 6, 40);
        let sol = if t % 2 == 0 { clarke_wright(&inst) } else { sweep(&inst) }.map_err(|e| e.to_string())?;
        let big = inst.map_points(|p| Point::new(2.5 * p.x, 2.5 * p.y)).map_err(|e| e.to_string())?;
        let big_sol = Solution::from_routes(&big, sol.routes.clone(), sol.source).map_err(|e| e.to_string())?;
        let a = extract(&inst, &sol).map_err(|e| e.to_string())?;
        let b = extract(&big, &big_sol).map_err(|e| e.to_string())?;
        for (j, key) in FEATURE_KEYS.iter().enumerate() {
            let factor = if DISTANCE_FEATURES.contains(key) { 2.5 } else { 1.0 };
            let want = factor * a.values[j];
            if (b.values[j] - want).abs() > 1e-9 * want.abs().max(1.0) {
                return Err(format!("pair {t}: {key} = {} after scaling, expected {want}", b.values[j]));
            }
        }
    }
    Ok(format!("S18 = {want:.6} on the line fixture; 50 pairs scale exactly the {} distance features", DISTANCE_FEATURES.len()))
}

fn c8_determinism() -> Verdict {
    let run = || -> Result<String, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = PipelineConfig::default();
        cfg.out_dir = dir.path().to_path_buf();
        let c = cfg.corpus.as_mut().expect("default has a corpus");
        c.n_instances = 40;
        c.n_min = 12;
        c.n_max = 18;
        cfg.explain.max_rows = 40;
        Ok(cmd_run_all(&cfg, false).map_err(|e| e.to_string())?.manifest.hash)
    };
    let (a, b) = (run()?, run()?);
    check(a == b, format!("manifest hashes {a} and {b}"))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS criterion {n} ({name}, {secs:.1}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1}s): {msg}");
            }
        }
    };
    report(1, "metric oracle", &mut c1_metric_oracle);
    report(2, "Shapley axioms", &mut c2_shapley_axioms);
    report(3, "solver soundness", &mut c3_solver_soundness);
    let desk = desk_corpus();
    report(4, "scenario trend", &mut || c4_trend(desk.as_ref().map_err(Clone::clone)?));
    report(5, "solution-quality spread", &mut || c5_spread(desk.as_ref().map_err(Clone::clone)?));
    report(6, "unified ranking", &mut c6_ranking);
    report(7, "feature oracles", &mut c7_features);
    report(8, "determinism", &mut c8_determinism);
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
