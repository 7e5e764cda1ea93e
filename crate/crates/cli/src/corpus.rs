//! Corpus stage: instances, one solution per source, and gaps to the
//! positive-class solution.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use routelens::derive_seed;
use routelens::model::{parse_instance, parse_solution, write_instance, write_solution};
use routelens::solvers::{clarke_wright, gap_to_optimal, mns_lite, optimal_proxy, sweep, OptimalRegime};
use routelens::{GeneratorConfig, Instance, Solution, SolutionSource};
use serde::{Deserialize, Serialize};

use crate::config::{CorpusConfig, PipelineConfig, SolverConfig};
use crate::{fsutil, CliError};

const STAGE: &str = "corpus";
const COMPLETE: &str = "COMPLETE";
const STAMP: &str = "corpus.toml";
/// Gaps below this many percent are reported as 0.
pub const GAP_EPS: f64 = 1e-9;

/// One row of `gaps.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRecord {
    pub instance_id: String,
    pub source: SolutionSource,
    pub objective: f64,
    pub gap_percent: f64,
    pub regime: OptimalRegime,
    /// Tabu seed for `mnslite` and the proxy; construction heuristics have none.
    pub seed: Option<u64>,
}

pub const GAPS_HEADER: &str = "instance_id,source,objective,gap_percent,regime,seed";

pub fn write_gaps_csv(records: &[GapRecord]) -> String {
    let mut sorted: Vec<&GapRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.instance_id.cmp(&b.instance_id).then(a.source.cmp(&b.source)));
    let mut out = format!("{GAPS_HEADER}\n");
    for r in sorted {
        out.push_str(&gap_line(r));
    }
    out
}

fn gap_line(r: &GapRecord) -> String {
    let seed = r.seed.map_or_else(String::new, |s| s.to_string());
    format!("{},{},{},{},{},{}\n", r.instance_id, r.source, r.objective, r.gap_percent, r.regime.as_str(), seed)
}

fn parse_gap_lines<'a>(lines: impl Iterator<Item = &'a str>) -> Result<Vec<GapRecord>, String> {
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(format!("expected 6 fields in gap row '{l}'"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
            let regime = match f[4] {
                "exact" => OptimalRegime::Exact,
                "restarts" => OptimalRegime::Restarts,
                "provided" => OptimalRegime::Provided,
                other => return Err(format!("unknown regime '{other}'")),
            };
            let seed = if f[5].is_empty() {
                None
            } else {
                Some(f[5].parse::<u64>().map_err(|e| format!("bad seed '{}': {e}", f[5]))?)
            };
            Ok(GapRecord {
                instance_id: f[0].to_string(),
                source: f[1].parse()?,
                objective: num(f[2])?,
                gap_percent: num(f[3])?,
                regime,
                seed,
            })
        })
        .collect()
}

pub fn parse_gaps_csv(text: &str) -> Result<Vec<GapRecord>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(GAPS_HEADER) {
        return Err("unexpected gaps.csv header".into());
    }
    parse_gap_lines(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusOutcome {
    Generated,
    Resumed { reused: usize },
    UpToDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSummary {
    pub n_instances: usize,
    pub outcome: CorpusOutcome,
}

/// Settings that determine the corpus bytes; persisted next to it so a
/// rerun can tell whether the existing corpus still matches.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Stamp {
    corpus: CorpusConfig,
    solver: SolverConfig,
}

pub fn corpus_dir(out: &Path) -> PathBuf {
    out.join("corpus")
}

pub fn is_complete(out: &Path) -> bool {
    corpus_dir(out).join(COMPLETE).is_file()
}

enum Job {
    Generated(GeneratorConfig),
    Loaded { instance: Instance, optimum: Option<String> },
}

/// Draws the generator settings of instance `i` from the corpus seed.
pub fn generator_config(c: &CorpusConfig, i: usize) -> GeneratorConfig {
    let stream = derive_seed(c.seed, i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    GeneratorConfig {
        n_customers: rng.gen_range(c.n_min..=c.n_max),
        depot_position: c.depot_positions[rng.gen_range(0..c.depot_positions.len())],
        customer_layout: c.customer_layouts[rng.gen_range(0..c.customer_layouts.len())],
        demand_law: c.demand_laws[rng.gen_range(0..c.demand_laws.len())],
        target_route_size: c.route_sizes[rng.gen_range(0..c.route_sizes.len())],
        seed: derive_seed(stream, 1),
    }
}

fn jobs(c: &CorpusConfig) -> Result<Vec<Job>, CliError> {
    let Some(dir) = &c.instance_dir else {
        return Ok((0..c.n_instances).map(|i| Job::Generated(generator_config(c, i))).collect());
    };
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for path in fsutil::list(STAGE, dir, "vrp")? {
        let instance = parse_instance(&fsutil::read(STAGE, &path)?)
            .map_err(|e| CliError::stage(STAGE, format!("{}: {e}", path.display())))?;
        if !ids.insert(instance.id().to_string()) {
            return Err(CliError::stage(STAGE, format!("duplicate instance name '{}'", instance.id())));
        }
        let sol = path.with_extension("sol");
        let optimum = if sol.is_file() { Some(fsutil::read(STAGE, &sol)?) } else { None };
        out.push(Job::Loaded { instance, optimum });
    }
    if out.is_empty() {
        return Err(CliError::stage(STAGE, format!("no .vrp files in {}", dir.display())));
    }
    Ok(out)
}

fn job_id(job: &Job) -> String {
    match job {
        Job::Generated(g) => g.instance_id(),
        Job::Loaded { instance, .. } => instance.id().to_string(),
    }
}

struct Solved {
    instance: Instance,
    solutions: Vec<Solution>,
    records: Vec<GapRecord>,
    wall_ms: Vec<f64>,
}

fn solve(job: Job, index: usize, solver: &SolverConfig) -> Result<Solved, CliError> {
    let (instance, provided) = match job {
        Job::Generated(g) => (g.generate(), None),
        Job::Loaded { instance, optimum } => (instance, optimum),
    };
    let id = instance.id().to_string();
    let fail = |what: &str, e: &dyn std::fmt::Display| CliError::stage(STAGE, format!("{id}: {what}: {e}"));
    let timed = |f: &dyn Fn() -> Result<Solution, CliError>| -> Result<(Solution, f64), CliError> {
        let t = Instant::now();
        let s = f()?;
        Ok((s, t.elapsed().as_secs_f64() * 1e3))
    };

    let (cw, cw_ms) = timed(&|| clarke_wright(&instance).map_err(|e| fail("clarke_wright", &e)))?;
    let (sw, sw_ms) = timed(&|| sweep(&instance).map_err(|e| fail("sweep", &e)))?;
    let ml_seed = derive_seed(solver.mnslite.seed, index as u64);
    let (ml, ml_ms) =
        timed(&|| mns_lite(&instance, &sw, &solver.mnslite.with_seed(ml_seed)).map_err(|e| fail("mnslite", &e)))?;

    let proxy_seed = derive_seed(solver.proxy.seed, index as u64);
    let t = Instant::now();
    let (mut opt, regime, opt_seed) = match provided {
        Some(text) => {
            let sol = parse_solution(&text, &instance, SolutionSource::OptimalProxy)
                .map_err(|e| fail("provided solution", &e))?;
            sol.validate(&instance).map_err(|e| fail("provided solution", &e))?;
            (sol, OptimalRegime::Provided, None)
        }
        None => {
            let (sol, regime) = optimal_proxy(&instance, &solver.proxy.with_seed(proxy_seed), solver.restarts)
                .map_err(|e| fail("optimal proxy", &e))?;
            let seed = (regime == OptimalRegime::Restarts).then_some(proxy_seed);
            (sol, regime, seed)
        }
    };
    let opt_ms = t.elapsed().as_secs_f64() * 1e3;

    // A restart-based proxy is only an upper bound on the optimum; if a
    // heuristic found something shorter, that becomes the proxy.
    for h in [&ml, &cw, &sw] {
        if h.objective < opt.objective {
            if regime == OptimalRegime::Provided {
                return Err(fail(
                    "provided solution",
                    &format!("{} found {} below the provided optimum {}", h.source, h.objective, opt.objective),
                ));
            }
            opt = Solution { source: SolutionSource::OptimalProxy, ..h.clone() };
        }
    }
    opt.gap_percent = Some(0.0);

    let mut solutions = vec![opt.clone()];
    let mut records = vec![GapRecord {
        instance_id: id.clone(),
        source: SolutionSource::OptimalProxy,
        objective: opt.objective,
        gap_percent: 0.0,
        regime,
        seed: opt_seed,
    }];
    for (sol, seed) in [(ml, Some(ml_seed)), (cw, None), (sw, None)] {
        sol.validate(&instance).map_err(|e| fail(sol.source.as_str(), &e))?;
        let gap = gap_to_optimal(&sol, &opt).map_err(|e| fail("gap", &e))?;
        // Equal tours summed in a different route order differ in the last
        // bits; such a solution is optimal, not near-optimal.
        let gap = if gap < GAP_EPS { 0.0 } else { gap };
        records.push(GapRecord {
            instance_id: id.clone(),
            source: sol.source,
            objective: sol.objective,
            gap_percent: gap,
            regime,
            seed,
        });
        solutions.push(sol.with_gap(gap));
    }
    Ok(Solved { instance, solutions, records, wall_ms: vec![opt_ms, ml_ms, cw_ms, sw_ms] })
}

pub fn solution_path(out: &Path, instance_id: &str, source: SolutionSource) -> PathBuf {
    corpus_dir(out).join("solutions").join(format!("{instance_id}.{source}.sol"))
}

pub fn instance_path(out: &Path, instance_id: &str) -> PathBuf {
    corpus_dir(out).join("instances").join(format!("{instance_id}.vrp"))
}

/// Builds the corpus under `<out>/corpus`. A complete corpus with matching
/// settings is left untouched; one with different settings is rebuilt. A
/// partial corpus (no completion marker) is continued when `resume` is set
/// and is an error otherwise.
pub fn cmd_corpus(cfg: &PipelineConfig, resume: bool) -> Result<CorpusSummary, CliError> {
    let Some(corpus) = &cfg.corpus else {
        return Err(CliError::Config("the corpus stage needs a [corpus] section".into()));
    };
    let dir = corpus_dir(&cfg.out_dir);
    let stamp = toml::to_string(&Stamp { corpus: corpus.clone(), solver: cfg.solver.clone() })
        .map_err(|e| CliError::Config(e.to_string()))?;
    let stamp_path = dir.join(STAMP);
    let existing = std::fs::read_to_string(&stamp_path).ok();

    if dir.join(COMPLETE).is_file() {
        if existing.as_deref() == Some(stamp.as_str()) {
            let n = parse_gaps_csv(&fsutil::read(STAGE, &dir.join("gaps.csv"))?)
                .map_err(|e| CliError::stage(STAGE, e))?
                .len()
                / SolutionSource::ALL.len();
            return Ok(CorpusSummary { n_instances: n, outcome: CorpusOutcome::UpToDate });
        }
        std::fs::remove_dir_all(&dir).map_err(|e| CliError::stage(STAGE, format!("cannot clear {}: {e}", dir.display())))?;
    } else if dir.exists() && std::fs::read_dir(&dir).map(|mut d| d.next().is_some()).unwrap_or(false) {
        if !resume {
            return Err(CliError::stage(
                STAGE,
                format!("partial corpus found in {}; rerun with --resume or remove it", dir.display()),
            ));
        }
        if existing.as_deref() != Some(stamp.as_str()) {
            return Err(CliError::stage(STAGE, "cannot resume: the partial corpus was built with different settings"));
        }
    }
    fsutil::write(STAGE, &stamp_path, &stamp)?;

    let records_dir = dir.join("records");
    let jobs = jobs(corpus)?;
    let mut ids = BTreeSet::new();
    for job in &jobs {
        if !ids.insert(job_id(job)) {
            return Err(CliError::stage(STAGE, format!("generator produced the instance id '{}' twice", job_id(job))));
        }
    }
    let n = jobs.len();
    let pending: Vec<(usize, Job)> =
        jobs.into_iter().enumerate().filter(|(_, j)| !records_dir.join(format!("{}.csv", job_id(j))).is_file()).collect();
    let reused = n - pending.len();

    pending.into_par_iter().try_for_each(|(i, job)| -> Result<(), CliError> {
        let solved = solve(job, i, &cfg.solver)?;
        let id = solved.instance.id().to_string();
        fsutil::write(STAGE, &instance_path(&cfg.out_dir, &id), write_instance(&solved.instance))?;
        for sol in &solved.solutions {
            fsutil::write(STAGE, &solution_path(&cfg.out_dir, &id, sol.source), write_solution(sol))?;
        }
        let runs: String = solved
            .records
            .iter()
            .zip(&solved.wall_ms)
            .map(|(r, ms)| format!("{},{},{ms:.3}\n", r.instance_id, r.source))
            .collect();
        fsutil::write(STAGE, &dir.join("runs").join(format!("{id}.csv")), runs)?;
        // The record is written last: its presence marks the instance done.
        let record: String = solved.records.iter().map(gap_line).collect();
        fsutil::write(STAGE, &records_dir.join(format!("{id}.csv")), record)
    })?;

    let mut records = Vec::new();
    let mut runs = String::from("instance_id,source,wall_ms\n");
    for id in &ids {
        let text = fsutil::read(STAGE, &records_dir.join(format!("{id}.csv")))?;
        records.extend(parse_gap_lines(text.lines()).map_err(|e| CliError::stage(STAGE, e))?);
        runs.push_str(&fsutil::read(STAGE, &dir.join("runs").join(format!("{id}.csv")))?);
    }
    fsutil::write(STAGE, &dir.join("gaps.csv"), write_gaps_csv(&records))?;
    fsutil::write(STAGE, &dir.join("solver_runs.csv"), runs)?;
    for sub in ["records", "runs"] {
        std::fs::remove_dir_all(dir.join(sub)).map_err(|e| CliError::stage(STAGE, e))?;
    }
    fsutil::write(STAGE, &dir.join(COMPLETE), "")?;
    let outcome = if reused > 0 { CorpusOutcome::Resumed { reused } } else { CorpusOutcome::Generated };
    Ok(CorpusSummary { n_instances: n, outcome })
}

/// Reads the gap table of a completed corpus.
pub fn load_gaps(out: &Path, stage: &'static str) -> Result<Vec<GapRecord>, CliError> {
    if !is_complete(out) {
        return Err(CliError::stage(
            stage,
            format!("no complete corpus under {}; run the corpus stage first", corpus_dir(out).display()),
        ));
    }
    parse_gaps_csv(&fsutil::read(stage, &corpus_dir(out).join("gaps.csv"))?)
        .map_err(|e| CliError::stage(stage, e))
}
