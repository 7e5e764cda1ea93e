use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::Command;

use routelens::explain::SUBSET_WARNING;
use routelens::learn::TrainedModel;
use routelens::model::{write_instance, write_solution, CustomerLayout, DemandLaw, DepotPosition};
use routelens::solvers::{solve_exact, OptimalRegime};
use routelens::{GeneratorConfig, ScenarioId, SolutionSource};
use routelens_cli::corpus::{cmd_corpus, load_gaps, CorpusOutcome};
use routelens_cli::manifest::read_manifest;
use routelens_cli::pipeline::{load_scenario, model_path};
use routelens_cli::svg::text_nodes;
use routelens_cli::{cmd_run_all, CliError, PipelineConfig};

fn small(out: &Path, n_instances: usize, n: (usize, usize)) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.out_dir = out.to_path_buf();
    let c = cfg.corpus.as_mut().unwrap();
    c.n_instances = n_instances;
    c.n_min = n.0;
    c.n_max = n.1;
    cfg.explain.max_rows = 30;
    cfg.explain.background_size = 16;
    cfg
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn count(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext)).count()
}

#[test]
fn tiny_corpus_has_four_solutions_per_instance_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg_a = small(a.path(), 3, (6, 6));
    let cfg_b = small(b.path(), 3, (6, 6));
    let s = cmd_corpus(&cfg_a, false).unwrap();
    assert_eq!((s.n_instances, s.outcome), (3, CorpusOutcome::Generated));
    cmd_corpus(&cfg_b, false).unwrap();

    let corpus = a.path().join("corpus");
    assert_eq!(count(&corpus.join("instances"), "vrp"), 3);
    assert_eq!(count(&corpus.join("solutions"), "sol"), 12);
    let gaps = load_gaps(a.path(), "test").unwrap();
    assert_eq!(gaps.len(), 12);
    for source in SolutionSource::ALL {
        assert_eq!(gaps.iter().filter(|g| g.source == source).count(), 3);
    }
    assert!(gaps.iter().all(|g| g.gap_percent >= 0.0));
    assert_eq!(read(&corpus.join("gaps.csv")), read(&b.path().join("corpus/gaps.csv")));

    // same settings again: nothing to do
    assert_eq!(cmd_corpus(&cfg_a, false).unwrap().outcome, CorpusOutcome::UpToDate);
}

#[test]
fn provided_optimum_gets_zero_gap() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    for (k, layout) in [CustomerLayout::Uniform, CustomerLayout::Clustered].into_iter().enumerate() {
        let inst = GeneratorConfig {
            n_customers: 6,
            depot_position: DepotPosition::Central,
            customer_layout: layout,
            demand_law: DemandLaw::UniformSmall,
            target_route_size: 3,
            seed: 40 + k as u64,
        }
        .generate();
        let opt = solve_exact(&inst).unwrap();
        fs::write(src.path().join(format!("{}.vrp", inst.id())), write_instance(&inst)).unwrap();
        fs::write(src.path().join(format!("{}.sol", inst.id())), write_solution(&opt)).unwrap();
    }
    let mut cfg = small(out.path(), 0, (6, 6));
    cfg.corpus.as_mut().unwrap().instance_dir = Some(src.path().to_path_buf());
    assert_eq!(cmd_corpus(&cfg, false).unwrap().n_instances, 2);
    let gaps = load_gaps(out.path(), "test").unwrap();
    for g in &gaps {
        assert_eq!(g.regime, OptimalRegime::Provided);
        if g.source == SolutionSource::OptimalProxy {
            assert_eq!(g.gap_percent, 0.0);
        }
    }
}

#[test]
fn partial_corpus_needs_resume() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path(), 4, (8, 10));
    cmd_corpus(&cfg, false).unwrap();
    let corpus = dir.path().join("corpus");
    let gaps = read(&corpus.join("gaps.csv"));

    // roll back to the state of an interrupted run with one instance done
    let first = gaps.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    let done: Vec<&str> = gaps.lines().skip(1).filter(|l| l.starts_with(&format!("{first},"))).collect();
    fs::create_dir_all(corpus.join("records")).unwrap();
    fs::create_dir_all(corpus.join("runs")).unwrap();
    fs::write(corpus.join("records").join(format!("{first}.csv")), done.join("\n") + "\n").unwrap();
    let runs: String = done.iter().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",") + ",0.000\n").collect();
    fs::write(corpus.join("runs").join(format!("{first}.csv")), runs).unwrap();
    fs::remove_file(corpus.join("COMPLETE")).unwrap();
    fs::remove_file(corpus.join("gaps.csv")).unwrap();

    let err = cmd_corpus(&cfg, false).unwrap_err();
    assert!(err.to_string().contains("--resume"), "{err}");
    assert_eq!(err.exit_code(), 3);
    let s = cmd_corpus(&cfg, true).unwrap();
    assert_eq!(s.outcome, CorpusOutcome::Resumed { reused: 1 });
    assert_eq!(read(&corpus.join("gaps.csv")), gaps);
}

#[test]
fn missing_corpus_section_names_the_corpus_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 3, (6, 6));
    cfg.corpus = None;
    let err = cmd_run_all(&cfg, false).unwrap_err();
    assert!(matches!(&err, CliError::Stage { stage: "corpus", .. }), "{err}");
    assert_eq!(err.exit_code(), 3);

    let config = dir.path().join("c.toml");
    fs::write(&config, cfg.to_toml()).unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_routelens")).arg("run-all").arg("--config").arg(&config).output().unwrap();
    assert_eq!(run.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&run.stderr).contains("corpus"));

    fs::write(&config, "bogus = 1\n").unwrap();
    let run = Command::new(env!("CARGO_BIN_EXE_routelens")).arg("config").arg("--config").arg(&config).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn config_round_trips_through_the_binary() {
    let run = Command::new(env!("CARGO_BIN_EXE_routelens")).args(["config", "--seed", "9"]).output().unwrap();
    assert!(run.status.success());
    let cfg = PipelineConfig::from_toml(&String::from_utf8(run.stdout).unwrap()).unwrap();
    let mut want = PipelineConfig::default();
    want.override_seed(9);
    assert_eq!(cfg, want);
}

/// One S1-only run shared by the checks below; building it dominates the
/// cost of this file.
#[test]
fn s1_run_is_consistent_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path(), 24, (8, 12));
    cfg.scenarios.selected = vec![ScenarioId::S1];
    let summary = cmd_run_all(&cfg, false).unwrap();
    assert!(summary.warnings.iter().any(|w| w == SUBSET_WARNING), "{:?}", summary.warnings);
    assert!(summary.manifest.warnings.iter().any(|w| w == SUBSET_WARNING));

    // manifest F1 agrees with re-scoring the persisted models on the
    // persisted test split
    let manifest = read_manifest(&cfg).unwrap();
    assert_eq!(manifest, summary.manifest);
    assert_eq!(manifest.f1.len(), cfg.learn.classifiers.len());
    let ds = load_scenario(&cfg, ScenarioId::S1, "test").unwrap();
    let (x, y) = ds.matrix(&ds.test);
    for e in &manifest.f1 {
        let kind = e.classifier.parse().unwrap();
        let model = TrainedModel::from_json(&read(&model_path(dir.path(), ScenarioId::S1, kind))).unwrap();
        let f1 = model.evaluate(&x, &y, 1.0).unwrap().f_beta;
        assert!((f1 - e.f1).abs() < 1e-9, "{}: {f1} vs {}", e.classifier, e.f1);
    }

    // every number printed in a figure appears in its companion CSV
    let reports = dir.path().join("reports");
    let svgs: Vec<_> = fs::read_dir(&reports)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(svgs.len() >= 5, "{svgs:?}");
    for svg in svgs {
        let csv = read(&svg.with_extension("csv"));
        let values: HashSet<&str> = csv.lines().skip(1).filter_map(|l| l.rsplit_once(',').map(|(_, v)| v)).collect();
        for t in text_nodes(&read(&svg)) {
            if t.parse::<f64>().is_ok() {
                assert!(values.contains(t.as_str()), "{}: '{t}' is not in the CSV", svg.display());
            }
        }
    }

    // rerunning over the finished output rewrites the same bytes
    let again = cmd_run_all(&cfg, false).unwrap();
    assert_eq!(again.manifest.hash, summary.manifest.hash);
}
