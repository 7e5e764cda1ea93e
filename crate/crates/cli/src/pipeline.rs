//! The stages after the corpus. Each one reads only persisted files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use routelens::explain::{
    background_rows, explain_rows, explain_set, parse_explanations_csv, scenario_importance, shapley_exact,
    unified_ranking, write_explanations_csv, write_importance_csv, write_ranking_csv, EXACT_MAX_ACTIVE,
};
use routelens::features::{extract, parse_feature_csv, write_feature_csv, FeatureRow};
use routelens::learn::{fit, parse_evaluation_csv, write_evaluation_csv, EvaluationRow, TreeEnsemble};
use routelens::model::{parse_instance, parse_solution};
use routelens::scenarios::{build_scenario, class_balance, parse_split, write_split, ClassBalance, LabeledSolution};
use routelens::{
    derive_seed, Estimator, FeatureVector, ModelKind, ScenarioDataset, ScenarioId, ScenarioImportance, ScenarioSpec,
    SolutionSource, TrainedModel, UnifiedImportance, FEATURE_KEYS, N_FEATURES,
};
use serde::{Deserialize, Serialize};

use crate::corpus::{self, instance_path, load_gaps, solution_path};
use crate::manifest::{self, Manifest};
use crate::{fsutil, report, CliError, PipelineConfig};

pub fn features_path(out: &Path) -> PathBuf {
    out.join("features").join("features.csv")
}

pub fn scenario_path(out: &Path, id: ScenarioId) -> PathBuf {
    out.join("scenarios").join(format!("{id}.csv"))
}

pub fn split_path(out: &Path, id: ScenarioId) -> PathBuf {
    out.join("scenarios").join(format!("{id}.split"))
}

pub fn model_path(out: &Path, id: ScenarioId, kind: ModelKind) -> PathBuf {
    out.join("train").join("models").join(format!("{id}.{kind}.json"))
}

pub fn evaluation_path(out: &Path) -> PathBuf {
    out.join("train").join("evaluation.csv")
}

pub fn explanation_path(out: &Path, id: ScenarioId) -> PathBuf {
    out.join("explain").join(format!("{id}.csv"))
}

pub fn explain_meta_path(out: &Path, id: ScenarioId) -> PathBuf {
    out.join("explain").join(format!("{id}.json"))
}

/// Extracts the 31 features of every corpus solution.
pub fn cmd_features(cfg: &PipelineConfig) -> Result<usize, CliError> {
    const STAGE: &str = "features";
    let out = &cfg.out_dir;
    let gaps = load_gaps(out, STAGE)?;
    let mut ids: Vec<&str> = gaps.iter().map(|g| g.instance_id.as_str()).collect();
    ids.dedup();
    let rows: Vec<Vec<FeatureRow>> = ids
        .par_iter()
        .map(|id| {
            let fail = |e: &dyn std::fmt::Display| CliError::stage(STAGE, format!("{id}: {e}"));
            let inst = parse_instance(&fsutil::read(STAGE, &instance_path(out, id))?).map_err(|e| fail(&e))?;
            SolutionSource::ALL
                .iter()
                .map(|&source| {
                    let text = fsutil::read(STAGE, &solution_path(out, id, source))?;
                    let sol = parse_solution(&text, &inst, source).map_err(|e| fail(&e))?;
                    let features = extract(&inst, &sol).map_err(|e| fail(&e))?;
                    Ok(FeatureRow { features, label: u8::from(source == SolutionSource::OptimalProxy) })
                })
                .collect()
        })
        .collect::<Result<_, CliError>>()?;
    let rows: Vec<FeatureRow> = rows.into_iter().flatten().collect();
    fsutil::write(STAGE, &features_path(out), write_feature_csv(&rows))?;
    Ok(rows.len())
}

fn scenario_header() -> String {
    let mut h = String::from("instance_id,source,label,gap_percent");
    for k in FEATURE_KEYS {
        h.push(',');
        h.push_str(k);
    }
    h
}

fn write_scenario_csv(ds: &ScenarioDataset) -> String {
    let mut out = scenario_header();
    out.push('\n');
    for i in 0..ds.len() {
        let r = &ds.rows[i];
        out.push_str(&format!("{},{},{},{}", r.instance_id, r.source, ds.labels[i], ds.gaps[i]));
        for v in r.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn specs(cfg: &PipelineConfig) -> Result<Vec<ScenarioSpec>, CliError> {
    let all = ScenarioSpec::standard_set(cfg.scenarios.thresholds).map_err(|e| CliError::Config(e.to_string()))?;
    let mut selected: Vec<ScenarioSpec> =
        all.into_iter().filter(|s| cfg.scenarios.selected.contains(&s.id)).collect();
    selected.sort_by_key(|s| s.id);
    Ok(selected)
}

fn scenario_seed(cfg: &PipelineConfig, id: ScenarioId) -> u64 {
    derive_seed(cfg.scenarios.seed, id.index() as u64)
}

/// Builds and persists the dataset and split of every selected scenario.
pub fn cmd_scenarios(cfg: &PipelineConfig) -> Result<Vec<(ScenarioId, ClassBalance)>, CliError> {
    const STAGE: &str = "scenarios";
    let out = &cfg.out_dir;
    let gaps = load_gaps(out, STAGE)?;
    let gap_of: BTreeMap<(&str, SolutionSource), f64> =
        gaps.iter().map(|g| ((g.instance_id.as_str(), g.source), g.gap_percent)).collect();
    let rows = parse_feature_csv(&fsutil::read(STAGE, &features_path(out))?).map_err(|e| CliError::stage(STAGE, e))?;
    let corpus: Vec<LabeledSolution> = rows
        .into_iter()
        .map(|r| {
            let gap = *gap_of.get(&(r.features.instance_id.as_str(), r.features.source)).ok_or_else(|| {
                CliError::stage(STAGE, format!("no gap for {} {}", r.features.instance_id, r.features.source))
            })?;
            Ok(LabeledSolution { features: r.features, gap_percent: gap })
        })
        .collect::<Result<_, CliError>>()?;

    let mut balance = Vec::new();
    let mut table = String::from("scenario,positives,negatives,ratio\n");
    for spec in specs(cfg)? {
        let ds = build_scenario(&corpus, spec, cfg.scenarios.test_fraction, scenario_seed(cfg, spec.id))
            .map_err(|e| CliError::stage(STAGE, e))?;
        fsutil::write(STAGE, &scenario_path(out, spec.id), write_scenario_csv(&ds))?;
        fsutil::write(STAGE, &split_path(out, spec.id), write_split(&ds))?;
        let b = class_balance(&ds);
        table.push_str(&format!("{},{},{},{}\n", spec.id, b.positives, b.negatives, b.ratio));
        balance.push((spec.id, b));
    }
    fsutil::write(STAGE, &out.join("scenarios").join("class_balance.csv"), table)?;
    Ok(balance)
}

/// Reads a persisted scenario dataset and its split.
pub fn load_scenario(cfg: &PipelineConfig, id: ScenarioId, stage: &'static str) -> Result<ScenarioDataset, CliError> {
    let out = &cfg.out_dir;
    let path = scenario_path(out, id);
    if !path.is_file() {
        return Err(CliError::stage(stage, format!("scenario {id} has not been built (missing {})", path.display())));
    }
    let text = fsutil::read(stage, &path)?;
    let bad = |m: String| CliError::stage(stage, format!("{}: {m}", path.display()));
    let mut lines = text.lines();
    if lines.next() != Some(scenario_header().as_str()) {
        return Err(bad("header mismatch".into()));
    }
    let (mut rows, mut labels, mut gaps) = (Vec::new(), Vec::new(), Vec::new());
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 + N_FEATURES {
            return Err(bad(format!("expected {} fields", 4 + N_FEATURES)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number '{s}': {e}")));
        let mut values = [0.0; N_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(f[4 + k])?;
        }
        rows.push(FeatureVector { instance_id: f[0].to_string(), source: f[1].parse().map_err(bad)?, values });
        labels.push(f[2].parse::<u8>().map_err(|e| bad(e.to_string()))?);
        gaps.push(num(f[3])?);
    }
    let test = parse_split(&fsutil::read(stage, &split_path(out, id))?).map_err(bad)?;
    if test.iter().any(|&i| i >= rows.len()) || test.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("split indices out of range or unsorted".into()));
    }
    let train = (0..rows.len()).filter(|i| test.binary_search(i).is_err()).collect();
    Ok(ScenarioDataset {
        spec: specs(cfg)?.into_iter().find(|s| s.id == id).unwrap_or_else(|| ScenarioSpec::standard(id)),
        rows,
        labels,
        gaps,
        train,
        test,
        seed: scenario_seed(cfg, id),
    })
}

/// Per-scenario table: each classifier's test scores at three decimals,
/// then its confusion counts.
fn scenario_table(rows: &[(EvaluationRow, routelens::ConfusionMatrix)]) -> String {
    let mut out = String::from("classifier,precision,recall,f1,tn,fp,fn,tp\n");
    for (r, m) in rows {
        out.push_str(&format!(
            "{},{:.3},{:.3},{:.3},{},{},{},{}\n",
            r.classifier, r.precision, r.recall, r.f1, m.tn, m.fp, m.fn_, m.tp
        ));
    }
    out
}

/// Fits every configured classifier on every selected scenario and scores
/// it on the held-out split.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<Vec<EvaluationRow>, CliError> {
    const STAGE: &str = "train";
    let out = &cfg.out_dir;
    let datasets: Vec<ScenarioDataset> =
        specs(cfg)?.iter().map(|s| load_scenario(cfg, s.id, STAGE)).collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..datasets.len()).flat_map(|d| (0..cfg.learn.classifiers.len()).map(move |c| (d, c))).collect();
    let results: Vec<(EvaluationRow, routelens::ConfusionMatrix, TrainedModel)> = jobs
        .par_iter()
        .map(|&(d, c)| {
            let ds = &datasets[d];
            let spec = &cfg.learn.classifiers[c];
            let fail = |e: &dyn std::fmt::Display| CliError::stage(STAGE, format!("{} {}: {e}", ds.spec.id, spec.kind));
            let (x, y) = ds.matrix(&ds.train);
            let model = fit(spec, &x, &y).map_err(|e| fail(&e))?;
            let (xt, yt) = ds.matrix(&ds.test);
            let ev = model.evaluate(&xt, &yt, 1.0).map_err(|e| fail(&e))?;
            let row = EvaluationRow {
                scenario: ds.spec.id.to_string(),
                classifier: spec.kind.to_string(),
                precision: ev.precision,
                recall: ev.recall,
                f1: ev.f_beta,
            };
            Ok((row, ev.matrix, model))
        })
        .collect::<Result<_, CliError>>()?;

    let mut rows = Vec::new();
    for (&(d, c), (row, _, model)) in jobs.iter().zip(&results) {
        fsutil::write(STAGE, &model_path(out, datasets[d].spec.id, cfg.learn.classifiers[c].kind), model.to_json())?;
        rows.push(row.clone());
    }
    for ds in &datasets {
        let per: Vec<(EvaluationRow, routelens::ConfusionMatrix)> = results
            .iter()
            .filter(|(r, _, _)| r.scenario == ds.spec.id.to_string())
            .map(|(r, m, _)| (r.clone(), *m))
            .collect();
        fsutil::write(STAGE, &out.join("train").join("tables").join(format!("{}.csv", ds.spec.id)), scenario_table(&per))?;
    }
    fsutil::write(STAGE, &evaluation_path(out), write_evaluation_csv(&rows))?;
    Ok(rows)
}

pub fn load_evaluation(out: &Path, stage: &'static str) -> Result<Vec<EvaluationRow>, CliError> {
    let path = evaluation_path(out);
    if !path.is_file() {
        return Err(CliError::stage(stage, format!("no evaluation table at {}; run the train stage first", path.display())));
    }
    parse_evaluation_csv(&fsutil::read(stage, &path)?).map_err(|e| CliError::stage(stage, e))
}

/// The classifier with the highest test F1 in `scenario`; ties go to the
/// earlier kind in [`ModelKind::ALL`].
pub fn best_classifier(rows: &[EvaluationRow], scenario: ScenarioId) -> Option<(ModelKind, f64)> {
    let name = scenario.to_string();
    rows.iter()
        .filter(|r| r.scenario == name)
        .filter_map(|r| r.classifier.parse::<ModelKind>().ok().map(|k| (k, r.f1)))
        .min_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainMeta {
    pub scenario: ScenarioId,
    pub classifier: ModelKind,
    pub f1: f64,
    pub estimator_requested: Estimator,
    pub estimator: Estimator,
    pub note: Option<String>,
    pub n_rows: usize,
    pub background_size: usize,
    pub seed: u64,
}

fn active_features(model: &TrainedModel) -> Option<Vec<usize>> {
    let trees = match model.trees()? {
        TreeEnsemble::Averaged(t) => t,
        TreeEnsemble::Boosted { trees, .. } => trees,
    };
    let mut used: Vec<usize> = trees.iter().flat_map(|t| t.features_used()).collect();
    used.sort_unstable();
    used.dedup();
    Some(used)
}

/// Explains the test rows of every scenario with its best classifier.
pub fn cmd_explain(cfg: &PipelineConfig) -> Result<Vec<ExplainMeta>, CliError> {
    const STAGE: &str = "explain";
    let out = &cfg.out_dir;
    let evaluation = load_evaluation(out, STAGE)?;
    let mut metas = Vec::new();
    let mut importances = Vec::new();
    for spec in specs(cfg)? {
        let id = spec.id;
        let (kind, f1) = best_classifier(&evaluation, id)
            .ok_or_else(|| CliError::stage(STAGE, format!("scenario {id} has no evaluated classifier")))?;
        let ds = load_scenario(cfg, id, STAGE)?;
        let model = TrainedModel::from_json(&fsutil::read(STAGE, &model_path(out, id, kind))?)
            .map_err(|e| CliError::stage(STAGE, format!("{id} {kind}: {e}")))?;
        let mut settings = cfg.explain.settings();
        settings.seed = derive_seed(cfg.explain.seed, id.index() as u64);
        let mut note = None;
        if settings.estimator == Estimator::TreePath && !kind.is_tree_based() {
            settings.estimator = Estimator::PermutationSampling;
            note = Some(format!("{kind} is not tree-based; used permutation sampling"));
        }
        let rows = explain_set(&ds, settings.max_rows);
        let fail = |e: &dyn std::fmt::Display| CliError::stage(STAGE, format!("{id} {kind}: {e}"));
        let explanations = if settings.estimator == Estimator::Exact {
            let active = active_features(&model).unwrap_or_else(|| (0..N_FEATURES).collect());
            if active.len() > EXACT_MAX_ACTIVE {
                return Err(fail(&format!(
                    "exact enumeration supports at most {EXACT_MAX_ACTIVE} active features, the model uses {}",
                    active.len()
                )));
            }
            let bg = background_rows(&ds, settings.background_size, settings.seed);
            rows.par_iter()
                .map(|&r| shapley_exact(&model, &ds.rows[r].values, &bg, Some(&active)))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fail(&e))?
        } else {
            explain_rows(&model, &ds, &rows, &settings).map_err(|e| fail(&e))?
        };
        fsutil::write(STAGE, &explanation_path(out, id), write_explanations_csv(&rows, &explanations))?;
        let imp = scenario_importance(id, &explanations, f1).map_err(|e| fail(&e))?;
        importances.push(imp);
        let meta = ExplainMeta {
            scenario: id,
            classifier: kind,
            f1,
            estimator_requested: cfg.explain.estimator,
            estimator: settings.estimator,
            note,
            n_rows: rows.len(),
            background_size: settings.background_size.min(ds.train.len()),
            seed: settings.seed,
        };
        fsutil::write(STAGE, &explain_meta_path(out, id), pretty(&meta))?;
        metas.push(meta);
    }
    fsutil::write(STAGE, &out.join("explain").join("importance.csv"), write_importance_csv(&importances))?;
    Ok(metas)
}

pub(crate) fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Rebuilds one scenario's importance from its persisted explanations.
pub fn load_importance(cfg: &PipelineConfig, id: ScenarioId, stage: &'static str) -> Result<(ExplainMeta, ScenarioImportance), CliError> {
    let out = &cfg.out_dir;
    let meta_path = explain_meta_path(out, id);
    if !meta_path.is_file() {
        return Err(CliError::stage(stage, format!("scenario {id} has not been explained (missing {})", meta_path.display())));
    }
    let meta: ExplainMeta =
        serde_json::from_str(&fsutil::read(stage, &meta_path)?).map_err(|e| CliError::stage(stage, e))?;
    let rows = parse_explanations_csv(&fsutil::read(stage, &explanation_path(out, id))?)
        .map_err(|e| CliError::stage(stage, e))?;
    if rows.is_empty() {
        return Err(CliError::stage(stage, format!("scenario {id}: no explained rows")));
    }
    let d = rows[0].1.len();
    let mut s = vec![0.0; d];
    for (_, phis, _) in &rows {
        for (acc, p) in s.iter_mut().zip(phis) {
            *acc += p.abs();
        }
    }
    s.iter_mut().for_each(|v| *v /= rows.len() as f64);
    let imp = ScenarioImportance { scenario: id, s, f1: meta.f1, n_rows: rows.len() };
    Ok((meta, imp))
}

#[derive(Debug, Serialize)]
struct UnifiedFile<'a> {
    scenarios: &'a [ScenarioId],
    ranking: Vec<&'static str>,
    y: BTreeMap<&'static str, f64>,
    warning: &'a Option<String>,
}

/// F1-weighted ranking of the features over the explained scenarios.
pub fn cmd_unify(cfg: &PipelineConfig) -> Result<UnifiedImportance, CliError> {
    const STAGE: &str = "unify";
    let imps: Vec<ScenarioImportance> =
        specs(cfg)?.iter().map(|s| load_importance(cfg, s.id, STAGE).map(|(_, i)| i)).collect::<Result<_, _>>()?;
    let u = unified_ranking(&imps).map_err(|e| CliError::stage(STAGE, e))?;
    let dir = cfg.out_dir.join("unify");
    fsutil::write(STAGE, &dir.join("ranking.csv"), write_ranking_csv(&u))?;
    let file = UnifiedFile {
        scenarios: &u.scenarios,
        ranking: u.ranking.iter().map(|&j| FEATURE_KEYS[j]).collect(),
        y: u.y.iter().enumerate().map(|(j, &v)| (FEATURE_KEYS[j], v)).collect(),
        warning: &u.subset_warning,
    };
    fsutil::write(STAGE, &dir.join("unified.json"), pretty(&file))?;
    Ok(u)
}

/// Renders the reports and writes the manifest.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<Manifest, CliError> {
    report::write_reports(cfg)?;
    manifest::write_manifest(cfg)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub warnings: Vec<String>,
}

/// Every stage in order. A missing `[corpus]` section is fine when a
/// complete corpus already sits in the output directory.
pub fn cmd_run_all(cfg: &PipelineConfig, resume: bool) -> Result<RunSummary, CliError> {
    match &cfg.corpus {
        Some(_) => {
            corpus::cmd_corpus(cfg, resume)?;
        }
        None if corpus::is_complete(&cfg.out_dir) => {}
        None => {
            return Err(CliError::stage(
                "corpus",
                format!(
                    "no corpus under {} and the config has no [corpus] section",
                    corpus::corpus_dir(&cfg.out_dir).display()
                ),
            ))
        }
    }
    cmd_features(cfg)?;
    cmd_scenarios(cfg)?;
    cmd_train(cfg)?;
    let metas = cmd_explain(cfg)?;
    let unified = cmd_unify(cfg)?;
    let manifest = cmd_report(cfg)?;
    let mut warnings: Vec<String> = metas.iter().filter_map(|m| m.note.clone().map(|n| format!("{}: {n}", m.scenario))).collect();
    warnings.extend(unified.subset_warning);
    Ok(RunSummary { manifest, warnings })
}
