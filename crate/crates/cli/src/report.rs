//! Static SVG reports. Each `reports/<name>.svg` has a `reports/<name>.csv`
//! listing every number it shows.

use routelens::{derive_seed, ModelKind, ScenarioId, SolutionSource, FEATURE_KEYS};

use crate::corpus::load_gaps;
use crate::pipeline::{explanation_path, load_evaluation, load_importance, load_scenario};
use crate::svg::{palette, ramp, Anchor, Svg};
use crate::{fsutil, CliError, PipelineConfig};

const STAGE: &str = "report";
const TOP: usize = 10;

fn emit(cfg: &PipelineConfig, name: &str, svg: Svg) -> Result<(), CliError> {
    let dir = cfg.out_dir.join("reports");
    let (doc, csv) = svg.finish();
    fsutil::write(STAGE, &dir.join(format!("{name}.svg")), doc)?;
    fsutil::write(STAGE, &dir.join(format!("{name}.csv")), csv)
}

fn selected(cfg: &PipelineConfig) -> Vec<ScenarioId> {
    let mut ids = cfg.scenarios.selected.clone();
    ids.sort();
    ids
}

pub fn write_reports(cfg: &PipelineConfig) -> Result<(), CliError> {
    solution_quality(cfg)?;
    classifiers(cfg)?;
    importance(cfg)?;
    for id in selected(cfg) {
        beeswarm(cfg, id)?;
    }
    unified(cfg)
}

/// Share of optimal versus near-optimal solutions, and the cumulative gap
/// distribution of each heuristic.
fn solution_quality(cfg: &PipelineConfig) -> Result<(), CliError> {
    let gaps = load_gaps(&cfg.out_dir, STAGE)?;
    let optimal = gaps.iter().filter(|g| g.source == SolutionSource::OptimalProxy).count();
    let near = gaps.iter().filter(|g| g.source != SolutionSource::OptimalProxy && g.gap_percent > 0.0).count();
    let total = (optimal + near).max(1) as f64;

    let mut s = Svg::new(820.0, 360.0);
    s.text(410.0, 24.0, 15.0, Anchor::Middle, "Optimal and near-optimal solutions");
    let (cx, cy, r) = (160.0, 190.0, 110.0);
    let split = std::f64::consts::TAU * optimal as f64 / total;
    s.wedge(cx, cy, r, 0.0, split, palette(0));
    s.wedge(cx, cy, r, split, std::f64::consts::TAU, palette(1));
    for (k, (name, count)) in [("optimal (y=1)", optimal), ("near-optimal (y=0)", near)].into_iter().enumerate() {
        let y = 325.0 + 16.0 * k as f64;
        s.rect(40.0, y - 10.0, 10.0, 10.0, palette(k));
        s.text(56.0, y, 12.0, Anchor::Start, name);
        s.number(200.0, y, 12.0, Anchor::End, &format!("count/{name}"), count.to_string());
        s.number(250.0, y, 12.0, Anchor::End, &format!("percent/{name}"), format!("{:.1}", 100.0 * count as f64 / total));
    }

    let (x0, y0, w, h) = (360.0, 60.0, 420.0, 240.0);
    let max_gap = gaps.iter().map(|g| g.gap_percent).fold(0.0f64, f64::max).max(1e-9);
    s.line(x0, y0 + h, x0 + w, y0 + h, "#333");
    s.line(x0, y0, x0, y0 + h, "#333");
    for (k, t) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let shown = format!("{:.1}", t * max_gap);
        s.number(x0 + t * w, y0 + h + 16.0, 11.0, Anchor::Middle, &format!("x_tick/{k}"), shown);
        s.number(x0 - 6.0, y0 + h - t * h + 4.0, 11.0, Anchor::End, &format!("y_tick/{k}"), format!("{t:.1}"));
    }
    s.text(x0 + w / 2.0, y0 + h + 34.0, 12.0, Anchor::Middle, "gap to optimal (%)");
    s.text(x0, y0 - 8.0, 12.0, Anchor::Start, "cumulative share");
    for (k, source) in SolutionSource::HEURISTICS.into_iter().enumerate() {
        let mut v: Vec<f64> =
            gaps.iter().filter(|g| g.source == source && g.gap_percent > 0.0).map(|g| g.gap_percent).collect();
        v.sort_by(f64::total_cmp);
        let color = palette(k + 2);
        if !v.is_empty() {
            let mut pts = vec![(x0, y0 + h)];
            for (i, g) in v.iter().enumerate() {
                let share = (i + 1) as f64 / v.len() as f64;
                pts.push((x0 + g / max_gap * w, y0 + h - share * h));
            }
            s.polyline(&pts, color);
        }
        let ly = y0 + 14.0 + 16.0 * k as f64;
        s.rect(x0 + w - 170.0, ly - 9.0, 10.0, 10.0, color);
        s.text(x0 + w - 155.0, ly, 11.0, Anchor::Start, source.as_str());
        s.text(x0 + w - 60.0, ly, 11.0, Anchor::Start, "median");
        let median = median(&v).map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
        s.number(x0 + w, ly, 11.0, Anchor::End, &format!("median_gap/{source}"), median);
        s.record(&format!("n_near_optimal/{source}"), v.len().to_string());
    }
    emit(cfg, "solution_quality", s)
}

pub fn median(sorted: &[f64]) -> Option<f64> {
    match sorted.len() {
        0 => None,
        n if n % 2 == 1 => Some(sorted[n / 2]),
        n => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

/// Test F1 of every classifier, grouped by scenario.
fn classifiers(cfg: &PipelineConfig) -> Result<(), CliError> {
    let rows = load_evaluation(&cfg.out_dir, STAGE)?;
    let ids = selected(cfg);
    let kinds: Vec<ModelKind> = cfg.learn.classifiers.iter().map(|s| s.kind).collect();
    let group = 30.0 * kinds.len() as f64 + 20.0;
    let (x0, y0, h) = (50.0, 50.0, 260.0);
    let width = x0 + group * ids.len() as f64 + 200.0;
    let mut s = Svg::new(width, 370.0);
    s.text(width / 2.0, 24.0, 15.0, Anchor::Middle, "Test F1 per scenario and classifier");
    s.line(x0, y0 + h, x0 + group * ids.len() as f64, y0 + h, "#333");
    for (gi, id) in ids.iter().enumerate() {
        let gx = x0 + group * gi as f64 + 10.0;
        s.text(gx + group / 2.0 - 10.0, y0 + h + 18.0, 12.0, Anchor::Middle, &id.to_string());
        for (ki, kind) in kinds.iter().enumerate() {
            let Some(r) = rows.iter().find(|r| r.scenario == id.to_string() && r.classifier == kind.as_str()) else {
                continue;
            };
            let bx = gx + 30.0 * ki as f64;
            let bh = r.f1 * h;
            s.rect(bx, y0 + h - bh, 26.0, bh, palette(ki));
            s.number(bx + 13.0, y0 + h - bh - 3.0, 8.0, Anchor::Middle, &format!("f1/{id}/{kind}"), format!("{:.3}", r.f1));
        }
    }
    let lx = x0 + group * ids.len() as f64 + 20.0;
    for (ki, kind) in kinds.iter().enumerate() {
        let ly = y0 + 16.0 * ki as f64;
        s.rect(lx, ly - 9.0, 10.0, 10.0, palette(ki));
        s.text(lx + 15.0, ly, 11.0, Anchor::Start, kind.as_str());
    }
    emit(cfg, "classifier_f1", s)
}

/// Mean |SHAP| of the ten strongest features in each scenario.
fn importance(cfg: &PipelineConfig) -> Result<(), CliError> {
    let ids = selected(cfg);
    let (pw, ph) = (380.0, 40.0 + 18.0 * TOP as f64);
    let cols = 2usize;
    let nrows = ids.len().div_ceil(cols);
    let mut s = Svg::new(pw * cols as f64 + 20.0, ph * nrows as f64 + 40.0);
    s.text(pw, 24.0, 15.0, Anchor::Middle, "Mean |SHAP| per scenario");
    for (k, &id) in ids.iter().enumerate() {
        let (meta, imp) = load_importance(cfg, id, STAGE)?;
        let px = 10.0 + pw * (k % cols) as f64;
        let py = 40.0 + ph * (k / cols) as f64;
        s.text(px, py + 14.0, 13.0, Anchor::Start, &format!("{id} ({})", meta.classifier));
        s.text(px + 250.0, py + 14.0, 11.0, Anchor::Start, "F1");
        s.number(px + 300.0, py + 14.0, 11.0, Anchor::End, &format!("f1/{id}"), format!("{:.3}", meta.f1));
        let top = imp.top(TOP);
        let max = top.first().map_or(0.0, |&j| imp.s[j]).max(1e-300);
        for (r, &j) in top.iter().enumerate() {
            let y = py + 24.0 + 18.0 * r as f64;
            s.text(px + 40.0, y + 11.0, 11.0, Anchor::End, FEATURE_KEYS[j]);
            s.rect(px + 46.0, y + 2.0, 220.0 * imp.s[j] / max, 12.0, palette(0));
            let shown = format!("{:.4}", imp.s[j]);
            s.number(px + 272.0, y + 12.0, 10.0, Anchor::Start, &format!("mean_abs_shap/{id}/{}", FEATURE_KEYS[j]), shown);
        }
    }
    emit(cfg, "importance", s)
}

/// Per-row Shapley values of the ten strongest features, one strip per
/// feature, coloured by the row's feature-value quantile.
fn beeswarm(cfg: &PipelineConfig, id: ScenarioId) -> Result<(), CliError> {
    let (_, imp) = load_importance(cfg, id, STAGE)?;
    let ds = load_scenario(cfg, id, STAGE)?;
    let rows = routelens::explain::parse_explanations_csv(&fsutil::read(STAGE, &explanation_path(&cfg.out_dir, id))?)
        .map_err(|e| CliError::stage(STAGE, e))?;
    let top = imp.top(TOP);
    let lim = rows
        .iter()
        .flat_map(|(_, phis, _)| top.iter().map(move |&j| phis[j].abs()))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let (x0, y0, w, band) = (70.0, 50.0, 480.0, 28.0);
    let mut s = Svg::new(620.0, y0 + band * top.len() as f64 + 70.0);
    s.text(310.0, 24.0, 15.0, Anchor::Middle, &format!("SHAP values, {id}"));
    let mid = x0 + w / 2.0;
    let bottom = y0 + band * top.len() as f64;
    s.line(mid, y0, mid, bottom, "#999");
    s.line(x0, bottom, x0 + w, bottom, "#333");
    for (k, t) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
        s.number(mid + t * w / 2.0, bottom + 16.0, 11.0, Anchor::Middle, &format!("x_tick/{k}"), format!("{:.3}", t * lim));
    }
    s.text(mid, bottom + 34.0, 12.0, Anchor::Middle, "Shapley value");
    s.text(x0 + w + 8.0, y0 + 10.0, 10.0, Anchor::Start, "high value");
    s.text(x0 + w + 8.0, bottom, 10.0, Anchor::Start, "low value");
    for (b, &j) in top.iter().enumerate() {
        let cy = y0 + band * b as f64 + band / 2.0;
        s.text(x0 - 6.0, cy + 4.0, 11.0, Anchor::End, FEATURE_KEYS[j]);
        let mut values: Vec<f64> = rows.iter().map(|(r, _, _)| ds.rows[*r].values[j]).collect();
        values.sort_by(f64::total_cmp);
        for (r, phis, _) in &rows {
            let v = ds.rows[*r].values[j];
            let below = values.partition_point(|&u| u < v);
            let q = if values.len() > 1 { below as f64 / (values.len() - 1) as f64 } else { 0.5 };
            let jitter = (derive_seed(j as u64, *r as u64) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s.circle(mid + phis[j] / lim * w / 2.0, cy + jitter * band * 0.7, 2.2, &ramp(q));
            s.record(&format!("shap/{}/row{r}", FEATURE_KEYS[j]), phis[j].to_string());
        }
    }
    emit(cfg, &format!("beeswarm_{id}"), s)
}

/// Unified contribution of every feature, in rank order.
fn unified(cfg: &PipelineConfig) -> Result<(), CliError> {
    let imps: Vec<_> =
        selected(cfg).into_iter().map(|id| load_importance(cfg, id, STAGE).map(|(_, i)| i)).collect::<Result<_, _>>()?;
    let u = routelens::explain::unified_ranking(&imps).map_err(|e| CliError::stage(STAGE, e))?;
    let (x0, y0, bar) = (60.0, 50.0, 16.0);
    let mut s = Svg::new(560.0, y0 + bar * u.ranking.len() as f64 + 40.0);
    s.text(280.0, 24.0, 15.0, Anchor::Middle, "Unified feature contribution");
    let max = u.ranking.first().map_or(0.0, |&j| u.y[j]).max(1e-300);
    for (r, &j) in u.ranking.iter().enumerate() {
        let y = y0 + bar * r as f64;
        s.text(x0 - 6.0, y + 11.0, 11.0, Anchor::End, FEATURE_KEYS[j]);
        let len = 360.0 * u.y[j] / max;
        s.rect(x0, y + 2.0, len, bar - 4.0, palette(0));
        s.number(x0 + len + 6.0, y + 11.0, 10.0, Anchor::Start, &format!("y/{}", FEATURE_KEYS[j]), format!("{:.4}", u.y[j]));
    }
    if let Some(w) = &u.subset_warning {
        s.text(x0, y0 + bar * u.ranking.len() as f64 + 24.0, 11.0, Anchor::Start, w);
    }
    emit(cfg, "unified", s)
}
