//! Summary manifest of a pipeline run.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pipeline::{load_evaluation, pretty};
use crate::{fsutil, CliError, PipelineConfig};

const STAGE: &str = "report";
pub const MANIFEST: &str = "manifest.json";

/// Files left out of the hash: the manifest itself and the solver timings.
pub const UNHASHED: [&str; 2] = [MANIFEST, "corpus/solver_runs.csv"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Entry {
    pub scenario: String,
    pub classifier: String,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// SHA-256 over the file list and the F1 table.
    pub hash: String,
    pub files: Vec<FileEntry>,
    pub f1: Vec<F1Entry>,
    pub warnings: Vec<String>,
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest_hash(files: &[FileEntry], f1: &[F1Entry]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update(format!("file {} {}\n", f.path, f.sha256));
    }
    for e in f1 {
        h.update(format!("f1 {} {} {}\n", e.scenario, e.classifier, e.f1));
    }
    hex::encode(h.finalize())
}

fn warnings(cfg: &PipelineConfig) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    let mut ids = cfg.scenarios.selected.clone();
    ids.sort();
    for id in ids {
        let (meta, _) = crate::pipeline::load_importance(cfg, id, STAGE)?;
        if let Some(note) = meta.note {
            out.push(format!("{id}: {note}"));
        }
    }
    let unified = fsutil::read(STAGE, &cfg.out_dir.join("unify").join("unified.json"))?;
    let v: serde_json::Value = serde_json::from_str(&unified).map_err(|e| CliError::stage(STAGE, e))?;
    if let Some(w) = v.get("warning").and_then(|w| w.as_str()) {
        out.push(w.to_string());
    }
    Ok(out)
}

pub fn build_manifest(cfg: &PipelineConfig) -> Result<Manifest, CliError> {
    let out = &cfg.out_dir;
    let paths = fsutil::walk(out).map_err(|e| CliError::stage(STAGE, format!("cannot list {}: {e}", out.display())))?;
    let mut files = Vec::new();
    for path in paths.into_iter().filter(|p| !UNHASHED.contains(&p.as_str())) {
        let bytes = std::fs::read(out.join(&path)).map_err(|e| CliError::stage(STAGE, format!("{path}: {e}")))?;
        files.push(FileEntry { sha256: sha(&bytes), path });
    }
    let f1 = load_evaluation(out, STAGE)?
        .into_iter()
        .map(|r| F1Entry { scenario: r.scenario, classifier: r.classifier, f1: r.f1 })
        .collect::<Vec<_>>();
    Ok(Manifest { hash: manifest_hash(&files, &f1), files, f1, warnings: warnings(cfg)? })
}

pub fn write_manifest(cfg: &PipelineConfig) -> Result<Manifest, CliError> {
    let m = build_manifest(cfg)?;
    fsutil::write(STAGE, &cfg.out_dir.join(MANIFEST), pretty(&m))?;
    Ok(m)
}

pub fn read_manifest(cfg: &PipelineConfig) -> Result<Manifest, CliError> {
    serde_json::from_str(&fsutil::read(STAGE, &cfg.out_dir.join(MANIFEST))?).map_err(|e| CliError::stage(STAGE, e))
}
