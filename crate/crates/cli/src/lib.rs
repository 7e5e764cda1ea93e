//! Pipeline driver for `routelens`.
//!
//! Each stage reads the files persisted by the stages before it and writes
//! its own outputs under the configured output directory:
//!
//! ```text
//! corpus/      instances/*.vrp, solutions/*.sol, gaps.csv, solver_runs.csv
//! features/    features.csv
//! scenarios/   S*.csv, S*.split, class_balance.csv
//! train/       models/*.json, evaluation.csv, tables/S*.csv
//! explain/     S*.csv, S*.json, importance.csv
//! unify/       ranking.csv, unified.json
//! reports/     fig*.svg with a companion CSV each
//! manifest.json
//! ```

pub mod config;
pub mod corpus;
mod error;
pub mod fsutil;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use config::PipelineConfig;
pub use error::CliError;
pub use manifest::Manifest;
pub use pipeline::{cmd_explain, cmd_features, cmd_report, cmd_run_all, cmd_scenarios, cmd_train, cmd_unify};
pub use corpus::cmd_corpus;
