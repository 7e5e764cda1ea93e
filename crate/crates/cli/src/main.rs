use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use routelens::{Estimator, ScenarioId};
use routelens_cli::corpus::CorpusOutcome;
use routelens_cli::{
    cmd_corpus, cmd_explain, cmd_features, cmd_report, cmd_run_all, cmd_scenarios, cmd_train, cmd_unify, CliError,
    PipelineConfig,
};

#[derive(Parser)]
#[command(name = "routelens", version, about = "Explain what separates optimal CVRP solutions from near-optimal ones")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline config (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated scenario list, e.g. `S1,S4`.
    #[arg(long, global = true, value_delimiter = ',')]
    scenarios: Option<Vec<ScenarioId>>,
    /// Shapley estimator: exact, sample or tree.
    #[arg(long, global = true)]
    estimator: Option<Estimator>,
    /// Continue a partially written corpus instead of failing.
    #[arg(long, global = true)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load instances and solve them with every source.
    Corpus,
    /// Extract the feature matrix.
    Features,
    /// Build scenario datasets and their train/test splits.
    Scenarios,
    /// Fit and evaluate every classifier on every scenario.
    Train,
    /// Shapley explanations for the best classifier of each scenario.
    Explain,
    /// F1-weighted feature ranking across scenarios.
    Unify,
    /// SVG/CSV reports and the manifest.
    Report,
    /// Every stage in order.
    RunAll,
    /// Print the effective configuration as TOML.
    Config,
}

fn load(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(ids) = &cli.scenarios {
        cfg.scenarios.selected = ids.clone();
    }
    if let Some(e) = cli.estimator {
        cfg.explain.estimator = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Corpus => {
            let s = cmd_corpus(&cfg, cli.resume)?;
            let how = match s.outcome {
                CorpusOutcome::Generated => "generated".to_string(),
                CorpusOutcome::Resumed { reused } => format!("resumed, {reused} reused"),
                CorpusOutcome::UpToDate => "up to date".to_string(),
            };
            println!("corpus: {} instances ({how})", s.n_instances);
        }
        Command::Features => println!("features: {} rows", cmd_features(&cfg)?),
        Command::Scenarios => {
            for (id, b) in cmd_scenarios(&cfg)? {
                println!("{id}: {} positive, {} negative", b.positives, b.negatives);
            }
        }
        Command::Train => {
            for r in cmd_train(&cfg)? {
                println!("{} {:<32} P {:.3} R {:.3} F1 {:.3}", r.scenario, r.classifier, r.precision, r.recall, r.f1);
            }
        }
        Command::Explain => {
            for m in cmd_explain(&cfg)? {
                println!("{}: {} via {} ({} rows)", m.scenario, m.classifier, m.estimator, m.n_rows);
                if let Some(note) = m.note {
                    eprintln!("warning: {}: {note}", m.scenario);
                }
            }
        }
        Command::Unify => {
            let u = cmd_unify(&cfg)?;
            for (r, &j) in u.ranking.iter().take(10).enumerate() {
                println!("{:>2}. {} {:.4}", r + 1, routelens::FEATURE_KEYS[j], u.y[j]);
            }
            if let Some(w) = u.subset_warning {
                eprintln!("warning: {w}");
            }
        }
        Command::Report => println!("manifest hash {}", cmd_report(&cfg)?.hash),
        Command::RunAll => {
            let s = cmd_run_all(&cfg, cli.resume)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("manifest hash {}", s.manifest.hash);
        }
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
