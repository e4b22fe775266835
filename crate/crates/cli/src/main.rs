use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cqfs_core::dataio::{synth_planted, SynthConfig};
use cqfs_core::io::write_atomic;
use cqfs_core::pipeline::baselines::{feature_selection_stats, feature_stats_tsv};
use cqfs_core::pipeline::config::{DatasetSource, ExperimentConfig, SolverChoice};
use cqfs_core::pipeline::run::{with_workers, Pipeline, STAGE_DATASET, STAGE_REPORTS, STAGE_SELECT};
use cqfs_core::solvers::SelectionResult;
use cqfs_core::{Error, Result};

/// Collaborative-driven feature selection for cold-start recommendation.
#[derive(Parser)]
#[command(name = "cqfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic planted-feature dataset as TSV files.
    Synth(Common),
    /// Load, filter and split the dataset.
    Prepare(Common),
    /// Tune and fit the collaborative model on warm items.
    TrainCf(Common),
    /// Build the feature penalization matrices for the QUBO grid.
    BuildQubo(Common),
    /// Solve every QUBO of the grid.
    Select(Common),
    /// Pick the best selection and tune the content-based models.
    TrainCbf(Common),
    /// Evaluate all content-based models on the cold test items.
    Evaluate(Common),
    /// Run every stage.
    Pipeline(Common),
    /// Per-feature selection frequency over selection files.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Selection JSON files; defaults to the grid selections under the
        /// output directory.
        files: Vec<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment configuration (JSON). Without it the synthetic reference
    /// dataset and default settings are used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Annealing samples per QUBO.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exhaustive,
    Sa,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::synthetic(self.seed.unwrap_or(0)),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = Some(w);
        }
        if let Some(s) = self.solver {
            cfg.solver.kind = match s {
                SolverArg::Exhaustive => SolverChoice::Exhaustive,
                SolverArg::Sa => SolverChoice::Sa,
            };
        }
        if let Some(n) = self.samples {
            cfg.solver.num_samples = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn synth(cfg: &ExperimentConfig) -> Result<()> {
    let sc = match &cfg.dataset {
        DatasetSource::Synth(sc) => sc.clone(),
        DatasetSource::Files { .. } => SynthConfig::reference(cfg.seed),
    };
    let planted = synth_planted(&sc)?;
    let out = &cfg.output_dir;
    let ds = &planted.dataset;
    ds.export_tsv(&out.join("interactions.tsv"), &out.join("item_features.tsv"))?;
    let labels: String = planted
        .planted
        .iter()
        .map(|&f| format!("{}\n", ds.feature_ids.label(f)))
        .collect();
    write_atomic(&out.join("planted.txt"), labels.as_bytes())?;
    println!(
        "wrote {} users, {} items, {} features ({} planted) to {}",
        ds.n_users(),
        ds.n_items(),
        ds.n_features(),
        planted.planted.len(),
        out.display()
    );
    Ok(())
}

fn stats(cfg: &ExperimentConfig, files: &[PathBuf]) -> Result<()> {
    let out = &cfg.output_dir;
    let files: Vec<PathBuf> = if files.is_empty() {
        let dir = out.join(STAGE_SELECT);
        let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::Artifact {
                path: dir.clone(),
                message: format!("no selections to summarize: {e}"),
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("selection_") && n.ends_with(".json"))
            })
            .collect();
        found.sort();
        found
    } else {
        files.to_vec()
    };
    let selections = files
        .iter()
        .map(|p| SelectionResult::load(p))
        .collect::<Result<Vec<_>>>()?;
    let n_features = selections.iter().map(|s| s.x.len()).max().unwrap_or(0);
    let chosen: Vec<Vec<usize>> = selections.iter().map(SelectionResult::selected).collect();
    let table = feature_selection_stats(&chosen, n_features)?;
    let labels = feature_labels(&out.join(STAGE_DATASET).join("ids.json"));
    print!(
        "{}",
        feature_stats_tsv(&table, |f| labels
            .as_ref()
            .and_then(|l| l.get(f).cloned())
            .unwrap_or_else(|| f.to_string()))
    );
    Ok(())
}

fn feature_labels(ids: &Path) -> Option<Vec<String>> {
    let text = std::fs::read_to_string(ids).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    serde_json::from_value(value.get("features")?.clone()).ok()
}

fn print_stages(p: &Pipeline) {
    for r in p.records() {
        let state = if r.cached { "cached" } else { "built" };
        println!("{:<8} {:<6} {:>9.3}s  {}", r.name, state, r.seconds, r.dir.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, files) = match &cli.command {
        Command::Stats { common, files } => (common, files.as_slice()),
        Command::Synth(c)
        | Command::Prepare(c)
        | Command::TrainCf(c)
        | Command::BuildQubo(c)
        | Command::Select(c)
        | Command::TrainCbf(c)
        | Command::Evaluate(c)
        | Command::Pipeline(c) => (c, &[][..]),
    };
    let cfg = common.config()?;
    match cli.command {
        Command::Synth(_) => return synth(&cfg),
        Command::Stats { .. } => return stats(&cfg, files),
        _ => {}
    }
    let out = cfg.output_dir.clone();
    with_workers(cfg.workers, || {
        let mut p = Pipeline::new(cfg.clone(), &out)?;
        match cli.command {
            Command::Prepare(_) => {
                p.splits()?;
            }
            Command::TrainCf(_) => {
                p.collaborative()?;
            }
            Command::BuildQubo(_) => {
                p.qubos()?;
            }
            Command::Select(_) => {
                p.selections()?;
            }
            Command::TrainCbf(_) => {
                p.content()?;
            }
            Command::Evaluate(_) | Command::Pipeline(_) => {
                p.reports()?;
            }
            Command::Synth(_) | Command::Stats { .. } => unreachable!("handled above"),
        }
        p.finish()?;
        print_stages(&p);
        if p.records().iter().any(|r| r.name == STAGE_REPORTS) {
            let summary = std::fs::read_to_string(out.join(STAGE_REPORTS).join("summary.tsv"))?;
            print!("{summary}");
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
