//! `bidlearn`: batch driver for the auction learning experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bidlearn_core::experiment::{emit_reference_tables, evaluate_only, run_experiment, ExperimentSpec};
use bidlearn_core::nn::Checkpoint;
use bidlearn_core::{Error, ExperimentId};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bidlearn", version, about = "Learn optimal bids in dynamic auctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, evaluate and write all artifacts for one experiment.
    Run {
        /// One of SplitTruthful2, SplitEquilibrium3, Seq1FP2, Seq1SP2, Seq2FPTruthful3, Seq2FPEquilibrium3.
        experiment: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; defaults to `runs/<experiment>-seed<seed>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint without training.
    Eval {
        checkpoint: PathBuf,
        /// Needed when the checkpoint does not name its experiment.
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        spec: SpecArgs,
        /// Evaluation seed; defaults to the preset's.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write `eval_report.txt` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write oracle bid tables, optimal values and quadrature diagnostics.
    ReferenceTables {
        #[arg(long, default_value = "reference")]
        out: PathBuf,
    },
    /// Print the full configuration of an experiment with value provenance.
    PrintConfig {
        /// Omit to print every experiment.
        experiment: Option<String>,
        #[command(flatten)]
        spec: SpecArgs,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// Hyperparameter preset: `paper` or `desk`.
    #[arg(long, default_value = "paper")]
    preset: String,
    /// Multiplier on epochs and episodes per epoch.
    #[arg(long)]
    scale: Option<f64>,
    /// Parallel worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// TOML configuration; its `[experiment]` section replaces the preset.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Usage problems detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn parse_id(s: &str) -> anyhow::Result<ExperimentId> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

impl SpecArgs {
    fn build(&self, id: ExperimentId) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let spec = ExperimentSpec::from_config_file(path)?;
                if spec.id != id {
                    return Err(usage(format!("{} configures {}, not {id}", path.display(), spec.id)));
                }
                spec
            }
            None => ExperimentSpec::preset(id, self.preset.parse().map_err(|e: Error| usage(e.to_string()))?),
        };
        if let Some(scale) = self.scale {
            spec = spec.scaled(scale).map_err(|e| usage(e.to_string()))?;
        }
        if let Some(w) = self.workers {
            spec = spec.with_workers(w);
        }
        Ok(spec)
    }

    fn init_workers(&self) -> anyhow::Result<()> {
        if let Some(n) = self.workers.filter(|&n| n > 0) {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")?;
        }
        Ok(())
    }
}

fn config_id(path: &Path) -> anyhow::Result<ExperimentId> {
    Ok(ExperimentSpec::from_config_file(path)?.id)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            experiment,
            spec,
            seed,
            out,
        } => {
            let id = parse_id(&experiment)?;
            let exp = spec.build(id)?;
            spec.init_workers()?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("runs/{id}-seed{seed}")));
            eprintln!(
                "training {id} ({} preset, {} epochs x {} episodes) into {}",
                exp.preset,
                exp.train.epochs,
                exp.train.episodes_per_epoch,
                out.display()
            );
            let outcome = run_experiment(&exp, &out, seed)?;
            print!("{}", outcome.report.to_key_value());
            eprintln!("finished in {:.1}s", outcome.wall_clock_secs);
        }
        Command::Eval {
            checkpoint,
            experiment,
            spec,
            seed,
            out,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let id = match (experiment, ckpt.experiment, &spec.config) {
                (Some(s), _, _) => parse_id(&s)?,
                (None, Some(id), _) => id,
                (None, None, Some(path)) => config_id(path)?,
                (None, None, None) => return Err(usage("checkpoint does not name its experiment; pass --experiment")),
            };
            let exp = spec.build(id)?;
            spec.init_workers()?;
            let mut eval = exp.eval.clone();
            if let Some(s) = seed {
                eval.seed = s;
            }
            let report = evaluate_only(&checkpoint, &exp, &eval)?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join("eval_report.txt");
                std::fs::write(&path, report.to_key_value()).map_err(|e| Error::Io { path, source: e })?;
            }
            print!("{}", report.to_key_value());
        }
        Command::ReferenceTables { out } => {
            let summary = emit_reference_tables(&out)?;
            for f in &summary.files {
                println!("{}", f.display());
            }
            eprintln!("split quadrature max abs error {:e}", summary.max_quadrature_error);
        }
        Command::PrintConfig { experiment, spec } => {
            let ids = match (experiment, &spec.config) {
                (Some(s), _) => vec![parse_id(&s)?],
                (None, Some(path)) => vec![config_id(path)?],
                (None, None) => ExperimentId::ALL.to_vec(),
            };
            for (i, id) in ids.into_iter().enumerate() {
                if i > 0 {
                    println!("\n# ----------------------------------------\n");
                }
                print!("{}", spec.build(id)?.to_config_text()?);
            }
        }
    }
    Ok(())
}

/// 2 usage, 3 divergence, 4 I/O; anything else is a generic failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Diverged { .. }) => 3,
        Some(Error::Io { .. } | Error::Checkpoint { .. }) => 4,
        Some(Error::Config(_) | Error::UnknownExperiment(_) | Error::Shape(_) | Error::InvalidSettings(_)) => 2,
        _ if err.chain().any(|c| c.is::<std::io::Error>()) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
