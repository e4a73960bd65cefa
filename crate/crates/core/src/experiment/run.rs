use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::ExperimentSpec;
use crate::auction::{feature_len, AuctionKind};
use crate::error::{Error, Result};
use crate::eval::{bid_table, evaluate, grid, round2_surface, BidRow, EvalConfig, EvalReport};
use crate::nn::{Checkpoint, PolicySnapshot};
use crate::oracle::{
    first_round_split_bid, oracle_expected_utility, second_round_loser_bid, split_equilibrium_closed_form_n3,
    BidTarget,
};
use crate::sac::{format_log, EpochRecord, SacState, Trainer};
use crate::scenario::ExperimentId;
use crate::strategy::{PolicyMode, Strategy};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

const MANIFEST: &str = "manifest.toml";
const TRAIN_LOG: &str = "train_log.tsv";
const REPORT: &str = "eval_report.txt";
const REPORT_TABLE: &str = "eval_report.tsv";
const SUMMARY: &str = "run_summary.txt";
const CHECKPOINTS: &str = "checkpoints";
const PLOTS: &str = "plots";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Provenance record written before training starts.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub code_version: String,
    pub output_dir: PathBuf,
}

impl RunManifest {
    /// Output files relative to the output directory.
    pub fn outputs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("train_log", TRAIN_LOG.into()),
            ("checkpoints", format!("{CHECKPOINTS}/")),
            ("final_checkpoint", format!("{CHECKPOINTS}/final.ckpt")),
            ("eval_report", REPORT.into()),
            ("eval_table", REPORT_TABLE.into()),
            ("plot_data", format!("{PLOTS}/")),
            ("summary", SUMMARY.into()),
        ]
    }

    /// The experiment as a loadable configuration followed by a `[run]` section.
    pub fn to_text(&self) -> Result<String> {
        let mut s = self.spec.to_config_text()?;
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "code_version = \"{}\"", self.code_version);
        let _ = writeln!(s, "output_dir = {:?}", self.output_dir.display().to_string());
        for (k, v) in self.outputs() {
            let _ = writeln!(s, "{k} = \"{v}\"");
        }
        let _ = writeln!(s, "extension_fields = {}", self.spec.extension_fields()?.len());
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec = ExperimentSpec::from_config_text(text)?;
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let run = table
            .get("run")
            .and_then(|v| v.as_table())
            .ok_or_else(|| Error::Config("manifest has no [run] section".into()))?;
        let get_str = |k: &str| {
            run.get(k)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Config(format!("manifest is missing run.{k}")))
        };
        let seed = run
            .get("seed")
            .and_then(|v| v.as_integer())
            .ok_or_else(|| Error::Config("manifest is missing run.seed".into()))?;
        Ok(Self {
            seed: seed as u64,
            code_version: get_str("code_version")?.to_string(),
            output_dir: PathBuf::from(get_str("output_dir")?),
            spec,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub log: Vec<EpochRecord>,
    pub manifest: RunManifest,
    pub wall_clock_secs: f64,
}

fn bid_table_text(rows: &[BidRow]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let dims = first.targets.len();
    let mut s = String::from("theta");
    for k in 0..first.obs.revealed_prices.len() {
        let _ = write!(s, "\tprice{}", k + 1);
    }
    for d in 0..dims {
        let _ = write!(s, "\tlearned{d}\ttarget{d}\ttarget{d}_kind");
    }
    s.push('\n');
    for row in rows {
        let _ = write!(s, "{}", row.obs.own_type);
        for p in &row.obs.revealed_prices {
            let _ = write!(s, "\t{p}");
        }
        for d in 0..dims {
            let (t, kind) = match row.targets[d] {
                Some(BidTarget::Exact(t)) => (t.to_string(), "exact"),
                Some(BidTarget::AtLeast(t)) => (t.to_string(), "at_least"),
                None => ("-".to_string(), "unused"),
            };
            let _ = write!(s, "\t{}\t{t}\t{kind}", row.learned[d]);
        }
        s.push('\n');
    }
    s
}

fn write_plot_data(dir: &Path, strategy: &Strategy, spec: &ExperimentSpec) -> Result<()> {
    for round in 0..spec.settings.n_rounds {
        match bid_table(strategy, spec.id, &spec.settings, round, &spec.eval) {
            Ok(rows) => write(&dir.join(format!("bids_round{}.tsv", round + 1)), &bid_table_text(&rows))?,
            Err(Error::Unsupported(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if spec.settings.kind == AuctionKind::SequentialSales && spec.settings.n_rounds == 2 {
        let mut s = String::from("theta\tprice\tlearned\toptimal\n");
        for p in round2_surface(strategy, &spec.settings, &spec.eval)? {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", p.theta, p.price, p.learned, p.optimal);
        }
        write(&dir.join("round2_surface.tsv"), &s)?;
    }
    Ok(())
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    write(&dir.join(REPORT), &report.to_key_value())?;
    write(
        &dir.join(REPORT_TABLE),
        &format!("{}\n{}\n", EvalReport::TABLE_HEADER, report.table_row()),
    )
}

fn policy_strategy(state: &SacState, eval: &EvalConfig) -> Strategy {
    Strategy::Policy {
        params: state.policy.clone(),
        mode: if eval.deterministic_policy { PolicyMode::Mean } else { PolicyMode::Sample },
    }
}

/// Trains `spec` with `seed`, evaluates the final policy and writes all
/// artifacts under `output_dir`.
///
/// On divergence the log so far, the last finite checkpoint and a summary are
/// still written before the error is returned.
pub fn run_experiment(spec: &ExperimentSpec, output_dir: &Path, seed: u64) -> Result<RunOutcome> {
    let spec = spec.clone().with_seed(seed);
    spec.validate()?;
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let manifest = RunManifest {
        spec: spec.clone(),
        seed,
        code_version: CODE_VERSION.to_string(),
        output_dir: output_dir.to_path_buf(),
    };
    write(&output_dir.join(MANIFEST), &manifest.to_text()?)?;

    let start = Instant::now();
    let ckpt_dir = output_dir.join(CHECKPOINTS);
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let mut trainer = Trainer::new(spec.train.clone(), spec.settings.clone(), spec.opponents)?;
    let mut log = Vec::with_capacity(spec.train.epochs);
    for _ in 0..spec.train.epochs {
        let before = trainer.state().clone();
        match trainer.run_epoch() {
            Ok(record) => log.push(record),
            Err(err @ Error::Diverged { .. }) => {
                write(&output_dir.join(TRAIN_LOG), &format_log(&log))?;
                before
                    .checkpoint(Some(spec.id), trainer.epoch())
                    .save(&ckpt_dir.join("last_finite.ckpt"))?;
                write(
                    &output_dir.join(SUMMARY),
                    &format!(
                        "status = diverged\nerror = {err}\nepochs_completed = {}\nwall_clock_secs = {}\n",
                        trainer.epoch(),
                        start.elapsed().as_secs_f64()
                    ),
                )?;
                return Err(err);
            }
            Err(e) => return Err(e),
        }
        let done = trainer.epoch();
        if spec.checkpoint_every > 0 && done % spec.checkpoint_every == 0 && done < spec.train.epochs {
            trainer
                .state()
                .checkpoint(Some(spec.id), done)
                .save(&ckpt_dir.join(format!("epoch_{done:06}.ckpt")))?;
        }
    }
    write(&output_dir.join(TRAIN_LOG), &format_log(&log))?;
    let state = trainer.into_state();
    state
        .checkpoint(Some(spec.id), spec.train.epochs)
        .save(&ckpt_dir.join("final.ckpt"))?;

    let strategy = policy_strategy(&state, &spec.eval);
    let report = evaluate(
        &strategy,
        Some((&state.critics, state.temperature.alpha())),
        spec.id,
        &spec.settings,
        &spec.eval,
    )?;
    write_report(output_dir, &report)?;
    write_plot_data(&output_dir.join(PLOTS), &strategy, &spec)?;
    let wall_clock_secs = start.elapsed().as_secs_f64();
    write(
        &output_dir.join(SUMMARY),
        &format!(
            "status = completed\nepochs_completed = {}\nwall_clock_secs = {wall_clock_secs}\n",
            spec.train.epochs
        ),
    )?;
    Ok(RunOutcome {
        report,
        log,
        manifest,
        wall_clock_secs,
    })
}

/// Evaluates a saved checkpoint without training. Oracle pseudo-checkpoints
/// evaluate the named analytic strategy in the learner seat.
pub fn evaluate_only(checkpoint: &Path, spec: &ExperimentSpec, eval: &EvalConfig) -> Result<EvalReport> {
    let ckpt = Checkpoint::load(checkpoint)?;
    if let Some(id) = ckpt.experiment {
        if id != spec.id {
            return Err(Error::Shape(format!("checkpoint was trained on {id}, not {}", spec.id)));
        }
    }
    let alpha = ckpt.log_alpha.map(f64::exp);
    match ckpt.policy {
        PolicySnapshot::Oracle(kind) => evaluate(&Strategy::Oracle(kind), None, spec.id, &spec.settings, eval),
        PolicySnapshot::Learned(params) => {
            let obs_dim = feature_len(spec.settings.n_rounds);
            let action_dim = spec.settings.action_dim();
            if params.obs_dim() != obs_dim || params.action_dim != action_dim {
                return Err(Error::Shape(format!(
                    "checkpoint policy maps {} features to {} actions; {} needs {obs_dim} to {action_dim}",
                    params.obs_dim(),
                    params.action_dim,
                    spec.id
                )));
            }
            let critics = match (&ckpt.critics, alpha) {
                (Some(c), Some(a)) => {
                    if c.q1.input_dim() != obs_dim + action_dim {
                        return Err(Error::Shape("checkpoint critics do not match the auction".into()));
                    }
                    Some((c, a))
                }
                _ => None,
            };
            let strategy = Strategy::Policy {
                params,
                mode: if eval.deterministic_policy { PolicyMode::Mean } else { PolicyMode::Sample },
            };
            evaluate(&strategy, critics, spec.id, &spec.settings, eval)
        }
    }
}

/// What [`emit_reference_tables`] wrote.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSummary {
    pub files: Vec<PathBuf>,
    /// Largest absolute gap between quadrature and closed-form split bids.
    pub max_quadrature_error: f64,
    pub optimal_values: Vec<(ExperimentId, f64)>,
}

/// Oracle bid tables, optimal values and the split-equilibrium quadrature check.
pub fn emit_reference_tables(output_dir: &Path) -> Result<ReferenceSummary> {
    let mut files = Vec::new();
    let mut values = Vec::new();
    let mut text = String::from("experiment\toptimal_reward\n");
    for id in ExperimentId::ALL {
        let v = oracle_expected_utility(id, &id.default_settings())?;
        let _ = writeln!(text, "{id}\t{v}");
        values.push((id, v));
    }
    let path = output_dir.join("optimal_values.tsv");
    write(&path, &text)?;
    files.push(path);

    let eval = EvalConfig {
        later_round_samples: 200,
        ..EvalConfig::default()
    };
    for id in ExperimentId::ALL {
        let settings = id.default_settings();
        let oracle = Strategy::Oracle(id.optimal_learner());
        for round in 0..settings.n_rounds {
            let rows = match bid_table(&oracle, id, &settings, round, &eval) {
                Ok(rows) => rows,
                Err(Error::Unsupported(_)) => continue,
                Err(e) => return Err(e),
            };
            let path = output_dir.join(format!("oracle_bids_{id}_round{}.tsv", round + 1));
            write(&path, &bid_table_text(&rows))?;
            files.push(path);
        }
    }

    let settings = ExperimentId::SplitEquilibrium3.default_settings();
    let c = settings.scale_c;
    let mut text = String::from("theta\tfirst_round_closed\tfirst_round_quadrature\tsecond_round_closed\tsecond_round_quadrature\n");
    for theta in grid(1.0, 2.0, 11) {
        let (first, second) = split_equilibrium_closed_form_n3(theta, c)?;
        let _ = writeln!(
            text,
            "{theta}\t{first}\t{}\t{second}\t{}",
            first_round_split_bid(theta, &settings),
            second_round_loser_bid(theta, &settings)
        );
    }
    let path = output_dir.join("split_equilibrium_bids.tsv");
    write(&path, &text)?;
    files.push(path);

    let max_quadrature_error = split_quadrature_error(1000)?;
    let path = output_dir.join("split_quadrature_diagnostic.txt");
    write(
        &path,
        &format!("grid_points = 1000\ntype_range = [1, {}]\nmax_abs_error = {max_quadrature_error:e}\n", 2.0 - 1e-6),
    )?;
    files.push(path);
    Ok(ReferenceSummary {
        files,
        max_quadrature_error,
        optimal_values: values,
    })
}

/// Largest gap between the quadrature split bids and their closed forms on
/// `n` points over `[1, 2 − 10⁻⁶]` for the three-bidder split award.
pub(crate) fn split_quadrature_error(n: usize) -> Result<f64> {
    let settings = ExperimentId::SplitEquilibrium3.default_settings();
    let mut worst: f64 = 0.0;
    for theta in grid(1.0, 2.0 - 1e-6, n) {
        let (first, second) = split_equilibrium_closed_form_n3(theta, settings.scale_c)?;
        worst = worst
            .max((first_round_split_bid(theta, &settings) - first).abs())
            .max((second_round_loser_bid(theta, &settings) - second).abs());
    }
    Ok(worst)
}
