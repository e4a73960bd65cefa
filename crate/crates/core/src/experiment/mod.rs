//! Named experiment presets, configuration files and the run driver.
//!
//! A configuration file is TOML with four sections: `[experiment]` picks the
//! experiment, preset and scale, `[auction]`, `[train]` and `[eval]` override
//! individual fields of the preset. Every printed value carries a comment
//! saying where it came from.

mod run;

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use run::{
    emit_reference_tables, evaluate_only, run_experiment, ReferenceSummary, RunManifest, RunOutcome, CODE_VERSION,
};

use crate::auction::AuctionSettings;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::oracle::StrategyKind;
use crate::sac::{SquashKind, TrainConfig};
use crate::scenario::ExperimentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Hyperparameters as published; 3000 epochs on 500 environments.
    Paper,
    /// Small networks and short runs tuned to finish in well under a minute
    /// per experiment on one core.
    Desk,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected paper or desk)"))),
        }
    }
}

/// Where a configuration value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    /// Stated in the published experiment description.
    Paper,
    /// Not stated there; chosen here.
    Extension,
    /// Desk preset value that differs from the published one.
    Desk,
    /// Changed by the `scale` factor.
    Scaled,
    /// Set explicitly by a configuration file.
    Override,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Paper => "paper",
            Source::Extension => "extension",
            Source::Desk => "desk extension",
            Source::Scaled => "scaled",
            Source::Override => "override",
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub preset: Preset,
    /// Multiplier on epochs and episodes per epoch.
    pub scale: f64,
    pub settings: AuctionSettings,
    pub opponents: StrategyKind,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Write an intermediate checkpoint every this many epochs; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

fn paper_train(id: ExperimentId) -> TrainConfig {
    let base = TrainConfig {
        epochs: 3000,
        episodes_per_epoch: 500,
        update_steps_per_epoch: 200,
        batch_size: 256,
        actor_lr: 1e-3,
        critic_lr: 3e-3,
        target_entropy: -20.0,
        policy_hidden: vec![256, 256],
        critic_hidden: vec![256, 256],
        squash: SquashKind::Tanh,
        ..TrainConfig::default()
    };
    match id {
        ExperimentId::SplitTruthful2 | ExperimentId::SplitEquilibrium3 => base,
        ExperimentId::Seq1FP2 | ExperimentId::Seq1SP2 => TrainConfig {
            target_entropy: -10.0,
            ..base
        },
        ExperimentId::Seq2FPTruthful3 => TrainConfig {
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            target_entropy: -10.0,
            ..base
        },
        ExperimentId::Seq2FPEquilibrium3 => TrainConfig {
            actor_lr: 3e-3,
            critic_lr: 3e-3,
            target_entropy: -5.0,
            policy_hidden: vec![64],
            critic_hidden: vec![64, 64],
            squash: SquashKind::Identity,
            ..base
        },
    }
}

fn desk_train(id: ExperimentId) -> TrainConfig {
    let base = TrainConfig {
        epochs: 400,
        final_lr_fraction: 0.05,
        ..TrainConfig::default()
    };
    match id {
        ExperimentId::Seq1FP2 | ExperimentId::Seq1SP2 => TrainConfig {
            epochs: 600,
            episodes_per_epoch: 256,
            target_entropy: -7.0,
            ..base
        },
        ExperimentId::Seq2FPTruthful3 => base,
        ExperimentId::SplitTruthful2 | ExperimentId::SplitEquilibrium3 => TrainConfig {
            target_entropy: -9.0,
            ..base
        },
        ExperimentId::Seq2FPEquilibrium3 => TrainConfig {
            policy_hidden: vec![64],
            squash: SquashKind::Identity,
            ..base
        },
    }
}

/// Training fields the published description states for `id`.
fn stated_train_fields(id: ExperimentId) -> &'static [&'static str] {
    match id {
        ExperimentId::Seq2FPTruthful3 => &[
            "epochs",
            "episodes_per_epoch",
            "update_steps_per_epoch",
            "actor_lr",
            "critic_lr",
            "target_entropy",
            "policy_hidden",
            "critic_hidden",
        ],
        ExperimentId::Seq2FPEquilibrium3 => &[
            "epochs",
            "update_steps_per_epoch",
            "actor_lr",
            "critic_lr",
            "target_entropy",
            "policy_hidden",
            "critic_hidden",
            "squash",
        ],
        _ => &[
            "epochs",
            "episodes_per_epoch",
            "actor_lr",
            "critic_lr",
            "target_entropy",
            "policy_hidden",
            "critic_hidden",
        ],
    }
}

fn scaled_count(n: usize, scale: f64) -> usize {
    ((n as f64 * scale).round() as usize).max(1)
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => Ok(t),
        Ok(_) => Err(Error::Config("expected a table".into())),
        Err(e) => Err(Error::Config(e.to_string())),
    }
}

fn overlay<T: Serialize + for<'de> Deserialize<'de>>(base: &T, section: &str, patch: &toml::Table) -> Result<T> {
    let mut table = to_table(base)?;
    for (k, v) in patch {
        if !table.contains_key(k) {
            return Err(Error::Config(format!("unknown key `{section}.{k}`")));
        }
        table.insert(k.clone(), v.clone());
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("[{section}]: {}", e.message())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: ExperimentSection,
    #[serde(default)]
    auction: toml::Table,
    #[serde(default)]
    train: toml::Table,
    #[serde(default)]
    eval: toml::Table,
    /// Present in run manifests; ignored when loading a spec.
    #[serde(default)]
    #[allow(dead_code)]
    run: toml::Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    id: String,
    #[serde(default = "default_preset")]
    preset: String,
    #[serde(default = "default_scale")]
    scale: f64,
    checkpoint_every: Option<usize>,
    /// Informational; always derived from `id`.
    #[allow(dead_code)]
    opponents: Option<String>,
}

fn default_preset() -> String {
    Preset::Paper.name().into()
}

fn default_scale() -> f64 {
    1.0
}

impl ExperimentSpec {
    /// The published configuration of `id`.
    pub fn paper(id: ExperimentId) -> Self {
        Self::preset(id, Preset::Paper)
    }

    pub fn desk(id: ExperimentId) -> Self {
        Self::preset(id, Preset::Desk)
    }

    pub fn preset(id: ExperimentId, preset: Preset) -> Self {
        let (train, eval) = match preset {
            Preset::Paper => (paper_train(id), EvalConfig::default()),
            Preset::Desk => (
                desk_train(id),
                EvalConfig {
                    n_profiles: 20_000,
                    ..EvalConfig::default()
                },
            ),
        };
        Self {
            id,
            preset,
            scale: 1.0,
            settings: id.default_settings(),
            opponents: id.opponents(),
            train,
            eval,
            checkpoint_every: 100,
        }
    }

    /// Multiplies epochs and episodes per epoch by `factor` (at least one each).
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {factor}")));
        }
        self.train.epochs = scaled_count(self.train.epochs, factor);
        self.train.episodes_per_epoch = scaled_count(self.train.episodes_per_epoch, factor);
        self.scale *= factor;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.train.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.opponents != self.id.opponents() {
            return Err(Error::Config(format!("{} is defined against {:?} opponents", self.id, self.id.opponents())));
        }
        if self.settings.kind != self.id.default_settings().kind {
            return Err(Error::Config(format!("{} needs a {:?} auction", self.id, self.id.default_settings().kind)));
        }
        Ok(())
    }

    /// Provenance of every `section.key` value.
    pub fn sources(&self) -> Result<BTreeMap<String, Source>> {
        let paper = Self::paper(self.id);
        let preset = Self::preset(self.id, self.preset);
        let scaled = preset.clone().scaled(self.scale)?;
        let stated = stated_train_fields(self.id);
        let mut out = BTreeMap::new();
        let sections: [(&str, toml::Table, toml::Table, toml::Table, toml::Table); 3] = [
            (
                "auction",
                to_table(&self.settings)?,
                to_table(&scaled.settings)?,
                to_table(&preset.settings)?,
                to_table(&paper.settings)?,
            ),
            (
                "train",
                to_table(&self.train)?,
                to_table(&scaled.train)?,
                to_table(&preset.train)?,
                to_table(&paper.train)?,
            ),
            (
                "eval",
                to_table(&self.eval)?,
                to_table(&scaled.eval)?,
                to_table(&preset.eval)?,
                to_table(&paper.eval)?,
            ),
        ];
        for (section, cur, sc, pre, pap) in &sections {
            for (k, v) in cur {
                let source = if Some(v) != sc.get(k) {
                    Source::Override
                } else if Some(v) != pre.get(k) {
                    Source::Scaled
                } else if Some(v) != pap.get(k) {
                    Source::Desk
                } else if *section == "auction" || (*section == "train" && stated.contains(&k.as_str())) {
                    Source::Paper
                } else {
                    Source::Extension
                };
                out.insert(format!("{section}.{k}"), source);
            }
        }
        Ok(out)
    }

    /// Fields not stated in the published description.
    pub fn extension_fields(&self) -> Result<Vec<String>> {
        Ok(self
            .sources()?
            .into_iter()
            .filter(|(_, s)| *s != Source::Paper)
            .map(|(k, _)| k)
            .collect())
    }

    /// TOML text that [`ExperimentSpec::from_config_text`] reads back to this spec.
    pub fn to_config_text(&self) -> Result<String> {
        let sources = self.sources()?;
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "id = \"{}\"", self.id);
        let _ = writeln!(s, "preset = \"{}\"", self.preset);
        let _ = writeln!(s, "scale = {:?}", self.scale);
        let _ = writeln!(s, "checkpoint_every = {} # extension", self.checkpoint_every);
        let _ = writeln!(s, "opponents = \"{:?}\" # derived from id", self.opponents);
        for (section, table) in [
            ("auction", to_table(&self.settings)?),
            ("train", to_table(&self.train)?),
            ("eval", to_table(&self.eval)?),
        ] {
            let _ = writeln!(s, "\n[{section}]");
            for (k, v) in &table {
                let label = sources.get(&format!("{section}.{k}")).map_or("extension", |x| x.label());
                let _ = writeln!(s, "{k} = {v} # {label}");
            }
        }
        Ok(s)
    }

    pub fn from_config_text(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let id: ExperimentId = file.experiment.id.parse()?;
        let preset: Preset = file.experiment.preset.parse()?;
        let mut spec = Self::preset(id, preset).scaled(file.experiment.scale)?;
        if let Some(n) = file.experiment.checkpoint_every {
            spec.checkpoint_every = n;
        }
        spec.settings = overlay(&spec.settings, "auction", &file.auction)?;
        spec.train = overlay(&spec.train, "train", &file.train)?;
        spec.eval = overlay(&spec.eval, "eval", &file.eval)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_text(&text)
    }
}
