//! Run configuration files and flag overrides.
//!
//! A run is described by one TOML file whose keys mirror the command-line
//! flags; any flag given on the command line wins over the file. The
//! `[optim]` and `[synth]` tables hold optimizer and generator settings.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sinn_core::benchmark;
use sinn_core::data::SynthConfig;
use sinn_core::metrics::MetricSet;
use sinn_core::trainer::OptimConfig;
use sinn_core::{InjectionPoint, Variant};

use crate::error::{read_text, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Single images on the 4/8/16 label tree.
    Static,
    /// Sticky 32-frame sequences on the same tree.
    Sequence,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<Variant>,
    pub graph: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub per_class_csv: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub observation: Option<PathBuf>,
    pub observe_layer: Option<String>,
    pub injection: Option<InjectionPoint>,
    pub epsilon: Option<f64>,
    pub metrics: Option<MetricSet>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub split: Option<Vec<f64>>,
    pub optim: Option<toml::Table>,
    pub synth: Option<toml::Table>,
}

/// Replaces `slot` when the flag was given.
pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

pub fn require<'a, T>(slot: &'a Option<T>, field: &str) -> Result<&'a T> {
    slot.as_ref()
        .ok_or_else(|| CliError::usage(format!("missing `{field}`: set it in the config file or pass --{}", field.replace('_', "-"))))
}

/// Path of an input file that must already exist.
pub fn input_file<'a>(slot: &'a Option<PathBuf>, field: &str) -> Result<&'a Path> {
    let p = require(slot, field)?;
    if !p.is_file() {
        return Err(CliError::usage(format!("{field}: file `{}` does not exist", p.display())));
    }
    Ok(p)
}

pub fn optional_input<'a>(slot: &'a Option<PathBuf>, field: &str) -> Result<Option<&'a Path>> {
    match slot {
        None => Ok(None),
        Some(_) => input_file(slot, field).map(Some),
    }
}

pub fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: sinn_core::Error| e.to_string())
}

pub fn parse_metrics(s: &str) -> std::result::Result<MetricSet, String> {
    s.parse().map_err(|e: sinn_core::Error| e.to_string())
}

pub fn parse_injection(s: &str) -> std::result::Result<InjectionPoint, String> {
    match s {
        "projected-input" => Ok(InjectionPoint::ProjectedInput),
        "directional" => Ok(InjectionPoint::Directional),
        _ => Err(format!("unknown injection point `{s}` (projected-input|directional)")),
    }
}

/// Optimizer flags; each overrides the matching `[optim]` key.
#[derive(Args, Clone, Debug, Default)]
pub struct OptimFlags {
    /// sgd-momentum or adam.
    #[arg(long)]
    pub algorithm: Option<String>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Global gradient-norm clipping threshold.
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub decay_step: Option<usize>,
    #[arg(long)]
    pub decay_factor: Option<f64>,
    /// Frames per training window for temporal models.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub log_every: Option<usize>,
}

fn put<T: Into<toml::Value>>(table: &mut toml::Table, key: &str, v: Option<T>) {
    if let Some(v) = v {
        table.insert(key.to_string(), v.into());
    }
}

fn put_usize(table: &mut toml::Table, key: &str, v: Option<usize>) {
    put(table, key, v.map(|v| v as i64));
}

fn or_insert(table: &mut toml::Table, key: &str, v: impl Into<toml::Value>) {
    table.entry(key.to_string()).or_insert_with(|| v.into());
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Optimizer settings from `[optim]`, flags and defaults. `decay_step`
    /// has no default.
    pub fn resolve_optim(&self, flags: &OptimFlags) -> Result<OptimConfig> {
        let mut t = self.optim.clone().unwrap_or_default();
        put(&mut t, "algorithm", flags.algorithm.clone());
        put(&mut t, "learning_rate", flags.learning_rate);
        put(&mut t, "momentum", flags.momentum);
        put(&mut t, "weight_decay", flags.weight_decay);
        put(&mut t, "clip", flags.clip);
        put_usize(&mut t, "batch_size", flags.batch_size);
        put_usize(&mut t, "iterations", flags.iterations);
        put_usize(&mut t, "decay_step", flags.decay_step);
        put(&mut t, "decay_factor", flags.decay_factor);
        put_usize(&mut t, "window", flags.window);
        put_usize(&mut t, "log_every", flags.log_every);
        or_insert(&mut t, "algorithm", "adam");
        or_insert(&mut t, "learning_rate", 0.01);
        or_insert(&mut t, "batch_size", 32);
        or_insert(&mut t, "iterations", 1000);
        if let Some(seed) = self.seed {
            t.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        or_insert(&mut t, "seed", 0);
        let cfg: OptimConfig = t.try_into().map_err(|e| CliError::usage(format!("optim: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Generator settings: the preset, then `[synth]`, then flags.
    pub fn resolve_synth(&self, flags: &SynthFlags) -> Result<SynthConfig> {
        let seed = self.seed.unwrap_or(0);
        let base = match self.preset.unwrap_or(Preset::Static) {
            Preset::Static => benchmark::static_config(seed),
            Preset::Sequence => benchmark::sequence_config(seed),
        };
        let mut t = toml::Table::try_from(&base).map_err(|e| CliError::usage(format!("synth: {e}")))?;
        if let Some(over) = &self.synth {
            for (k, v) in over {
                t.insert(k.clone(), v.clone());
            }
        }
        put_usize(&mut t, "samples", flags.samples);
        put_usize(&mut t, "dim", flags.dim);
        put(&mut t, "noise", flags.noise);
        if let Some(seed) = self.seed {
            t.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        t.try_into().map_err(|e| CliError::usage(format!("synth: {e}")))
    }

    /// The resolved configuration as JSON, echoed into reports.
    pub fn echo(&self, command: &str) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            m.retain(|_, x| !x.is_null());
            m.insert("command".into(), command.into());
        }
        v
    }
}

/// Generator flags; each overrides the matching `[synth]` key.
#[derive(Args, Clone, Debug, Default)]
pub struct SynthFlags {
    /// Samples, or sequences in sequence mode.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}
