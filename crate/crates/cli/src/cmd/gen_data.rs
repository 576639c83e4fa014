use std::path::PathBuf;

use clap::Args;
use sinn_core::benchmark::standard_graph;
use sinn_core::data::{generate_synthetic, split, split_manifest, write_features, FeatureSet};

use super::load_graph;
use crate::config::{optional_input, require, set, Preset, RunConfig, SynthFlags};
use crate::error::{write_text, CliError, Result};

/// Generate a seeded synthetic dataset and split it into parts.
#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Label graph to sample from; defaults to the standard 4/8/16 tree.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Part ratios, normalized to sum to one (default 0.6,0.4).
    #[arg(long, value_delimiter = ',')]
    split: Option<Vec<f64>>,
    #[command(flatten)]
    synth: SynthFlags,
}

fn part_names(n: usize) -> Vec<String> {
    match n {
        1 => vec!["all".into()],
        2 => vec!["train".into(), "test".into()],
        3 => vec!["train".into(), "val".into(), "test".into()],
        _ => (1..=n).map(|k| format!("part{k}")).collect(),
    }
}

fn summary(name: &str, set: &FeatureSet) -> String {
    let mut line = format!("{name}\t{} samples", set.len());
    if set.is_sequential() {
        line.push_str(&format!("\t{} sequences", set.sequences().len()));
    }
    for (l, spec) in set.layers.iter().enumerate() {
        let pos: usize = set.samples.iter().map(|s| s.targets[l].iter().filter(|&&t| t).count()).sum();
        let rate = pos as f64 / (set.len().max(1) * spec.size.max(1)) as f64;
        line.push_str(&format!("\t{}={rate:.4}", spec.name));
    }
    line
}

pub fn run(args: GenDataArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    set(&mut cfg.preset, args.preset);
    set(&mut cfg.graph, args.graph);
    set(&mut cfg.out_dir, args.out_dir);
    set(&mut cfg.seed, args.seed);
    set(&mut cfg.split, args.split);
    let out_dir = require(&cfg.out_dir, "out_dir")?.clone();
    let graph = match optional_input(&cfg.graph, "graph")? {
        Some(p) => load_graph(p)?,
        None => standard_graph(),
    };
    let synth = cfg.resolve_synth(&args.synth)?;
    synth.validate(&graph)?;
    let ratios = cfg.split.clone().unwrap_or_else(|| vec![0.6, 0.4]);
    let total: f64 = ratios.iter().sum();
    if ratios.is_empty() || ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || !(total > 0.0) {
        return Err(CliError::usage("split: ratios must be nonnegative with a positive sum"));
    }
    let ratios: Vec<f64> = ratios.iter().map(|r| r / total).collect();

    let all = generate_synthetic(&graph, &synth)?;
    let parts = split(&all, &ratios, synth.seed.wrapping_add(1))?;
    let names = part_names(parts.len());
    std::fs::create_dir_all(&out_dir).map_err(|source| CliError::Io { path: out_dir.clone(), source })?;
    write_text(&out_dir.join("graph.json"), &graph.to_document().to_json())?;
    for (name, part) in names.iter().zip(&parts) {
        let path = out_dir.join(format!("{name}.bin"));
        write_features(part, &path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_text(&out_dir.join("manifest.tsv"), &split_manifest(&name_refs, &parts))?;
    let synth_toml = toml::to_string(&synth).map_err(|e| CliError::usage(format!("synth: {e}")))?;
    write_text(&out_dir.join("synth.toml"), &synth_toml)?;

    println!("graph\t{}\tfingerprint {}", graph.sizes().iter().map(ToString::to_string).collect::<Vec<_>>().join("/"), graph.fingerprint());
    println!("features\tdim {}\tseed {}", synth.dim, synth.seed);
    for (name, part) in names.iter().zip(&parts) {
        println!("{}", summary(name, part));
    }
    Ok(())
}
