use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sinn_core::eval::predict_injected;
use sinn_core::observation::{injection, ObservationDocument, DEFAULT_EPSILON};
use sinn_core::InjectionPoint;

use super::{load_data, load_graph, load_model};
use crate::config::{input_file, optional_input, parse_injection, set, RunConfig};
use crate::error::{read_text, write_text, CliError, Result};

/// Write per-sample (or per-frame) label scores.
#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Observation document applied to every sample.
    #[arg(long)]
    observation: Option<PathBuf>,
    #[arg(long, value_parser = parse_injection)]
    injection: Option<InjectionPoint>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Score document path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LayerInfo<'a> {
    name: &'a str,
    labels: &'a [String],
}

#[derive(Serialize)]
struct Row {
    id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sequence: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame: Option<u32>,
    scores: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ScoreDocument<'a> {
    format: &'static str,
    variant: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    observed_layer: Option<&'a str>,
    layers: Vec<LayerInfo<'a>>,
    rows: Vec<Row>,
}

pub fn run(args: PredictArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    set(&mut cfg.graph, args.graph);
    set(&mut cfg.checkpoint, args.checkpoint);
    set(&mut cfg.test_data, args.data);
    set(&mut cfg.observation, args.observation);
    set(&mut cfg.injection, args.injection);
    set(&mut cfg.epsilon, args.epsilon);
    set(&mut cfg.scores, args.out);

    let graph = load_graph(input_file(&cfg.graph, "graph")?)?;
    let model = load_model(input_file(&cfg.checkpoint, "checkpoint")?, &graph)?;
    let data = load_data(input_file(&cfg.test_data, "test_data")?, &graph)?;
    let obs = match optional_input(&cfg.observation, "observation")? {
        None => None,
        Some(p) => {
            let doc = ObservationDocument::from_json(&read_text(p)?)
                .and_then(|d| d.resolve(&graph))
                .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Some(doc)
        }
    };
    let inj = obs
        .as_ref()
        .map(|o| injection(o, cfg.epsilon.unwrap_or(DEFAULT_EPSILON), cfg.injection.unwrap_or_default()))
        .transpose()?;

    let scores = predict_injected(&model, &data, inj.as_ref())?;
    let rows = data
        .samples
        .iter()
        .zip(scores)
        .map(|(s, y)| Row {
            id: s.id,
            sequence: s.frame.map(|f| f.sequence),
            frame: s.frame.map(|f| f.frame),
            scores: y.into_iter().map(|v| v.data).collect(),
        })
        .collect();
    let doc = ScoreDocument {
        format: "sinn-scores/1",
        variant: model.variant().name(),
        observed_layer: obs.as_ref().map(|o| graph.layers()[o.layer].name.as_str()),
        layers: graph.layers().iter().map(|l| LayerInfo { name: &l.name, labels: &l.labels }).collect(),
        rows,
    };
    let text = serde_json::to_string_pretty(&doc).expect("scores serialize");
    match &cfg.scores {
        Some(p) => write_text(p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
