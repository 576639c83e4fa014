use std::path::PathBuf;

use clap::Args;
use sinn_core::trainer::{format_trace, train};
use sinn_core::{InjectionPoint, Model, Variant};

use super::{load_data, load_graph, load_model, observe_layer};
use crate::config::{input_file, optional_input, parse_injection, parse_variant, require, set, OptimFlags, RunConfig};
use crate::error::{write_text, CliError, Result};

/// Train a model and write its checkpoint.
#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// logistic, binn, sinn, lstm, bilstm or silstm.
    #[arg(long, value_parser = parse_variant)]
    model: Option<Variant>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Training feature container.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint to resume from; must match the graph.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Loss trace file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Inject this layer's ground truth during training.
    #[arg(long)]
    observe_layer: Option<String>,
    #[arg(long, value_parser = parse_injection)]
    injection: Option<InjectionPoint>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    optim: OptimFlags,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    set(&mut cfg.model, args.model);
    set(&mut cfg.graph, args.graph);
    set(&mut cfg.train_data, args.data);
    set(&mut cfg.checkpoint, args.out);
    set(&mut cfg.init, args.init);
    set(&mut cfg.trace, args.trace);
    set(&mut cfg.observe_layer, args.observe_layer);
    set(&mut cfg.injection, args.injection);
    set(&mut cfg.epsilon, args.epsilon);
    set(&mut cfg.seed, args.seed);

    let variant = *require(&cfg.model, "model")?;
    let graph_path = input_file(&cfg.graph, "graph")?;
    let data_path = input_file(&cfg.train_data, "train_data")?;
    let out = require(&cfg.checkpoint, "checkpoint")?;
    let init = optional_input(&cfg.init, "init")?;
    let optim = cfg.resolve_optim(&args.optim)?;
    let graph = load_graph(graph_path)?;
    let obs = observe_layer(&graph, cfg.observe_layer.as_ref(), cfg.epsilon, cfg.injection)?;
    let data = load_data(data_path, &graph)?;
    let model = match init {
        Some(p) => {
            let m = load_model(p, &graph)?;
            if m.variant() != variant {
                return Err(CliError::usage(format!("init: checkpoint holds a {} model, not {variant}", m.variant())));
            }
            m
        }
        None => Model::init(variant, &graph, data.dim, cfg.seed.unwrap_or(0)),
    };

    let outcome = train(model, &data, &optim, obs.as_ref())?;
    write_text(out, &outcome.model.to_checkpoint().to_json())?;
    let trace = format_trace(&outcome.trace);
    if let Some(p) = &cfg.trace {
        write_text(p, &trace)?;
    }
    print!("{trace}");
    if let Some(last) = outcome.trace.last() {
        println!("final_loss {:.9}", last.loss);
    }
    Ok(())
}
