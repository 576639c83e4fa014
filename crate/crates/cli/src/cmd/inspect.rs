use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use sinn_core::graph::GraphDocument;
use sinn_core::{LabelGraph, Sign};

use crate::error::{read_text, CliError, Result};

/// Validate a label graph document and summarize it.
#[derive(Args, Debug)]
pub struct InspectArgs {
    /// Graph document (JSON).
    graph: PathBuf,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct LayerSummary {
    name: String,
    labels: usize,
    single_label: bool,
    pos_intra: usize,
    neg_intra: usize,
    self_loops: usize,
}

#[derive(Serialize)]
struct Summary {
    fingerprint: String,
    layers: Vec<LayerSummary>,
    pos_inter: usize,
    neg_inter: usize,
}

fn summarize(graph: &LabelGraph) -> Summary {
    let layer_of = |path: &str| path.split_once('/').map(|(l, _)| l.to_string()).unwrap_or_default();
    let mut layers: Vec<LayerSummary> = graph
        .layers()
        .iter()
        .map(|l| LayerSummary {
            name: l.name.clone(),
            labels: l.size(),
            single_label: l.single_label,
            pos_intra: 0,
            neg_intra: 0,
            self_loops: 0,
        })
        .collect();
    let (mut pos_inter, mut neg_inter) = (0, 0);
    for (from, to, sign) in graph.edge_set() {
        let (a, b) = (layer_of(&from), layer_of(&to));
        if a != b {
            match sign {
                Sign::Pos => pos_inter += 1,
                Sign::Neg => neg_inter += 1,
            }
            continue;
        }
        let l = &mut layers[graph.layer_index(&a).expect("edge layer exists")];
        if from == to {
            l.self_loops += 1;
        }
        match sign {
            Sign::Pos => l.pos_intra += 1,
            Sign::Neg => l.neg_intra += 1,
        }
    }
    Summary { fingerprint: graph.fingerprint(), layers, pos_inter, neg_inter }
}

pub fn run(args: InspectArgs) -> Result<()> {
    let text = read_text(&args.graph)?;
    let doc = GraphDocument::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", args.graph.display())))?;
    let violations = doc.violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(CliError::usage(format!("{}: {} violation(s)", args.graph.display(), violations.len())));
    }
    let graph = LabelGraph::from_document(&doc)?;
    let extra = graph.validate();
    if !extra.is_empty() {
        for v in &extra {
            eprintln!("{v}");
        }
        return Err(CliError::usage(format!("{}: {} violation(s)", args.graph.display(), extra.len())));
    }
    let s = summarize(&graph);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
        return Ok(());
    }
    println!("fingerprint {}", s.fingerprint);
    for l in &s.layers {
        println!(
            "{}\t{} labels{}\tintra +{} -{}\tself-loops {}",
            l.name,
            l.labels,
            if l.single_label { " (single-label)" } else { "" },
            l.pos_intra,
            l.neg_intra,
            l.self_loops
        );
    }
    println!("inter\t+{} -{}", s.pos_inter, s.neg_inter);
    Ok(())
}
