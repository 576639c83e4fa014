use std::path::{Path, PathBuf};

use clap::Args;
use sinn_core::eval::{evaluate, MetricReport};
use sinn_core::metrics::MetricSet;
use sinn_core::InjectionPoint;

use super::{load_data, load_graph, load_model, observe_layer};
use crate::config::{input_file, parse_injection, parse_metrics, set, RunConfig};
use crate::error::{write_text, CliError, Result};

/// Score a feature container and compute the metric report.
#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Evaluation feature container.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report JSON path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-class AP table (CSV).
    #[arg(long)]
    per_class_csv: Option<PathBuf>,
    /// all, image or video.
    #[arg(long, value_parser = parse_metrics)]
    metrics: Option<MetricSet>,
    /// Inject this layer's ground truth at evaluation time.
    #[arg(long)]
    observe_layer: Option<String>,
    #[arg(long, value_parser = parse_injection)]
    injection: Option<InjectionPoint>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Mean-pool each sequence into one sample before scoring.
    #[arg(long)]
    pool: bool,
}

fn table(report: &MetricReport) -> String {
    let mut out = format!("{} on {} samples", report.variant, report.samples);
    if let Some(l) = &report.observed_layer {
        out.push_str(&format!(", observing {l}"));
    }
    out.push('\n');
    for l in &report.layers {
        out.push_str(&l.layer);
        let cols = [
            ("mAP_L", l.map_label),
            ("mAP_I", l.map_image),
            ("mc_acc", l.mc_acc),
            ("IoU", l.iou_acc),
            ("P@3", l.precision_at_3),
            ("R@3", l.recall_at_3),
            ("hit@1", l.hit_at_1),
            ("PERR", l.perr),
            ("gAP@20", l.gap_at_20),
            ("mAP_V", l.map_video),
        ];
        for (name, v) in cols {
            if let Some(v) = v {
                out.push_str(&format!("  {name} {v:.4}"));
            }
        }
        out.push('\n');
    }
    out
}

fn write_csv(path: &Path, report: &MetricReport, labels: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| CliError::usage(format!("{}: {e}", path.display()));
    w.write_record(["layer", "label", "ap", "ap_video"]).map_err(row_err)?;
    for (l, layer) in report.layers.iter().enumerate() {
        for (k, name) in labels[l].iter().enumerate() {
            let ap = layer.per_class_ap.get(k).map(|v| v.to_string()).unwrap_or_default();
            let apv = layer.per_class_ap_video.get(k).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([layer.layer.as_str(), name, &ap, &apv]).map_err(row_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn run(args: EvalArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    set(&mut cfg.graph, args.graph);
    set(&mut cfg.checkpoint, args.checkpoint);
    set(&mut cfg.test_data, args.data);
    set(&mut cfg.report, args.report);
    set(&mut cfg.per_class_csv, args.per_class_csv);
    set(&mut cfg.metrics, args.metrics);
    set(&mut cfg.observe_layer, args.observe_layer);
    set(&mut cfg.injection, args.injection);
    set(&mut cfg.epsilon, args.epsilon);

    let graph = load_graph(input_file(&cfg.graph, "graph")?)?;
    let model = load_model(input_file(&cfg.checkpoint, "checkpoint")?, &graph)?;
    let mut data = load_data(input_file(&cfg.test_data, "test_data")?, &graph)?;
    let obs = observe_layer(&graph, cfg.observe_layer.as_ref(), cfg.epsilon, cfg.injection)?;
    if args.pool {
        if model.variant().is_temporal() {
            return Err(CliError::usage("pool: temporal models score frames, not pooled sequences"));
        }
        data = data.pooled()?;
    }

    let mut report = evaluate(&model, &graph, &data, obs.as_ref(), cfg.metrics.unwrap_or_default())?;
    let mut echo = cfg.echo("eval");
    if args.pool {
        echo["pool"] = true.into();
    }
    report.config = Some(echo);
    if let Some(p) = &cfg.per_class_csv {
        let labels: Vec<Vec<String>> = graph.layers().iter().map(|l| l.labels.clone()).collect();
        write_csv(p, &report, &labels)?;
    }
    match &cfg.report {
        Some(p) => {
            write_text(p, &report.to_json())?;
            print!("{}", table(&report));
        }
        None => println!("{}", report.to_json()),
    }
    Ok(())
}
