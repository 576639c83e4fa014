//! Scoring feature sets and turning scores into metric reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::graph::LabelGraph;
use crate::math::Vector;
use crate::metrics::{evaluate_layer, LayerReport, MetricSet, PredictionBatch};
use crate::model::{Injection, Model, SequenceState};
use crate::observation::ObserveLayer;

/// Per-layer scores in (0, 1) for every sample, aligned with `data.samples`.
///
/// Temporal models run each sequence from a zero state, one frame at a time;
/// samples without frame tags are one-frame sequences. With `obs`, each
/// sample's ground truth for the observed layer is injected.
pub fn predict(model: &Model, data: &FeatureSet, obs: Option<&ObserveLayer>) -> Result<Vec<Vec<Vector>>> {
    if let Some(o) = obs {
        if o.layer >= model.num_layers() {
            return Err(Error::contract(format!("observed layer {} does not exist", o.layer)));
        }
    }
    predict_by(model, data, |i| obs.map(|o| o.injection_for(&data.samples[i].targets[o.layer])).transpose())
}

/// Like [`predict`], with the same injection applied to every sample.
pub fn predict_injected(model: &Model, data: &FeatureSet, inj: Option<&Injection>) -> Result<Vec<Vec<Vector>>> {
    if let Some(j) = inj {
        if j.layer >= model.num_layers() || j.values.len() != model.sizes()[j.layer] {
            return Err(Error::contract("injection does not match the model's layers"));
        }
    }
    predict_by(model, data, |_| Ok(inj.cloned()))
}

type FrameScores = Vec<(usize, Vec<Vector>)>;

fn predict_by<F>(model: &Model, data: &FeatureSet, inj_for: F) -> Result<Vec<Vec<Vector>>>
where
    F: Fn(usize) -> Result<Option<Injection>> + Sync,
{
    data.validate()?;
    if data.dim != model.input_dim() || data.layer_sizes() != model.sizes() {
        return Err(Error::validation("data does not match the model's input dimension or layer sizes"));
    }
    if !model.variant().is_temporal() {
        return (0..data.len())
            .into_par_iter()
            .map(|i| Ok(model.forward(&data.samples[i].features, inj_for(i)?.as_ref())?.scores()))
            .collect();
    }
    let groups = data.sequences();
    let per_group: Vec<Result<FrameScores>> = groups
        .par_iter()
        .map(|g| {
            let mut state = SequenceState::initial(model);
            let mut out = Vec::with_capacity(g.len());
            for &i in g {
                let (y, next) = model.step(&data.samples[i].features, &state, inj_for(i)?.as_ref())?;
                out.push((i, y));
                state = next;
            }
            Ok(out)
        })
        .collect();
    let mut scores = vec![Vec::new(); data.len()];
    for g in per_group {
        for (i, y) in g? {
            scores[i] = y;
        }
    }
    Ok(scores)
}

/// Metric results for every layer of one evaluated model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub format: String,
    pub variant: String,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observed_layer: Option<String>,
    pub layers: Vec<LayerReport>,
    /// Resolved run configuration of the run that produced the report.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<serde_json::Value>,
}

pub const REPORT_FORMAT: &str = "sinn-report/1";

impl MetricReport {
    pub fn layer(&self, name: &str) -> Option<&LayerReport> {
        self.layers.iter().find(|l| l.layer == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Builds the per-layer batch of scores against ground truth.
pub fn layer_batch(scores: &[Vec<Vector>], data: &FeatureSet, layer: usize) -> Result<PredictionBatch> {
    PredictionBatch::new(
        scores.iter().map(|s| s[layer].data.clone()).collect(),
        data.samples.iter().map(|s| s.targets[layer].clone()).collect(),
    )
}

/// Scores `data` and computes the selected metrics for every layer.
pub fn evaluate(
    model: &Model,
    graph: &LabelGraph,
    data: &FeatureSet,
    obs: Option<&ObserveLayer>,
    set: MetricSet,
) -> Result<MetricReport> {
    data.check_graph(graph)?;
    if model.graph_fingerprint() != graph.fingerprint() {
        return Err(Error::validation("model was trained on a different graph"));
    }
    if data.is_empty() {
        return Err(Error::validation("evaluation set is empty"));
    }
    let scores = predict(model, data, obs)?;
    let layers = graph
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| evaluate_layer(&layer.name, &layer_batch(&scores, data, l)?, layer.single_label, set))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport {
        format: REPORT_FORMAT.to_string(),
        variant: model.variant().name().to_string(),
        samples: data.len(),
        observed_layer: obs.map(|o| graph.layers()[o.layer].name.clone()),
        layers,
        config: None,
    })
}
