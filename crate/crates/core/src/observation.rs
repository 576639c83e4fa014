//! Partial label observations and their injection into inference.
//!
//! Observed 0/1 labels are pulled slightly inside the unit interval and
//! mapped through the logit so they live in activation space; the forward
//! pass then propagates them to the other layers through the usual message
//! passing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabelGraph;
use crate::model::{ActivationSet, Injection, InjectionPoint, Model};

pub const DEFAULT_EPSILON: f64 = 0.001;

/// Observed labels of a single layer; `None` marks an unobserved label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialObservation {
    pub layer: usize,
    pub labels: Vec<Option<bool>>,
}

impl PartialObservation {
    pub fn new(layer: usize, labels: Vec<Option<bool>>) -> Result<Self> {
        if labels.iter().all(Option::is_none) {
            return Err(Error::validation("observation has no observed labels"));
        }
        Ok(PartialObservation { layer, labels })
    }

    /// Every label of the layer observed.
    pub fn full(layer: usize, truth: &[bool]) -> Result<Self> {
        Self::new(layer, truth.iter().map(|&t| Some(t)).collect())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::contract(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    Ok(())
}

/// Logit of the label nudged by `epsilon` towards 0.5.
pub fn label_to_activation(t: bool, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let p = if t { 1.0 - epsilon } else { epsilon };
    Ok((p / (1.0 - p)).ln())
}

pub fn labels_to_activations(obs: &PartialObservation, epsilon: f64) -> Result<Vec<Option<f64>>> {
    check_epsilon(epsilon)?;
    obs.labels.iter().map(|t| t.map(|t| label_to_activation(t, epsilon)).transpose()).collect()
}

pub fn injection(obs: &PartialObservation, epsilon: f64, point: InjectionPoint) -> Result<Injection> {
    Ok(Injection { layer: obs.layer, values: labels_to_activations(obs, epsilon)?, point })
}

/// Static forward pass with the observed layer injected.
pub fn infer_with_observation(
    x: &[f64],
    obs: &PartialObservation,
    model: &Model,
    epsilon: f64,
    point: InjectionPoint,
) -> Result<ActivationSet> {
    if obs.layer >= model.num_layers() {
        return Err(Error::contract(format!("observed layer {} does not exist", obs.layer)));
    }
    model.forward(x, Some(&injection(obs, epsilon, point)?))
}

/// Observe the ground truth of one whole layer, as done when measuring the
/// gain from observing a layer at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveLayer {
    pub layer: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub point: InjectionPoint,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl ObserveLayer {
    pub fn new(layer: usize) -> Self {
        ObserveLayer { layer, epsilon: DEFAULT_EPSILON, point: InjectionPoint::default() }
    }

    pub fn injection_for(&self, truth: &[bool]) -> Result<Injection> {
        injection(&PartialObservation::full(self.layer, truth)?, self.epsilon, self.point)
    }
}

/// On-disk observation: a layer name and 0/1 values for the observed labels.
/// Labels that are not listed are unobserved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationDocument {
    pub layer: String,
    pub labels: BTreeMap<String, u8>,
}

impl ObservationDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self, graph: &LabelGraph) -> Result<PartialObservation> {
        let layer = graph
            .layer_index(&self.layer)
            .ok_or_else(|| Error::validation(format!("observation names unknown layer `{}`", self.layer)))?;
        let names = &graph.layers()[layer].labels;
        let mut labels = vec![None; names.len()];
        for (name, &v) in &self.labels {
            let k = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::validation(format!("observation names unknown label `{}/{name}`", self.layer)))?;
            labels[k] = Some(match v {
                0 => false,
                1 => true,
                _ => return Err(Error::validation(format!("observed value for `{name}` must be 0 or 1, got {v}"))),
            });
        }
        PartialObservation::new(layer, labels)
    }
}
