pub mod eval;
pub mod gen_data;
pub mod grad_check;
pub mod inspect;
pub mod predict;
pub mod train;

use std::path::Path;

use sinn_core::data::{read_features, FeatureSet};
use sinn_core::observation::{ObserveLayer, DEFAULT_EPSILON};
use sinn_core::{Checkpoint, InjectionPoint, LabelGraph, Model};

use crate::error::{read_text, CliError, Result};

pub fn load_graph(path: &Path) -> Result<LabelGraph> {
    LabelGraph::from_json(&read_text(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn load_data(path: &Path, graph: &LabelGraph) -> Result<FeatureSet> {
    let data = read_features(path).map_err(|e| match e {
        sinn_core::Error::Io(source) => CliError::Io { path: path.to_path_buf(), source },
        e => CliError::usage(format!("{}: {e}", path.display())),
    })?;
    data.check_graph(graph).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(data)
}

pub fn load_model(path: &Path, graph: &LabelGraph) -> Result<Model> {
    let ckpt = Checkpoint::from_json(&read_text(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Model::from_checkpoint(&ckpt, graph).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn observe_layer(
    graph: &LabelGraph,
    name: Option<&String>,
    epsilon: Option<f64>,
    point: Option<InjectionPoint>,
) -> Result<Option<ObserveLayer>> {
    let Some(name) = name else { return Ok(None) };
    let layer = graph
        .layer_index(name)
        .ok_or_else(|| CliError::usage(format!("observe_layer: graph has no layer `{name}`")))?;
    Ok(Some(ObserveLayer { layer, epsilon: epsilon.unwrap_or(DEFAULT_EPSILON), point: point.unwrap_or_default() }))
}
