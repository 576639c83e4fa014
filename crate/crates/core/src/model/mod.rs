//! Model variants, parameter layout and checkpoints.
//!
//! Every variant shares the per-layer input projection `x^l = W^l x + b^l`.
//! BINN and SINN add top-down / bottom-up message passing over the concept
//! layers; the temporal variants attach one LSTM per layer and mix its hidden
//! state into the output logits.

mod static_inf;
mod temporal;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabelGraph, Sign};
use crate::params::{BlockRecord, Grads, ParamId, ParamSet};
use crate::tape::{NodeId, Tape};

pub use static_inf::{binn_forward, logistic_forward, sinn_forward, ActivationSet, DirectionPaths, LayerActivations};
pub use temporal::{bilstm_step, silstm_step, LayerState, SequenceOutput, SequenceState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Logistic,
    Binn,
    Sinn,
    /// Per-layer LSTM without label-graph message passing.
    Lstm,
    #[serde(rename = "bilstm")]
    BiLstm,
    #[serde(rename = "silstm")]
    SiLstm,
}

impl Variant {
    pub const ALL: [Variant; 6] =
        [Variant::Logistic, Variant::Binn, Variant::Sinn, Variant::Lstm, Variant::BiLstm, Variant::SiLstm];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Logistic => "logistic",
            Variant::Binn => "binn",
            Variant::Sinn => "sinn",
            Variant::Lstm => "lstm",
            Variant::BiLstm => "bilstm",
            Variant::SiLstm => "silstm",
        }
    }

    pub fn is_temporal(self) -> bool {
        matches!(self, Variant::Lstm | Variant::BiLstm | Variant::SiLstm)
    }

    /// Uses masked positive/negative relation matrices.
    pub fn is_structured(self) -> bool {
        matches!(self, Variant::Sinn | Variant::SiLstm)
    }

    pub fn passes_messages(self) -> bool {
        matches!(self, Variant::Binn | Variant::Sinn | Variant::BiLstm | Variant::SiLstm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::validation(format!("unknown model variant `{s}`")))
    }
}

pub(crate) const FWD: usize = 0;
pub(crate) const BWD: usize = 1;
const DIR: [&str; 2] = ["fwd", "bwd"];

/// Blocks for one direction of message passing into one layer.
/// Index 0 holds the dense (BINN) or positive (SINN) matrix, index 1 the
/// negative one (SINN only).
#[derive(Clone, Debug)]
pub(crate) struct DirectionIds {
    pub h: [Option<ParamId>; 2],
    /// Absent at the boundary layer of this direction.
    pub v: [Option<ParamId>; 2],
    pub bias: ParamId,
    pub u: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct LstmIds {
    /// Gate order: input, forget, output, candidate.
    pub wx: [ParamId; 4],
    pub wh: [ParamId; 4],
    pub b: [ParamId; 4],
    pub m_a: ParamId,
    pub m_h: ParamId,
    pub b_ah: ParamId,
}

#[derive(Clone, Debug)]
pub(crate) struct LayerIds {
    pub w: ParamId,
    pub b: ParamId,
    pub dirs: Option<[DirectionIds; 2]>,
    pub b_agg: Option<ParamId>,
    pub lstm: Option<LstmIds>,
}

/// A model variant bound to a label graph, with all learnable parameters.
#[derive(Clone, Debug)]
pub struct Model {
    variant: Variant,
    input_dim: usize,
    sizes: Vec<usize>,
    fingerprint: String,
    pub params: ParamSet,
    pub(crate) layout: Vec<LayerIds>,
}

/// Observed label values injected into a forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Injection {
    pub layer: usize,
    /// Activation-space value per label; `None` for unobserved labels.
    pub values: Vec<Option<f64>>,
    pub point: InjectionPoint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectionPoint {
    /// Replace the projected input `x^l` of the observed layer.
    #[default]
    ProjectedInput,
    /// Replace the observed layer's top-down and bottom-up activations.
    Directional,
}

fn flat_mask(graph: &LabelGraph, from: usize, to: usize, sign: Sign) -> Vec<f64> {
    graph.mask(from, to, sign).expect("adjacent or equal layers").data
}

impl Model {
    /// Builds a model with every parameter at zero.
    pub fn zeros(variant: Variant, graph: &LabelGraph, input_dim: usize) -> Self {
        let sizes = graph.sizes();
        let m = sizes.len();
        let mut p = ParamSet::new();
        let mut layout = Vec::with_capacity(m);
        for (l, &n) in sizes.iter().enumerate() {
            let pre = format!("L{l}");
            let w = p.add(format!("{pre}.W"), n, input_dim, None);
            let b = p.add(format!("{pre}.b"), n, 1, None);
            let dirs = variant.passes_messages().then(|| {
                [FWD, BWD].map(|d| {
                    let neighbour = if d == FWD { l.checked_sub(1) } else { (l + 1 < m).then_some(l + 1) };
                    let mut h = [None, None];
                    let mut v = [None, None];
                    if variant.is_structured() {
                        for (s, sign) in [Sign::Pos, Sign::Neg].into_iter().enumerate() {
                            let tag = if s == 0 { "pos" } else { "neg" };
                            h[s] = Some(p.add(
                                format!("{pre}.H_{}_{tag}", DIR[d]),
                                n,
                                n,
                                Some(flat_mask(graph, l, l, sign)),
                            ));
                            if let Some(k) = neighbour {
                                v[s] = Some(p.add(
                                    format!("{pre}.V_{}_{tag}", DIR[d]),
                                    n,
                                    sizes[k],
                                    Some(flat_mask(graph, k, l, sign)),
                                ));
                            }
                        }
                    } else {
                        h[0] = Some(p.add(format!("{pre}.H_{}", DIR[d]), n, n, None));
                        if let Some(k) = neighbour {
                            v[0] = Some(p.add(format!("{pre}.V_{}", DIR[d]), n, sizes[k], None));
                        }
                    }
                    let bias = p.add(format!("{pre}.b_{}", DIR[d]), n, 1, None);
                    let u = p.add(format!("{pre}.U_{}", DIR[d]), n, 1, None);
                    DirectionIds { h, v, bias, u }
                })
            });
            let b_agg = variant.passes_messages().then(|| p.add(format!("{pre}.b_agg"), n, 1, None));
            let lstm = variant.is_temporal().then(|| {
                let gates = ["i", "f", "o", "c"];
                LstmIds {
                    wx: gates.map(|g| p.add(format!("{pre}.lstm.Wx_{g}"), n, input_dim, None)),
                    wh: gates.map(|g| p.add(format!("{pre}.lstm.Wh_{g}"), n, n, None)),
                    b: gates.map(|g| p.add(format!("{pre}.lstm.b_{g}"), n, 1, None)),
                    m_a: p.add(format!("{pre}.M_a"), n, 1, None),
                    m_h: p.add(format!("{pre}.M_h"), n, 1, None),
                    b_ah: p.add(format!("{pre}.b_ah"), n, 1, None),
                }
            });
            layout.push(LayerIds { w, b, dirs, b_agg, lstm });
        }
        Model { variant, input_dim, sizes, fingerprint: graph.fingerprint(), params: p, layout }
    }

    /// Random initialization: weight matrices uniform in `±1/sqrt(fan_in)`,
    /// biases 0, aggregation scalers `U = 0.5`, `M_a = M_h = 1`. Masked
    /// entries are zeroed afterwards.
    pub fn init(variant: Variant, graph: &LabelGraph, input_dim: usize, seed: u64) -> Self {
        let mut model = Model::zeros(variant, graph, input_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in model.params.blocks_mut() {
            let field = block.name.split_once('.').map_or("", |(_, f)| f);
            let is_weight = field.starts_with(['W', 'H', 'V']) || field.starts_with("lstm.W");
            if is_weight {
                let s = 1.0 / (block.cols as f64).sqrt();
                block.data.iter_mut().for_each(|d| *d = rng.random_range(-s..s));
            } else if field.starts_with('U') {
                block.data.iter_mut().for_each(|d| *d = 0.5);
            } else if field.starts_with("M_") {
                block.data.iter_mut().for_each(|d| *d = 1.0);
            }
        }
        model.params.apply_masks();
        model
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len()
    }

    pub fn graph_fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Leaf nodes for every parameter block, indexed by `ParamId`.
    pub(crate) fn param_nodes(&self, tape: &mut Tape) -> Vec<NodeId> {
        (0..self.params.len()).map(|i| tape.param(&self.params, ParamId(i))).collect()
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!("input has length {} but the model expects {}", x.len(), self.input_dim)));
        }
        Ok(())
    }

    pub(crate) fn check_injection(&self, inj: Option<&Injection>) -> Result<()> {
        if let Some(inj) = inj {
            let Some(&n) = self.sizes.get(inj.layer) else {
                return Err(Error::contract(format!("observed layer {} does not exist", inj.layer)));
            };
            if inj.values.len() != n {
                return Err(Error::shape(format!("observation has {} entries, layer has {n}", inj.values.len())));
            }
        }
        Ok(())
    }

    pub(crate) fn check_targets(&self, targets: &[Vec<f64>]) -> Result<()> {
        if targets.len() != self.sizes.len() || targets.iter().zip(&self.sizes).any(|(t, n)| t.len() != *n) {
            return Err(Error::shape("targets do not match the layer sizes"));
        }
        Ok(())
    }

    /// Summed loss and its gradient for one training example.
    pub fn loss_and_grads(&self, example: Example<'_>, inj: Option<&Injection>) -> Result<(f64, Grads)> {
        let mut tape = Tape::new();
        let loss = self.record_loss(&mut tape, example, inj)?;
        let grads = tape.backward(loss, &self.params)?;
        Ok((tape.scalar(loss), grads))
    }

    pub fn loss(&self, example: Example<'_>, inj: Option<&Injection>) -> Result<f64> {
        let mut tape = Tape::new();
        let loss = self.record_loss(&mut tape, example, inj)?;
        Ok(tape.scalar(loss))
    }

    pub fn record_loss(&self, tape: &mut Tape, example: Example<'_>, inj: Option<&Injection>) -> Result<NodeId> {
        match example {
            Example::Static { x, targets } => {
                if self.variant.is_temporal() {
                    return self.record_loss(tape, Example::Sequence { frames: &[x], targets: &[targets] }, inj);
                }
                self.check_targets(targets)?;
                let pn = self.param_nodes(tape);
                let nodes = self.record_static(tape, &pn, x, inj)?;
                let terms = nodes
                    .logits
                    .iter()
                    .zip(targets)
                    .map(|(a, t)| tape.bce(*a, t))
                    .collect::<Result<Vec<_>>>()?;
                tape.sum(&terms)
            }
            Example::Sequence { frames, targets } => {
                if frames.len() != targets.len() {
                    return Err(Error::shape(format!("{} frames vs {} target frames", frames.len(), targets.len())));
                }
                targets.iter().try_for_each(|t| self.check_targets(t))?;
                let pn = self.param_nodes(tape);
                let logits = if self.variant.is_temporal() {
                    self.record_sequence(tape, &pn, frames, inj)?
                } else {
                    frames
                        .iter()
                        .map(|x| self.record_static(tape, &pn, x, inj).map(|n| n.logits))
                        .collect::<Result<Vec<_>>>()?
                };
                let mut terms = Vec::new();
                for (frame, tgt) in logits.iter().zip(targets) {
                    for (a, t) in frame.iter().zip(tgt.iter()) {
                        terms.push(tape.bce(*a, t)?);
                    }
                }
                tape.sum(&terms)
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            variant: self.variant,
            input_dim: self.input_dim,
            layer_sizes: self.sizes.clone(),
            graph_fingerprint: self.fingerprint.clone(),
            blocks: self.params.blocks().iter().map(BlockRecord::from).collect(),
        }
    }

    /// Rebuilds a model from a checkpoint; the graph must be the one the
    /// checkpoint was trained on.
    pub fn from_checkpoint(ckpt: &Checkpoint, graph: &LabelGraph) -> Result<Self> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::validation(format!("unsupported checkpoint format `{}`", ckpt.format)));
        }
        let fp = graph.fingerprint();
        if ckpt.graph_fingerprint != fp {
            return Err(Error::validation(format!(
                "checkpoint was built for graph {} but the supplied graph is {fp}",
                ckpt.graph_fingerprint
            )));
        }
        let mut model = Model::zeros(ckpt.variant, graph, ckpt.input_dim);
        if model.params.len() != ckpt.blocks.len() {
            return Err(Error::validation(format!(
                "checkpoint has {} blocks, {} expects {}",
                ckpt.blocks.len(),
                ckpt.variant,
                model.params.len()
            )));
        }
        for rec in &ckpt.blocks {
            let Some(block) = model.params.by_name_mut(&rec.name) else {
                return Err(Error::validation(format!("unexpected block `{}`", rec.name)));
            };
            if (block.rows, block.cols) != (rec.rows, rec.cols) || rec.data.len() != rec.rows * rec.cols {
                return Err(Error::validation(format!(
                    "block `{}` is {}x{} in the checkpoint, expected {}x{}",
                    rec.name, rec.rows, rec.cols, block.rows, block.cols
                )));
            }
            block.data.clone_from(&rec.data);
        }
        model.params.check_masks()?;
        model.params.check_finite()?;
        Ok(model)
    }
}

/// One training example.
#[derive(Clone, Copy, Debug)]
pub enum Example<'a> {
    Static { x: &'a [f64], targets: &'a [Vec<f64>] },
    Sequence { frames: &'a [&'a [f64]], targets: &'a [&'a [Vec<f64>]] },
}

pub const CHECKPOINT_FORMAT: &str = "sinn-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub variant: Variant,
    pub input_dim: usize,
    pub layer_sizes: Vec<usize>,
    pub graph_fingerprint: String,
    pub blocks: Vec<BlockRecord>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
