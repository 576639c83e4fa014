//! Single-vector forward passes: logistic, BINN and SINN.

use crate::error::{Error, Result};
use crate::math::Vector;
use crate::model::{DirectionIds, Injection, InjectionPoint, Model, Variant, BWD, FWD};
use crate::params::ParamId;
use crate::tape::{NodeId, Tape};

/// Activations of one concept layer.
///
/// For the logistic baseline there is no message passing and `forward` and
/// `backward` are zero vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivations {
    pub x: Vector,
    pub forward: Vector,
    pub backward: Vector,
    pub a: Vector,
    pub y: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSet {
    pub layers: Vec<LayerActivations>,
}

impl ActivationSet {
    pub fn scores(&self) -> Vec<Vector> {
        self.layers.iter().map(|l| l.y.clone()).collect()
    }
}

/// Split of one SINN directional activation into its sign paths, biases
/// excluded: `positive = γ(V_p a) + γ(H_p x)` and
/// `negative = -γ(V_n a) - γ(H_n x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionPaths {
    pub positive: Vector,
    pub negative: Vector,
}

pub(crate) struct StaticNodes {
    pub x: Vec<NodeId>,
    pub fwd: Vec<Option<NodeId>>,
    pub bwd: Vec<Option<NodeId>>,
    pub logits: Vec<NodeId>,
    pub paths: Vec<[Option<(NodeId, NodeId)>; 2]>,
}

pub(crate) struct Messages {
    pub fwd: Vec<NodeId>,
    pub bwd: Vec<NodeId>,
    pub agg: Vec<NodeId>,
    pub paths: Vec<[Option<(NodeId, NodeId)>; 2]>,
}

fn vector(tape: &Tape, id: NodeId) -> Vector {
    Vector::new(tape.value(id).to_vec())
}

impl Model {
    pub(crate) fn record_projection(&self, tape: &mut Tape, pn: &[NodeId], x: NodeId) -> Result<Vec<NodeId>> {
        self.layout
            .iter()
            .map(|ids| {
                let wx = tape.matvec(pn[ids.w.0], x)?;
                tape.add(wx, pn[ids.b.0])
            })
            .collect()
    }

    fn mask_is_empty(&self, id: ParamId) -> bool {
        self.params.block(id).mask.as_ref().is_some_and(|m| m.iter().all(|v| *v == 0.0))
    }

    /// `γ(V_s · prev) + γ(H_s · x)`, skipping fully masked blocks.
    fn record_sign_path(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        ids: &DirectionIds,
        sign: usize,
        x: NodeId,
        prev: Option<NodeId>,
    ) -> Result<NodeId> {
        let mut terms = Vec::with_capacity(2);
        let inputs = [(ids.v[sign], prev), (ids.h[sign], Some(x))];
        for (block, input) in inputs {
            if let (Some(block), Some(input)) = (block, input) {
                if !self.mask_is_empty(block) {
                    let z = tape.matvec(pn[block.0], input)?;
                    terms.push(tape.relu(z));
                }
            }
        }
        let mut acc = match terms.first() {
            Some(&t) => t,
            None => return Ok(tape.input(&vec![0.0; tape.shape(x).0])),
        };
        for &t in &terms[1..] {
            acc = tape.add(acc, t)?;
        }
        Ok(acc)
    }

    /// One directional activation for one layer. Returns the activation and,
    /// for structured variants, the (positive, negative) path nodes.
    fn record_direction(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        ids: &DirectionIds,
        x: NodeId,
        prev: Option<NodeId>,
    ) -> Result<(NodeId, Option<(NodeId, NodeId)>)> {
        if !self.variant.is_structured() {
            let h = ids.h[0].expect("dense H");
            let mut s = tape.matvec(pn[h.0], x)?;
            if let (Some(v), Some(prev)) = (ids.v[0], prev) {
                let vm = tape.matvec(pn[v.0], prev)?;
                s = tape.add(vm, s)?;
            }
            return Ok((tape.add(s, pn[ids.bias.0])?, None));
        }

        let pos = self.record_sign_path(tape, pn, ids, 0, x, prev)?;
        let neg = self.record_sign_path(tape, pn, ids, 1, x, prev)?;
        let diff = tape.sub(pos, neg)?;
        Ok((tape.add(diff, pn[ids.bias.0])?, Some((pos, neg))))
    }

    /// Top-down then bottom-up message passing followed by aggregation.
    pub(crate) fn record_messages(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        xl: &[NodeId],
        inj: Option<&Injection>,
    ) -> Result<Messages> {
        let m = self.num_layers();
        let directional = inj.filter(|i| i.point == InjectionPoint::Directional);
        let mut fwd: Vec<NodeId> = Vec::with_capacity(m);
        let mut bwd: Vec<Option<NodeId>> = vec![None; m];
        let mut paths = vec![[None, None]; m];

        for l in 0..m {
            let dirs = self.layout[l].dirs.as_ref().expect("message-passing variant");
            let prev = l.checked_sub(1).map(|k| fwd[k]);
            let (mut a, p) = self.record_direction(tape, pn, &dirs[FWD], xl[l], prev)?;
            if let Some(inj) = directional.filter(|i| i.layer == l) {
                a = tape.override_entries(a, &inj.values)?;
            }
            fwd.push(a);
            paths[l][FWD] = p;
        }
        for l in (0..m).rev() {
            let dirs = self.layout[l].dirs.as_ref().expect("message-passing variant");
            let prev = bwd.get(l + 1).copied().flatten();
            let (mut a, p) = self.record_direction(tape, pn, &dirs[BWD], xl[l], prev)?;
            if let Some(inj) = directional.filter(|i| i.layer == l) {
                a = tape.override_entries(a, &inj.values)?;
            }
            bwd[l] = Some(a);
            paths[l][BWD] = p;
        }
        let bwd: Vec<NodeId> = bwd.into_iter().map(|b| b.expect("filled")).collect();

        let mut agg = Vec::with_capacity(m);
        for l in 0..m {
            let ids = &self.layout[l];
            let dirs = ids.dirs.as_ref().expect("message-passing variant");
            let uf = tape.mul(pn[dirs[FWD].u.0], fwd[l])?;
            let ub = tape.mul(pn[dirs[BWD].u.0], bwd[l])?;
            let s = tape.add(uf, ub)?;
            agg.push(tape.add(s, pn[ids.b_agg.expect("aggregation bias").0])?);
        }
        Ok(Messages { fwd, bwd, agg, paths })
    }

    /// Projected inputs with any `ProjectedInput` injection applied.
    pub(crate) fn record_inputs(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        x: NodeId,
        inj: Option<&Injection>,
    ) -> Result<Vec<NodeId>> {
        let mut xl = self.record_projection(tape, pn, x)?;
        if let Some(inj) = inj.filter(|i| i.point == InjectionPoint::ProjectedInput) {
            xl[inj.layer] = tape.override_entries(xl[inj.layer], &inj.values)?;
        }
        Ok(xl)
    }

    pub(crate) fn record_static(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        x: &[f64],
        inj: Option<&Injection>,
    ) -> Result<StaticNodes> {
        self.check_input(x)?;
        self.check_injection(inj)?;
        if self.variant.is_temporal() {
            return Err(Error::contract(format!("{} is a sequence model", self.variant)));
        }
        let xn = tape.input(x);
        let xl = self.record_inputs(tape, pn, xn, inj)?;
        let mut nodes = if self.variant.passes_messages() {
            let msg = self.record_messages(tape, pn, &xl, inj)?;
            StaticNodes {
                x: xl,
                fwd: msg.fwd.into_iter().map(Some).collect(),
                bwd: msg.bwd.into_iter().map(Some).collect(),
                logits: msg.agg,
                paths: msg.paths,
            }
        } else {
            let m = xl.len();
            StaticNodes { logits: xl.clone(), x: xl, fwd: vec![None; m], bwd: vec![None; m], paths: vec![[None, None]; m] }
        };
        if let Some(inj) = inj {
            nodes.logits[inj.layer] = tape.override_entries(nodes.logits[inj.layer], &inj.values)?;
        }
        Ok(nodes)
    }

    /// `x^l = W^l x + b^l` for every layer.
    pub fn project_inputs(&self, x: &[f64]) -> Result<Vec<Vector>> {
        self.check_input(x)?;
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let xn = tape.input(x);
        let xl = self.record_projection(&mut tape, &pn, xn)?;
        Ok(xl.iter().map(|id| vector(&tape, *id)).collect())
    }

    /// Forward pass of a static variant (logistic, BINN or SINN).
    pub fn forward(&self, x: &[f64], inj: Option<&Injection>) -> Result<ActivationSet> {
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let nodes = self.record_static(&mut tape, &pn, x, inj)?;
        let zero = |n: usize| Vector::zeros(n);
        let layers = (0..self.num_layers())
            .map(|l| {
                let a = vector(&tape, nodes.logits[l]);
                LayerActivations {
                    x: vector(&tape, nodes.x[l]),
                    forward: nodes.fwd[l].map_or_else(|| zero(a.len()), |id| vector(&tape, id)),
                    backward: nodes.bwd[l].map_or_else(|| zero(a.len()), |id| vector(&tape, id)),
                    y: a.sigmoid(),
                    a,
                }
            })
            .collect();
        Ok(ActivationSet { layers })
    }

    /// Sign-path decomposition of every SINN directional activation,
    /// indexed `[layer][direction]` with direction 0 top-down.
    pub fn path_contributions(&self, x: &[f64]) -> Result<Vec<[DirectionPaths; 2]>> {
        if self.variant != Variant::Sinn {
            return Err(Error::contract("path contributions are defined for SINN only"));
        }
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let nodes = self.record_static(&mut tape, &pn, x, None)?;
        Ok(nodes
            .paths
            .iter()
            .map(|dirs| {
                dirs.map(|p| {
                    let (pos, neg) = p.expect("structured paths");
                    DirectionPaths { positive: vector(&tape, pos), negative: vector(&tape, neg).map(|v| -v) }
                })
            })
            .collect())
    }
}

fn require(model: &Model, variant: Variant) -> Result<()> {
    if model.variant() != variant {
        return Err(Error::contract(format!("expected a {variant} model, got {}", model.variant())));
    }
    Ok(())
}

pub fn logistic_forward(x: &[f64], model: &Model) -> Result<Vec<Vector>> {
    require(model, Variant::Logistic)?;
    Ok(model.forward(x, None)?.scores())
}

pub fn binn_forward(x: &[f64], model: &Model) -> Result<ActivationSet> {
    require(model, Variant::Binn)?;
    model.forward(x, None)
}

pub fn sinn_forward(x: &[f64], model: &Model) -> Result<ActivationSet> {
    require(model, Variant::Sinn)?;
    model.params.check_masks()?;
    model.forward(x, None)
}
