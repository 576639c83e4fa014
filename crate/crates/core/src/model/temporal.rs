//! Sequence models: per-layer LSTM baseline, biLSTM and siLSTM.
//!
//! At every frame the label-graph activations `a^l_t` (or the projected input
//! for the plain LSTM baseline) are combined with the hidden state of that
//! layer's LSTM: `y^l_t = σ(M_a ⊙ a^l_t + M_h ⊙ h^l_t + b_ah)`. The LSTM
//! gates read the raw frame feature `x_t`. State starts at zero.

use crate::error::{Error, Result};
use crate::math::Vector;
use crate::model::{Injection, LstmIds, Model, Variant};
use crate::tape::{NodeId, Tape};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub c: Vector,
    pub h: Vector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceState {
    pub layers: Vec<LayerState>,
    /// Number of frames consumed so far.
    pub t: usize,
}

impl SequenceState {
    pub fn initial(model: &Model) -> Self {
        SequenceState {
            layers: model.sizes().iter().map(|&n| LayerState { c: Vector::zeros(n), h: Vector::zeros(n) }).collect(),
            t: 0,
        }
    }
}

/// Per-frame scores and, when targets were given, the summed loss.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceOutput {
    /// `scores[t][l]`
    pub scores: Vec<Vec<Vector>>,
    pub loss: Option<f64>,
}

type CellNodes = (NodeId, NodeId);

impl Model {
    fn lstm_ids(&self, layer: usize) -> Result<&LstmIds> {
        self.layout
            .get(layer)
            .and_then(|l| l.lstm.as_ref())
            .ok_or_else(|| Error::contract(format!("{} has no LSTM for layer {layer}", self.variant)))
    }

    fn record_gate(&self, tape: &mut Tape, pn: &[NodeId], ids: &LstmIds, gate: usize, x: NodeId, h: NodeId) -> Result<NodeId> {
        let zx = tape.matvec(pn[ids.wx[gate].0], x)?;
        let zh = tape.matvec(pn[ids.wh[gate].0], h)?;
        let z = tape.add(zx, zh)?;
        tape.add(z, pn[ids.b[gate].0])
    }

    pub(crate) fn record_lstm_cell(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        layer: usize,
        x: NodeId,
        (c_prev, h_prev): CellNodes,
    ) -> Result<CellNodes> {
        let ids = self.lstm_ids(layer)?.clone();
        let mut z = [x; 4];
        for (g, slot) in z.iter_mut().enumerate() {
            *slot = self.record_gate(tape, pn, &ids, g, x, h_prev)?;
        }
        let i = tape.sigmoid(z[0]);
        let f = tape.sigmoid(z[1]);
        let o = tape.sigmoid(z[2]);
        let g = tape.tanh(z[3]);
        let keep = tape.mul(f, c_prev)?;
        let write = tape.mul(i, g)?;
        let c = tape.add(keep, write)?;
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        Ok((c, h))
    }

    /// Records one frame; returns per-layer output logits and the new state.
    pub(crate) fn record_step(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        x: &[f64],
        state: &[CellNodes],
        inj: Option<&Injection>,
    ) -> Result<(Vec<NodeId>, Vec<CellNodes>)> {
        self.check_input(x)?;
        let xn = tape.input(x);
        let xl = self.record_inputs(tape, pn, xn, inj)?;
        let acts = if self.variant.passes_messages() { self.record_messages(tape, pn, &xl, inj)?.agg } else { xl };
        let mut logits = Vec::with_capacity(acts.len());
        let mut next = Vec::with_capacity(acts.len());
        for (l, &a) in acts.iter().enumerate() {
            let (c, h) = self.record_lstm_cell(tape, pn, l, xn, state[l])?;
            let ids = self.lstm_ids(l)?;
            let ma = tape.mul(pn[ids.m_a.0], a)?;
            let mh = tape.mul(pn[ids.m_h.0], h)?;
            let s = tape.add(ma, mh)?;
            let mut z = tape.add(s, pn[ids.b_ah.0])?;
            if let Some(inj) = inj.filter(|i| i.layer == l) {
                z = tape.override_entries(z, &inj.values)?;
            }
            logits.push(z);
            next.push((c, h));
        }
        Ok((logits, next))
    }

    /// Left-to-right unroll from the zero state; returns `logits[t][l]`.
    pub(crate) fn record_sequence(
        &self,
        tape: &mut Tape,
        pn: &[NodeId],
        frames: &[&[f64]],
        inj: Option<&Injection>,
    ) -> Result<Vec<Vec<NodeId>>> {
        if frames.is_empty() {
            return Err(Error::contract("sequence has no frames"));
        }
        self.check_injection(inj)?;
        let mut state: Vec<CellNodes> = self
            .sizes()
            .iter()
            .map(|&n| {
                let z = tape.input(&vec![0.0; n]);
                (z, z)
            })
            .collect();
        let mut out = Vec::with_capacity(frames.len());
        for x in frames {
            let (logits, next) = self.record_step(tape, pn, x, &state, inj)?;
            out.push(logits);
            state = next;
        }
        Ok(out)
    }

    /// One LSTM update for `layer`.
    pub fn lstm_cell(&self, layer: usize, x: &[f64], prev: &LayerState) -> Result<LayerState> {
        self.check_input(x)?;
        let n = *self.sizes().get(layer).ok_or_else(|| Error::contract(format!("no layer {layer}")))?;
        if prev.c.len() != n || prev.h.len() != n {
            return Err(Error::shape(format!("layer {layer} state must have length {n}")));
        }
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let xn = tape.input(x);
        let c0 = tape.input(&prev.c.data);
        let h0 = tape.input(&prev.h.data);
        let (c, h) = self.record_lstm_cell(&mut tape, &pn, layer, xn, (c0, h0))?;
        Ok(LayerState { c: Vector::new(tape.value(c).to_vec()), h: Vector::new(tape.value(h).to_vec()) })
    }

    /// Advances a temporal model by one frame.
    pub fn step(&self, x: &[f64], prev: &SequenceState, inj: Option<&Injection>) -> Result<(Vec<Vector>, SequenceState)> {
        if !self.variant.is_temporal() {
            return Err(Error::contract(format!("{} is not a sequence model", self.variant)));
        }
        self.check_injection(inj)?;
        if prev.layers.len() != self.num_layers() {
            return Err(Error::shape("state does not match the model's layers"));
        }
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let state: Vec<CellNodes> = prev.layers.iter().map(|s| (tape.input(&s.c.data), tape.input(&s.h.data))).collect();
        let (logits, next) = self.record_step(&mut tape, &pn, x, &state, inj)?;
        let y = logits.iter().map(|z| Vector::new(tape.value(*z).to_vec()).sigmoid()).collect();
        let layers = next
            .iter()
            .map(|(c, h)| LayerState { c: Vector::new(tape.value(*c).to_vec()), h: Vector::new(tape.value(*h).to_vec()) })
            .collect();
        Ok((y, SequenceState { layers, t: prev.t + 1 }))
    }

    /// Scores every frame. Static variants score frames independently.
    pub fn run_sequence(
        &self,
        frames: &[&[f64]],
        targets: Option<&[&[Vec<f64>]]>,
        inj: Option<&Injection>,
    ) -> Result<SequenceOutput> {
        if frames.is_empty() {
            return Err(Error::contract("sequence has no frames"));
        }
        let mut tape = Tape::new();
        let pn = self.param_nodes(&mut tape);
        let logits = if self.variant.is_temporal() {
            self.record_sequence(&mut tape, &pn, frames, inj)?
        } else {
            frames.iter().map(|x| self.record_static(&mut tape, &pn, x, inj).map(|n| n.logits)).collect::<Result<_>>()?
        };
        let loss = match targets {
            None => None,
            Some(t) => {
                if t.len() != frames.len() {
                    return Err(Error::shape(format!("{} frames vs {} target frames", frames.len(), t.len())));
                }
                let mut terms = Vec::new();
                for (frame, tgt) in logits.iter().zip(t) {
                    self.check_targets(tgt)?;
                    for (z, y) in frame.iter().zip(tgt.iter()) {
                        terms.push(tape.bce(*z, y)?);
                    }
                }
                let total = tape.sum(&terms)?;
                Some(tape.scalar(total))
            }
        };
        let scores =
            logits.iter().map(|f| f.iter().map(|z| Vector::new(tape.value(*z).to_vec()).sigmoid()).collect()).collect();
        Ok(SequenceOutput { scores, loss })
    }
}

fn require(model: &Model, variant: Variant) -> Result<()> {
    if model.variant() != variant {
        return Err(Error::contract(format!("expected a {variant} model, got {}", model.variant())));
    }
    Ok(())
}

pub fn bilstm_step(x: &[f64], prev: &SequenceState, model: &Model) -> Result<(Vec<Vector>, SequenceState)> {
    require(model, Variant::BiLstm)?;
    model.step(x, prev, None)
}

pub fn silstm_step(x: &[f64], prev: &SequenceState, model: &Model) -> Result<(Vec<Vector>, SequenceState)> {
    require(model, Variant::SiLstm)?;
    model.params.check_masks()?;
    model.step(x, prev, None)
}
