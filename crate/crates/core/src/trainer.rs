//! Mini-batch optimization.
//!
//! Each iteration draws `batch_size` training units (a sample, or a window of
//! up to `window` consecutive frames for temporal models), averages their
//! summed-loss gradients, optionally clips by global norm and applies one
//! SGD-momentum or Adam step. Masks are re-applied after every step.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::model::{Example, Injection, Model};
use crate::observation::ObserveLayer;
use crate::params::{Grads, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    SgdMomentum,
    Adam,
}

fn default_momentum() -> f64 {
    0.9
}
fn default_decay_factor() -> f64 {
    0.1
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_window() -> usize {
    32
}
fn default_log_every() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Global-norm clipping threshold.
    #[serde(default)]
    pub clip: Option<f64>,
    pub batch_size: usize,
    pub iterations: usize,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    /// Iterations between learning-rate decays. Has no default.
    pub decay_step: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_epsilon: f64,
    /// Frames per training window for temporal models.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    pub seed: u64,
}

impl OptimConfig {
    pub fn sgd(learning_rate: f64, batch_size: usize, iterations: usize, decay_step: usize, seed: u64) -> Self {
        OptimConfig {
            algorithm: Algorithm::SgdMomentum,
            learning_rate,
            momentum: default_momentum(),
            weight_decay: 0.0,
            clip: None,
            batch_size,
            iterations,
            decay_factor: default_decay_factor(),
            decay_step,
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_epsilon: default_adam_eps(),
            window: default_window(),
            log_every: default_log_every(),
            seed,
        }
    }

    pub fn adam(learning_rate: f64, batch_size: usize, iterations: usize, decay_step: usize, seed: u64) -> Self {
        OptimConfig { algorithm: Algorithm::Adam, ..Self::sgd(learning_rate, batch_size, iterations, decay_step, seed) }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::validation(format!("{field} {why}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be finite and nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be finite and nonnegative");
        }
        if let Some(c) = self.clip {
            if !(c > 0.0 && c.is_finite()) {
                return bad("clip", "must be positive");
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if self.decay_step == 0 {
            return bad("decay_step", "must be at least 1");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor", "must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1/beta2", "must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon", "must be positive");
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        if self.log_every == 0 {
            return bad("log_every", "must be at least 1");
        }
        Ok(())
    }

    /// Step-decayed learning rate at `iteration` (0-based).
    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        self.learning_rate * self.decay_factor.powi((iteration / self.decay_step) as i32)
    }
}

/// Optimizer state mirroring the parameter blocks.
#[derive(Clone, Debug, PartialEq)]
pub enum Slots {
    Momentum(Vec<Vec<f64>>),
    Adam { m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, step: u64 },
}

impl Slots {
    pub fn new(algorithm: Algorithm, params: &ParamSet) -> Self {
        let zeros = || params.blocks().iter().map(|b| vec![0.0; b.len()]).collect::<Vec<_>>();
        match algorithm {
            Algorithm::SgdMomentum => Slots::Momentum(zeros()),
            Algorithm::Adam => Slots::Adam { m: zeros(), v: zeros(), step: 0 },
        }
    }

    fn mask_like(&mut self, params: &ParamSet) {
        let buffers: Vec<&mut Vec<Vec<f64>>> = match self {
            Slots::Momentum(b) => vec![b],
            Slots::Adam { m, v, .. } => vec![m, v],
        };
        for buf in buffers {
            for (slot, block) in buf.iter_mut().zip(params.blocks()) {
                if let Some(mask) = &block.mask {
                    slot.iter_mut().zip(mask).filter(|(_, m)| **m == 0.0).for_each(|(s, _)| *s = 0.0);
                }
            }
        }
    }
}

/// Parameters plus everything needed to continue training deterministically.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub model: Model,
    pub slots: Slots,
    pub iteration: usize,
    rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(model: Model, cfg: &OptimConfig) -> Self {
        let slots = Slots::new(cfg.algorithm, &model.params);
        TrainState { model, slots, iteration: 0, rng: ChaCha8Rng::seed_from_u64(cfg.seed) }
    }
}

/// `buf = momentum * buf + grad + weight_decay * param; param -= lr * buf`.
pub fn sgd_momentum_step(params: &mut ParamSet, slots: &mut Slots, grads: &Grads, cfg: &OptimConfig, lr: f64) -> Result<()> {
    grads.check_finite(params)?;
    let Slots::Momentum(buf) = slots else {
        return Err(Error::contract("sgd_momentum_step needs momentum slots"));
    };
    for ((block, g), b) in params.blocks_mut().iter_mut().zip(&grads.blocks).zip(buf.iter_mut()) {
        for ((p, g), b) in block.data.iter_mut().zip(g).zip(b.iter_mut()) {
            *b = cfg.momentum * *b + g + cfg.weight_decay * *p;
            *p -= lr * *b;
        }
    }
    params.apply_masks();
    slots.mask_like(params);
    Ok(())
}

/// Bias-corrected Adam with decoupled weight decay.
pub fn adam_step(params: &mut ParamSet, slots: &mut Slots, grads: &Grads, cfg: &OptimConfig, lr: f64) -> Result<()> {
    grads.check_finite(params)?;
    let Slots::Adam { m, v, step } = slots else {
        return Err(Error::contract("adam_step needs Adam slots"));
    };
    *step += 1;
    let c1 = 1.0 - cfg.beta1.powi(*step as i32);
    let c2 = 1.0 - cfg.beta2.powi(*step as i32);
    for (((block, g), m), v) in params.blocks_mut().iter_mut().zip(&grads.blocks).zip(m.iter_mut()).zip(v.iter_mut()) {
        for (((p, g), m), v) in block.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let update = (*m / c1) / ((*v / c2).sqrt() + cfg.adam_epsilon);
            *p -= lr * update + lr * cfg.weight_decay * *p;
        }
    }
    params.apply_masks();
    slots.mask_like(params);
    Ok(())
}

/// Scales all gradients by `threshold / norm` when the global norm exceeds
/// the threshold. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Grads, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::contract(format!("clip threshold must be positive, got {threshold}")));
    }
    let norm = grads.norm();
    if norm > threshold {
        grads.scale(threshold / norm);
    }
    Ok(norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Batch loss per training unit.
    pub loss: f64,
    /// Batch loss per label term.
    pub per_term: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<TraceEntry>,
}

/// Sample index lists; each is one training unit.
fn training_units(model: &Model, data: &FeatureSet, window: usize) -> Vec<Vec<usize>> {
    if model.variant().is_temporal() && data.is_sequential() {
        data.sequences().into_iter().flat_map(|s| s.chunks(window).map(<[usize]>::to_vec).collect::<Vec<_>>()).collect()
    } else {
        (0..data.len()).map(|i| vec![i]).collect()
    }
}

fn unit_loss(
    model: &Model,
    data: &FeatureSet,
    unit: &[usize],
    obs: Option<&ObserveLayer>,
) -> Result<(f64, Grads, usize)> {
    let targets: Vec<Vec<Vec<f64>>> = unit.iter().map(|&i| data.samples[i].targets_f64()).collect();
    let terms = unit.len() * model.sizes().iter().sum::<usize>();
    let inj: Option<Injection> = match obs {
        None => None,
        Some(o) => {
            Some(o.injection_for(&data.samples[unit[0]].targets[o.layer])?)
        }
    };
    let (loss, grads) = if unit.len() == 1 {
        let s = &data.samples[unit[0]];
        model.loss_and_grads(Example::Static { x: &s.features, targets: &targets[0] }, inj.as_ref())?
    } else {
        let frames: Vec<&[f64]> = unit.iter().map(|&i| data.samples[i].features.as_slice()).collect();
        let t: Vec<&[Vec<f64>]> = targets.iter().map(Vec::as_slice).collect();
        model.loss_and_grads(Example::Sequence { frames: &frames, targets: &t }, inj.as_ref())?
    };
    Ok((loss, grads, terms))
}

/// Runs `cfg.iterations` optimizer steps on `state`, appending to `trace`
/// every `log_every` iterations and at the last one.
pub fn train_state(
    state: &mut TrainState,
    data: &FeatureSet,
    cfg: &OptimConfig,
    obs: Option<&ObserveLayer>,
    trace: &mut Vec<TraceEntry>,
) -> Result<()> {
    cfg.validate()?;
    data.validate()?;
    if data.is_empty() {
        return Err(Error::validation("training set is empty"));
    }
    if data.dim != state.model.input_dim() || data.layer_sizes() != state.model.sizes() {
        return Err(Error::validation("training data does not match the model's input dimension or layer sizes"));
    }
    if let Some(o) = obs {
        if o.layer >= state.model.num_layers() {
            return Err(Error::contract(format!("observed layer {} does not exist", o.layer)));
        }
        if state.model.variant().is_temporal() {
            return Err(Error::contract("training with observations is only supported for static models"));
        }
    }
    let units = training_units(&state.model, data, cfg.window);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0usize;
    let end = state.iteration + cfg.iterations;
    while state.iteration < end {
        let it = state.iteration;
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order = (0..units.len()).collect();
                order.shuffle(&mut state.rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let model = &state.model;
        let results: Vec<Result<(f64, Grads, usize)>> =
            batch.par_iter().map(|&u| unit_loss(model, data, &units[u], obs)).collect();
        let mut grads = Grads::zeros_like(&model.params);
        let (mut loss, mut terms) = (0.0, 0usize);
        for r in results {
            let (l, g, n) = r?;
            loss += l;
            terms += n;
            grads.add_assign(&g);
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it, loss });
        }
        grads.scale(1.0 / batch.len() as f64);
        if let Some(t) = cfg.clip {
            clip_gradients(&mut grads, t)?;
        }
        let lr = cfg.learning_rate_at(it);
        match cfg.algorithm {
            Algorithm::SgdMomentum => sgd_momentum_step(&mut state.model.params, &mut state.slots, &grads, cfg, lr)?,
            Algorithm::Adam => adam_step(&mut state.model.params, &mut state.slots, &grads, cfg, lr)?,
        }
        if cfg!(debug_assertions) {
            state.model.params.check_masks()?;
        }
        state.iteration += 1;
        if state.iteration.is_multiple_of(cfg.log_every) || state.iteration == end {
            trace.push(TraceEntry { iteration: state.iteration, loss: loss / batch.len() as f64, per_term: loss / terms as f64, lr });
        }
    }
    state.model.params.check_masks()?;
    state.model.params.check_finite()?;
    Ok(())
}

/// Trains `model` from its current parameters.
pub fn train(model: Model, data: &FeatureSet, cfg: &OptimConfig, obs: Option<&ObserveLayer>) -> Result<TrainOutcome> {
    let mut state = TrainState::new(model, cfg);
    let mut trace = Vec::new();
    train_state(&mut state, data, cfg, obs, &mut trace)?;
    Ok(TrainOutcome { model: state.model, trace })
}

/// One line per entry: `iteration loss per_term lr`.
pub fn format_trace(trace: &[TraceEntry]) -> String {
    let mut out = String::from("# iteration loss per_term lr\n");
    for e in trace {
        out.push_str(&format!("{} {:.9} {:.9} {:e}\n", e.iteration, e.loss, e.per_term, e.lr));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, hierarchy_graph, Embedding, SynthConfig};
    use crate::model::Variant;
    use approx::assert_abs_diff_eq;

    fn one_block(values: &[f64], mask: Option<Vec<f64>>) -> ParamSet {
        let mut p = ParamSet::new();
        let id = p.add("w", values.len(), 1, mask);
        p.block_mut(id).data = values.to_vec();
        p
    }

    fn grads(values: &[f64]) -> Grads {
        Grads { blocks: vec![values.to_vec()] }
    }

    #[test]
    fn plain_sgd_without_momentum() {
        let mut p = one_block(&[1.0, -2.0], None);
        let cfg = OptimConfig { momentum: 0.0, ..OptimConfig::sgd(0.1, 1, 1, 1, 0) };
        let mut s = Slots::new(Algorithm::SgdMomentum, &p);
        sgd_momentum_step(&mut p, &mut s, &grads(&[0.5, 1.0]), &cfg, 0.1).unwrap();
        assert_abs_diff_eq!(p.blocks()[0].data[0], 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(p.blocks()[0].data[1], -2.1, epsilon = 1e-15);
    }

    #[test]
    fn momentum_unrolls() {
        let mut p = one_block(&[0.0], None);
        let cfg = OptimConfig::sgd(1.0, 1, 1, 1, 0);
        let mut s = Slots::new(Algorithm::SgdMomentum, &p);
        let g = grads(&[2.0]);
        sgd_momentum_step(&mut p, &mut s, &g, &cfg, 1.0).unwrap();
        assert_eq!(p.blocks()[0].data[0], -2.0);
        sgd_momentum_step(&mut p, &mut s, &g, &cfg, 1.0).unwrap();
        assert_abs_diff_eq!(p.blocks()[0].data[0], -2.0 - 1.9 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn coupled_weight_decay() {
        let mut p = one_block(&[2.0], None);
        let cfg = OptimConfig { momentum: 0.0, weight_decay: 0.5, ..OptimConfig::sgd(0.1, 1, 1, 1, 0) };
        let mut s = Slots::new(Algorithm::SgdMomentum, &p);
        sgd_momentum_step(&mut p, &mut s, &grads(&[0.0]), &cfg, 0.1).unwrap();
        assert_abs_diff_eq!(p.blocks()[0].data[0], 2.0 - 0.1 * 1.0, epsilon = 1e-15);
    }

    #[test]
    fn masked_entries_stay_zero() {
        let mut p = one_block(&[0.0, 1.0], Some(vec![0.0, 1.0]));
        let cfg = OptimConfig { weight_decay: 0.1, ..OptimConfig::sgd(0.5, 1, 1, 1, 0) };
        for alg in [Algorithm::SgdMomentum, Algorithm::Adam] {
            let mut s = Slots::new(alg, &p);
            for _ in 0..5 {
                match alg {
                    Algorithm::SgdMomentum => sgd_momentum_step(&mut p, &mut s, &grads(&[0.0, 0.3]), &cfg, 0.5).unwrap(),
                    Algorithm::Adam => adam_step(&mut p, &mut s, &grads(&[0.0, 0.3]), &cfg, 0.5).unwrap(),
                }
            }
            assert_eq!(p.blocks()[0].data[0], 0.0);
        }
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut p = one_block(&[1.0, 1.0, 1.0], None);
        let cfg = OptimConfig::adam(0.01, 1, 1, 1, 0);
        let mut s = Slots::new(Algorithm::Adam, &p);
        let g = [0.3, -2.0, 1e-9];
        adam_step(&mut p, &mut s, &grads(&g), &cfg, 0.01).unwrap();
        // after bias correction m = g and v = g^2
        for (k, &gk) in g.iter().enumerate() {
            let expect = 1.0 - 0.01 * gk / (gk.abs() + 1e-8);
            assert_abs_diff_eq!(p.blocks()[0].data[k], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn adam_zero_gradient_only_decays() {
        let mut p = one_block(&[3.0], None);
        let cfg = OptimConfig { weight_decay: 0.1, ..OptimConfig::adam(0.5, 1, 1, 1, 0) };
        let mut s = Slots::new(Algorithm::Adam, &p);
        for _ in 0..3 {
            adam_step(&mut p, &mut s, &grads(&[0.0]), &cfg, 0.5).unwrap();
        }
        assert_abs_diff_eq!(p.blocks()[0].data[0], 3.0 * 0.95f64.powi(3), epsilon = 1e-12);
        let cfg = OptimConfig::adam(0.5, 1, 1, 1, 0);
        let before = p.clone();
        adam_step(&mut p, &mut s, &grads(&[0.0]), &cfg, 0.5).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = one_block(&[1.0], None);
        let cfg = OptimConfig::sgd(0.1, 1, 1, 1, 0);
        let mut s = Slots::new(Algorithm::SgdMomentum, &p);
        let err = sgd_momentum_step(&mut p, &mut s, &grads(&[f64::NAN]), &cfg, 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { block } if block == "w"));
    }

    #[test]
    fn clipping() {
        let mut g = grads(&[30.0, 40.0]);
        assert_eq!(clip_gradients(&mut g, 25.0).unwrap(), 50.0);
        assert_eq!(g.blocks[0], vec![15.0, 20.0]);
        let mut small = grads(&[3.0, 4.0]);
        clip_gradients(&mut small, 25.0).unwrap();
        assert_eq!(small.blocks[0], vec![3.0, 4.0]);
        let mut zero = grads(&[0.0, 0.0]);
        clip_gradients(&mut zero, 1.0).unwrap();
        assert_eq!(zero.blocks[0], vec![0.0, 0.0]);
        assert!(clip_gradients(&mut zero, 0.0).is_err());
    }

    #[test]
    fn step_decay_schedule() {
        let cfg = OptimConfig { decay_factor: 0.5, ..OptimConfig::sgd(1.0, 1, 1, 10, 0) };
        assert_eq!(cfg.learning_rate_at(0), 1.0);
        assert_eq!(cfg.learning_rate_at(9), 1.0);
        assert_eq!(cfg.learning_rate_at(10), 0.5);
        assert_eq!(cfg.learning_rate_at(25), 0.25);
    }

    fn toy_data(samples: usize, noise: f64) -> (crate::graph::LabelGraph, FeatureSet) {
        let g = hierarchy_graph(&[2, 4], 0).unwrap();
        let cfg = SynthConfig { samples, dim: 6, noise, embedding: Embedding::OneHot, seed: 5, ..Default::default() };
        let set = generate_synthetic(&g, &cfg).unwrap();
        (g, set)
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (g, data) = toy_data(20, 0.1);
        let m = Model::init(Variant::Sinn, &g, 6, 1);
        let cfg = OptimConfig { log_every: 1, ..OptimConfig::sgd(0.0, 4, 5, 100, 1) };
        let out = train(m.clone(), &data, &cfg, None).unwrap();
        assert_eq!(out.model.params, m.params);
        assert_eq!(out.trace.len(), 5);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let (g, data) = toy_data(200, 0.0);
        let cfg = OptimConfig { log_every: 50, ..OptimConfig::adam(0.05, 16, 300, 1000, 3) };
        let run = || train(Model::init(Variant::Logistic, &g, 6, 2), &data, &cfg, None).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.model.params, b.model.params);
        assert!(a.trace.last().unwrap().per_term < a.trace[0].per_term);
    }

    #[test]
    fn divergence_reports_iteration() {
        let (g, data) = toy_data(10, 0.0);
        let mut m = Model::init(Variant::Logistic, &g, 6, 2);
        m.params.blocks_mut()[0].data[0] = f64::INFINITY;
        let err = train(m, &data, &OptimConfig::sgd(0.1, 2, 3, 10, 0), None).unwrap_err();
        assert!(matches!(err, Error::Diverged { iteration: 0, .. } | Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = OptimConfig { batch_size: 0, ..OptimConfig::sgd(0.1, 1, 1, 1, 0) };
        assert!(matches!(cfg.validate(), Err(Error::Validation(m)) if m.contains("batch_size")));
        let cfg = OptimConfig { clip: Some(-1.0), ..OptimConfig::sgd(0.1, 1, 1, 1, 0) };
        assert!(matches!(cfg.validate(), Err(Error::Validation(m)) if m.contains("clip")));
    }
}
