//! Standard synthetic benchmarks and seeded toy problems.
//!
//! The static benchmark is a 4/8/16 label tree whose labels are embedded in
//! only six feature dimensions, so single labels cannot be read off the
//! features one at a time and the label hierarchy carries real information.
//! The sequence benchmark uses the same tree with sticky label dynamics and
//! noisier frames.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{generate_synthetic, hierarchy_graph, split, FeatureSet, SequenceConfig, SynthConfig};
use crate::error::Result;
use crate::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::graph::LabelGraph;
use crate::model::{Example, Model, Variant};
use crate::trainer::OptimConfig;

pub const LAYER_SIZES: [usize; 3] = [4, 8, 16];
pub const STATIC_TRAIN: usize = 5000;
pub const STATIC_TEST: usize = 2000;
pub const SEQUENCE_LENGTH: usize = 32;
pub const SEQUENCE_COUNT: usize = 400;

pub fn standard_graph() -> LabelGraph {
    hierarchy_graph(&LAYER_SIZES, 0).expect("valid sizes")
}

pub fn static_config(seed: u64) -> SynthConfig {
    SynthConfig {
        samples: STATIC_TRAIN + STATIC_TEST,
        dim: 6,
        top_rate: 0.3,
        base_rate: 0.05,
        pos_strength: 0.85,
        neg_strength: 0.85,
        noise: 0.1,
        seed,
        ..SynthConfig::default()
    }
}

pub fn sequence_config(seed: u64) -> SynthConfig {
    SynthConfig {
        samples: SEQUENCE_COUNT,
        noise: 0.5,
        sequence: Some(SequenceConfig { length: SEQUENCE_LENGTH, stickiness: 0.95 }),
        ..static_config(seed)
    }
}

/// Generates the static benchmark and splits it 5,000 / 2,000.
pub fn static_benchmark(seed: u64) -> Result<(LabelGraph, FeatureSet, FeatureSet)> {
    let g = standard_graph();
    let all = generate_synthetic(&g, &static_config(seed))?;
    let n = (STATIC_TRAIN + STATIC_TEST) as f64;
    let mut parts = split(&all, &[STATIC_TRAIN as f64 / n, STATIC_TEST as f64 / n], seed.wrapping_add(1))?;
    let test = parts.pop().expect("two parts");
    let train = parts.pop().expect("two parts");
    Ok((g, train, test))
}

/// Generates the sequence benchmark and splits it 75 / 25 by sequence.
pub fn sequence_benchmark(seed: u64) -> Result<(LabelGraph, FeatureSet, FeatureSet)> {
    let g = standard_graph();
    let all = generate_synthetic(&g, &sequence_config(seed))?;
    let mut parts = split(&all, &[0.75, 0.25], seed.wrapping_add(1))?;
    let test = parts.pop().expect("two parts");
    let train = parts.pop().expect("two parts");
    Ok((g, train, test))
}

pub fn static_optim(seed: u64) -> OptimConfig {
    OptimConfig { log_every: 500, ..OptimConfig::adam(0.01, 32, 4000, 2000, seed) }
}

/// Temporal models take batches of eight 32-frame windows; the static
/// baseline sees the same number of frames per step.
pub fn sequence_optim(variant: Variant, seed: u64) -> OptimConfig {
    let batch = if variant.is_temporal() { 8 } else { 8 * SEQUENCE_LENGTH };
    OptimConfig { log_every: 250, ..OptimConfig::adam(0.01, batch, 1500, 750, seed) }
}

/// Toy graph for gradient checks: three layers of 2, 3 and 4 labels.
pub fn toy_graph() -> LabelGraph {
    hierarchy_graph(&[2, 3, 4], 1).expect("valid sizes")
}

pub const TOY_INPUT_DIM: usize = 3;

/// Central-difference check of `variant` on the toy graph with random
/// parameters, inputs and targets. Temporal variants unroll `frames` frames.
pub fn variant_grad_check(variant: Variant, seed: u64, frames: usize, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let g = toy_graph();
    let mut model = Model::init(variant, &g, TOY_INPUT_DIM, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    for b in model.params.blocks_mut() {
        b.data.iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
    }
    model.params.apply_masks();
    let t = if variant.is_temporal() { frames.max(1) } else { 1 };
    let xs: Vec<Vec<f64>> = (0..t).map(|_| (0..TOY_INPUT_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<Vec<Vec<f64>>> = (0..t)
        .map(|_| g.sizes().iter().map(|&n| (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect()).collect())
        .collect();
    let frames_ref: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let targets_ref: Vec<&[Vec<f64>]> = ys.iter().map(Vec::as_slice).collect();
    let probe = model.clone();
    grad_check(
        &model.params,
        |params, tape| {
            let mut m = probe.clone();
            m.params = params.clone();
            let ex = if variant.is_temporal() {
                Example::Sequence { frames: &frames_ref, targets: &targets_ref }
            } else {
                Example::Static { x: &xs[0], targets: &ys[0] }
            };
            m.record_loss(tape, ex, None)
        },
        opts,
    )
}
