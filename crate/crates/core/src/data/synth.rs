//! Synthetic hierarchical data.
//!
//! Coarse labels are independent coin flips. A finer label is switched on
//! with probability `pos_strength` when any positively linked parent is on
//! (`base_rate` otherwise), and that probability is multiplied by
//! `1 - neg_strength` when any negatively linked parent is on. Labels of one
//! layer are drawn in order, and a negative intra-layer edge to an earlier
//! label that is already on applies the same `1 - neg_strength` factor, so
//! such pairs rarely co-occur. Features are a fixed linear embedding of the
//! whole label vector plus Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FeatureSet, FrameTag, Sample};
use crate::error::{Error, Result};
use crate::graph::{EdgeDoc, GraphDocument, LabelGraph, LayerDoc, Sign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Embedding {
    /// Gaussian entries scaled by `1/sqrt(dim)`, drawn from the seed.
    #[default]
    Random,
    /// Label `k` of the flattened label vector drives feature `k`.
    OneHot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    /// Frames per sequence.
    pub length: usize,
    /// Chance that a label keeps its previous value when its parents did not
    /// change.
    pub stickiness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of samples, or of sequences in sequence mode.
    pub samples: usize,
    pub dim: usize,
    pub top_rate: f64,
    pub base_rate: f64,
    pub pos_strength: f64,
    pub neg_strength: f64,
    pub noise: f64,
    /// Per-layer embedding scale; empty means 1 for every layer.
    #[serde(default)]
    pub layer_signal: Vec<f64>,
    #[serde(default)]
    pub embedding: Embedding,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            samples: 1000,
            dim: 32,
            top_rate: 0.5,
            base_rate: 0.05,
            pos_strength: 0.85,
            neg_strength: 0.85,
            noise: 0.5,
            layer_signal: Vec::new(),
            embedding: Embedding::Random,
            sequence: None,
            seed: 0,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::validation(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self, graph: &LabelGraph) -> Result<()> {
        check_prob("top_rate", self.top_rate)?;
        check_prob("base_rate", self.base_rate)?;
        check_prob("pos_strength", self.pos_strength)?;
        check_prob("neg_strength", self.neg_strength)?;
        if self.dim == 0 {
            return Err(Error::validation("dim must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::validation(format!("noise must be finite and nonnegative, got {}", self.noise)));
        }
        if !self.layer_signal.is_empty() && self.layer_signal.len() != graph.num_layers() {
            return Err(Error::validation(format!(
                "layer_signal has {} entries for {} layers",
                self.layer_signal.len(),
                graph.num_layers()
            )));
        }
        if self.layer_signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::validation("layer_signal entries must be finite"));
        }
        let total: usize = graph.sizes().iter().sum();
        if self.embedding == Embedding::OneHot && self.dim < total {
            return Err(Error::validation(format!("one-hot embedding needs dim >= {total}, got {}", self.dim)));
        }
        if let Some(seq) = &self.sequence {
            if seq.length == 0 {
                return Err(Error::validation("sequence.length must be at least 1"));
            }
            check_prob("sequence.stickiness", seq.stickiness)?;
        }
        Ok(())
    }
}

/// Parent lists of one layer: for each label, its positive and negative
/// parents in the layer above.
struct Parents {
    pos: Vec<Vec<usize>>,
    neg: Vec<Vec<usize>>,
}

/// For each layer and label, the earlier labels of the same layer joined to it
/// by a negative edge.
fn rivals(graph: &LabelGraph) -> Result<Vec<Vec<Vec<usize>>>> {
    (0..graph.num_layers())
        .map(|l| {
            let m = graph.mask(l, l, Sign::Neg)?;
            Ok((0..m.rows).map(|k| (0..k).filter(|&j| m.get(k, j) != 0.0).collect()).collect())
        })
        .collect()
}

fn parents(graph: &LabelGraph) -> Result<Vec<Parents>> {
    let mut out = Vec::new();
    for l in 1..graph.num_layers() {
        let pick = |sign| -> Result<Vec<Vec<usize>>> {
            let m = graph.mask(l - 1, l, sign)?;
            Ok((0..m.rows).map(|c| (0..m.cols).filter(|&p| m.get(c, p) != 0.0).collect()).collect())
        };
        out.push(Parents { pos: pick(Sign::Pos)?, neg: pick(Sign::Neg)? });
    }
    Ok(out)
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    sizes: Vec<usize>,
    parents: Vec<Parents>,
    rivals: Vec<Vec<Vec<usize>>>,
    /// Column-major `dim x total` embedding.
    columns: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    /// Chance that label `k` of layer `l` is on, given the layer above and
    /// the labels of this layer drawn so far.
    fn prob(&self, l: usize, k: usize, above: Option<&Vec<bool>>, row: &[bool]) -> f64 {
        let mut prob = match above {
            None => self.cfg.top_rate,
            Some(above) => {
                let p = &self.parents[l - 1];
                let mut prob = if p.pos[k].iter().any(|&j| above[j]) { self.cfg.pos_strength } else { self.cfg.base_rate };
                if p.neg[k].iter().any(|&j| above[j]) {
                    prob *= 1.0 - self.cfg.neg_strength;
                }
                prob
            }
        };
        if self.rivals[l][k].iter().any(|&j| row[j]) {
            prob *= 1.0 - self.cfg.neg_strength;
        }
        prob
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    fn fresh_labels(&mut self) -> Vec<Vec<bool>> {
        let mut labels: Vec<Vec<bool>> = Vec::with_capacity(self.sizes.len());
        for l in 0..self.sizes.len() {
            let mut row = Vec::with_capacity(self.sizes[l]);
            for k in 0..self.sizes[l] {
                let p = self.prob(l, k, l.checked_sub(1).map(|a| &labels[a]), &row);
                let v = self.bernoulli(p);
                row.push(v);
            }
            labels.push(row);
        }
        labels
    }

    fn next_labels(&mut self, prev: &[Vec<bool>], stickiness: f64) -> Vec<Vec<bool>> {
        let mut labels: Vec<Vec<bool>> = Vec::with_capacity(self.sizes.len());
        for l in 0..self.sizes.len() {
            let mut row = Vec::with_capacity(self.sizes[l]);
            for k in 0..self.sizes[l] {
                let parents_same = l == 0 || {
                    let p = &self.parents[l - 1];
                    p.pos[k].iter().chain(&p.neg[k]).all(|&j| labels[l - 1][j] == prev[l - 1][j])
                };
                let keep = parents_same && self.bernoulli(stickiness);
                let v = if keep {
                    prev[l][k]
                } else {
                    let p = self.prob(l, k, l.checked_sub(1).map(|a| &labels[a]), &row);
                    self.bernoulli(p)
                };
                row.push(v);
            }
            labels.push(row);
        }
        labels
    }

    fn features(&mut self, labels: &[Vec<bool>]) -> Vec<f64> {
        let mut x = vec![0.0; self.cfg.dim];
        for (k, _) in labels.iter().flatten().enumerate().filter(|(_, on)| **on) {
            x.iter_mut().zip(&self.columns[k]).for_each(|(a, e)| *a += e);
        }
        if self.cfg.noise > 0.0 {
            for v in &mut x {
                let z: f64 = self.rng.sample(StandardNormal);
                *v += self.cfg.noise * z;
            }
        }
        x
    }
}

/// Draws a feature set from the graph's signed hierarchy. Identical configs
/// give identical sets.
pub fn generate_synthetic(graph: &LabelGraph, cfg: &SynthConfig) -> Result<FeatureSet> {
    cfg.validate(graph)?;
    let sizes = graph.sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut columns = Vec::new();
    for (l, &n) in sizes.iter().enumerate() {
        let scale = cfg.layer_signal.get(l).copied().unwrap_or(1.0);
        for _ in 0..n {
            let col: Vec<f64> = match cfg.embedding {
                Embedding::Random => {
                    let s = scale / (cfg.dim as f64).sqrt();
                    (0..cfg.dim).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
                }
                Embedding::OneHot => {
                    let mut c = vec![0.0; cfg.dim];
                    c[columns.len()] = scale;
                    c
                }
            };
            columns.push(col);
        }
    }
    let mut g = Generator { cfg, sizes, parents: parents(graph)?, rivals: rivals(graph)?, columns, rng };
    let mut set = FeatureSet::for_graph(cfg.dim, graph);
    let mut id = 0u64;
    match &cfg.sequence {
        None => {
            for _ in 0..cfg.samples {
                let targets = g.fresh_labels();
                let features = g.features(&targets);
                set.samples.push(Sample { id, features, targets, frame: None });
                id += 1;
            }
        }
        Some(seq) => {
            for s in 0..cfg.samples {
                let mut targets = g.fresh_labels();
                for t in 0..seq.length {
                    if t > 0 {
                        targets = g.next_labels(&targets, seq.stickiness);
                    }
                    let features = g.features(&targets);
                    let frame = Some(FrameTag { sequence: s as u64, frame: t as u32 + 1 });
                    set.samples.push(Sample { id, features, targets: targets.clone(), frame });
                    id += 1;
                }
            }
        }
    }
    Ok(set)
}

/// A layered tree: label `j` of layer `l+1` has positive parent
/// `j * n_l / n_{l+1}` and, when the layer above has more than one label, a
/// negative link to one other parent chosen from the seed. Labels below the
/// top that share a positive parent are joined by negative edges, and every
/// label gets a positive self-loop. Layers are named `layer1`, `layer2`, ...
pub fn hierarchy_graph(sizes: &[usize], seed: u64) -> Result<LabelGraph> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::validation("hierarchy needs at least one layer and no empty layers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |l: usize| format!("layer{}", l + 1);
    let label = |l: usize, k: usize| format!("{}/c{k}", name(l));
    let layers = sizes
        .iter()
        .enumerate()
        .map(|(l, &n)| LayerDoc { name: name(l), labels: (0..n).map(|k| format!("c{k}")).collect(), single_label: false })
        .collect();
    let mut edges = Vec::new();
    for (l, &n) in sizes.iter().enumerate() {
        for k in 0..n {
            edges.push(EdgeDoc { from: label(l, k), to: label(l, k), sign: Sign::Pos });
        }
    }
    for l in 1..sizes.len() {
        let (above, here) = (sizes[l - 1], sizes[l]);
        for j in 0..here {
            let p = j * above / here;
            edges.push(EdgeDoc { from: label(l - 1, p), to: label(l, j), sign: Sign::Pos });
            for i in (0..j).filter(|i| i * above / here == p) {
                edges.push(EdgeDoc { from: label(l, i), to: label(l, j), sign: Sign::Neg });
            }
            if above > 1 {
                let q = (p + 1 + rng.random_range(0..above - 1)) % above;
                edges.push(EdgeDoc { from: label(l - 1, q), to: label(l, j), sign: Sign::Neg });
            }
        }
    }
    LabelGraph::from_document(&GraphDocument { layers, edges })
}
