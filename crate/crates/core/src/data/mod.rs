//! Feature sets, frame pooling and dataset splits.

mod format;
mod synth;

pub use format::{read_features, read_features_from, write_features, write_features_to, FORMAT_VERSION, MAGIC};
pub use synth::{generate_synthetic, hierarchy_graph, Embedding, SequenceConfig, SynthConfig};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LabelGraph;

/// Position of a sample inside a sequence. Frames are numbered from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameTag {
    pub sequence: u64,
    pub frame: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    /// One binary vector per concept layer, coarse to fine.
    pub targets: Vec<Vec<bool>>,
    pub frame: Option<FrameTag>,
}

impl Sample {
    pub fn targets_f64(&self) -> Vec<Vec<f64>> {
        self.targets.iter().map(|t| t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub layers: Vec<LayerSpec>,
    pub samples: Vec<Sample>,
}

impl FeatureSet {
    pub fn new(dim: usize, layers: Vec<LayerSpec>) -> Self {
        FeatureSet { dim, layers, samples: Vec::new() }
    }

    /// An empty set whose layer table matches the graph.
    pub fn for_graph(dim: usize, graph: &LabelGraph) -> Self {
        Self::new(dim, graph.layers().iter().map(|l| LayerSpec { name: l.name.clone(), size: l.size() }).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.size).collect()
    }

    pub fn is_sequential(&self) -> bool {
        self.samples.first().is_some_and(|s| s.frame.is_some())
    }

    fn check_sample(&self, i: usize, s: &Sample) -> Result<()> {
        if s.features.len() != self.dim {
            return Err(Error::shape(format!("sample {i} has {} features, expected {}", s.features.len(), self.dim)));
        }
        if s.targets.len() != self.layers.len() {
            return Err(Error::shape(format!("sample {i} has {} target layers, expected {}", s.targets.len(), self.layers.len())));
        }
        for (t, l) in s.targets.iter().zip(&self.layers) {
            if t.len() != l.size {
                return Err(Error::shape(format!("sample {i} layer `{}` has {} targets, expected {}", l.name, t.len(), l.size)));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        self.check_sample(self.samples.len(), &sample)?;
        self.samples.push(sample);
        Ok(())
    }

    /// Uniform shapes, and either no frame tags or frame tags on every
    /// sample with each sequence numbered 1, 2, ... in order.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            self.check_sample(i, s)?;
        }
        let tagged = self.samples.iter().filter(|s| s.frame.is_some()).count();
        if tagged != 0 && tagged != self.samples.len() {
            return Err(Error::validation("frame tags must be present on all samples or none"));
        }
        let mut next: BTreeMap<u64, u32> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(tag) = s.frame {
                let want = next.entry(tag.sequence).or_insert(1);
                if tag.frame != *want {
                    return Err(Error::validation(format!(
                        "sample {i}: sequence {} frame {} is out of order (expected {})",
                        tag.sequence, tag.frame, want
                    )));
                }
                *want += 1;
            }
        }
        Ok(())
    }

    /// Layer table must equal the graph's layers.
    pub fn check_graph(&self, graph: &LabelGraph) -> Result<()> {
        let ok = self.layers.len() == graph.num_layers()
            && self.layers.iter().zip(graph.layers()).all(|(a, b)| a.name == b.name && a.size == b.size());
        if !ok {
            let have: Vec<String> = self.layers.iter().map(|l| format!("{}:{}", l.name, l.size)).collect();
            let want: Vec<String> = graph.layers().iter().map(|l| format!("{}:{}", l.name, l.size())).collect();
            return Err(Error::validation(format!("feature layers [{}] do not match graph layers [{}]", have.join(", "), want.join(", "))));
        }
        Ok(())
    }

    /// Sample indices grouped by sequence in order of first appearance,
    /// frames in order. An untagged set yields one group per sample.
    pub fn sequences(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<u64> = Vec::new();
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.samples.iter().enumerate() {
            match s.frame {
                Some(tag) => {
                    let g = groups.entry(tag.sequence).or_insert_with(|| {
                        order.push(tag.sequence);
                        Vec::new()
                    });
                    g.push(i);
                }
                None => {
                    order.push(u64::MAX - i as u64);
                    groups.insert(u64::MAX - i as u64, vec![i]);
                }
            }
        }
        order
            .into_iter()
            .map(|k| {
                let mut g = groups.remove(&k).unwrap_or_default();
                g.sort_by_key(|&i| self.samples[i].frame.map_or(0, |t| t.frame));
                g
            })
            .collect()
    }

    /// Copy with the targets of `layer` appended to every feature vector as
    /// 0/1 values, for baselines that see observations as plain inputs.
    pub fn with_observed_features(&self, layer: usize) -> Result<FeatureSet> {
        if layer >= self.layers.len() {
            return Err(Error::contract(format!("layer {layer} does not exist")));
        }
        let mut out = FeatureSet::new(self.dim + self.layers[layer].size, self.layers.clone());
        out.samples = self
            .samples
            .iter()
            .map(|s| {
                let mut features = s.features.clone();
                features.extend(s.targets[layer].iter().map(|&b| if b { 1.0 } else { 0.0 }));
                Sample { features, ..s.clone() }
            })
            .collect();
        Ok(out)
    }

    /// One sample per sequence: mean-pooled features and the union of the
    /// frame labels.
    pub fn pooled(&self) -> Result<FeatureSet> {
        let mut out = FeatureSet::new(self.dim, self.layers.clone());
        for group in self.sequences() {
            let frames: Vec<&[f64]> = group.iter().map(|&i| self.samples[i].features.as_slice()).collect();
            let first = &self.samples[group[0]];
            let mut targets = first.targets.clone();
            for &i in &group[1..] {
                for (acc, t) in targets.iter_mut().zip(&self.samples[i].targets) {
                    acc.iter_mut().zip(t).for_each(|(a, b)| *a |= *b);
                }
            }
            let id = first.frame.map_or(first.id, |t| t.sequence);
            out.samples.push(Sample { id, features: pool_video(&frames)?, targets, frame: None });
        }
        Ok(out)
    }

    fn subset(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            dim: self.dim,
            layers: self.layers.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Per-dimension mean of the frames.
pub fn pool_video<F: AsRef<[f64]>>(frames: &[F]) -> Result<Vec<f64>> {
    let first = frames.first().ok_or_else(|| Error::contract("pool_video needs at least one frame"))?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for (k, f) in frames.iter().enumerate() {
        let f = f.as_ref();
        if f.len() != d {
            return Err(Error::shape(format!("frame {k} has length {} vs {d}", f.len())));
        }
        sum.iter_mut().zip(f).for_each(|(s, v)| *s += v);
    }
    let n = frames.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Shuffled split into parts with the given ratios. Sequences are never
/// divided between parts. Part sizes come from rounding the cumulative
/// ratios, so 10 samples at 0.6/0.4 give 6 and 4.
pub fn split(set: &FeatureSet, ratios: &[f64], seed: u64) -> Result<Vec<FeatureSet>> {
    if ratios.is_empty() || ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::contract("split ratios must be nonnegative and nonempty"));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!("split ratios sum to {total}, not 1")));
    }
    let mut units = set.sequences();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = units.len();
    let mut parts = Vec::with_capacity(ratios.len());
    let mut start = 0usize;
    let mut cum = 0.0;
    for (k, r) in ratios.iter().enumerate() {
        cum += r;
        let end = if k + 1 == ratios.len() { n } else { ((cum * n as f64).round() as usize).clamp(start, n) };
        let indices: Vec<usize> = units[start..end].iter().flatten().copied().collect();
        parts.push(set.subset(&indices));
        start = end;
    }
    Ok(parts)
}

/// Text manifest with one `part<TAB>sample id` line per sample.
pub fn split_manifest(names: &[&str], parts: &[FeatureSet]) -> String {
    let mut out = String::from("# part\tsample_id\n");
    for (name, part) in names.iter().zip(parts) {
        for s in &part.samples {
            out.push_str(&format!("{name}\t{}\n", s.id));
        }
    }
    out
}
