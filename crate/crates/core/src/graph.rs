//! Layered label space with signed relation masks.
//!
//! Layers are ordered coarse to fine. Edges are undirected and signed; an
//! inter-layer edge may only join adjacent layers, and an intra-layer edge
//! (including a self-loop) joins two labels of the same layer.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub name: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub single_label: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub sign: Sign,
}

/// On-disk graph document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub layers: Vec<LayerDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConceptLayer {
    pub name: String,
    pub labels: Vec<String>,
    pub single_label: bool,
}

impl ConceptLayer {
    pub fn size(&self) -> usize {
        self.labels.len()
    }
}

/// Endpoint of an edge: (layer index, label index).
type Node = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct LabelGraph {
    layers: Vec<ConceptLayer>,
    /// `inter[l][s]`: mask of shape `n_{l+1} x n_l`, entry `(child, parent)`.
    inter: Vec<[Matrix; 2]>,
    /// `intra[l][s]`: symmetric `n_l x n_l` mask.
    intra: Vec<[Matrix; 2]>,
}

fn sign_index(s: Sign) -> usize {
    match s {
        Sign::Pos => 0,
        Sign::Neg => 1,
    }
}

fn resolve(index: &HashMap<(&str, &str), Node>, path: &str) -> Option<Node> {
    let (layer, label) = path.split_once('/')?;
    index.get(&(layer, label)).copied()
}

impl GraphDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph document serializes")
    }

    /// Every invariant violation, with the offending location.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut v = |location: String, message: String| out.push(Violation { location, message });
        if self.layers.is_empty() {
            v("layers".into(), "graph has no layers".into());
        }
        let mut layer_names = HashSet::new();
        let mut index = HashMap::new();
        for (li, layer) in self.layers.iter().enumerate() {
            if !layer_names.insert(layer.name.as_str()) {
                v(format!("layers[{li}]"), format!("duplicate layer name `{}`", layer.name));
            }
            if layer.name.contains('/') {
                v(format!("layers[{li}]"), format!("layer name `{}` contains `/`", layer.name));
            }
            if layer.labels.is_empty() {
                v(format!("layers[{li}]"), format!("layer `{}` has no labels", layer.name));
            }
            let mut seen = HashSet::new();
            for (ki, label) in layer.labels.iter().enumerate() {
                if !seen.insert(label.as_str()) {
                    v(format!("layers[{li}].labels[{ki}]"), format!("duplicate label `{label}` in layer `{}`", layer.name));
                }
                index.entry((layer.name.as_str(), label.as_str())).or_insert((li, ki));
            }
        }

        let mut signs: HashMap<(Node, Node), (Sign, usize)> = HashMap::new();
        for (ei, e) in self.edges.iter().enumerate() {
            let loc = format!("edges[{ei}]");
            let (Some(a), Some(b)) = (resolve(&index, &e.from), resolve(&index, &e.to)) else {
                for end in [&e.from, &e.to] {
                    if resolve(&index, end).is_none() {
                        v(loc.clone(), format!("unknown label `{end}`"));
                    }
                }
                continue;
            };
            if a.0.abs_diff(b.0) > 1 {
                v(loc, format!("`{}` and `{}` are not in adjacent layers", e.from, e.to));
                continue;
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            match signs.get(&key) {
                Some((s, first)) if *s != e.sign => {
                    v(loc, format!("`{}`-`{}` is both positive and negative (see edges[{first}])", e.from, e.to));
                }
                Some(_) => {}
                None => {
                    signs.insert(key, (e.sign, ei));
                }
            }
        }
        out
    }
}

impl LabelGraph {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&GraphDocument::from_json(text)?)
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let violations = doc.violations();
        if !violations.is_empty() {
            let msg = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(Error::validation(msg));
        }
        let layers: Vec<ConceptLayer> = doc
            .layers
            .iter()
            .map(|l| ConceptLayer { name: l.name.clone(), labels: l.labels.clone(), single_label: l.single_label })
            .collect();
        let sizes: Vec<usize> = layers.iter().map(ConceptLayer::size).collect();
        let mut inter: Vec<[Matrix; 2]> =
            sizes.windows(2).map(|w| [Matrix::zeros(w[1], w[0]), Matrix::zeros(w[1], w[0])]).collect();
        let mut intra: Vec<[Matrix; 2]> = sizes.iter().map(|&n| [Matrix::zeros(n, n), Matrix::zeros(n, n)]).collect();

        let mut index = HashMap::new();
        for (li, l) in doc.layers.iter().enumerate() {
            for (ki, label) in l.labels.iter().enumerate() {
                index.insert((l.name.as_str(), label.as_str()), (li, ki));
            }
        }
        for e in &doc.edges {
            let a = resolve(&index, &e.from).expect("validated");
            let b = resolve(&index, &e.to).expect("validated");
            let (hi, lo) = if a.0 <= b.0 { (a, b) } else { (b, a) };
            let s = sign_index(e.sign);
            if hi.0 == lo.0 {
                let m = &mut intra[hi.0][s];
                m.set(hi.1, lo.1, 1.0);
                m.set(lo.1, hi.1, 1.0);
            } else {
                inter[hi.0][s].set(lo.1, hi.1, 1.0);
            }
        }
        Ok(LabelGraph { layers, inter, intra })
    }

    pub fn layers(&self) -> &[ConceptLayer] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(ConceptLayer::size).collect()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Mask of shape `n_to x n_from` for messages from `from` to `to`.
    /// `from == to` gives the intra-layer mask.
    pub fn mask(&self, from: usize, to: usize, sign: Sign) -> Result<Matrix> {
        let m = self.num_layers();
        if from >= m || to >= m {
            return Err(Error::contract(format!("layer index out of range: {from} -> {to} with {m} layers")));
        }
        let s = sign_index(sign);
        if from == to {
            Ok(self.intra[from][s].clone())
        } else if to == from + 1 {
            Ok(self.inter[from][s].clone())
        } else if from == to + 1 {
            Ok(transpose(&self.inter[to][s]))
        } else {
            Err(Error::contract(format!("layers {from} and {to} are not adjacent")))
        }
    }

    /// Checks the structural invariants of an already-built graph.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = self.to_document().violations();
        let mut check = |loc: String, pos: &Matrix, neg: &Matrix| {
            for (k, (p, n)) in pos.data.iter().zip(&neg.data).enumerate() {
                if (*p != 0.0 && *p != 1.0) || (*n != 0.0 && *n != 1.0) {
                    out.push(Violation { location: format!("{loc}[{k}]"), message: "mask entry is not 0/1".into() });
                }
                if *p == 1.0 && *n == 1.0 {
                    out.push(Violation { location: format!("{loc}[{k}]"), message: "entry is both positive and negative".into() });
                }
            }
        };
        for (l, [p, n]) in self.inter.iter().enumerate() {
            check(format!("inter[{l}]"), p, n);
        }
        for (l, [p, n]) in self.intra.iter().enumerate() {
            check(format!("intra[{l}]"), p, n);
        }
        out
    }

    /// Canonical document: layers in order, then inter edges by layer pair,
    /// then intra edges with the lower label index first.
    pub fn to_document(&self) -> GraphDocument {
        let path = |l: usize, k: usize| format!("{}/{}", self.layers[l].name, self.layers[l].labels[k]);
        let mut edges = Vec::new();
        for (l, masks) in self.inter.iter().enumerate() {
            for (s, sign) in [Sign::Pos, Sign::Neg].into_iter().enumerate() {
                let m = &masks[s];
                for parent in 0..m.cols {
                    for child in 0..m.rows {
                        if m.get(child, parent) == 1.0 {
                            edges.push(EdgeDoc { from: path(l, parent), to: path(l + 1, child), sign });
                        }
                    }
                }
            }
        }
        for (l, masks) in self.intra.iter().enumerate() {
            for (s, sign) in [Sign::Pos, Sign::Neg].into_iter().enumerate() {
                let m = &masks[s];
                for i in 0..m.rows {
                    for j in i..m.cols {
                        if m.get(i, j) == 1.0 {
                            edges.push(EdgeDoc { from: path(l, i), to: path(l, j), sign });
                        }
                    }
                }
            }
        }
        GraphDocument {
            layers: self
                .layers
                .iter()
                .map(|l| LayerDoc { name: l.name.clone(), labels: l.labels.clone(), single_label: l.single_label })
                .collect(),
            edges,
        }
    }

    /// SHA-256 of the canonical document, hex encoded.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(&self.to_document()).expect("graph document serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Set of (from, to, sign) triples, order independent.
    pub fn edge_set(&self) -> BTreeSet<(String, String, Sign)> {
        self.to_document().edges.into_iter().map(|e| (e.from, e.to, e.sign)).collect()
    }
}

pub(crate) fn transpose(m: &Matrix) -> Matrix {
    let mut t = Matrix::zeros(m.cols, m.rows);
    for r in 0..m.rows {
        for c in 0..m.cols {
            t.set(c, r, m.get(r, c));
        }
    }
    t
}
