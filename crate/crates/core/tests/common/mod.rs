//! Direct-formula oracles shared by the integration tests. Nothing here goes
//! through the tape; every quantity is computed with plain loops.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinn_core::graph::{EdgeDoc, GraphDocument, LayerDoc};
use sinn_core::{LabelGraph, Model, Sign, Variant};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_sign(rng: &mut ChaCha8Rng) -> Option<Sign> {
    match rng.random_range(0..3) {
        0 => None,
        1 => Some(Sign::Pos),
        _ => Some(Sign::Neg),
    }
}

/// Up to three layers of up to four labels with random signed edges.
pub fn random_graph(rng: &mut ChaCha8Rng) -> LabelGraph {
    let m = rng.random_range(1..=3);
    let layers: Vec<LayerDoc> = (0..m)
        .map(|l| LayerDoc {
            name: format!("L{l}"),
            labels: (0..rng.random_range(1..=4)).map(|k| format!("k{k}")).collect(),
            single_label: false,
        })
        .collect();
    let path = |l: usize, k: usize| format!("L{l}/k{k}");
    let mut edges = Vec::new();
    for l in 0..m {
        let n = layers[l].labels.len();
        for i in 0..n {
            for j in i..n {
                if let Some(sign) = random_sign(rng) {
                    edges.push(EdgeDoc { from: path(l, i), to: path(l, j), sign });
                }
            }
            if l + 1 < m {
                for j in 0..layers[l + 1].labels.len() {
                    if let Some(sign) = random_sign(rng) {
                        edges.push(EdgeDoc { from: path(l, i), to: path(l + 1, j), sign });
                    }
                }
            }
        }
    }
    LabelGraph::from_document(&GraphDocument { layers, edges }).expect("random graph is valid")
}

/// Initialized model with every entry (biases included) randomly shifted.
pub fn random_model(variant: Variant, graph: &LabelGraph, dim: usize, rng: &mut ChaCha8Rng) -> Model {
    let mut m = Model::init(variant, graph, dim, rng.random());
    for b in m.params.blocks_mut() {
        b.data.iter_mut().for_each(|v| *v += rng.random_range(-1.0..1.0));
    }
    m.params.apply_masks();
    m
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn block<'a>(m: &'a Model, name: &str) -> Option<&'a [f64]> {
    m.params.by_name(name).map(|b| b.data.as_slice())
}

fn get<'a>(m: &'a Model, name: &str) -> &'a [f64] {
    block(m, name).unwrap_or_else(|| panic!("missing block {name}"))
}

fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    a.chunks(cols).map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum()).collect()
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|z| z.max(0.0)).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `x^l = W^l x + b^l`.
pub fn projections(m: &Model, x: &[f64]) -> Vec<Vec<f64>> {
    (0..m.num_layers()).map(|l| add(&matvec(get(m, &format!("L{l}.W")), x), get(m, &format!("L{l}.b")))).collect()
}

/// One directional activation of layer `l` from the previous layer's
/// activation in that direction.
fn direction(m: &Model, l: usize, dir: &str, xl: &[f64], prev: Option<&[f64]>) -> Vec<f64> {
    let p = format!("L{l}");
    let bias = get(m, &format!("{p}.b_{dir}"));
    if m.variant().is_structured() {
        let mut out = bias.to_vec();
        for (tag, s) in [("pos", 1.0), ("neg", -1.0)] {
            let h = relu(matvec(get(m, &format!("{p}.H_{dir}_{tag}")), xl));
            out = out.iter().zip(&h).map(|(o, v)| o + s * v).collect();
            if let Some(prev) = prev {
                let v = relu(matvec(get(m, &format!("{p}.V_{dir}_{tag}")), prev));
                out = out.iter().zip(&v).map(|(o, v)| o + s * v).collect();
            }
        }
        out
    } else {
        let mut out = add(&matvec(get(m, &format!("{p}.H_{dir}")), xl), bias);
        if let Some(prev) = prev {
            out = add(&out, &matvec(get(m, &format!("{p}.V_{dir}")), prev));
        }
        out
    }
}

/// Pre-sigmoid activations `a^l` of logistic, BINN or SINN; for temporal
/// variants, the activations fed into the output head.
pub fn static_logits(m: &Model, x: &[f64]) -> Vec<Vec<f64>> {
    let xl = projections(m, x);
    if !m.variant().passes_messages() {
        return xl;
    }
    let n = xl.len();
    let mut fwd: Vec<Vec<f64>> = Vec::new();
    for l in 0..n {
        let a = direction(m, l, "fwd", &xl[l], l.checked_sub(1).map(|k| fwd[k].as_slice()));
        fwd.push(a);
    }
    let mut bwd: Vec<Vec<f64>> = vec![Vec::new(); n];
    for l in (0..n).rev() {
        let prev = if l + 1 < n { Some(bwd[l + 1].clone()) } else { None };
        bwd[l] = direction(m, l, "bwd", &xl[l], prev.as_deref());
    }
    (0..n)
        .map(|l| {
            let p = format!("L{l}");
            let s = add(&hadamard(get(m, &format!("{p}.U_fwd")), &fwd[l]), &hadamard(get(m, &format!("{p}.U_bwd")), &bwd[l]));
            add(&s, get(m, &format!("{p}.b_agg")))
        })
        .collect()
}

/// Standard LSTM cell: returns `(c, h)`.
pub fn lstm_cell(m: &Model, l: usize, x: &[f64], c: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let gate = |g: &str| {
        let p = format!("L{l}.lstm");
        let z = add(&matvec(get(m, &format!("{p}.Wx_{g}")), x), &matvec(get(m, &format!("{p}.Wh_{g}")), h));
        add(&z, get(m, &format!("{p}.b_{g}")))
    };
    let i: Vec<f64> = gate("i").into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gate("f").into_iter().map(sigmoid).collect();
    let o: Vec<f64> = gate("o").into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gate("c").into_iter().map(f64::tanh).collect();
    let c_new: Vec<f64> = (0..c.len()).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
    let h_new: Vec<f64> = (0..c.len()).map(|k| o[k] * c_new[k].tanh()).collect();
    (c_new, h_new)
}

/// One temporal frame: per-layer scores and the new `(c, h)` states.
pub fn temporal_step(m: &Model, x: &[f64], state: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<(Vec<f64>, Vec<f64>)>) {
    let a = static_logits(m, x);
    let mut y = Vec::new();
    let mut next = Vec::new();
    for l in 0..m.num_layers() {
        let (c, h) = lstm_cell(m, l, x, &state[l].0, &state[l].1);
        let p = format!("L{l}");
        let z = add(&add(&hadamard(get(m, &format!("{p}.M_a")), &a[l]), &hadamard(get(m, &format!("{p}.M_h")), &h)), get(m, &format!("{p}.b_ah")));
        y.push(z.into_iter().map(sigmoid).collect());
        next.push((c, h));
    }
    (y, next)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

// ---- metric oracles ----

/// 1-based rank of item `i` under descending scores, earlier index first on ties.
pub fn rank_of(scores: &[f64], i: usize) -> usize {
    1 + (0..scores.len()).filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i)).count()
}

/// Mean over positives of the precision at that positive's rank.
pub fn brute_ap(scores: &[f64], truth: &[bool]) -> f64 {
    let pos: Vec<usize> = (0..scores.len()).filter(|&i| truth[i]).collect();
    if pos.is_empty() {
        return 0.0;
    }
    pos.iter()
        .map(|&i| {
            let r = rank_of(scores, i);
            pos.iter().filter(|&&j| rank_of(scores, j) <= r).count() as f64 / r as f64
        })
        .sum::<f64>()
        / pos.len() as f64
}

pub fn column<T: Copy>(rows: &[Vec<T>], c: usize) -> Vec<T> {
    rows.iter().map(|r| r[c]).collect()
}

pub fn brute_map_label(s: &[Vec<f64>], t: &[Vec<bool>]) -> f64 {
    let c = s[0].len();
    (0..c).map(|k| brute_ap(&column(s, k), &column(t, k))).sum::<f64>() / c as f64
}

pub fn brute_map_image(s: &[Vec<f64>], t: &[Vec<bool>]) -> f64 {
    s.iter().zip(t).map(|(a, b)| brute_ap(a, b)).sum::<f64>() / s.len() as f64
}

fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    (0..scores.len()).filter(|&i| rank_of(scores, i) <= k).collect()
}

pub fn brute_mc_acc(s: &[Vec<f64>], t: &[Vec<bool>]) -> f64 {
    let c = s[0].len();
    let n = s.len() as f64;
    (0..c)
        .map(|k| s.iter().zip(t).filter(|(row, truth)| rank_of(row, k) == 1 && truth[k]).count() as f64 / n)
        .sum::<f64>()
        / c as f64
}

pub fn brute_iou(s: &[Vec<f64>], t: &[Vec<bool>], thr: f64) -> f64 {
    s.iter()
        .zip(t)
        .map(|(row, truth)| {
            let p: Vec<bool> = row.iter().map(|v| *v >= thr).collect();
            let inter = (0..row.len()).filter(|&k| p[k] && truth[k]).count();
            let union = (0..row.len()).filter(|&k| p[k] || truth[k]).count();
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum::<f64>()
        / s.len() as f64
}

pub fn brute_hit(s: &[Vec<f64>], t: &[Vec<bool>], k: usize) -> f64 {
    s.iter().zip(t).filter(|(row, truth)| top_k(row, k).iter().any(|&c| truth[c])).count() as f64 / s.len() as f64
}

pub fn brute_perr(s: &[Vec<f64>], t: &[Vec<bool>]) -> Option<f64> {
    let vals: Vec<f64> = s
        .iter()
        .zip(t)
        .filter_map(|(row, truth)| {
            let g = truth.iter().filter(|v| **v).count();
            (g > 0).then(|| top_k(row, g).iter().filter(|&&c| truth[c]).count() as f64 / g as f64)
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Pooled top-k AP, with the per-sample top-k lists concatenated in sample
/// order and then ranked.
pub fn brute_gap(s: &[Vec<f64>], t: &[Vec<bool>], k: usize) -> f64 {
    let mut ps = Vec::new();
    let mut pt = Vec::new();
    for (row, truth) in s.iter().zip(t) {
        let mut top = top_k(row, k);
        top.sort_by_key(|&c| rank_of(row, c));
        for c in top {
            ps.push(row[c]);
            pt.push(truth[c]);
        }
    }
    brute_ap(&ps, &pt)
}

/// Threshold-swept AP: for each threshold `τ_j = j/10⁴`, precision and
/// recall of `{i : score ≥ τ_j}`.
pub fn brute_bucketed_ap(scores: &[f64], truth: &[bool]) -> f64 {
    let total = truth.iter().filter(|v| **v).count();
    if total == 0 {
        return 0.0;
    }
    let pr = |j: usize| {
        let tau = j as f64 / 1e4;
        let ret: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= tau).collect();
        let tp = ret.iter().filter(|&&i| truth[i]).count() as f64;
        let p = if ret.is_empty() { 0.0 } else { tp / ret.len() as f64 };
        (p, tp / total as f64)
    };
    let mut ap = 0.0;
    for j in 1..=10_000 {
        let (p, r) = pr(j);
        let r_next = if j == 10_000 { 0.0 } else { pr(j + 1).1 };
        ap += p * (r - r_next);
    }
    ap
}
