//! Multi-label evaluation metrics.
//!
//! Rankings are score-descending with ties kept in input order (a stable
//! sort), so every metric is reproducible bit for bit. Classes or samples
//! without positives score an AP of 0 and are counted in the report flags
//! rather than skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores and binary truths, `N` samples by `C` classes.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionBatch {
    scores: Vec<Vec<f64>>,
    truths: Vec<Vec<bool>>,
    classes: usize,
}

impl PredictionBatch {
    pub fn new(scores: Vec<Vec<f64>>, truths: Vec<Vec<bool>>) -> Result<Self> {
        if scores.len() != truths.len() {
            return Err(Error::shape(format!("{} score rows vs {} truth rows", scores.len(), truths.len())));
        }
        let classes = scores.first().map_or(0, Vec::len);
        for (i, (s, t)) in scores.iter().zip(&truths).enumerate() {
            if s.len() != classes || t.len() != classes {
                return Err(Error::shape(format!("row {i} does not have {classes} classes")));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("row {i} has a non-finite score")));
            }
        }
        Ok(PredictionBatch { scores, truths, classes })
    }

    pub fn samples(&self) -> usize {
        self.scores.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn truths(&self) -> &[Vec<bool>] {
        &self.truths
    }

    fn require_nonempty(&self, metric: &str) -> Result<()> {
        if self.samples() == 0 || self.classes == 0 {
            return Err(Error::contract(format!("{metric} needs a nonempty batch")));
        }
        Ok(())
    }

    fn column(&self, c: usize) -> (Vec<f64>, Vec<bool>) {
        (self.scores.iter().map(|r| r[c]).collect(), self.truths.iter().map(|r| r[c]).collect())
    }
}

/// Indices sorted by descending score; equal scores keep input order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApResult {
    pub ap: f64,
    /// Set when there was nothing relevant to retrieve; `ap` is then 0.
    pub no_positives: bool,
}

/// Sum of precision times recall increment down the ranking.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> ApResult {
    let total = relevant.iter().filter(|r| **r).count();
    if total == 0 {
        return ApResult { ap: 0.0, no_positives: true };
    }
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank, &i) in ranking(scores).iter().enumerate() {
        if relevant[i] {
            hits += 1;
            ap += (hits as f64 / (rank + 1) as f64) / total as f64;
        }
    }
    ApResult { ap, no_positives: false }
}

/// A mean of per-item APs with the per-item values kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanAp {
    pub mean: f64,
    pub per_item: Vec<f64>,
    /// Items that contributed 0 because AP was undefined for them.
    pub flagged: usize,
}

fn mean_of(results: impl IntoIterator<Item = ApResult>) -> MeanAp {
    let results: Vec<ApResult> = results.into_iter().collect();
    let per_item: Vec<f64> = results.iter().map(|r| r.ap).collect();
    let mean = if per_item.is_empty() { 0.0 } else { per_item.iter().sum::<f64>() / per_item.len() as f64 };
    MeanAp { mean, per_item, flagged: results.iter().filter(|r| r.no_positives).count() }
}

/// Per-label mAP: AP of each class over all samples, averaged.
pub fn map_label(batch: &PredictionBatch) -> Result<MeanAp> {
    batch.require_nonempty("map_label")?;
    Ok(mean_of((0..batch.classes).map(|c| {
        let (s, t) = batch.column(c);
        average_precision(&s, &t)
    })))
}

/// Per-sample mAP: AP of each sample's class ranking, averaged.
pub fn map_image(batch: &PredictionBatch) -> Result<MeanAp> {
    batch.require_nonempty("map_image")?;
    Ok(mean_of(batch.scores.iter().zip(&batch.truths).map(|(s, t)| average_precision(s, t))))
}

/// Mean over classes of `TP_c / N` with the predicted class taken as the
/// argmax of each row (first maximum on ties).
pub fn mc_acc(batch: &PredictionBatch) -> Result<f64> {
    batch.require_nonempty("mc_acc")?;
    let n = batch.samples() as f64;
    let mut tp = vec![0usize; batch.classes];
    for (s, t) in batch.scores.iter().zip(&batch.truths) {
        let pred = ranking(s)[0];
        if t[pred] {
            tp[pred] += 1;
        }
    }
    Ok(tp.iter().map(|&k| k as f64 / n).sum::<f64>() / batch.classes as f64)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::contract(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    Ok(())
}

/// Mean Jaccard index between `{c : score >= threshold}` and the truth set.
/// A sample where both sets are empty scores 1.
pub fn iou_acc(batch: &PredictionBatch, threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    batch.require_nonempty("iou_acc")?;
    let total: f64 = batch
        .scores
        .iter()
        .zip(&batch.truths)
        .map(|(s, t)| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&v, &g) in s.iter().zip(t) {
                let p = v >= threshold;
                inter += (p && g) as usize;
                union += (p || g) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / batch.samples() as f64)
}

/// Mean fraction of labels where the thresholded prediction equals the truth.
pub fn hamming_acc(batch: &PredictionBatch, threshold: f64) -> Result<f64> {
    check_threshold(threshold)?;
    batch.require_nonempty("hamming_acc")?;
    let c = batch.classes as f64;
    let total: f64 = batch
        .scores
        .iter()
        .zip(&batch.truths)
        .map(|(s, t)| s.iter().zip(t).filter(|(v, g)| (**v >= threshold) == **g).count() as f64 / c)
        .sum();
    Ok(total / batch.samples() as f64)
}

/// Fraction of samples with at least one true label among their top `k`.
pub fn hit_at_k(batch: &PredictionBatch, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::contract("hit@k needs k >= 1"));
    }
    batch.require_nonempty("hit_at_k")?;
    let hits = batch
        .scores
        .iter()
        .zip(&batch.truths)
        .filter(|(s, t)| ranking(s).iter().take(k).any(|&c| t[c]))
        .count();
    Ok(hits as f64 / batch.samples() as f64)
}

/// Precision at equal recall rate: over samples with at least one positive,
/// the fraction of the top-|G| predictions that are true.
pub fn perr(batch: &PredictionBatch) -> Result<f64> {
    batch.require_nonempty("perr")?;
    let mut sum = 0.0;
    let mut counted = 0usize;
    for (s, t) in batch.scores.iter().zip(&batch.truths) {
        let g = t.iter().filter(|v| **v).count();
        if g == 0 {
            continue;
        }
        let hits = ranking(s).iter().take(g).filter(|&&c| t[c]).count();
        sum += hits as f64 / g as f64;
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::contract("perr needs at least one sample with a positive label"));
    }
    Ok(sum / counted as f64)
}

/// Global AP over the pooled top-`k` predictions of every sample, with
/// recall normalized by the number of positives in the pool.
pub fn gap(batch: &PredictionBatch, k: usize) -> Result<ApResult> {
    if k == 0 {
        return Err(Error::contract("gap needs k >= 1"));
    }
    batch.require_nonempty("gap")?;
    let mut pooled_scores = Vec::new();
    let mut pooled_truth = Vec::new();
    for (s, t) in batch.scores.iter().zip(&batch.truths) {
        for &c in ranking(s).iter().take(k) {
            pooled_scores.push(s[c]);
            pooled_truth.push(t[c]);
        }
    }
    Ok(average_precision(&pooled_scores, &pooled_truth))
}

pub const VIDEO_BUCKETS: usize = 10_000;

/// Number of thresholds `τ_j = j / 10^4`, `j >= 1`, with `τ_j <= score`.
fn thresholds_passed(score: f64) -> usize {
    let b = VIDEO_BUCKETS as f64;
    let mut j = (score * b).floor().clamp(0.0, b) as usize;
    while j < VIDEO_BUCKETS && ((j + 1) as f64) / b <= score {
        j += 1;
    }
    while j > 0 && (j as f64) / b > score {
        j -= 1;
    }
    j
}

/// Thresholded AP for one class, with thresholds on a `10^-4` grid.
pub fn bucketed_average_precision(scores: &[f64], relevant: &[bool]) -> ApResult {
    let total = relevant.iter().filter(|r| **r).count();
    if total == 0 {
        return ApResult { ap: 0.0, no_positives: true };
    }
    // counts[j]: items first dropped when the threshold passes τ_j, i.e.
    // retrieved at τ_1..τ_j but not τ_{j+1}.
    let mut all = vec![0usize; VIDEO_BUCKETS + 1];
    let mut pos = vec![0usize; VIDEO_BUCKETS + 1];
    for (&s, &r) in scores.iter().zip(relevant) {
        let j = thresholds_passed(s);
        all[j] += 1;
        pos[j] += r as usize;
    }
    let mut retrieved = 0usize;
    let mut true_pos = 0usize;
    let mut ap = 0.0;
    let mut recall_next = 0.0;
    for j in (1..=VIDEO_BUCKETS).rev() {
        retrieved += all[j];
        true_pos += pos[j];
        let recall = true_pos as f64 / total as f64;
        if retrieved > 0 {
            let precision = true_pos as f64 / retrieved as f64;
            ap += precision * (recall - recall_next);
        }
        recall_next = recall;
    }
    // every positive below the first threshold means nothing was retrieved
    ApResult { ap, no_positives: true_pos == 0 }
}

/// Per-class bucketed AP averaged over classes.
pub fn map_video(batch: &PredictionBatch) -> Result<MeanAp> {
    batch.require_nonempty("map_video")?;
    Ok(mean_of((0..batch.classes).map(|c| {
        let (s, t) = batch.column(c);
        bucketed_average_precision(&s, &t)
    })))
}

/// Mean per-sample precision and recall of the top `k` classes.
pub fn precision_recall_at_k(batch: &PredictionBatch, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::contract("precision@k needs k >= 1"));
    }
    batch.require_nonempty("precision_recall_at_k")?;
    let (mut p, mut r) = (0.0, 0.0);
    let mut with_pos = 0usize;
    for (s, t) in batch.scores.iter().zip(&batch.truths) {
        let kk = k.min(batch.classes);
        let hits = ranking(s).iter().take(kk).filter(|&&c| t[c]).count() as f64;
        p += hits / kk as f64;
        let g = t.iter().filter(|v| **v).count();
        if g > 0 {
            r += hits / g as f64;
            with_pos += 1;
        }
    }
    let n = batch.samples() as f64;
    Ok((p / n, if with_pos == 0 { 0.0 } else { r / with_pos as f64 }))
}

/// Which metric family to compute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSet {
    #[default]
    All,
    Image,
    Video,
}

impl std::str::FromStr for MetricSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(MetricSet::All),
            "image" => Ok(MetricSet::Image),
            "video" => Ok(MetricSet::Video),
            _ => Err(Error::validation(format!("unknown metric set `{s}` (all|image|video)"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    pub zero_positive_classes: usize,
    pub zero_positive_samples: usize,
    pub map_video_flagged_classes: usize,
    pub gap_no_positives: bool,
}

/// Metric values of one concept layer. Metrics outside the selected set are
/// omitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: String,
    pub samples: usize,
    pub classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_label: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_image: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamming_acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision_at_3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall_at_3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hit_at_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_at_20: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_video: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_class_ap: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_class_ap_video: Vec<f64>,
    pub flags: ReportFlags,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const GAP_TOP_K: usize = 20;

/// Computes the selected metrics for one layer. `single_label` enables the
/// argmax-based multiclass accuracy.
pub fn evaluate_layer(name: &str, batch: &PredictionBatch, single_label: bool, set: MetricSet) -> Result<LayerReport> {
    batch.require_nonempty("evaluate_layer")?;
    let mut r = LayerReport { layer: name.to_string(), samples: batch.samples(), classes: batch.classes(), ..Default::default() };
    r.flags.zero_positive_samples = batch.truths.iter().filter(|t| !t.iter().any(|v| *v)).count();
    let lm = map_label(batch)?;
    r.flags.zero_positive_classes = lm.flagged;
    if matches!(set, MetricSet::All | MetricSet::Image) {
        r.map_label = Some(lm.mean);
        r.per_class_ap = lm.per_item;
        r.map_image = Some(map_image(batch)?.mean);
        r.iou_acc = Some(iou_acc(batch, DEFAULT_THRESHOLD)?);
        r.hamming_acc = Some(hamming_acc(batch, DEFAULT_THRESHOLD)?);
        let (p, rc) = precision_recall_at_k(batch, 3)?;
        r.precision_at_3 = Some(p);
        r.recall_at_3 = Some(rc);
        if single_label {
            r.mc_acc = Some(mc_acc(batch)?);
        }
    }
    if matches!(set, MetricSet::All | MetricSet::Video) {
        r.hit_at_1 = Some(hit_at_k(batch, 1)?);
        r.perr = if r.flags.zero_positive_samples < batch.samples() { Some(perr(batch)?) } else { None };
        let g = gap(batch, GAP_TOP_K)?;
        r.gap_at_20 = Some(g.ap);
        r.flags.gap_no_positives = g.no_positives;
        let v = map_video(batch)?;
        r.map_video = Some(v.mean);
        r.per_class_ap_video = v.per_item;
        r.flags.map_video_flagged_classes = v.flagged;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn batch(scores: &[&[f64]], truths: &[&[u8]]) -> PredictionBatch {
        PredictionBatch::new(
            scores.iter().map(|r| r.to_vec()).collect(),
            truths.iter().map(|r| r.iter().map(|v| *v == 1).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn ap_examples() {
        let r = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]);
        assert_abs_diff_eq!(r.ap, 0.5 + 0.5 * (2.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(r.ap, 0.833333, epsilon = 1e-6);
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).ap, 1.0);
        let n = 7;
        let mut rel = vec![false; n];
        rel[n - 1] = true;
        let scores: Vec<f64> = (0..n).map(|i| 1.0 - i as f64 / 10.0).collect();
        assert_abs_diff_eq!(average_precision(&scores, &rel).ap, 1.0 / n as f64, epsilon = 1e-15);
        let none = average_precision(&[0.3, 0.2], &[false, false]);
        assert!(none.no_positives && none.ap == 0.0);
    }

    #[test]
    fn ties_keep_input_order() {
        assert_eq!(ranking(&[0.5, 0.7, 0.5, 0.7]), vec![1, 3, 0, 2]);
        // the relevant item listed first wins the tie
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]).ap, 1.0);
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).ap, 0.5);
    }

    #[test]
    fn map_label_and_image() {
        let perfect = batch(&[&[0.9, 0.1], &[0.2, 0.8]], &[&[1, 0], &[0, 1]]);
        assert_eq!(map_label(&perfect).unwrap().mean, 1.0);
        assert_eq!(map_image(&perfect).unwrap().mean, 1.0);

        // class 0: scores (0.9, 0.8, 0.7) truth (1,0,1) -> 5/6; class 1: reversed single hit -> 1/3
        let b = batch(&[&[0.9, 0.9], &[0.8, 0.8], &[0.7, 0.1]], &[&[1, 0], &[0, 0], &[1, 1]]);
        let m = map_label(&b).unwrap();
        assert_abs_diff_eq!(m.per_item[0], 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.per_item[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mean, (5.0 / 6.0 + 1.0 / 3.0) / 2.0, epsilon = 1e-12);

        let single = batch(&[&[0.9], &[0.8], &[0.7]], &[&[1], &[0], &[1]]);
        assert_abs_diff_eq!(map_label(&single).unwrap().mean, 0.833333, epsilon = 1e-6);

        // transposed: one sample ranked over three classes
        let row = batch(&[&[0.9, 0.8, 0.7]], &[&[1, 0, 1]]);
        assert_abs_diff_eq!(map_image(&row).unwrap().mean, 0.833333, epsilon = 1e-6);
        let two = batch(&[&[0.9, 0.8, 0.7], &[0.1, 0.2, 0.3]], &[&[1, 0, 1], &[1, 0, 0]]);
        assert_abs_diff_eq!(map_image(&two).unwrap().mean, (5.0 / 6.0 + 1.0 / 3.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_positive_classes_are_flagged() {
        let b = batch(&[&[0.9, 0.1], &[0.2, 0.8]], &[&[1, 0], &[1, 0]]);
        let m = map_label(&b).unwrap();
        assert_eq!(m.flagged, 1);
        assert_eq!(m.mean, 0.5);
    }

    #[test]
    fn mc_acc_examples() {
        let right = batch(&[&[0.9, 0.1], &[0.2, 0.8]], &[&[1, 0], &[0, 1]]);
        assert_eq!(mc_acc(&right).unwrap(), 0.5 * (0.5 + 0.5));
        // class A 2/2 right, class B 0/2 right
        let b = batch(&[&[0.9, 0.1], &[0.8, 0.2], &[0.7, 0.3], &[0.6, 0.4]], &[&[1, 0], &[1, 0], &[0, 1], &[0, 1]]);
        assert_abs_diff_eq!(mc_acc(&b).unwrap(), 0.25, epsilon = 1e-15);
        let single = batch(&[&[0.3], &[0.9], &[0.5]], &[&[1], &[0], &[1]]);
        assert_abs_diff_eq!(mc_acc(&single).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let empty = PredictionBatch::new(vec![], vec![]).unwrap();
        assert!(matches!(mc_acc(&empty), Err(Error::Contract(_))));
    }

    #[test]
    fn iou_examples() {
        let same = batch(&[&[0.9, 0.1, 0.8]], &[&[1, 0, 1]]);
        assert_eq!(iou_acc(&same, 0.5).unwrap(), 1.0);
        let b = batch(&[&[0.9, 0.7, 0.1]], &[&[0, 1, 1]]);
        assert_abs_diff_eq!(iou_acc(&b, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let empty = batch(&[&[0.1, 0.2]], &[&[0, 0]]);
        assert_eq!(iou_acc(&empty, 0.5).unwrap(), 1.0);
        assert_abs_diff_eq!(hamming_acc(&b, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(iou_acc(&b, 1.0).is_err());
    }

    #[test]
    fn hit_at_k_examples() {
        let b = batch(&[&[0.9, 0.1, 0.3], &[0.2, 0.8, 0.1]], &[&[0, 0, 1], &[0, 1, 0]]);
        assert_eq!(hit_at_k(&b, 3).unwrap(), 1.0);
        let four = batch(
            &[&[0.9, 0.1], &[0.9, 0.1], &[0.9, 0.1], &[0.9, 0.1]],
            &[&[1, 0], &[0, 1], &[1, 1], &[0, 1]],
        );
        assert_eq!(hit_at_k(&four, 1).unwrap(), 0.5);
        let empty_truth = batch(&[&[0.9, 0.1]], &[&[0, 0]]);
        assert_eq!(hit_at_k(&empty_truth, 2).unwrap(), 0.0);
        assert!(hit_at_k(&b, 0).is_err());
    }

    #[test]
    fn perr_examples() {
        let perfect = batch(&[&[0.9, 0.8, 0.1]], &[&[1, 1, 0]]);
        assert_eq!(perr(&perfect).unwrap(), 1.0);
        let half = batch(&[&[0.9, 0.8, 0.1]], &[&[1, 0, 1]]);
        assert_eq!(perr(&half).unwrap(), 0.5);
        let mixed = batch(&[&[0.9, 0.8, 0.1], &[0.5, 0.2, 0.3]], &[&[1, 0, 1], &[0, 0, 0]]);
        assert_eq!(perr(&mixed).unwrap(), 0.5);
        let none = batch(&[&[0.9, 0.8]], &[&[0, 0]]);
        assert!(matches!(perr(&none), Err(Error::Contract(_))));
    }

    #[test]
    fn gap_examples() {
        let one = batch(&[&[0.9, 0.8, 0.7, 0.1]], &[&[1, 0, 1, 1]]);
        // top-3 truncated list: (1,0,1) -> 5/6
        assert_abs_diff_eq!(gap(&one, 3).unwrap().ap, 5.0 / 6.0, epsilon = 1e-12);

        // pooled: s0 top-2 = (0.9 T, 0.6 F), s1 top-2 = (0.8 F, 0.7 T)
        // ranking 0.9 T, 0.8 F, 0.7 T, 0.6 F -> (1 + 2/3) / 2
        let two = batch(&[&[0.9, 0.6, 0.1], &[0.7, 0.8, 0.2]], &[&[1, 0, 1], &[1, 0, 0]]);
        assert_abs_diff_eq!(gap(&two, 2).unwrap().ap, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);

        let neg = batch(&[&[0.9, 0.8]], &[&[0, 0]]);
        let r = gap(&neg, 2).unwrap();
        assert!(r.no_positives && r.ap == 0.0);
    }

    #[test]
    fn video_map_examples() {
        let exact = batch(&[&[1.0], &[0.0], &[1.0], &[0.0]], &[&[1], &[0], &[1], &[0]]);
        assert_eq!(map_video(&exact).unwrap().mean, 1.0);

        // exact AP of (0.9 T, 0.5 F, 0.2 T) is 5/6
        let three = batch(&[&[0.9], &[0.5], &[0.2]], &[&[1], &[0], &[1]]);
        let v = map_video(&three).unwrap().mean;
        assert!((v - 5.0 / 6.0).abs() <= 1e-3, "{v}");

        let low = batch(&[&[0.00005], &[0.00002]], &[&[1], &[0]]);
        let r = map_video(&low).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.flagged, 1);
    }

    #[test]
    fn threshold_counting_is_exact_at_grid_points() {
        assert_eq!(thresholds_passed(0.0), 0);
        assert_eq!(thresholds_passed(1.0), VIDEO_BUCKETS);
        assert_eq!(thresholds_passed(0.3), 3000);
        assert_eq!(thresholds_passed(0.00009), 0);
        for j in [1usize, 7, 123, 2999, 5000, 9999] {
            let tau = j as f64 / VIDEO_BUCKETS as f64;
            assert_eq!(thresholds_passed(tau), j);
        }
    }

    #[test]
    fn layer_report_respects_selection() {
        let b = batch(&[&[0.9, 0.1], &[0.2, 0.8]], &[&[1, 0], &[0, 1]]);
        let img = evaluate_layer("x", &b, true, MetricSet::Image).unwrap();
        assert!(img.map_label.is_some() && img.mc_acc.is_some() && img.map_video.is_none());
        let vid = evaluate_layer("x", &b, false, MetricSet::Video).unwrap();
        assert!(vid.map_label.is_none() && vid.gap_at_20.is_some() && vid.mc_acc.is_none());
        let json = serde_json::to_string(&vid).unwrap();
        assert!(json.contains("\"perr\"") && !json.contains("map_label"));
    }
}
