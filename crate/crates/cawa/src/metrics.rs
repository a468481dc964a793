//! Credit-attribution metrics (per-point accuracy and segment overlap with a
//! boundary-tolerance term) and classification metrics (per-document F1,
//! rank-based micro/macro AUC).

use std::collections::BTreeSet;

use crate::corpus::Corpus;
use crate::error::{CawaError, Result};
use crate::inference::{label_sentences, predict_document_classes, InferenceConfig};
use crate::model::{forward, ModelConfig, ModelParams};
use crate::numeric::rng::seeded_rng;
use crate::numeric::Scalar;

/// Per-sentence label sequence for one document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    pub labels: Vec<usize>,
}

impl Segmentation {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(CawaError::InvalidInput("segmentation must be nonempty".into()));
        }
        Ok(Segmentation { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal run of equal labels; `start`/`end` are inclusive sentence indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SegmentSpan {
    pub start: usize,
    pub end: usize,
    pub label: usize,
}

impl SegmentSpan {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Maximal same-label runs, in order, covering all positions.
pub fn segments_of(seg: &Segmentation) -> Vec<SegmentSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=seg.labels.len() {
        if i == seg.labels.len() || seg.labels[i] != seg.labels[start] {
            spans.push(SegmentSpan { start, end: i - 1, label: seg.labels[start] });
            start = i;
        }
    }
    spans
}

fn check_lengths(observed: &Segmentation, predicted: &Segmentation) -> Result<()> {
    if observed.len() != predicted.len() {
        return Err(CawaError::InvalidInput(format!(
            "segmentation lengths differ: {} vs {}",
            observed.len(),
            predicted.len()
        )));
    }
    Ok(())
}

/// Fraction of sentences labeled identically.
pub fn pppa(observed: &Segmentation, predicted: &Segmentation) -> Result<f64> {
    check_lengths(observed, predicted)?;
    let hits = observed
        .labels
        .iter()
        .zip(&predicted.labels)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / observed.len() as f64)
}

fn minov(s1: &SegmentSpan, s2: &SegmentSpan) -> usize {
    let lo = s1.start.max(s2.start);
    let hi = s1.end.min(s2.end);
    if hi >= lo {
        hi - lo + 1
    } else {
        0
    }
}

fn maxov(s1: &SegmentSpan, s2: &SegmentSpan) -> usize {
    s1.end.max(s2.end) - s1.start.min(s2.start) + 1
}

/// Tolerance term forgiving small deviations at segment ends:
/// min(maxov−minov, minov, ⌊len(s1)/2⌋, ⌊len(s2)/2⌋). Callers must pass
/// overlapping spans.
pub fn sov_delta(s1: &SegmentSpan, s2: &SegmentSpan) -> usize {
    let mn = minov(s1, s2);
    let mx = maxov(s1, s2);
    debug_assert!(mn >= 1, "sov_delta requires overlapping spans");
    (mx - mn).min(mn).min(s1.len() / 2).min(s2.len() / 2)
}

/// Segment overlap score: (1/N) Σ over same-label overlapping span pairs of
/// [(minov+δ)/maxov]·len(s1), observed segmentation first.
pub fn sov(observed: &Segmentation, predicted: &Segmentation) -> Result<f64> {
    check_lengths(observed, predicted)?;
    let spans1 = segments_of(observed);
    let spans2 = segments_of(predicted);
    let mut acc = 0.0;
    for s1 in &spans1 {
        for s2 in &spans2 {
            if s1.label != s2.label || minov(s1, s2) == 0 {
                continue;
            }
            let mn = minov(s1, s2) as f64;
            let mx = maxov(s1, s2) as f64;
            let delta = sov_delta(s1, s2) as f64;
            acc += (mn + delta) / mx * s1.len() as f64;
        }
    }
    Ok(acc / observed.len() as f64)
}

/// Harmonic mean of precision and recall over label sets; 0 when either set
/// is empty or they are disjoint.
pub fn f1_document(predicted: &BTreeSet<usize>, observed: &BTreeSet<usize>) -> f64 {
    if predicted.is_empty() || observed.is_empty() {
        return 0.0;
    }
    let inter = predicted.intersection(observed).count() as f64;
    if inter == 0.0 {
        return 0.0;
    }
    let p = inter / predicted.len() as f64;
    let r = inter / observed.len() as f64;
    2.0 * p * r / (p + r)
}

/// Rank-based AUC with ties counted 0.5 per tied positive-negative pair.
/// None when positives or negatives are missing.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    debug_assert_eq!(scores.len(), labels.len());
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // average ranks over tie groups (ranks are 1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = pos as f64;
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// AUC over all (document, class) score/label pairs pooled together.
pub fn auc_micro(scores: &[Vec<f64>], labels: &[&BTreeSet<usize>], num_classes: usize) -> Result<f64> {
    let mut flat_scores = Vec::new();
    let mut flat_labels = Vec::new();
    for (s, y) in scores.iter().zip(labels) {
        for c in 0..num_classes {
            flat_scores.push(s[c]);
            flat_labels.push(y.contains(&c));
        }
    }
    auc(&flat_scores, &flat_labels)
        .ok_or_else(|| CawaError::InvalidInput("micro AUC needs both positives and negatives".into()))
}

/// Per-class AUC averaged over classes that have both positives and
/// negatives; errors if no class qualifies.
pub fn auc_macro(scores: &[Vec<f64>], labels: &[&BTreeSet<usize>], num_classes: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut valid = 0;
    for c in 0..num_classes {
        let class_scores: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let class_labels: Vec<bool> = labels.iter().map(|y| y.contains(&c)).collect();
        if let Some(a) = auc(&class_scores, &class_labels) {
            sum += a;
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(CawaError::InvalidInput(
            "macro AUC: no class has both positives and negatives".into(),
        ));
    }
    Ok(sum / valid as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct AttributionReport {
    pub mean_sov: f64,
    pub mean_pppa: f64,
    pub n_documents: usize,
}

/// Mean per-document SOV and PPPA of model predictions at blend `beta`
/// against ground-truth sentence labels.
pub fn evaluate_attribution<S: Scalar>(
    corpus: &Corpus,
    params: &ModelParams<S>,
    model_config: &ModelConfig,
    beta: f64,
) -> Result<AttributionReport> {
    if corpus.documents.is_empty() {
        return Err(CawaError::InvalidInput("empty test set".into()));
    }
    let infer = InferenceConfig { beta, ..Default::default() };
    infer.validate()?;
    let mut sum_sov = 0.0;
    let mut sum_pppa = 0.0;
    for doc in &corpus.documents {
        let truth = doc.sentence_labels.as_ref().ok_or_else(|| {
            CawaError::InvalidInput(format!("document {} has no sentence_labels", doc.id))
        })?;
        let trace = forward(doc, params, model_config, &mut seeded_rng(0), false)?;
        let predicted = Segmentation::new(label_sentences(&trace, &infer).labels)?;
        let observed = Segmentation::new(truth.clone())?;
        sum_sov += sov(&observed, &predicted)?;
        sum_pppa += pppa(&observed, &predicted)?;
    }
    let n = corpus.documents.len();
    Ok(AttributionReport {
        mean_sov: sum_sov / n as f64,
        mean_pppa: sum_pppa / n as f64,
        n_documents: n,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct ClassificationReport {
    pub mean_f1: f64,
    pub auc_micro: f64,
    pub auc_macro: f64,
    pub n_documents: usize,
}

/// Document-level F1 (mean over documents) and micro/macro AUC of the raw
/// scores.
pub fn evaluate_classification<S: Scalar>(
    corpus: &Corpus,
    params: &ModelParams<S>,
    model_config: &ModelConfig,
    decision_threshold: f64,
) -> Result<ClassificationReport> {
    if corpus.documents.is_empty() {
        return Err(CawaError::InvalidInput("empty test set".into()));
    }
    let mut all_scores = Vec::with_capacity(corpus.documents.len());
    let mut all_labels = Vec::with_capacity(corpus.documents.len());
    let mut sum_f1 = 0.0;
    for doc in &corpus.documents {
        let trace = forward(doc, params, model_config, &mut seeded_rng(0), false)?;
        let scores: Vec<f64> = trace.scores.iter().map(|s| s.to_f64_lossy()).collect();
        let predicted = predict_document_classes(&scores, decision_threshold);
        sum_f1 += f1_document(&predicted, &doc.labels);
        all_scores.push(scores);
        all_labels.push(&doc.labels);
    }
    let n = corpus.documents.len();
    let c = model_config.num_classes;
    Ok(ClassificationReport {
        mean_f1: sum_f1 / n as f64,
        auc_micro: auc_micro(&all_scores, &all_labels, c)?,
        auc_macro: auc_macro(&all_scores, &all_labels, c)?,
        n_documents: n,
    })
}
