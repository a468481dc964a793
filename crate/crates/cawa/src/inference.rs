//! Sentence labeling: each sentence gets the class maximizing a convex blend
//! of its attention weight and the document-level class probability. The
//! document score acts as a global bias that damps noise in the attention.

use std::collections::BTreeSet;

use crate::error::{CawaError, Result};
use crate::model::ForwardTrace;
use crate::numeric::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct InferenceConfig {
    /// Relative contribution of attention weights vs document scores.
    pub beta: f64,
    /// Document-level decision threshold for predicted label sets.
    pub decision_threshold: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig { beta: 0.5, decision_threshold: 0.5 }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(CawaError::InvalidInput(format!("beta {} outside [0,1]", self.beta)));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(CawaError::InvalidInput(format!(
                "decision_threshold {} outside (0,1)",
                self.decision_threshold
            )));
        }
        Ok(())
    }
}

/// One class id per sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceLabeling {
    pub labels: Vec<usize>,
}

/// l(d,i) = argmax_c (beta·a(d,i,c) + (1−beta)·s(d,c)); ties go to the
/// smallest class id.
pub fn label_sentences<S: Scalar>(trace: &ForwardTrace<S>, config: &InferenceConfig) -> SentenceLabeling {
    let beta = S::from_f64(config.beta);
    let one_minus = S::one() - beta;
    let n = trace.attention.rows();
    let c = trace.attention.cols();
    let labels = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_score = S::neg_infinity();
            for cls in 0..c {
                let score = beta * trace.attention.at(i, cls) + one_minus * trace.scores[cls];
                if score > best_score {
                    best_score = score;
                    best = cls;
                }
            }
            best
        })
        .collect();
    SentenceLabeling { labels }
}

/// {c : s(d,c) >= threshold}, falling back to the argmax class when the set
/// would be empty (every test document carries at least one class).
pub fn predict_document_classes<S: Scalar>(scores: &[S], threshold: f64) -> BTreeSet<usize> {
    let tau = S::from_f64(threshold);
    let mut set: BTreeSet<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= tau)
        .map(|(c, _)| c)
        .collect();
    if set.is_empty() {
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        set.insert(best);
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::model::{forward, ModelConfig, ModelParams};
    use crate::numeric::rng::seeded_rng;
    use crate::numeric::Tensor;

    // builds a trace via a real forward pass; attention/scores then overridden
    fn trace_with(attention: Tensor<f64>, scores: Vec<f64>) -> crate::model::ForwardTrace<f64> {
        let c = scores.len();
        let mut cfg = ModelConfig::new(2, c);
        cfg.embedding_dim = 2;
        cfg.hidden_dim = 2;
        cfg.dropout_rate = 0.0;
        let params = ModelParams::init(&cfg, 0).unwrap();
        let doc = Document {
            id: "t".into(),
            sentences: vec![vec![1]; attention.rows()],
            labels: [0].into_iter().collect(),
            sentence_labels: None,
        };
        let mut t = forward(&doc, &params, &cfg, &mut seeded_rng(0), false).unwrap();
        t.attention = attention;
        t.scores = scores;
        t
    }

    #[test]
    fn beta_zero_uses_document_argmax_everywhere() {
        let a = Tensor::from_vec(&[3, 2], vec![0.9, 0.1, 0.1, 0.9, 0.5, 0.5]).unwrap();
        let t = trace_with(a, vec![0.2, 0.8]);
        let out = label_sentences(&t, &InferenceConfig { beta: 0.0, decision_threshold: 0.5 });
        assert_eq!(out.labels, vec![1, 1, 1]);
    }

    #[test]
    fn beta_one_uses_attention_argmax() {
        let a = Tensor::from_vec(&[2, 2], vec![0.9, 0.1, 0.1, 0.9]).unwrap();
        let t = trace_with(a, vec![0.2, 0.8]);
        let out = label_sentences(&t, &InferenceConfig { beta: 1.0, decision_threshold: 0.5 });
        assert_eq!(out.labels, vec![0, 1]);
    }

    #[test]
    fn blend_arithmetic_picks_second_class() {
        let a = Tensor::from_vec(&[1, 2], vec![0.6, 0.4]).unwrap();
        let t = trace_with(a, vec![0.2, 0.8]);
        let out = label_sentences(&t, &InferenceConfig { beta: 0.5, decision_threshold: 0.5 });
        // blended scores [0.4, 0.6]
        assert_eq!(out.labels, vec![1]);
    }

    #[test]
    fn ties_break_to_smallest_class() {
        let a = Tensor::from_vec(&[1, 2], vec![0.5, 0.5]).unwrap();
        let t = trace_with(a, vec![0.7, 0.7]);
        let out = label_sentences(&t, &InferenceConfig { beta: 0.3, decision_threshold: 0.5 });
        assert_eq!(out.labels, vec![0]);
    }

    #[test]
    fn uniform_attention_matches_beta_zero_at_any_beta() {
        let a = Tensor::from_vec(&[2, 3], vec![1.0 / 2.0; 6]).unwrap();
        let t = trace_with(a.clone(), vec![0.3, 0.9, 0.1]);
        let at0 = label_sentences(&t, &InferenceConfig { beta: 0.0, decision_threshold: 0.5 });
        for beta in [0.2, 0.6, 1.0] {
            let t2 = trace_with(a.clone(), vec![0.3, 0.9, 0.1]);
            let out = label_sentences(&t2, &InferenceConfig { beta, decision_threshold: 0.5 });
            if beta < 1.0 {
                assert_eq!(out.labels, at0.labels);
            } else {
                // beta=1 with class-constant attention: all ties, class 0
                assert_eq!(out.labels, vec![0, 0]);
            }
        }
    }

    #[test]
    fn document_class_prediction_threshold_and_fallback() {
        assert_eq!(
            predict_document_classes(&[0.9, 0.1], 0.5).into_iter().collect::<Vec<_>>(),
            vec![0]
        );
        // fallback to argmax when nothing clears the threshold
        assert_eq!(
            predict_document_classes(&[0.4, 0.3], 0.5).into_iter().collect::<Vec<_>>(),
            vec![0]
        );
        // >= is inclusive
        assert_eq!(
            predict_document_classes(&[0.5, 0.5], 0.5).into_iter().collect::<Vec<_>>(),
            vec![0, 1]
        );
    }

    #[test]
    fn config_validation() {
        assert!(InferenceConfig { beta: 1.2, decision_threshold: 0.5 }.validate().is_err());
        assert!(InferenceConfig { beta: 0.5, decision_threshold: 1.0 }.validate().is_err());
        assert!(InferenceConfig::default().validate().is_ok());
    }
}
