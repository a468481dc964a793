//! Training objective (weighted BCE over document scores plus a penalty on
//! attention mass assigned to absent classes), the epoch loop, and the
//! alpha/beta grid search.

use std::collections::BTreeSet;

use crate::corpus::{batch_iterator, class_weights, Corpus, Document};
use crate::error::{CawaError, Result};
use crate::metrics;
use crate::model::{backward, forward, ForwardTrace, ModelConfig, ModelParams};
use crate::numeric::rng::{derive_seed_indexed, seeded_rng};
use crate::numeric::{AdamState, GradCheckTarget, Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Weight of the classification loss; 1−alpha weights the attention loss.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Probabilities are clamped to [eps, 1−eps] before logs.
    pub log_clamp: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            epochs: 100,
            batch_size: 256,
            learning_rate: 0.001,
            seed: 0,
            log_clamp: 1e-7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CawaError::InvalidInput(format!("alpha {} outside [0,1]", self.alpha)));
        }
        if self.epochs == 0 {
            return Err(CawaError::InvalidInput("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(CawaError::InvalidInput("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LossBreakdown<S: Scalar> {
    pub classification: S,
    pub attention: S,
    pub total: S,
}

impl<S: Scalar> LossBreakdown<S> {
    pub fn combine(classification: S, attention: S, alpha: S) -> Self {
        LossBreakdown {
            classification,
            attention,
            total: alpha * classification + (S::one() - alpha) * attention,
        }
    }
}

fn clamp<S: Scalar>(x: S, eps: S) -> S {
    x.max(eps).min(S::one() - eps)
}

/// Weighted BCE averaged over the batch:
/// −(1/B) Σ_d Σ_c w_c [y log s + (1−y) log(1−s)].
pub fn classification_loss<S: Scalar>(
    scores: &[&[S]],
    labels: &[&BTreeSet<usize>],
    weights: &[S],
    eps: S,
) -> S {
    let mut total = S::zero();
    for (s, y) in scores.iter().zip(labels) {
        for (c, &w) in weights.iter().enumerate() {
            let p = clamp(s[c], eps);
            total = total
                - w * if y.contains(&c) { p.ln() } else { (S::one() - p).ln() };
        }
    }
    total / S::from_f64(scores.len() as f64)
}

/// Penalty on attention mass on absent classes, averaged over the batch:
/// −(1/B) Σ_d (1/|d|) Σ_i Σ_c (1−y) log(1−a).
pub fn attention_loss<S: Scalar>(
    attentions: &[&Tensor<S>],
    labels: &[&BTreeSet<usize>],
    num_classes: usize,
    eps: S,
) -> S {
    let mut total = S::zero();
    for (a, y) in attentions.iter().zip(labels) {
        let n = a.rows();
        let mut doc = S::zero();
        for i in 0..n {
            for c in 0..num_classes {
                if !y.contains(&c) {
                    doc = doc - (S::one() - clamp(a.at(i, c), eps)).ln();
                }
            }
        }
        total += doc / S::from_f64(n as f64);
    }
    total / S::from_f64(attentions.len() as f64)
}

pub fn combined_loss<S: Scalar>(l_c: S, l_s: S, alpha: S) -> LossBreakdown<S> {
    LossBreakdown::combine(l_c, l_s, alpha)
}

/// Per-document loss terms (not yet divided by batch size).
fn doc_loss_terms<S: Scalar>(
    trace: &ForwardTrace<S>,
    labels: &BTreeSet<usize>,
    weights: &[S],
    eps: S,
) -> (S, S) {
    let mut lc = S::zero();
    for (c, &w) in weights.iter().enumerate() {
        let p = clamp(trace.scores[c], eps);
        lc = lc - w * if labels.contains(&c) { p.ln() } else { (S::one() - p).ln() };
    }
    let n = trace.attention.rows();
    let mut ls = S::zero();
    for i in 0..n {
        for c in 0..weights.len() {
            if !labels.contains(&c) {
                ls = ls - (S::one() - clamp(trace.attention.at(i, c), eps)).ln();
            }
        }
    }
    (lc, ls / S::from_f64(n as f64))
}

/// Gradients of the combined batch loss w.r.t. document scores and (direct
/// attention-loss path) attention weights. Clamped coordinates get zero
/// gradient. `inv_batch` is 1/B.
fn doc_loss_grads<S: Scalar>(
    trace: &ForwardTrace<S>,
    labels: &BTreeSet<usize>,
    weights: &[S],
    eps: S,
    alpha: S,
    inv_batch: S,
) -> (Vec<S>, Option<Tensor<S>>) {
    let one = S::one();
    let grad_scores: Vec<S> = weights
        .iter()
        .enumerate()
        .map(|(c, &w)| {
            let s = trace.scores[c];
            if s < eps || s > one - eps {
                return S::zero();
            }
            let dir = if labels.contains(&c) { -(one / s) } else { one / (one - s) };
            alpha * inv_batch * w * dir
        })
        .collect();

    if alpha == one {
        return (grad_scores, None);
    }
    let n = trace.attention.rows();
    let scale = (one - alpha) * inv_batch / S::from_f64(n as f64);
    let mut ga = Tensor::zeros(trace.attention.shape());
    for i in 0..n {
        for c in 0..weights.len() {
            if !labels.contains(&c) {
                let a = trace.attention.at(i, c);
                if a <= one - eps {
                    *ga.at_mut(i, c) = scale / (one - a);
                }
            }
        }
    }
    (grad_scores, Some(ga))
}

pub struct FitResult<S: Scalar> {
    pub params: ModelParams<S>,
    pub adam: AdamState<S>,
    pub epoch_log: Vec<LossBreakdown<S>>,
    pub epochs_trained: usize,
}

/// Trains a fresh model for `config.epochs` epochs. Deterministic in
/// `config.seed`.
pub fn fit<S: Scalar>(
    corpus: &Corpus,
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<FitResult<S>> {
    config.validate()?;
    if corpus.documents.is_empty() {
        return Err(CawaError::InvalidInput("empty corpus".into()));
    }
    let init_seed = derive_seed_indexed(config.seed, "init", &[]);
    let mut result = FitResult {
        params: ModelParams::init(model_config, init_seed)?,
        adam: AdamState::new(S::from_f64(config.learning_rate)),
        epoch_log: Vec::new(),
        epochs_trained: 0,
    };
    fit_continue(&mut result, corpus, config, model_config)?;
    Ok(result)
}

/// Runs `config.epochs` further epochs on an existing model, continuing the
/// optimizer step counter and the epoch-indexed RNG streams.
pub fn fit_continue<S: Scalar>(
    state: &mut FitResult<S>,
    corpus: &Corpus,
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<()> {
    config.validate()?;
    let weights: Vec<S> = class_weights(corpus)?;
    let alpha = S::from_f64(config.alpha);
    let eps = S::from_f64(config.log_clamp);
    let num_docs = corpus.documents.len();

    for epoch_offset in 0..config.epochs {
        let epoch = state.epochs_trained;
        let shuffle_seed = derive_seed_indexed(config.seed, "shuffle", &[epoch as u64]);
        let batches = batch_iterator(corpus, config.batch_size, shuffle_seed, true);
        let mut epoch_lc = S::zero();
        let mut epoch_ls = S::zero();
        for (bi, batch) in batches.iter().enumerate() {
            state.params.zero_grads();
            let inv_batch = S::from_f64(1.0 / batch.len() as f64);
            let mut batch_lc = S::zero();
            let mut batch_ls = S::zero();
            for &di in batch {
                let doc = &corpus.documents[di];
                let mut rng = seeded_rng(derive_seed_indexed(
                    config.seed,
                    "dropout",
                    &[epoch as u64, di as u64],
                ));
                let trace = forward(doc, &state.params, model_config, &mut rng, true)?;
                let (lc, ls) = doc_loss_terms(&trace, &doc.labels, &weights, eps);
                batch_lc += lc;
                batch_ls += ls;
                let (gs, ga) = doc_loss_grads(&trace, &doc.labels, &weights, eps, alpha, inv_batch);
                backward(doc, &mut state.params, model_config, &trace, &gs, ga.as_ref());
            }
            batch_lc = batch_lc * inv_batch;
            batch_ls = batch_ls * inv_batch;
            let batch_total = alpha * batch_lc + (S::one() - alpha) * batch_ls;
            if !batch_total.is_finite() {
                return Err(CawaError::Diverged(format!(
                    "non-finite loss at epoch {epoch} batch {bi}"
                )));
            }
            let mut params = state.params.params_mut();
            state.adam.step(&mut params);
            let frac = S::from_f64(batch.len() as f64 / num_docs as f64);
            epoch_lc += batch_lc * frac;
            epoch_ls += batch_ls * frac;
        }
        state.epoch_log.push(LossBreakdown::combine(epoch_lc, epoch_ls, alpha));
        state.epochs_trained += 1;
        let _ = epoch_offset;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct GridRow {
    pub alpha: f64,
    pub beta: f64,
    pub sov: f64,
    pub pppa: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub best_alpha: f64,
    pub best_beta: f64,
    pub best_sov: f64,
}

/// Trains one model per alpha and scores every beta on validation SOV
/// (beta is a post-hoc inference knob, so it needs no retraining). Ties are
/// broken by smaller alpha, then smaller beta.
pub fn grid_search<S: Scalar>(
    train: &Corpus,
    validation: &Corpus,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<GridResult> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(CawaError::InvalidInput("empty hyperparameter grid".into()));
    }
    let mut rows = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    let mut best: Option<GridRow> = None;
    for &alpha in alpha_grid {
        let mut cfg = config.clone();
        cfg.alpha = alpha;
        let fitted: FitResult<S> = fit(train, &cfg, model_config)?;
        for &beta in beta_grid {
            let report =
                metrics::evaluate_attribution(validation, &fitted.params, model_config, beta)?;
            let row = GridRow { alpha, beta, sov: report.mean_sov, pppa: report.mean_pppa };
            if best.as_ref().map_or(true, |b| row.sov > b.sov) {
                best = Some(row.clone());
            }
            rows.push(row);
        }
    }
    let best = best.unwrap();
    Ok(GridResult { rows, best_alpha: best.alpha, best_beta: best.beta, best_sov: best.sov })
}

/// Combined loss over a fixed document set, exposed for finite-difference
/// verification of the reverse-mode gradients (dropout off).
pub struct CombinedLossObjective<S: Scalar> {
    pub docs: Vec<Document>,
    pub params: ModelParams<S>,
    pub config: ModelConfig,
    pub weights: Vec<S>,
    pub alpha: S,
    pub eps: S,
}

impl<S: Scalar> CombinedLossObjective<S> {
    pub fn new(corpus: &Corpus, params: ModelParams<S>, config: ModelConfig, alpha: f64) -> Result<Self> {
        let weights = class_weights(corpus)?;
        Ok(CombinedLossObjective {
            docs: corpus.documents.clone(),
            params,
            config,
            weights,
            alpha: S::from_f64(alpha),
            eps: S::from_f64(1e-7),
        })
    }

    pub fn breakdown(&mut self) -> LossBreakdown<S> {
        let inv = S::from_f64(1.0 / self.docs.len() as f64);
        let mut lc = S::zero();
        let mut ls = S::zero();
        for doc in &self.docs {
            let mut rng = seeded_rng(0); // unused: training=false
            let trace = forward(doc, &self.params, &self.config, &mut rng, false).unwrap();
            let (dlc, dls) = doc_loss_terms(&trace, &doc.labels, &self.weights, self.eps);
            lc += dlc * inv;
            ls += dls * inv;
        }
        LossBreakdown::combine(lc, ls, self.alpha)
    }
}

impl<S: Scalar> GradCheckTarget<S> for CombinedLossObjective<S> {
    fn loss(&mut self) -> S {
        self.breakdown().total
    }

    fn compute_grads(&mut self) {
        self.params.zero_grads();
        let inv = S::from_f64(1.0 / self.docs.len() as f64);
        let docs = std::mem::take(&mut self.docs);
        for doc in &docs {
            let mut rng = seeded_rng(0);
            let trace = forward(doc, &self.params, &self.config, &mut rng, false).unwrap();
            let (gs, ga) =
                doc_loss_grads(&trace, &doc.labels, &self.weights, self.eps, self.alpha, inv);
            backward(doc, &mut self.params, &self.config, &trace, &gs, ga.as_ref());
        }
        self.docs = docs;
    }

    fn params(&mut self) -> Vec<&mut crate::numeric::Parameter<S>> {
        self.params.params_mut()
    }
}
