//! The credit-attribution model: averaged key/value sentence representations,
//! a per-sentence attention network with residual skip and average pooling
//! over the sentence axis, and one binary classifier head per class.

use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;
use crate::error::{CawaError, Result};
use crate::numeric::ops;
use crate::numeric::rng::seeded_rng;
use crate::numeric::{Parameter, Scalar, Tensor};

pub const INIT_SCALE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub vocab_size: usize,
    pub pool_kernel: usize,
    pub dropout_rate: f64,
    pub pooling_enabled: bool,
    /// DNN-A ablation: every sentence gets attention 1/|d| for every class.
    pub uniform_attention: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, num_classes: usize) -> Self {
        ModelConfig {
            embedding_dim: 256,
            hidden_dim: 256,
            num_classes,
            vocab_size,
            pool_kernel: 3,
            dropout_rate: 0.5,
            pooling_enabled: true,
            uniform_attention: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 || self.vocab_size == 0 {
            return Err(CawaError::InvalidInput("model dimensions must be >= 1".into()));
        }
        if self.pool_kernel % 2 == 0 {
            return Err(CawaError::InvalidInput("pool_kernel must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LinearLayer<S: Scalar> {
    pub weight: Parameter<S>,
    pub bias: Parameter<S>,
}

impl<S: Scalar> LinearLayer<S> {
    fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        LinearLayer {
            weight: Parameter::new(Tensor::uniform(&[fan_in, fan_out], INIT_SCALE, rng)),
            bias: Parameter::new(Tensor::zeros(&[fan_out])),
        }
    }
}

/// One per-class binary classifier: two hidden layers, sigmoid scalar output.
#[derive(Clone, Debug)]
pub struct HeadParams<S: Scalar> {
    pub h1: LinearLayer<S>,
    pub h2: LinearLayer<S>,
    pub out: LinearLayer<S>,
}

#[derive(Clone, Debug)]
pub struct ModelParams<S: Scalar> {
    /// Key embedding table [V×dim], feeds the attention network.
    pub key_embed: Parameter<S>,
    /// Value embedding table [V×dim], feeds the class representations.
    pub value_embed: Parameter<S>,
    pub attn_h1: LinearLayer<S>,
    pub attn_h2: LinearLayer<S>,
    pub attn_out: LinearLayer<S>,
    /// Residual projection from the first hidden layer to the class logits
    /// (the hidden width differs from |C|, so the skip is learned).
    pub attn_skip: Parameter<S>,
    pub heads: Vec<HeadParams<S>>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (v, e, h, c) = (config.vocab_size, config.embedding_dim, config.hidden_dim, config.num_classes);
        let mut rng = seeded_rng(seed);
        Ok(ModelParams {
            key_embed: Parameter::new(Tensor::uniform(&[v, e], INIT_SCALE, &mut rng)),
            value_embed: Parameter::new(Tensor::uniform(&[v, e], INIT_SCALE, &mut rng)),
            attn_h1: LinearLayer::init(e, h, &mut rng),
            attn_h2: LinearLayer::init(h, h, &mut rng),
            attn_out: LinearLayer::init(h, c, &mut rng),
            attn_skip: Parameter::new(Tensor::uniform(&[h, c], INIT_SCALE, &mut rng)),
            heads: (0..c)
                .map(|_| HeadParams {
                    h1: LinearLayer::init(e, h, &mut rng),
                    h2: LinearLayer::init(h, h, &mut rng),
                    out: LinearLayer::init(h, 1, &mut rng),
                })
                .collect(),
        })
    }

    /// All parameters in a fixed order, paired with stable names. The order
    /// is the contract for ADAM moments and checkpoints.
    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Parameter<S>)> {
        let mut out: Vec<(String, &mut Parameter<S>)> = vec![
            ("key_embed".into(), &mut self.key_embed),
            ("value_embed".into(), &mut self.value_embed),
            ("attn.h1.weight".into(), &mut self.attn_h1.weight),
            ("attn.h1.bias".into(), &mut self.attn_h1.bias),
            ("attn.h2.weight".into(), &mut self.attn_h2.weight),
            ("attn.h2.bias".into(), &mut self.attn_h2.bias),
            ("attn.out.weight".into(), &mut self.attn_out.weight),
            ("attn.out.bias".into(), &mut self.attn_out.bias),
            ("attn.skip".into(), &mut self.attn_skip),
        ];
        for (c, head) in self.heads.iter_mut().enumerate() {
            out.push((format!("head{c}.h1.weight"), &mut head.h1.weight));
            out.push((format!("head{c}.h1.bias"), &mut head.h1.bias));
            out.push((format!("head{c}.h2.weight"), &mut head.h2.weight));
            out.push((format!("head{c}.h2.bias"), &mut head.h2.bias));
            out.push((format!("head{c}.out.weight"), &mut head.out.weight));
            out.push((format!("head{c}.out.bias"), &mut head.out.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        self.named_params_mut().into_iter().map(|(_, p)| p).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn num_values(&mut self) -> usize {
        self.params_mut().iter().map(|p| p.value.len()).sum()
    }
}

/// Everything the backward pass and segment inference need from one forward
/// run over a single document.
#[derive(Clone, Debug)]
pub struct ForwardTrace<S: Scalar> {
    /// Sentence key representations [|d|×dim].
    pub keys: Tensor<S>,
    /// Sentence value representations [|d|×dim].
    pub values: Tensor<S>,
    /// Attention weights [|d|×|C|]; each row sums to 1 (uniform ablation:
    /// every cell is 1/|d|).
    pub attention: Tensor<S>,
    /// Class-specific document representations [|C|×dim].
    pub class_reps: Tensor<S>,
    /// Per-class document scores, each in (0,1).
    pub scores: Vec<S>,
    cache: Cache<S>,
}

#[derive(Clone, Debug)]
struct Cache<S: Scalar> {
    attn: Option<AttnCache<S>>,
    heads: Vec<HeadCache<S>>,
}

#[derive(Clone, Debug)]
struct AttnCache<S: Scalar> {
    h1_pre: Tensor<S>,
    m1: Tensor<S>,
    h1d: Tensor<S>,
    h2_pre: Tensor<S>,
    m2: Tensor<S>,
    h2d: Tensor<S>,
}

#[derive(Clone, Debug)]
struct HeadCache<S: Scalar> {
    z1_pre: Tensor<S>,
    m1: Tensor<S>,
    z1d: Tensor<S>,
    z2_pre: Tensor<S>,
    m2: Tensor<S>,
    z2d: Tensor<S>,
}

/// Mean key/value embeddings of each sentence's tokens.
pub fn sentence_representations<S: Scalar>(
    document: &Document,
    params: &ModelParams<S>,
) -> Result<(Tensor<S>, Tensor<S>)> {
    let n = document.sentences.len();
    let e = params.key_embed.value.cols();
    let mut keys = Tensor::zeros(&[n, e]);
    let mut values = Tensor::zeros(&[n, e]);
    for (i, sentence) in document.sentences.iter().enumerate() {
        if sentence.is_empty() {
            return Err(CawaError::InvalidInput(format!(
                "document {} sentence {i} is empty",
                document.id
            )));
        }
        let inv = S::from_f64(1.0 / sentence.len() as f64);
        for &tok in sentence {
            let kw = params.key_embed.value.row(tok as usize);
            let vw = params.value_embed.value.row(tok as usize);
            for (acc, &x) in keys.row_mut(i).iter_mut().zip(kw) {
                *acc += x * inv;
            }
            for (acc, &x) in values.row_mut(i).iter_mut().zip(vw) {
                *acc += x * inv;
            }
        }
    }
    Ok((keys, values))
}

fn attention_forward<S: Scalar>(
    keys: &Tensor<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<(Tensor<S>, Option<AttnCache<S>>)> {
    let n = keys.rows();
    if config.uniform_attention {
        let mut a = Tensor::zeros(&[n, config.num_classes]);
        a.fill(S::from_f64(1.0 / n as f64));
        return Ok((a, None));
    }
    let h1_pre = ops::linear(keys, &params.attn_h1.weight.value, &params.attn_h1.bias.value)?;
    let h1 = ops::relu(&h1_pre);
    let (h1d, m1) = ops::dropout(&h1, config.dropout_rate, training, rng)?;
    let h2_pre = ops::linear(&h1d, &params.attn_h2.weight.value, &params.attn_h2.bias.value)?;
    let h2 = ops::relu(&h2_pre);
    let (h2d, m2) = ops::dropout(&h2, config.dropout_rate, training, rng)?;
    let mut logits = ops::linear(&h2d, &params.attn_out.weight.value, &params.attn_out.bias.value)?;
    let skip = ops::matmul(&h1d, &params.attn_skip.value)?;
    for (l, &s) in logits.data_mut().iter_mut().zip(skip.data()) {
        *l += s;
    }
    let pooled = if config.pooling_enabled {
        ops::avg_pool1d(&logits, config.pool_kernel)
    } else {
        logits
    };
    let attention = ops::softmax_rows(&pooled);
    Ok((attention, Some(AttnCache { h1_pre, m1, h1d, h2_pre, m2, h2d })))
}

/// Per-sentence class distributions [|d|×|C|] (softmax rows), or 1/|d|
/// everywhere under the uniform-attention ablation.
pub fn attention_weights<S: Scalar>(
    keys: &Tensor<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<Tensor<S>> {
    attention_forward(keys, params, config, rng, training).map(|(a, _)| a)
}

/// r(c) = Σ_i a(i,c)·v(i), no renormalization over sentences.
pub fn class_document_representations<S: Scalar>(
    values: &Tensor<S>,
    attention: &Tensor<S>,
) -> Tensor<S> {
    let (n, e) = (values.rows(), values.cols());
    let c = attention.cols();
    debug_assert_eq!(attention.rows(), n);
    let mut reps = Tensor::zeros(&[c, e]);
    for i in 0..n {
        let v = values.row(i);
        for cls in 0..c {
            let a = attention.at(i, cls);
            for (r, &x) in reps.row_mut(cls).iter_mut().zip(v) {
                *r += a * x;
            }
        }
    }
    reps
}

fn heads_forward<S: Scalar>(
    reps: &Tensor<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<(Vec<S>, Vec<HeadCache<S>>)> {
    let mut scores = Vec::with_capacity(config.num_classes);
    let mut caches = Vec::with_capacity(config.num_classes);
    for (c, head) in params.heads.iter().enumerate() {
        let r = Tensor::from_vec(&[1, reps.cols()], reps.row(c).to_vec())?;
        let z1_pre = ops::linear(&r, &head.h1.weight.value, &head.h1.bias.value)?;
        let z1 = ops::relu(&z1_pre);
        let (z1d, m1) = ops::dropout(&z1, config.dropout_rate, training, rng)?;
        let z2_pre = ops::linear(&z1d, &head.h2.weight.value, &head.h2.bias.value)?;
        let z2 = ops::relu(&z2_pre);
        let (z2d, m2) = ops::dropout(&z2, config.dropout_rate, training, rng)?;
        let o = ops::linear(&z2d, &head.out.weight.value, &head.out.bias.value)?;
        scores.push(ops::sigmoid(&o).data()[0]);
        caches.push(HeadCache { z1_pre, m1, z1d, z2_pre, m2, z2d });
    }
    Ok((scores, caches))
}

/// Per-class document scores; head c consumes only the class-c representation.
pub fn classify_document<S: Scalar>(
    reps: &Tensor<S>,
    params: &ModelParams<S>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<Vec<S>> {
    heads_forward(reps, params, config, rng, training).map(|(s, _)| s)
}

/// Full forward pass over one document, keeping every intermediate needed
/// for backprop and segment inference.
pub fn forward<S: Scalar>(
    document: &Document,
    params: &ModelParams<S>,
    config: &ModelConfig,
    rng: &mut ChaCha8Rng,
    training: bool,
) -> Result<ForwardTrace<S>> {
    let (keys, values) = sentence_representations(document, params)?;
    let (attention, attn_cache) = attention_forward(&keys, params, config, rng, training)?;
    let class_reps = class_document_representations(&values, &attention);
    let (scores, head_caches) = heads_forward(&class_reps, params, config, rng, training)?;
    Ok(ForwardTrace {
        keys,
        values,
        attention,
        class_reps,
        scores,
        cache: Cache { attn: attn_cache, heads: head_caches },
    })
}

/// Reverse pass for one document. `grad_scores[c]` is dL/ds(d,c) and
/// `grad_attention_direct` is the dL/da term of the attention loss (None when
/// that path is inactive). Gradients accumulate into `params`.
pub fn backward<S: Scalar>(
    document: &Document,
    params: &mut ModelParams<S>,
    config: &ModelConfig,
    trace: &ForwardTrace<S>,
    grad_scores: &[S],
    grad_attention_direct: Option<&Tensor<S>>,
) {
    let n = document.sentences.len();
    let e = config.embedding_dim;
    let c = config.num_classes;
    debug_assert_eq!(grad_scores.len(), c);

    // heads: ds -> d class_reps, via each head's two hidden layers
    let mut grad_reps = Tensor::zeros(&[c, e]);
    for cls in 0..c {
        let hc = &trace.cache.heads[cls];
        let head = &mut params.heads[cls];
        let s = trace.scores[cls];
        let go = grad_scores[cls] * s * (S::one() - s);
        let go_t = Tensor::from_vec(&[1, 1], vec![go]).unwrap();
        let gz2d = ops::linear_backward(
            &hc.z2d,
            &head.out.weight.value,
            &go_t,
            &mut head.out.weight.grad,
            &mut head.out.bias.grad,
        );
        let gz2 = ops::dropout_backward(&hc.m2, &gz2d);
        let gz2_pre = ops::relu_backward(&hc.z2_pre, &gz2);
        let gz1d = ops::linear_backward(
            &hc.z1d,
            &head.h2.weight.value,
            &gz2_pre,
            &mut head.h2.weight.grad,
            &mut head.h2.bias.grad,
        );
        let gz1 = ops::dropout_backward(&hc.m1, &gz1d);
        let gz1_pre = ops::relu_backward(&hc.z1_pre, &gz1);
        let r = Tensor::from_vec(&[1, e], trace.class_reps.row(cls).to_vec()).unwrap();
        let gr = ops::linear_backward(
            &r,
            &head.h1.weight.value,
            &gz1_pre,
            &mut head.h1.weight.grad,
            &mut head.h1.bias.grad,
        );
        grad_reps.row_mut(cls).copy_from_slice(gr.row(0));
    }

    // class_reps = attentionᵀ · values
    let mut grad_values = Tensor::<S>::zeros(&[n, e]);
    let mut grad_attention = match grad_attention_direct {
        Some(g) => g.clone(),
        None => Tensor::zeros(&[n, c]),
    };
    for i in 0..n {
        let v = trace.values.row(i);
        for cls in 0..c {
            let a = trace.attention.at(i, cls);
            let gr = grad_reps.row(cls);
            let mut dot = S::zero();
            for ((gv, &g), &x) in grad_values.row_mut(i).iter_mut().zip(gr).zip(v) {
                *gv += a * g;
                dot += g * x;
            }
            *grad_attention.at_mut(i, cls) += dot;
        }
    }

    // attention network (constant attention has no parameters to reach)
    let grad_keys = match &trace.cache.attn {
        None => None,
        Some(ac) => {
            let g_pooled = ops::softmax_rows_backward(&trace.attention, &grad_attention);
            let g_logits = if config.pooling_enabled {
                ops::avg_pool1d_backward(n, config.pool_kernel, &g_pooled)
            } else {
                g_pooled
            };
            let gh2d = ops::linear_backward(
                &ac.h2d,
                &params.attn_out.weight.value,
                &g_logits,
                &mut params.attn_out.weight.grad,
                &mut params.attn_out.bias.grad,
            );
            let gh1d_skip = ops::matmul_backward(
                &ac.h1d,
                &params.attn_skip.value,
                &g_logits,
                &mut params.attn_skip.grad,
            );
            let gh2 = ops::dropout_backward(&ac.m2, &gh2d);
            let gh2_pre = ops::relu_backward(&ac.h2_pre, &gh2);
            let mut gh1d = ops::linear_backward(
                &ac.h1d,
                &params.attn_h2.weight.value,
                &gh2_pre,
                &mut params.attn_h2.weight.grad,
                &mut params.attn_h2.bias.grad,
            );
            for (g, &s) in gh1d.data_mut().iter_mut().zip(gh1d_skip.data()) {
                *g += s;
            }
            let gh1 = ops::dropout_backward(&ac.m1, &gh1d);
            let gh1_pre = ops::relu_backward(&ac.h1_pre, &gh1);
            Some(ops::linear_backward(
                &trace.keys,
                &params.attn_h1.weight.value,
                &gh1_pre,
                &mut params.attn_h1.weight.grad,
                &mut params.attn_h1.bias.grad,
            ))
        }
    };

    // scatter sentence gradients back to the embedding tables
    for (i, sentence) in document.sentences.iter().enumerate() {
        let inv = S::from_f64(1.0 / sentence.len() as f64);
        for &tok in sentence {
            let t = tok as usize;
            if let Some(gk) = &grad_keys {
                let row = gk.row(i);
                for (g, &x) in params.key_embed.grad.row_mut(t).iter_mut().zip(row) {
                    *g += x * inv;
                }
            }
            let row = grad_values.row(i);
            for (g, &x) in params.value_embed.grad.row_mut(t).iter_mut().zip(row) {
                *g += x * inv;
            }
        }
    }
}
