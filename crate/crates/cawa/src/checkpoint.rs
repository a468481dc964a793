//! Versioned JSON checkpoints: model configuration, class list, vocabulary,
//! all parameter tensors by name, and the optimizer state needed to resume.
//! Values are stored as 64-bit floats; serde_json round-trips them bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{CawaError, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::numeric::{AdamState, Scalar, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct AdamSnapshot {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    /// (first, second) moment values per parameter, in parameter order.
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    model_config: ModelConfig,
    classes: Vec<String>,
    vocab_tokens: Vec<String>,
    vocab_min_frequency: usize,
    epochs_trained: usize,
    params: Vec<NamedTensor>,
    adam: AdamSnapshot,
}

pub struct Checkpoint<S: Scalar> {
    pub params: ModelParams<S>,
    pub adam: AdamState<S>,
    pub model_config: ModelConfig,
    pub classes: Vec<String>,
    pub vocabulary: Vocabulary,
    pub epochs_trained: usize,
}

pub fn save<S: Scalar>(
    path: &Path,
    params: &mut ModelParams<S>,
    adam: &AdamState<S>,
    model_config: &ModelConfig,
    classes: &[String],
    vocabulary: &Vocabulary,
    epochs_trained: usize,
) -> Result<()> {
    let named = params.named_params_mut();
    let tensors: Vec<NamedTensor> = named
        .iter()
        .map(|(name, p)| NamedTensor {
            name: name.clone(),
            shape: p.value.shape().to_vec(),
            values: p.value.data().iter().map(|x| x.to_f64_lossy()).collect(),
        })
        .collect();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        model_config: model_config.clone(),
        classes: classes.to_vec(),
        vocab_tokens: vocabulary.tokens().to_vec(),
        vocab_min_frequency: vocabulary.min_frequency,
        epochs_trained,
        params: tensors,
        adam: AdamSnapshot {
            learning_rate: adam.learning_rate.to_f64_lossy(),
            beta1: adam.beta1.to_f64_lossy(),
            beta2: adam.beta2.to_f64_lossy(),
            epsilon: adam.epsilon.to_f64_lossy(),
            t: adam.t,
            moments: adam
                .moments
                .iter()
                .map(|(m, v)| {
                    (
                        m.data().iter().map(|x| x.to_f64_lossy()).collect(),
                        v.data().iter().map(|x| x.to_f64_lossy()).collect(),
                    )
                })
                .collect(),
        },
    };
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(out, &file).map_err(|e| CawaError::InvalidInput(e.to_string()))?;
    Ok(())
}

pub fn load<S: Scalar>(path: &Path) -> Result<Checkpoint<S>> {
    let file = BufReader::new(File::open(path)?);
    let ckpt: CheckpointFile =
        serde_json::from_reader(file).map_err(|e| CawaError::InvalidInput(format!("bad checkpoint: {e}")))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(CawaError::InvalidInput(format!(
            "unsupported checkpoint version {}",
            ckpt.version
        )));
    }
    let mut params = ModelParams::<S>::init(&ckpt.model_config, 0)?;
    {
        let mut named = params.named_params_mut();
        if named.len() != ckpt.params.len() {
            return Err(CawaError::InvalidInput("checkpoint parameter count mismatch".into()));
        }
        for ((name, p), stored) in named.iter_mut().zip(&ckpt.params) {
            if *name != stored.name || p.value.shape() != stored.shape.as_slice() {
                return Err(CawaError::InvalidInput(format!(
                    "checkpoint tensor {} does not match expected {name} {:?}",
                    stored.name,
                    p.value.shape()
                )));
            }
            for (dst, &src) in p.value.data_mut().iter_mut().zip(&stored.values) {
                *dst = S::from_f64(src);
            }
        }
    }
    let mut adam = AdamState::<S>::new(S::from_f64(ckpt.adam.learning_rate));
    adam.beta1 = S::from_f64(ckpt.adam.beta1);
    adam.beta2 = S::from_f64(ckpt.adam.beta2);
    adam.epsilon = S::from_f64(ckpt.adam.epsilon);
    adam.t = ckpt.adam.t;
    {
        let shapes: Vec<Vec<usize>> = {
            let named = params.named_params_mut();
            named.iter().map(|(_, p)| p.value.shape().to_vec()).collect()
        };
        adam.moments = ckpt
            .adam
            .moments
            .iter()
            .zip(shapes)
            .map(|((m, v), shape)| {
                let m = Tensor::from_vec(&shape, m.iter().map(|&x| S::from_f64(x)).collect())?;
                let v = Tensor::from_vec(&shape, v.iter().map(|&x| S::from_f64(x)).collect())?;
                Ok((m, v))
            })
            .collect::<Result<_>>()?;
    }
    let vocabulary = Vocabulary::from_tokens(ckpt.vocab_tokens, ckpt.vocab_min_frequency)?;
    Ok(Checkpoint {
        params,
        adam,
        model_config: ckpt.model_config,
        classes: ckpt.classes,
        vocabulary,
        epochs_trained: ckpt.epochs_trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocabulary;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut cfg = ModelConfig::new(4, 2);
        cfg.embedding_dim = 3;
        cfg.hidden_dim = 3;
        let mut params = ModelParams::<f64>::init(&cfg, 123).unwrap();
        let mut adam = AdamState::new(0.001);
        // one step so moments exist and are nontrivial
        let mut refs = params.params_mut();
        for p in refs.iter_mut() {
            p.grad.fill(0.25);
        }
        adam.step(&mut refs);

        let vocab = build_vocabulary(&[vec![vec!["a".into(), "b".into(), "c".into()]]], 1).unwrap();
        let classes = vec!["A".to_string(), "B".to_string()];
        let tmp = tempfile::NamedTempFile::new().unwrap();
        save(tmp.path(), &mut params, &adam, &cfg, &classes, &vocab, 7).unwrap();

        let loaded: Checkpoint<f64> = load(tmp.path()).unwrap();
        assert_eq!(loaded.model_config, cfg);
        assert_eq!(loaded.classes, classes);
        assert_eq!(loaded.vocabulary, vocab);
        assert_eq!(loaded.epochs_trained, 7);
        assert_eq!(loaded.adam.t, 1);
        let mut lp = loaded.params;
        for ((_, a), (_, b)) in lp.named_params_mut().iter().zip(params.named_params_mut().iter()) {
            assert_eq!(a.value, b.value);
        }
        for ((m1, v1), (m2, v2)) in loaded.adam.moments.iter().zip(adam.moments.iter()) {
            assert_eq!(m1, m2);
            assert_eq!(v1, v2);
        }
    }
}
