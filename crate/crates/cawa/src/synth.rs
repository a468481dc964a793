//! Synthetic corpora with class-disjoint vocabularies: multilabel training
//! documents built from contiguous single-class blocks, and test composites
//! whose ground-truth sentence labels are known by construction.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{synthesize_attribution_set, Corpus, Document, Vocabulary, UNK_TOKEN};
use crate::error::{CawaError, Result};
use crate::numeric::rng::{derive_seed, seeded_rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    /// Distinct words owned by each class; class vocabularies are disjoint.
    pub vocab_per_class: usize,
    pub train_docs: usize,
    /// Distinct labels per training document, one contiguous block each.
    pub labels_per_train_doc: usize,
    pub sentences_per_block_min: usize,
    pub sentences_per_block_max: usize,
    pub words_per_sentence: usize,
    pub validation_composites: usize,
    pub test_composites: usize,
    pub docs_per_composite: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 4,
            vocab_per_class: 200,
            train_docs: 2000,
            labels_per_train_doc: 2,
            sentences_per_block_min: 3,
            sentences_per_block_max: 5,
            words_per_sentence: 6,
            validation_composites: 200,
            test_composites: 200,
            docs_per_composite: (2, 3),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(CawaError::InvalidInput("need at least 2 classes".into()));
        }
        if self.labels_per_train_doc < 1 || self.labels_per_train_doc > self.num_classes {
            return Err(CawaError::InvalidInput("labels_per_train_doc out of range".into()));
        }
        if self.sentences_per_block_min < 1 || self.sentences_per_block_max < self.sentences_per_block_min {
            return Err(CawaError::InvalidInput("bad sentences_per_block range".into()));
        }
        if self.vocab_per_class == 0 || self.words_per_sentence == 0 {
            return Err(CawaError::InvalidInput("vocab and sentence sizes must be >= 1".into()));
        }
        if self.train_docs == 0 || self.test_composites == 0 {
            return Err(CawaError::InvalidInput("document counts must be >= 1".into()));
        }
        Ok(())
    }

    fn class_name(&self, c: usize) -> String {
        format!("c{c:03}")
    }

    fn word(&self, class: usize, j: usize) -> String {
        format!("c{class:03}w{j}")
    }
}

pub struct SynthOutput {
    pub train: Corpus,
    pub validation: Corpus,
    pub test: Corpus,
}

/// Generates the three corpora. All randomness is derived from `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let classes: Vec<String> = (0..cfg.num_classes).map(|c| cfg.class_name(c)).collect();

    // fixed token universe, lexicographic ids after UNK
    let mut tokens = vec![UNK_TOKEN.to_string()];
    let mut class_words: Vec<Vec<String>> = Vec::with_capacity(cfg.num_classes);
    for c in 0..cfg.num_classes {
        let words: Vec<String> = (0..cfg.vocab_per_class).map(|j| cfg.word(c, j)).collect();
        tokens.extend(words.iter().cloned());
        class_words.push(words);
    }
    {
        let mut sorted = tokens[1..].to_vec();
        sorted.sort();
        tokens[1..].clone_from_slice(&sorted);
    }
    let vocabulary = Vocabulary::from_tokens(tokens, 1)?;

    let sentence = |class: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<u32> {
        (0..cfg.words_per_sentence)
            .map(|_| {
                let w = &class_words[class][rng.gen_range(0..cfg.vocab_per_class)];
                vocabulary.id_of(w)
            })
            .collect()
    };

    // multilabel training documents: one contiguous block per chosen class
    let mut rng = seeded_rng(derive_seed(cfg.seed, "synth-train"));
    let mut train_docs = Vec::with_capacity(cfg.train_docs);
    let all_classes: Vec<usize> = (0..cfg.num_classes).collect();
    for i in 0..cfg.train_docs {
        let mut picked = all_classes.clone();
        picked.shuffle(&mut rng);
        picked.truncate(cfg.labels_per_train_doc);
        let mut sentences = Vec::new();
        let mut labels = BTreeSet::new();
        for &class in &picked {
            let block =
                rng.gen_range(cfg.sentences_per_block_min..=cfg.sentences_per_block_max);
            for _ in 0..block {
                sentences.push(sentence(class, &mut rng));
            }
            labels.insert(class);
        }
        train_docs.push(Document {
            id: format!("train-{i}"),
            sentences,
            labels,
            sentence_labels: None,
        });
    }
    let train = Corpus { documents: train_docs, classes: classes.clone(), vocabulary: vocabulary.clone() };

    // single-label pools feed the composite builders
    let composite_set = |tag: &str, count: usize| -> Result<Corpus> {
        let mut rng = seeded_rng(derive_seed(cfg.seed, tag));
        let pool_per_class = (count / cfg.num_classes + 2).max(4);
        let mut pool = Vec::new();
        for class in 0..cfg.num_classes {
            for p in 0..pool_per_class {
                let block =
                    rng.gen_range(cfg.sentences_per_block_min..=cfg.sentences_per_block_max);
                let sentences = (0..block).map(|_| sentence(class, &mut rng)).collect();
                pool.push(Document {
                    id: format!("{tag}-src-{class}-{p}"),
                    sentences,
                    labels: BTreeSet::from([class]),
                    sentence_labels: None,
                });
            }
        }
        let documents = synthesize_attribution_set(
            &pool,
            cfg.docs_per_composite,
            count,
            derive_seed(cfg.seed, &format!("{tag}-mix")),
        )?;
        Ok(Corpus { documents, classes: classes.clone(), vocabulary: vocabulary.clone() })
    };

    let validation = composite_set("synth-valid", cfg.validation_composites)?;
    let test = composite_set("synth-test", cfg.test_composites)?;
    Ok(SynthOutput { train, validation, test })
}
