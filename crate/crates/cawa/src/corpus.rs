//! Corpus ingestion, vocabulary construction, class weights, batching, and
//! synthesis of credit-attribution test documents with known sentence labels.
//!
//! Corpus files are JSON Lines, one document per line:
//! `{"id": ..., "sentences": [...], "labels": [...], "sentence_labels": [...]}`
//! where `sentence_labels` is optional and only present for test sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CawaError, Result};
use crate::numeric::rng::seeded_rng;
use crate::numeric::Scalar;

/// Reserved id for out-of-vocabulary words; every word must have an
/// embedding for sentence averaging to be total.
pub const UNK_ID: u32 = 0;
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    pub min_frequency: usize,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered token list (checkpoints).
    pub fn from_tokens(id_to_token: Vec<String>, min_frequency: usize) -> Result<Self> {
        if id_to_token.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(CawaError::InvalidInput(format!("token 0 must be {UNK_TOKEN:?}")));
        }
        let token_to_id: HashMap<String, u32> = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if token_to_id.len() != id_to_token.len() {
            return Err(CawaError::InvalidInput("duplicate token in vocabulary".into()));
        }
        Ok(Vocabulary { token_to_id, id_to_token, min_frequency })
    }

    /// Tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Number of ids, including UNK.
    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id_of(&self, token: &str) -> u32 {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    /// Token ids per sentence; every sentence is nonempty.
    pub sentences: Vec<Vec<u32>>,
    /// Document-level class ids (distant supervision signal).
    pub labels: BTreeSet<usize>,
    /// Ground-truth per-sentence class ids; test sets only.
    pub sentence_labels: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Class names in lexicographic order; index = dense class id.
    pub classes: Vec<String>,
    pub vocabulary: Vocabulary,
}

impl Corpus {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }
}

/// Builds a vocabulary over whitespace-tokenized, lowercased sentences.
/// Tokens with frequency below `min_frequency` map to the reserved UNK id;
/// kept tokens get dense ids 1..V in lexicographic order.
pub fn build_vocabulary(raw_documents: &[Vec<Vec<String>>], min_frequency: usize) -> Result<Vocabulary> {
    if raw_documents.is_empty() {
        return Err(CawaError::InvalidInput("empty corpus".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in raw_documents {
        for sentence in doc {
            for token in sentence {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut id_to_token = vec![UNK_TOKEN.to_string()];
    // BTreeMap iteration keeps ids lexicographic; the UNK literal never
    // becomes a regular token so re-ingesting emitted files is stable.
    for (token, &count) in counts.iter() {
        if count >= min_frequency && *token != UNK_TOKEN {
            id_to_token.push(token.to_string());
        }
    }
    let token_to_id = id_to_token
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    Ok(Vocabulary { token_to_id, id_to_token, min_frequency })
}

pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(|t| t.to_lowercase()).collect()
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    sentences: Vec<String>,
    labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sentence_labels: Option<Vec<String>>,
}

fn read_raw(path: &Path) -> Result<Vec<(usize, RawRecord)>> {
    let file = File::open(path)?;
    let mut raw = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| CawaError::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        raw.push((lineno + 1, record));
    }
    if raw.is_empty() {
        return Err(CawaError::InvalidInput("empty corpus".into()));
    }
    Ok(raw)
}

/// Reads a JSONL corpus file. Classes are collected from document labels and
/// sorted lexicographically for dense ids.
pub fn ingest_corpus(path: &Path, min_frequency: usize) -> Result<Corpus> {
    let raw = read_raw(path)?;
    let mut class_names: BTreeSet<String> = BTreeSet::new();
    for (_, r) in &raw {
        class_names.extend(r.labels.iter().cloned());
    }
    let classes: Vec<String> = class_names.into_iter().collect();

    let tokenized: Vec<Vec<Vec<String>>> = raw
        .iter()
        .map(|(_, r)| r.sentences.iter().map(|s| tokenize(s)).collect())
        .collect();
    let vocabulary = build_vocabulary(&tokenized, min_frequency)?;
    let documents = build_documents(&raw, &tokenized, &vocabulary, &classes)?;
    Ok(Corpus { documents, classes, vocabulary })
}

/// Reads a JSONL corpus using an existing vocabulary and class list (for
/// evaluating against a trained model). Out-of-vocabulary tokens map to UNK;
/// labels outside `classes` are errors.
pub fn ingest_with(path: &Path, vocabulary: &Vocabulary, classes: &[String]) -> Result<Corpus> {
    let raw = read_raw(path)?;
    let tokenized: Vec<Vec<Vec<String>>> = raw
        .iter()
        .map(|(_, r)| r.sentences.iter().map(|s| tokenize(s)).collect())
        .collect();
    let documents = build_documents(&raw, &tokenized, vocabulary, classes)?;
    Ok(Corpus { documents, classes: classes.to_vec(), vocabulary: vocabulary.clone() })
}

fn build_documents(
    raw: &[(usize, RawRecord)],
    tokenized: &[Vec<Vec<String>>],
    vocabulary: &Vocabulary,
    classes: &[String],
) -> Result<Vec<Document>> {
    let class_id: HashMap<&str, usize> =
        classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut documents = Vec::with_capacity(raw.len());
    for ((line, r), tokens) in raw.iter().zip(tokenized) {
        let parse_err = |message: String| CawaError::Parse { line: *line, message };
        if r.sentences.is_empty() {
            return Err(parse_err(format!("document {} has no sentences", r.id)));
        }
        let sentences: Vec<Vec<u32>> = tokens
            .iter()
            .map(|s| s.iter().map(|t| vocabulary.id_of(t)).collect())
            .collect();
        if let Some(empty) = sentences.iter().position(|s| s.is_empty()) {
            return Err(parse_err(format!("document {} sentence {} is empty", r.id, empty)));
        }
        let labels: BTreeSet<usize> = r
            .labels
            .iter()
            .map(|l| {
                class_id
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| parse_err(format!("unknown class {l:?}")))
            })
            .collect::<Result<_>>()?;
        let sentence_labels = match &r.sentence_labels {
            None => None,
            Some(sl) => {
                if sl.len() != sentences.len() {
                    return Err(parse_err(format!(
                        "sentence_labels length {} != number of sentences {}",
                        sl.len(),
                        sentences.len()
                    )));
                }
                let ids: Vec<usize> = sl
                    .iter()
                    .map(|l| {
                        class_id
                            .get(l.as_str())
                            .copied()
                            .filter(|c| labels.contains(c))
                            .ok_or_else(|| {
                                parse_err(format!("sentence label {l:?} not in document labels"))
                            })
                    })
                    .collect::<Result<_>>()?;
                Some(ids)
            }
        };
        documents.push(Document { id: r.id.clone(), sentences, labels, sentence_labels });
    }
    Ok(documents)
}

/// Writes a corpus back to JSONL, inverse of `ingest_corpus` at
/// `min_frequency = 1`.
pub fn emit_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for doc in &corpus.documents {
        let record = RawRecord {
            id: doc.id.clone(),
            sentences: doc
                .sentences
                .iter()
                .map(|s| {
                    s.iter().map(|&t| corpus.vocabulary.token(t)).collect::<Vec<_>>().join(" ")
                })
                .collect(),
            labels: doc.labels.iter().map(|&c| corpus.classes[c].clone()).collect(),
            sentence_labels: doc
                .sentence_labels
                .as_ref()
                .map(|sl| sl.iter().map(|&c| corpus.classes[c].clone()).collect()),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|e| CawaError::InvalidInput(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Concatenates randomly chosen single-label documents with pairwise-distinct
/// labels into composites whose sentence labels are known by construction.
pub fn synthesize_attribution_set(
    single_label_docs: &[Document],
    docs_per_composite: (usize, usize),
    count: usize,
    seed: u64,
) -> Result<Vec<Document>> {
    let (lo, hi) = docs_per_composite;
    if lo < 2 || hi < lo {
        return Err(CawaError::InvalidInput(format!(
            "docs_per_composite range ({lo},{hi}) must satisfy 2 <= lo <= hi"
        )));
    }
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in single_label_docs.iter().enumerate() {
        if d.labels.len() != 1 {
            return Err(CawaError::InvalidInput(format!(
                "source document {} has {} labels, expected exactly 1",
                d.id,
                d.labels.len()
            )));
        }
        by_label.entry(*d.labels.iter().next().unwrap()).or_default().push(i);
    }
    let labels: Vec<usize> = by_label.keys().copied().collect();
    if labels.len() < lo {
        return Err(CawaError::InvalidInput(format!(
            "only {} distinct labels available, need at least {lo}",
            labels.len()
        )));
    }

    let mut rng = seeded_rng(seed);
    let hi = hi.min(labels.len());
    let mut composites = Vec::with_capacity(count);
    for j in 0..count {
        let k = rng.gen_range(lo..=hi);
        let mut pool = labels.clone();
        pool.shuffle(&mut rng);
        pool.truncate(k);

        let mut sentences = Vec::new();
        let mut sentence_labels = Vec::new();
        let mut doc_labels = BTreeSet::new();
        for &label in &pool {
            let candidates = &by_label[&label];
            let src = &single_label_docs[candidates[rng.gen_range(0..candidates.len())]];
            for s in &src.sentences {
                sentences.push(s.clone());
                sentence_labels.push(label);
            }
            doc_labels.insert(label);
        }
        composites.push(Document {
            id: format!("synth-{j}"),
            sentences,
            labels: doc_labels,
            sentence_labels: Some(sentence_labels),
        });
    }
    Ok(composites)
}

/// w_c = sqrt(|D| / n_c) where n_c counts documents containing class c.
pub fn class_weights<S: Scalar>(corpus: &Corpus) -> Result<Vec<S>> {
    let num_docs = corpus.documents.len() as f64;
    let mut counts = vec![0usize; corpus.num_classes()];
    for d in &corpus.documents {
        for &c in &d.labels {
            counts[c] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(c, &n)| {
            if n == 0 {
                Err(CawaError::InvalidInput(format!(
                    "class {:?} never observed in any document",
                    corpus.classes[c]
                )))
            } else {
                Ok(S::from_f64((num_docs / n as f64).sqrt()))
            }
        })
        .collect()
}

/// One epoch of document-index batches. With `shuffle`, the permutation is
/// deterministic in `seed`.
pub fn batch_iterator(corpus: &Corpus, batch_size: usize, seed: u64, shuffle: bool) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..corpus.documents.len()).collect();
    if shuffle {
        order.shuffle(&mut seeded_rng(seed));
    }
    order.chunks(batch_size).map(|c| c.to_vec()).collect()
}
