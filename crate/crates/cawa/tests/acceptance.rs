//! End-to-end acceptance suite. Each test checks one verifiable property of
//! the pipeline against an independent oracle or a scaled-down experiment on
//! synthetic data, and prints a single PASS line (visible with --nocapture).

use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::time::Instant;

use cawa::corpus::{Corpus, Document};
use cawa::metrics::{
    auc, auc_macro, auc_micro, evaluate_attribution, evaluate_classification, pppa, sov,
    AttributionReport, Segmentation,
};
use cawa::model::{ModelConfig, ModelParams};
use cawa::numeric::{gradient_check, Tensor};
use cawa::synth::{generate, SynthConfig, SynthOutput};
use cawa::training::{attention_loss, fit, CombinedLossObjective, FitResult, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// 1. Gradient correctness on a toy corpus
// ---------------------------------------------------------------------------

fn toy_corpus() -> Corpus {
    let vocab = cawa::corpus::build_vocabulary(
        &[vec![
            vec!["alpha".into(), "beta".into()],
            vec!["gamma".into(), "delta".into()],
            vec!["epsilon".into()],
        ]],
        1,
    )
    .unwrap();
    let doc = |id: &str, sentences: Vec<Vec<u32>>, labels: &[usize]| Document {
        id: id.into(),
        sentences,
        labels: labels.iter().copied().collect(),
        sentence_labels: None,
    };
    Corpus {
        documents: vec![
            doc("d0", vec![vec![1, 2], vec![3]], &[0]),
            doc("d1", vec![vec![4, 5], vec![1], vec![2, 3]], &[1]),
            doc("d2", vec![vec![5, 2]], &[0, 1]),
        ],
        classes: vec!["A".into(), "B".into()],
        vocabulary: vocab,
    }
}

#[test]
fn gradients_match_finite_differences() {
    let start = Instant::now();
    let corpus = toy_corpus();
    let mut cfg = ModelConfig::new(corpus.vocabulary.size(), corpus.num_classes());
    cfg.embedding_dim = 8;
    cfg.hidden_dim = 8;
    cfg.dropout_rate = 0.0;
    for &alpha in &[0.0, 0.5, 1.0] {
        let mut params = ModelParams::<f64>::init(&cfg, 42).unwrap();
        // scale the init up so no ReLU pre-activation sits within the finite-
        // difference step of its kink (the subgradient at 0 is one-sided)
        for p in params.params_mut() {
            for v in p.value.data_mut() {
                *v *= 8.0;
            }
        }
        let mut obj = CombinedLossObjective::new(&corpus, params, cfg.clone(), alpha).unwrap();
        let err = gradient_check(&mut obj, 220, 1e-5, 7);
        assert!(err <= 1e-4, "alpha {alpha}: max relative error {err}");
    }
    assert!(start.elapsed().as_secs() < 30, "took {:?}", start.elapsed());
    println!(
        "PASS gradient correctness: 220 probes per alpha in {{0, 0.5, 1}}, rel err <= 1e-4 ({:?})",
        start.elapsed()
    );
}

// ---------------------------------------------------------------------------
// 2. SOV/PPPA equal brute-force oracles on every short sequence pair
// ---------------------------------------------------------------------------

fn nth_sequence(mut idx: usize, n: usize, base: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for slot in v.iter_mut() {
        *slot = idx % base;
        idx /= base;
    }
    v
}

fn oracle_segments(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            spans.push((start, i - 1, labels[start]));
            start = i;
        }
    }
    spans
}

/// Position-counting reference: overlaps are computed by enumerating indices
/// instead of interval arithmetic.
fn oracle_sov(
    n: usize,
    obs_spans: &[(usize, usize, usize)],
    pred_spans: &[(usize, usize, usize)],
) -> f64 {
    let mut acc = 0.0;
    for &(a1, b1, l1) in obs_spans {
        for &(a2, b2, l2) in pred_spans {
            if l1 != l2 {
                continue;
            }
            let both = (0..n).filter(|&i| i >= a1 && i <= b1 && i >= a2 && i <= b2).count();
            if both == 0 {
                continue;
            }
            let either =
                (0..n).filter(|&i| (i >= a1 && i <= b1) || (i >= a2 && i <= b2)).count();
            let (len1, len2) = (b1 - a1 + 1, b2 - a2 + 1);
            let delta = (either - both).min(both).min(len1 / 2).min(len2 / 2);
            acc += ((both + delta) as f64) / (either as f64) * (len1 as f64);
        }
    }
    acc / n as f64
}

fn oracle_pppa(obs: &[usize], pred: &[usize]) -> f64 {
    let hits = obs.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / obs.len() as f64
}

#[test]
fn sov_and_pppa_match_oracles_exhaustively() {
    let start = Instant::now();
    let base = 3usize;
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
    for n in 1..=8usize {
        let total = base.pow(n as u32);
        // every sequence with its segmentation and oracle spans, built once
        let pool: Vec<(Vec<usize>, Segmentation, Vec<(usize, usize, usize)>)> = (0..total)
            .map(|idx| {
                let seq = nth_sequence(idx, n, base);
                let seg = Segmentation::new(seq.clone()).unwrap();
                let spans = oracle_segments(&seq);
                (seq, seg, spans)
            })
            .collect();
        let chunk = total.div_ceil(threads);
        std::thread::scope(|scope| {
            for t in 0..threads {
                let lo = t * chunk;
                let hi = ((t + 1) * chunk).min(total);
                let pool = &pool;
                scope.spawn(move || {
                    for (obs, so, obs_spans) in &pool[lo..hi] {
                        for (pred, sp, pred_spans) in pool {
                            let got_sov = sov(so, sp).unwrap();
                            let want_sov = oracle_sov(n, obs_spans, pred_spans);
                            assert_eq!(got_sov, want_sov, "sov {obs:?} vs {pred:?}");
                            let got_pppa = pppa(so, sp).unwrap();
                            assert_eq!(got_pppa, oracle_pppa(obs, pred), "pppa {obs:?} vs {pred:?}");
                        }
                    }
                });
            }
        });
    }
    assert!(start.elapsed().as_secs() < 60, "took {:?}", start.elapsed());
    println!(
        "PASS metric oracle equivalence: all sequence pairs of length <= 8 over 3 classes ({:?})",
        start.elapsed()
    );
}

// ---------------------------------------------------------------------------
// 3. SOV hand-check
// ---------------------------------------------------------------------------

#[test]
fn sov_hand_check() {
    let l = Segmentation::new(vec![0, 0, 0, 1, 1, 1]).unwrap();
    let p = Segmentation::new(vec![0, 0, 1, 1, 1, 1]).unwrap();
    assert_eq!(sov(&l, &p).unwrap(), 1.0);
    assert!((pppa(&l, &p).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(sov(&l, &l).unwrap(), 1.0);
    assert_eq!(pppa(&l, &l).unwrap(), 1.0);
    println!("PASS SOV hand-check: AAABBB vs AABBBB gives SOV=1.0, PPPA=5/6");
}

// ---------------------------------------------------------------------------
// 4 + 5. Separable-corpus recovery and ablation directionality
// ---------------------------------------------------------------------------

struct Trained {
    synth: SynthOutput,
    model_cfg: ModelConfig,
    best_alpha: f64,
    best_beta: f64,
    /// Test-set attribution of the best full model at the best beta.
    cawa: AttributionReport,
    cawa_f1: f64,
    /// Best full model evaluated at beta=0 and beta=0.1.
    cawa_sov_beta0: f64,
    cawa_sov_beta01: f64,
    /// Uniform-attention ablation at the best beta.
    uniform_pppa: f64,
    /// Pooling-off variant of the best full model at the best beta.
    nopool_sov: f64,
    elapsed_secs: u64,
}

fn experiment_model_config(synth: &SynthOutput) -> ModelConfig {
    let mut cfg = ModelConfig::new(synth.train.vocabulary.size(), synth.train.num_classes());
    cfg.embedding_dim = 64;
    cfg.hidden_dim = 64;
    cfg
}

fn experiment_train_config(alpha: f64) -> TrainConfig {
    TrainConfig { alpha, epochs: 30, seed: 0, ..Default::default() }
}

fn trained() -> &'static Trained {
    static STATE: OnceLock<Trained> = OnceLock::new();
    STATE.get_or_init(|| {
        let start = Instant::now();
        let synth = generate(&SynthConfig::default()).unwrap();
        let model_cfg = experiment_model_config(&synth);

        // coarse grid: train per alpha, score each beta on validation SOV
        let alphas = [0.1, 0.5];
        let betas = [0.1, 0.3];
        let mut fits: Vec<(f64, FitResult<f64>)> = Vec::new();
        let mut best: Option<(f64, f64, f64, usize)> = None; // (sov, alpha, beta, fit idx)
        for &alpha in &alphas {
            let fitted = fit::<f64>(&synth.train, &experiment_train_config(alpha), &model_cfg).unwrap();
            fits.push((alpha, fitted));
            let idx = fits.len() - 1;
            for &beta in &betas {
                let r =
                    evaluate_attribution(&synth.validation, &fits[idx].1.params, &model_cfg, beta)
                        .unwrap();
                if best.map_or(true, |(s, ..)| r.mean_sov > s) {
                    best = Some((r.mean_sov, alpha, beta, idx));
                }
            }
        }
        let (_, best_alpha, best_beta, best_idx) = best.unwrap();
        let best_fit = &fits[best_idx].1;

        let cawa = evaluate_attribution(&synth.test, &best_fit.params, &model_cfg, best_beta).unwrap();
        let cawa_f1 =
            evaluate_classification(&synth.test, &best_fit.params, &model_cfg, 0.5).unwrap().mean_f1;
        let cawa_sov_beta0 =
            evaluate_attribution(&synth.test, &best_fit.params, &model_cfg, 0.0).unwrap().mean_sov;
        let cawa_sov_beta01 =
            evaluate_attribution(&synth.test, &best_fit.params, &model_cfg, 0.1).unwrap().mean_sov;

        // uniform-attention ablation: no attention net, no attention loss, no pooling
        let mut uniform_cfg = model_cfg.clone();
        uniform_cfg.uniform_attention = true;
        uniform_cfg.pooling_enabled = false;
        let uniform_fit = fit::<f64>(&synth.train, &experiment_train_config(1.0), &uniform_cfg).unwrap();
        let uniform_pppa =
            evaluate_attribution(&synth.test, &uniform_fit.params, &uniform_cfg, best_beta)
                .unwrap()
                .mean_pppa;

        // pooling-off variant of the full model
        let mut nopool_cfg = model_cfg.clone();
        nopool_cfg.pooling_enabled = false;
        let nopool_fit =
            fit::<f64>(&synth.train, &experiment_train_config(best_alpha), &nopool_cfg).unwrap();
        let nopool_sov = evaluate_attribution(&synth.test, &nopool_fit.params, &nopool_cfg, best_beta)
            .unwrap()
            .mean_sov;

        Trained {
            synth,
            model_cfg,
            best_alpha,
            best_beta,
            cawa,
            cawa_f1,
            cawa_sov_beta0,
            cawa_sov_beta01,
            uniform_pppa,
            nopool_sov,
            elapsed_secs: start.elapsed().as_secs(),
        }
    })
}

#[test]
fn separable_corpus_recovery() {
    let t = trained();
    assert_eq!(t.synth.train.documents.len(), 2000);
    assert_eq!(t.synth.test.documents.len(), 200);
    assert_eq!(t.model_cfg.num_classes, 4);
    assert!(t.cawa.mean_pppa >= 0.85, "PPPA {:.4}", t.cawa.mean_pppa);
    assert!(t.cawa.mean_sov >= 0.85, "SOV {:.4}", t.cawa.mean_sov);
    assert!(t.cawa_f1 >= 0.90, "F1 {:.4}", t.cawa_f1);
    assert!(t.elapsed_secs < 900, "experiments took {}s", t.elapsed_secs);
    println!(
        "PASS separable-corpus recovery: alpha={} beta={} PPPA={:.4} SOV={:.4} F1={:.4} ({}s)",
        t.best_alpha, t.best_beta, t.cawa.mean_pppa, t.cawa.mean_sov, t.cawa_f1, t.elapsed_secs
    );
}

#[test]
fn ablation_uniform_attention_is_much_worse() {
    let t = trained();
    assert!(
        t.cawa.mean_pppa - t.uniform_pppa >= 0.15,
        "full PPPA {:.4} vs uniform PPPA {:.4}",
        t.cawa.mean_pppa,
        t.uniform_pppa
    );
    println!(
        "PASS ablation (uniform attention): PPPA {:.4} -> {:.4}",
        t.cawa.mean_pppa, t.uniform_pppa
    );
}

#[test]
fn ablation_pooling_helps_or_is_neutral() {
    let t = trained();
    assert!(
        t.nopool_sov <= t.cawa.mean_sov + 0.02,
        "pooling off SOV {:.4} vs on {:.4}",
        t.nopool_sov,
        t.cawa.mean_sov
    );
    println!(
        "PASS ablation (pooling): SOV on={:.4} off={:.4}",
        t.cawa.mean_sov, t.nopool_sov
    );
}

#[test]
fn ablation_small_beta_beats_beta_zero() {
    let t = trained();
    assert!(
        t.cawa_sov_beta01 > t.cawa_sov_beta0,
        "SOV(0.1) {:.4} vs SOV(0) {:.4}",
        t.cawa_sov_beta01,
        t.cawa_sov_beta0
    );
    println!(
        "PASS ablation (beta jump): SOV(beta=0)={:.4} < SOV(beta=0.1)={:.4}",
        t.cawa_sov_beta0, t.cawa_sov_beta01
    );
}

// ---------------------------------------------------------------------------
// 6. Attention-loss behavior on hand-built inputs
// ---------------------------------------------------------------------------

#[test]
fn attention_loss_zero_and_monotone() {
    let eps = 1e-7;
    // every class present: exactly zero, no clamp residue
    let all: BTreeSet<usize> = [0, 1, 2].into();
    let a = Tensor::from_vec(&[3, 3], vec![1.0 / 3.0; 9]).unwrap();
    assert_eq!(attention_loss(&[&a], &[&all], 3, eps), 0.0);

    // one absent class: loss grows strictly with the attention mass it gets,
    // and saturates once the mass passes the clamp
    let present: BTreeSet<usize> = [0].into();
    let masses = [0.0, 0.1, 0.3, 0.6, 0.9, 0.999, 1.0 - 1e-7, 1.0 - 1e-9, 1.0];
    let mut last = f64::NEG_INFINITY;
    let mut losses = Vec::new();
    for &m in &masses {
        let a = Tensor::from_vec(&[1, 2], vec![1.0 - m, m]).unwrap();
        let l = attention_loss(&[&a], &[&present], 2, eps);
        assert!(l >= last, "mass {m}: loss {l} < previous {last}");
        last = l;
        losses.push(l);
    }
    // strictly increasing below the clamp, flat at and beyond it
    for w in losses[..6].windows(2) {
        assert!(w[1] > w[0]);
    }
    assert_eq!(losses[6], losses[7]);
    assert_eq!(losses[7], losses[8]);
    println!("PASS attention-loss behavior: zero when all classes present, monotone in clamped mass");
}

// ---------------------------------------------------------------------------
// 7. Training determinism end to end through the CLI
// ---------------------------------------------------------------------------

#[test]
fn cli_training_is_bit_deterministic() {
    use cawa::cli::{run, Cli};
    use clap::Parser;

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let synth_args = [
        "cawa", "synth",
        "--out-dir", data.to_str().unwrap(),
        "--classes", "3",
        "--vocab-per-class", "20",
        "--train-docs", "40",
        "--count", "10",
        "--validation-count", "10",
        "--seed", "3",
    ];
    run(Cli::try_parse_from(synth_args).unwrap()).unwrap();

    let train_path = data.join("train.jsonl");
    let mut outputs = Vec::new();
    for run_dir in ["run-a", "run-b"] {
        let out = dir.path().join(run_dir);
        let args = [
            "cawa", "train",
            "--train", train_path.to_str().unwrap(),
            "--out-dir", out.to_str().unwrap(),
            "--epochs", "2",
            "--embedding-dim", "16",
            "--hidden-dim", "16",
            "--batch-size", "16",
            "--seed", "9",
        ];
        run(Cli::try_parse_from(args).unwrap()).unwrap();
        outputs.push((
            std::fs::read(out.join("checkpoint.json")).unwrap(),
            std::fs::read(out.join("loss.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "checkpoints differ");
    assert_eq!(outputs[0].1, outputs[1].1, "loss CSVs differ");
    println!("PASS determinism: identical seeds give bit-identical checkpoints and loss CSVs");
}

// ---------------------------------------------------------------------------
// 8. AUC equals the exhaustive pairwise computation
// ---------------------------------------------------------------------------

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut wins = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            wins += if scores[i] > scores[j] {
                1.0
            } else if scores[i] == scores[j] {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos as f64 * neg as f64))
}

#[test]
fn auc_matches_pairwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..1000 {
        // plain binary AUC on a short score vector (coarse grid forces ties)
        let n = rng.gen_range(1..=12);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=10) as f64 / 10.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        match (auc(&scores, &labels), pairwise_auc(&scores, &labels)) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-12, "trial {trial}: {a} vs {b}")
            }
            (a, b) => panic!("trial {trial}: degenerate mismatch {a:?} vs {b:?}"),
        }

        // pooled (micro) and per-class-averaged (macro) variants
        let docs = rng.gen_range(1..=4);
        let classes = rng.gen_range(1..=3);
        let doc_scores: Vec<Vec<f64>> = (0..docs)
            .map(|_| (0..classes).map(|_| rng.gen_range(0..=10) as f64 / 10.0).collect())
            .collect();
        let doc_labels: Vec<BTreeSet<usize>> = (0..docs)
            .map(|_| (0..classes).filter(|_| rng.gen_bool(0.5)).collect())
            .collect();
        let refs: Vec<&BTreeSet<usize>> = doc_labels.iter().collect();

        let mut flat_s = Vec::new();
        let mut flat_l = Vec::new();
        for (s, y) in doc_scores.iter().zip(&doc_labels) {
            for c in 0..classes {
                flat_s.push(s[c]);
                flat_l.push(y.contains(&c));
            }
        }
        match (auc_micro(&doc_scores, &refs, classes), pairwise_auc(&flat_s, &flat_l)) {
            (Err(_), None) => {}
            (Ok(a), Some(b)) => assert!((a - b).abs() <= 1e-12, "micro trial {trial}"),
            (a, b) => panic!("micro trial {trial}: {a:?} vs {b:?}"),
        }

        let mut sum = 0.0;
        let mut valid = 0;
        for c in 0..classes {
            let s: Vec<f64> = doc_scores.iter().map(|v| v[c]).collect();
            let l: Vec<bool> = doc_labels.iter().map(|y| y.contains(&c)).collect();
            if let Some(a) = pairwise_auc(&s, &l) {
                sum += a;
                valid += 1;
            }
        }
        match (auc_macro(&doc_scores, &refs, classes), valid) {
            (Err(_), 0) => {}
            (Ok(a), v) if v > 0 => {
                assert!((a - sum / v as f64).abs() <= 1e-12, "macro trial {trial}")
            }
            (a, v) => panic!("macro trial {trial}: {a:?} with {v} valid classes"),
        }
    }
    println!("PASS AUC definition: micro/macro equal exhaustive pairwise comparison on 1000 trials");
}
