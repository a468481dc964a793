//! Command-line pipeline: corpus synthesis, training, evaluation, grid
//! search, and ablation curves. All tabular outputs are CSV with a header
//! row; every run is reproducible from its seed and config.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::corpus::{emit_corpus, ingest_corpus, ingest_with, Corpus};
use crate::inference::{label_sentences, predict_document_classes, InferenceConfig};
use crate::metrics::{
    evaluate_attribution, evaluate_classification, pppa, sov, Segmentation,
};
use crate::model::{forward, ModelConfig};
use crate::numeric::rng::seeded_rng;
use crate::synth::{generate, SynthConfig};
use crate::training::{fit, fit_continue, grid_search, FitResult, TrainConfig};

/// f64 end to end; gradients are checked at 1e-4 relative error.
type S = f64;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or missing inputs; exit code 2.
    Usage(String),
    /// Failure during a well-formed run; exit code 1.
    Runtime(String),
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::error::CawaError> for CliError {
    fn from(e: crate::error::CawaError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "cawa", version, about = "Sentence-level credit attribution from document-level multilabels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic train/validation/test corpora with ground truth.
    Synth(SynthArgs),
    /// Train a model and write a checkpoint plus a per-epoch loss CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint: attribution and/or classification metrics.
    Eval(EvalArgs),
    /// Grid search over alpha (training) and beta (inference) on validation SOV.
    Grid(GridArgs),
    /// SOV/PPPA/AUC sweeps over beta and alpha, with pooling on/off variants.
    Curves(CurvesArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Root seed; all subsystem randomness derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// key=value config file; explicit flags win over file entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Regenerate from a previously written manifest (other generator flags ignored).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long = "vocab-per-class")]
    pub vocab_per_class: Option<usize>,
    #[arg(long = "train-docs")]
    pub train_docs: Option<usize>,
    #[arg(long = "labels-per-doc")]
    pub labels_per_doc: Option<usize>,
    #[arg(long = "block-min")]
    pub block_min: Option<usize>,
    #[arg(long = "block-max")]
    pub block_max: Option<usize>,
    #[arg(long = "words-per-sentence")]
    pub words_per_sentence: Option<usize>,
    #[arg(long = "validation-count")]
    pub validation_count: Option<usize>,
    /// Number of test composites.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long = "mix-min")]
    pub mix_min: Option<usize>,
    #[arg(long = "mix-max")]
    pub mix_max: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainFlags {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<f64>,
    #[arg(long = "embedding-dim")]
    pub embedding_dim: Option<usize>,
    #[arg(long = "hidden-dim")]
    pub hidden_dim: Option<usize>,
    #[arg(long = "pool-kernel")]
    pub pool_kernel: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Disable the average-pooling layer over sentence logits.
    #[arg(long = "no-pooling")]
    pub no_pooling: bool,
    /// Uniform-attention ablation: every sentence weighted 1/|d|.
    #[arg(long = "uniform-attention")]
    pub uniform_attention: bool,
    /// Vocabulary frequency threshold at ingestion.
    #[arg(long = "min-frequency")]
    pub min_frequency: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Continue training from an existing checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Attribution metrics (SOV/PPPA); requires sentence_labels in the test set.
    #[arg(long)]
    pub attrib: bool,
    /// Classification metrics (F1, micro/macro AUC).
    #[arg(long)]
    pub classify: bool,
    /// Also write per-document metrics.
    #[arg(long = "per-doc")]
    pub per_doc: bool,
    /// Also write a JSONL prediction dump.
    #[arg(long = "dump-predictions")]
    pub dump_predictions: bool,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    /// Comma-separated alpha values, e.g. 0.0,0.1,0.5.
    #[arg(long = "alpha-grid")]
    pub alpha_grid: Option<String>,
    #[arg(long = "beta-grid")]
    pub beta_grid: Option<String>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args, Debug, Clone)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub train: PathBuf,
    /// Test/validation set with sentence_labels.
    #[arg(long)]
    pub test: PathBuf,
    /// Fixed alpha for the beta sweep.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "alpha-grid")]
    pub alpha_grid: Option<String>,
    #[arg(long = "beta-grid")]
    pub beta_grid: Option<String>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

/// key=value config file entries; flags take precedence.
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("config line {}: expected key=value", i + 1))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileConfig(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}"))),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("no such file: {}", path.display())));
    }
    Ok(())
}

fn ensure_out_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Usage(format!("cannot create out dir {}: {e}", path.display())))
}

fn parse_grid(spec: Option<&str>, default: &[f64]) -> Result<Vec<f64>, CliError> {
    match spec {
        None => Ok(default.to_vec()),
        Some(s) => s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad grid value {v:?}")))
            })
            .collect(),
    }
}

fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

struct ResolvedTraining {
    train_config: TrainConfig,
    embedding_dim: usize,
    hidden_dim: usize,
    pool_kernel: usize,
    dropout: f64,
    pooling_enabled: bool,
    uniform_attention: bool,
    min_frequency: usize,
}

fn resolve_training(
    flags: &TrainFlags,
    seed: Option<u64>,
    file: &FileConfig,
) -> Result<ResolvedTraining, CliError> {
    let defaults = TrainConfig::default();
    let train_config = TrainConfig {
        alpha: pick(flags.alpha, file.get("alpha")?, defaults.alpha),
        epochs: pick(flags.epochs, file.get("epochs")?, defaults.epochs),
        batch_size: pick(flags.batch_size, file.get("batch_size")?, defaults.batch_size),
        learning_rate: pick(flags.learning_rate, file.get("learning_rate")?, defaults.learning_rate),
        seed: pick(seed, file.get("seed")?, 0),
        log_clamp: defaults.log_clamp,
    };
    Ok(ResolvedTraining {
        train_config,
        embedding_dim: pick(flags.embedding_dim, file.get("embedding_dim")?, 256),
        hidden_dim: pick(flags.hidden_dim, file.get("hidden_dim")?, 256),
        pool_kernel: pick(flags.pool_kernel, file.get("pool_kernel")?, 3),
        dropout: pick(flags.dropout, file.get("dropout")?, 0.5),
        pooling_enabled: !(flags.no_pooling || file.get("no_pooling")?.unwrap_or(false)),
        uniform_attention: flags.uniform_attention
            || file.get("uniform_attention")?.unwrap_or(false),
        min_frequency: pick(flags.min_frequency, file.get("min_frequency")?, 1),
    })
}

impl ResolvedTraining {
    fn model_config(&self, vocab_size: usize, num_classes: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: self.embedding_dim,
            hidden_dim: self.hidden_dim,
            num_classes,
            vocab_size,
            pool_kernel: self.pool_kernel,
            dropout_rate: self.dropout,
            pooling_enabled: self.pooling_enabled,
            uniform_attention: self.uniform_attention,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Curves(args) => cmd_curves(args),
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    generator: SynthConfig,
    files: Vec<String>,
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let cfg = if let Some(manifest_path) = &args.manifest {
        require_file(manifest_path)?;
        let text = fs::read_to_string(manifest_path)
            .map_err(|e| CliError::Usage(format!("cannot read manifest: {e}")))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad manifest: {e}")))?;
        manifest.generator
    } else {
        let d = SynthConfig::default();
        SynthConfig {
            num_classes: pick(args.classes, file.get("classes")?, d.num_classes),
            vocab_per_class: pick(args.vocab_per_class, file.get("vocab_per_class")?, d.vocab_per_class),
            train_docs: pick(args.train_docs, file.get("train_docs")?, d.train_docs),
            labels_per_train_doc: pick(args.labels_per_doc, file.get("labels_per_doc")?, d.labels_per_train_doc),
            sentences_per_block_min: pick(args.block_min, file.get("block_min")?, d.sentences_per_block_min),
            sentences_per_block_max: pick(args.block_max, file.get("block_max")?, d.sentences_per_block_max),
            words_per_sentence: pick(args.words_per_sentence, file.get("words_per_sentence")?, d.words_per_sentence),
            validation_composites: pick(args.validation_count, file.get("validation_count")?, d.validation_composites),
            test_composites: pick(args.count, file.get("count")?, d.test_composites),
            docs_per_composite: (
                pick(args.mix_min, file.get("mix_min")?, d.docs_per_composite.0),
                pick(args.mix_max, file.get("mix_max")?, d.docs_per_composite.1),
            ),
            seed: pick(args.common.seed, file.get("seed")?, d.seed),
        }
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    ensure_out_dir(&args.common.out_dir)?;

    let out = generate(&cfg)?;
    let dir = &args.common.out_dir;
    emit_corpus(&out.train, &dir.join("train.jsonl"))?;
    emit_corpus(&out.validation, &dir.join("validation.jsonl"))?;
    emit_corpus(&out.test, &dir.join("test.jsonl"))?;
    let manifest = Manifest {
        generator: cfg,
        files: vec!["train.jsonl".into(), "validation.jsonl".into(), "test.jsonl".into()],
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("manifest.json"), &text)?;
    println!(
        "synth: wrote {} train, {} validation, {} test documents to {}",
        out.train.documents.len(),
        out.validation.documents.len(),
        out.test.documents.len(),
        dir.display()
    );
    Ok(())
}

fn loss_csv(log: &[crate::training::LossBreakdown<S>]) -> String {
    let mut csv = String::from("epoch,l_c,l_s,l\n");
    for (e, b) in log.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", e + 1, b.classification, b.attention, b.total));
    }
    csv
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let resolved = resolve_training(&args.flags, args.common.seed, &file)?;
    require_file(&args.train)?;
    ensure_out_dir(&args.common.out_dir)?;

    let (mut fitted, corpus) = match &args.resume {
        None => {
            let corpus = ingest_corpus(&args.train, resolved.min_frequency)?;
            let model_config = resolved.model_config(corpus.vocabulary.size(), corpus.num_classes());
            let fitted: FitResult<S> = fit(&corpus, &resolved.train_config, &model_config)?;
            (fitted, corpus)
        }
        Some(ckpt_path) => {
            require_file(ckpt_path)?;
            let loaded = checkpoint::load::<S>(ckpt_path)?;
            let corpus = ingest_with(&args.train, &loaded.vocabulary, &loaded.classes)?;
            let mut state = FitResult {
                params: loaded.params,
                adam: loaded.adam,
                epoch_log: Vec::new(),
                epochs_trained: loaded.epochs_trained,
            };
            fit_continue(&mut state, &corpus, &resolved.train_config, &loaded.model_config)?;
            (state, corpus)
        }
    };

    let model_config = resolved.model_config(corpus.vocabulary.size(), corpus.num_classes());
    let ckpt = args.common.out_dir.join("checkpoint.json");
    checkpoint::save(
        &ckpt,
        &mut fitted.params,
        &fitted.adam,
        &model_config,
        &corpus.classes,
        &corpus.vocabulary,
        fitted.epochs_trained,
    )?;
    write_file(&args.common.out_dir.join("loss.csv"), &loss_csv(&fitted.epoch_log))?;
    let last = fitted.epoch_log.last().unwrap();
    println!(
        "train: {} epochs, final loss {:.6} (L_C {:.6}, L_S {:.6}); checkpoint at {}",
        fitted.epochs_trained,
        last.total,
        last.classification,
        last.attention,
        ckpt.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    require_file(&args.test)?;
    require_file(&args.checkpoint)?;
    ensure_out_dir(&args.common.out_dir)?;
    let file = FileConfig::load(args.common.config.as_deref())?;
    let beta = pick(args.beta, file.get("beta")?, 0.5);
    let threshold = pick(args.threshold, file.get("threshold")?, 0.5);
    let infer = InferenceConfig { beta, decision_threshold: threshold };
    infer.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let (do_attrib, do_classify) = if args.attrib || args.classify {
        (args.attrib, args.classify)
    } else {
        (true, true)
    };

    let loaded = checkpoint::load::<S>(&args.checkpoint)?;
    let corpus = ingest_with(&args.test, &loaded.vocabulary, &loaded.classes)?;
    let n = corpus.documents.len();

    let mut rows = Vec::new();
    if do_attrib {
        let report = evaluate_attribution(&corpus, &loaded.params, &loaded.model_config, beta)?;
        rows.push(("sov", report.mean_sov));
        rows.push(("pppa", report.mean_pppa));
    }
    if do_classify {
        let report =
            evaluate_classification(&corpus, &loaded.params, &loaded.model_config, threshold)?;
        rows.push(("f1", report.mean_f1));
        rows.push(("auc_micro", report.auc_micro));
        rows.push(("auc_macro", report.auc_macro));
    }
    let mut csv = String::from("metric,value,n_documents\n");
    for (name, value) in &rows {
        csv.push_str(&format!("{name},{value},{n}\n"));
        println!("eval: {name} = {value:.6}");
    }
    write_file(&args.common.out_dir.join("metrics.csv"), &csv)?;

    if args.per_doc || args.dump_predictions {
        write_per_document_outputs(&args, &corpus, &loaded, &infer, do_attrib)?;
    }
    Ok(())
}

fn write_per_document_outputs(
    args: &EvalArgs,
    corpus: &Corpus,
    loaded: &checkpoint::Checkpoint<S>,
    infer: &InferenceConfig,
    attrib: bool,
) -> Result<(), CliError> {
    let mut detail = String::from("id,sov,pppa,f1\n");
    let mut dump = Vec::new();

    #[derive(Serialize)]
    struct PredictionRecord {
        id: String,
        predicted_labels: Vec<String>,
        sentence_labels_pred: Vec<String>,
        scores: Vec<f64>,
    }

    for doc in &corpus.documents {
        let trace = forward(doc, &loaded.params, &loaded.model_config, &mut seeded_rng(0), false)?;
        let labeling = label_sentences(&trace, infer);
        let predicted_set = predict_document_classes(&trace.scores, infer.decision_threshold);
        let f1 = crate::metrics::f1_document(&predicted_set, &doc.labels);
        let (doc_sov, doc_pppa) = match (&doc.sentence_labels, attrib) {
            (Some(truth), true) => {
                let observed = Segmentation::new(truth.clone())?;
                let predicted = Segmentation::new(labeling.labels.clone())?;
                (sov(&observed, &predicted)?, pppa(&observed, &predicted)?)
            }
            _ => (f64::NAN, f64::NAN),
        };
        detail.push_str(&format!("{},{},{},{}\n", doc.id, doc_sov, doc_pppa, f1));
        dump.push(PredictionRecord {
            id: doc.id.clone(),
            predicted_labels: predicted_set.iter().map(|&c| corpus.classes[c].clone()).collect(),
            sentence_labels_pred: labeling
                .labels
                .iter()
                .map(|&c| corpus.classes[c].clone())
                .collect(),
            scores: trace.scores.clone(),
        });
    }
    if args.per_doc {
        write_file(&args.common.out_dir.join("per_document.csv"), &detail)?;
    }
    if args.dump_predictions {
        let path = args.common.out_dir.join("predictions.jsonl");
        let mut out = fs::File::create(&path)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        for record in &dump {
            serde_json::to_writer(&mut out, record).map_err(|e| CliError::Runtime(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<(), CliError> {
    require_file(&args.train)?;
    require_file(&args.validation)?;
    ensure_out_dir(&args.common.out_dir)?;
    let file = FileConfig::load(args.common.config.as_deref())?;
    let resolved = resolve_training(&args.flags, args.common.seed, &file)?;
    let alpha_grid = parse_grid(args.alpha_grid.as_deref(), &default_grid())?;
    let beta_grid = parse_grid(args.beta_grid.as_deref(), &default_grid())?;

    let train = ingest_corpus(&args.train, resolved.min_frequency)?;
    let validation = ingest_with(&args.validation, &train.vocabulary, &train.classes)?;
    let model_config = resolved.model_config(train.vocabulary.size(), train.num_classes());
    let result = grid_search::<S>(
        &train,
        &validation,
        &alpha_grid,
        &beta_grid,
        &resolved.train_config,
        &model_config,
    )?;

    let mut csv = String::from("alpha,beta,sov,pppa\n");
    for row in &result.rows {
        csv.push_str(&format!("{},{},{},{}\n", row.alpha, row.beta, row.sov, row.pppa));
    }
    write_file(&args.common.out_dir.join("grid.csv"), &csv)?;
    println!(
        "grid: best alpha={} beta={} (validation SOV {:.6})",
        result.best_alpha, result.best_beta, result.best_sov
    );
    Ok(())
}

fn cmd_curves(args: CurvesArgs) -> Result<(), CliError> {
    require_file(&args.train)?;
    require_file(&args.test)?;
    ensure_out_dir(&args.common.out_dir)?;
    let file = FileConfig::load(args.common.config.as_deref())?;
    let resolved = resolve_training(&args.flags, args.common.seed, &file)?;
    let fixed_alpha = pick(args.alpha, file.get("alpha")?, 0.5);
    let alpha_grid = parse_grid(args.alpha_grid.as_deref(), &default_grid())?;
    let beta_grid = parse_grid(args.beta_grid.as_deref(), &default_grid())?;

    let train = ingest_corpus(&args.train, resolved.min_frequency)?;
    let test = ingest_with(&args.test, &train.vocabulary, &train.classes)?;

    let fit_variant = |alpha: f64, pooling: bool| -> Result<FitResult<S>, CliError> {
        let mut model_config = resolved.model_config(train.vocabulary.size(), train.num_classes());
        model_config.pooling_enabled = pooling;
        let mut cfg = resolved.train_config.clone();
        cfg.alpha = alpha;
        Ok(fit(&train, &cfg, &model_config)?)
    };
    let eval_variant = |fitted: &FitResult<S>, pooling: bool, beta: f64| {
        let mut model_config = resolved.model_config(train.vocabulary.size(), train.num_classes());
        model_config.pooling_enabled = pooling;
        evaluate_attribution(&test, &fitted.params, &model_config, beta)
    };

    // beta sweep at fixed alpha, pooling on/off
    let mut beta_csv = String::from("beta,pooling,sov,pppa,auc_micro,auc_macro\n");
    for &pooling in &[true, false] {
        let fitted = fit_variant(fixed_alpha, pooling)?;
        let mut model_config = resolved.model_config(train.vocabulary.size(), train.num_classes());
        model_config.pooling_enabled = pooling;
        let class_report = evaluate_classification(&test, &fitted.params, &model_config, 0.5)?;
        for &beta in &beta_grid {
            let r = eval_variant(&fitted, pooling, beta)?;
            beta_csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                beta,
                if pooling { "on" } else { "off" },
                r.mean_sov,
                r.mean_pppa,
                class_report.auc_micro,
                class_report.auc_macro
            ));
        }
    }
    write_file(&args.common.out_dir.join("curves_beta.csv"), &beta_csv)?;

    // alpha sweep: best SOV over beta, and the beta achieving it
    let mut alpha_csv = String::from("alpha,pooling,best_beta,sov,pppa\n");
    for &alpha in &alpha_grid {
        for &pooling in &[true, false] {
            let fitted = fit_variant(alpha, pooling)?;
            let mut best: Option<(f64, f64, f64)> = None;
            for &beta in &beta_grid {
                let r = eval_variant(&fitted, pooling, beta)?;
                if best.map_or(true, |(_, s, _)| r.mean_sov > s) {
                    best = Some((beta, r.mean_sov, r.mean_pppa));
                }
            }
            let (best_beta, best_sov, best_pppa) = best.unwrap();
            alpha_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                alpha,
                if pooling { "on" } else { "off" },
                best_beta,
                best_sov,
                best_pppa
            ));
        }
    }
    write_file(&args.common.out_dir.join("curves_alpha.csv"), &alpha_csv)?;
    println!("curves: wrote curves_beta.csv and curves_alpha.csv");
    Ok(())
}
