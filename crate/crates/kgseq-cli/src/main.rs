//! `kgseq` — train, evaluate, and inspect sequence-scoring models for
//! knowledge-graph completion.

#[macro_use]
mod output;
mod config;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kgseq::baselines::{train_baseline, BaselineConfig, BaselineKind};
use kgseq::encoder::save_named_tensors;
use kgseq::eval::{
    link_prediction_eval, relation_prediction_eval, triple_classification_eval, tune_threshold,
    EvalOptions, RankingReport, Scorer, TruthOracle,
};
use kgseq::par;
use kgseq::store::{load_dataset, KnowledgeGraph, LabeledTriple, NegativeSamplingConfig, Split, TextSource};
use kgseq::tasks::{train, Model, ModelScorer, Task};
use kgseq::textseq::{build_vocab, pack_pair, pack_triple, TextIndex, Vocabulary};

use config::RunConfig;
use output::{per_query_csv, write_json, MetricsJson};

#[derive(Parser)]
#[command(
    name = "kgseq",
    version,
    about = "Knowledge-graph completion with transformer triple scoring",
    after_help = "Set KGSEQ_LOG=error|warn|info|debug to control stderr verbosity."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the bundled benchmark-scale synthetic dataset.
    Synth(SynthArgs),
    /// Build a vocabulary and dataset summary from a benchmark directory.
    Prepare(PrepareArgs),
    /// Fine-tune a model and write a checkpoint plus a loss log.
    Train(TrainArgs),
    /// Run ranking evaluation for a checkpoint (or the built-in oracle).
    Evaluate(EvaluateArgs),
    /// Triple classification accuracy for a checkpoint.
    Classify(ClassifyArgs),
    /// Export per-head [CLS] attention weights for one input.
    AttnDump(AttnDumpArgs),
    /// Train and evaluate a translational baseline.
    Baseline(BaselineArgs),
}

fn parse_task(s: &str) -> Result<Task> {
    match s {
        "triple_classification" => Ok(Task::TripleClassification),
        "link_prediction" => Ok(Task::LinkPrediction),
        "relation_prediction" => Ok(Task::RelationPrediction),
        other => bail!(
            "unknown task `{other}` (expected triple_classification, link_prediction, or relation_prediction)"
        ),
    }
}

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        other => bail!("unknown split `{other}` (expected train, dev, or test)"),
    }
}

fn parse_text_source(s: &str) -> Result<TextSource> {
    match s {
        "names" => Ok(TextSource::Names),
        "descriptions" => Ok(TextSource::Descriptions),
        other => bail!("unknown text source `{other}` (expected names or descriptions)"),
    }
}

fn parse_kind(s: &str) -> Result<BaselineKind> {
    match s {
        "transe" => Ok(BaselineKind::TransE),
        "distmult" => Ok(BaselineKind::DistMult),
        other => bail!("unknown baseline kind `{other}` (expected transe or distmult)"),
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the generated dataset.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct PrepareArgs {
    /// Dataset directory.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for vocab.txt and summary.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    #[arg(long, default_value = "names", value_parser = parse_text_source)]
    text_source: TextSource,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Output directory for checkpoint.kgseq, loss.jsonl, and run.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Train on a uniform subsample of the training split.
    #[arg(long)]
    train_proportion: Option<f64>,
    /// Worker threads (0 = library default). Results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Load the vocabulary from a file instead of learning it.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    num_heads: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    ffn_size: Option<usize>,
    #[arg(long)]
    max_positions: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long, value_parser = parse_text_source)]
    text_source: Option<TextSource>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, required_unless_present = "self_test")]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    /// Defaults to the task recorded in the checkpoint.
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    #[arg(long, value_parser = parse_text_source)]
    text_source: Option<TextSource>,
    /// Metrics JSON file (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-query CSV (query triple, corruption side, rank).
    #[arg(long)]
    per_query: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    eval_batch: usize,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Raw (unfiltered) candidate sets instead of the filtered default.
    #[arg(long)]
    raw: bool,
    /// Replace the model with a truth-set oracle; a harness sanity check
    /// that must report a mean rank of exactly 1.
    #[arg(long)]
    self_test: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    #[arg(long, value_parser = parse_text_source)]
    text_source: Option<TextSource>,
    /// Decision threshold on the positive-class score.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Tune the threshold on the dev split first.
    #[arg(long)]
    tune_threshold: bool,
    /// Seed for generating negatives when the split has none.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct AttnDumpArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Head entity text.
    #[arg(long)]
    head: String,
    /// Relation text; omit for a pair-mode dump.
    #[arg(long)]
    relation: Option<String>,
    /// Tail entity text.
    #[arg(long)]
    tail: String,
    /// Layer to export (0-based; defaults to the last layer).
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: BaselineKind,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "link_prediction", value_parser = parse_task)]
    task: Task,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    split: Split,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    negatives: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save the trained embeddings in the shared checkpoint container.
    #[arg(long)]
    save: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    raw: bool,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Prepare(args) => cmd_prepare(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Classify(args) => cmd_classify(args),
        Command::AttnDump(args) => cmd_attn_dump(args),
        Command::Baseline(args) => cmd_baseline(args),
    };
    if let Err(err) = result {
        eprintln!("kgseq error: {err:#}");
        std::process::exit(1);
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let summary = kgseq::synth::write_benchmark(&args.out, args.seed)
        .with_context(|| format!("writing dataset to {}", args.out.display()))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_prepare(args: PrepareArgs) -> Result<()> {
    let kg = load_dataset(&args.dataset, args.text_source)?;
    let vocab = build_vocab(&kg, args.vocab_size)?;
    std::fs::create_dir_all(&args.out)?;
    let vocab_path = args.out.join("vocab.txt");
    vocab.write_file(&vocab_path)?;
    let summary = serde_json::json!({
        "entities": kg.num_entities(),
        "relations": kg.num_relations(),
        "train": kg.split(Split::Train).len(),
        "dev": kg.split(Split::Dev).len(),
        "test": kg.split(Split::Test).len(),
        "vocab_size": vocab.len(),
        "vocab_file": vocab_path,
    });
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut run = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    // Flags override file values.
    if let Some(v) = args.dataset {
        run.dataset = Some(v);
    }
    if let Some(v) = args.task {
        run.task = v;
    }
    if let Some(v) = args.seed {
        run.seed = v;
    }
    if let Some(v) = args.train_proportion {
        run.train_proportion = v;
    }
    if let Some(v) = args.workers {
        run.workers = v;
    }
    if args.epochs.is_some() {
        run.epochs = args.epochs;
    }
    if args.negatives.is_some() {
        run.negatives = args.negatives;
    }
    if let Some(v) = args.learning_rate {
        run.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        run.batch_size = v;
    }
    if let Some(v) = args.vocab_size {
        run.vocab_size = v;
    }
    if let Some(v) = args.max_len {
        run.max_len = v;
    }
    if let Some(v) = args.num_layers {
        run.num_layers = v;
    }
    if let Some(v) = args.num_heads {
        run.num_heads = v;
    }
    if let Some(v) = args.hidden_size {
        run.hidden_size = v;
    }
    if let Some(v) = args.ffn_size {
        run.ffn_size = v;
    }
    if let Some(v) = args.max_positions {
        run.max_positions = v;
    }
    if let Some(v) = args.dropout {
        run.dropout = v;
    }
    if let Some(v) = args.warmup_fraction {
        run.warmup_fraction = v;
    }
    if let Some(v) = args.text_source {
        run.text_source = v;
    }

    let dataset = run
        .dataset
        .clone()
        .ok_or_else(|| anyhow!("no dataset given (use --dataset or the config file)"))?;
    let started = Instant::now();
    let mut kg = load_dataset(&dataset, run.text_source)?;
    if run.train_proportion < 1.0 {
        kg = kg.subsample_training(run.train_proportion, run.seed)?;
        info!(
            "subsampled training split to {} triples (proportion {})",
            kg.split(Split::Train).len(),
            run.train_proportion
        );
    }
    let vocab = match &args.vocab {
        Some(path) => Vocabulary::read_file(path)?,
        None => build_vocab(&kg, run.vocab_size)?,
    };
    let text = TextIndex::build(&kg, &vocab);
    let packing = run.packing()?;
    let encoder_cfg = run.encoder_config(vocab.len());
    let train_cfg = run.train_config();

    let mut model = Model::<f32>::for_task(encoder_cfg, run.task, kg.num_relations())?;
    info!(
        "training {} on {} ({} parameters, {} train triples)",
        run.task.as_str(),
        dataset.display(),
        model.params.num_parameters(),
        kg.split(Split::Train).len()
    );
    let log = par::with_workers(run.workers, || {
        train(&mut model, &kg, &text, run.task, &packing, &train_cfg)
    })?;

    std::fs::create_dir_all(&args.out)?;
    let mut jsonl = String::new();
    for line in &log {
        jsonl.push_str(&serde_json::to_string(line)?);
        jsonl.push('\n');
    }
    output::atomic_write(&args.out.join("loss.jsonl"), jsonl.as_bytes())?;

    let checkpoint = args.out.join("checkpoint.kgseq");
    model.save(&vocab, run.task, &packing, &checkpoint)?;
    let summary = serde_json::json!({
        "task": run.task,
        "dataset": dataset,
        "train_triples": kg.split(Split::Train).len(),
        "epochs": log.len(),
        "final_loss": log.last().map(|e| e.mean_loss),
        "checkpoint": checkpoint,
        "wall_ms": started.elapsed().as_millis(),
        "config": run,
    });
    write_json(&args.out.join("run.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Ranking evaluation shared by `evaluate` and `baseline`.
fn run_ranking<S: Scorer>(
    scorer: &S,
    kg: &KnowledgeGraph,
    task: Task,
    split: Split,
    filtered: bool,
) -> Result<RankingReport> {
    let opts = EvalOptions { filtered };
    let report = match task {
        Task::LinkPrediction | Task::TripleClassification => {
            link_prediction_eval(scorer, kg, split, &opts)?
        }
        Task::RelationPrediction => relation_prediction_eval(scorer, kg, split, &opts)?,
    };
    Ok(report)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let started = Instant::now();

    if args.self_test {
        let kg = load_dataset(&args.dataset, args.text_source.unwrap_or(TextSource::Names))?;
        let task = args.task.unwrap_or(Task::LinkPrediction);
        let oracle = TruthOracle { kg: &kg };
        let report = par::with_workers(args.workers, || {
            run_ranking(&oracle, &kg, task, args.split, !args.raw)
        })?;
        return emit_metrics(&args, &kg, task, report, started.elapsed().as_millis());
    }

    let checkpoint = args.checkpoint.as_ref().expect("clap enforces presence");
    let (model, vocab, stored_task, packing) = Model::load(checkpoint)?;
    let task = args.task.unwrap_or(stored_task);
    let text_source = args.text_source.unwrap_or(TextSource::Names);
    let kg = load_dataset(&args.dataset, text_source)?;

    // A relation head must match the dataset's relation inventory.
    if let kgseq::tasks::Head::Relation(h) = &model.head {
        if h.weight.rows() != kg.num_relations() {
            bail!(
                "checkpoint/dataset mismatch: relation head covers {} relations, dataset has {}",
                h.weight.rows(),
                kg.num_relations()
            );
        }
    }
    if task == Task::RelationPrediction && !matches!(model.head, kgseq::tasks::Head::Relation(_)) {
        bail!("checkpoint/dataset mismatch: relation prediction needs a relation-head checkpoint");
    }
    if task != Task::RelationPrediction && !matches!(model.head, kgseq::tasks::Head::Triple(_)) {
        bail!("checkpoint/dataset mismatch: {} needs a triple-head checkpoint", task.as_str());
    }

    let text = TextIndex::build(&kg, &vocab);
    let mut scorer = ModelScorer::new(&model, &text, packing);
    scorer.batch_size = args.eval_batch;
    let report = par::with_workers(args.workers, || {
        run_ranking(&scorer, &kg, task, args.split, !args.raw)
    })?;
    emit_metrics(&args, &kg, task, report, started.elapsed().as_millis())
}

fn emit_metrics(
    args: &EvaluateArgs,
    kg: &KnowledgeGraph,
    task: Task,
    report: RankingReport,
    wall_ms: u128,
) -> Result<()> {
    let metrics = MetricsJson::from_report(
        task.as_str(),
        args.split.as_str(),
        !args.raw,
        &report,
        wall_ms,
    );
    if let Some(path) = &args.per_query {
        output::atomic_write(path, per_query_csv(kg, &report).as_bytes())?;
    }
    if let Some(path) = &args.out {
        write_json(path, &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

/// Labeled examples for a split: file labels when present, otherwise one
/// seeded corruption per positive.
fn labeled_examples(kg: &KnowledgeGraph, split: Split, seed: u64) -> Result<Vec<LabeledTriple>> {
    if kg.split_has_negatives(split) {
        return Ok(kg.labeled_split(split));
    }
    info!(
        "{} split has no labeled negatives; generating one corruption per positive",
        split.as_str()
    );
    let mut out = Vec::new();
    for (i, &t) in kg.split(split).iter().enumerate() {
        out.push(LabeledTriple {
            triple: t,
            label: true,
        });
        let cfg = NegativeSamplingConfig {
            negatives_per_positive: 1,
            corruption: kgseq::store::Corruption::HeadOrTailUniform,
            seed: kgseq::rng::split_seed(seed, i as u64),
            max_rejection_attempts: 64,
        };
        let sample = kg.sample_negatives(t, &cfg)?;
        if sample.missing > 0 {
            warn_log!("could not find a negative for {t}");
        }
        out.extend(sample.negatives);
    }
    Ok(out)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let started = Instant::now();
    let (model, vocab, _task, packing) = Model::load(&args.checkpoint)?;
    if !matches!(model.head, kgseq::tasks::Head::Triple(_)) {
        bail!("classification needs a triple-head checkpoint");
    }
    let text_source = args.text_source.unwrap_or(TextSource::Names);
    let kg = load_dataset(&args.dataset, text_source)?;
    let text = TextIndex::build(&kg, &vocab);
    let scorer = ModelScorer::new(&model, &text, packing);

    let (threshold, accuracy, n) = par::with_workers(args.workers, || -> Result<_> {
        let threshold = if args.tune_threshold {
            let dev = labeled_examples(&kg, Split::Dev, args.seed)?;
            tune_threshold(&scorer, &dev)?
        } else {
            args.threshold
        };
        let labeled = labeled_examples(&kg, args.split, args.seed)?;
        let accuracy = triple_classification_eval(&scorer, &labeled, threshold)?;
        Ok((threshold, accuracy, labeled.len()))
    })?;

    let metrics = serde_json::json!({
        "task": "triple_classification",
        "split": args.split.as_str(),
        "accuracy": accuracy,
        "threshold": threshold,
        "num_examples": n,
        "wall_ms": started.elapsed().as_millis(),
    });
    if let Some(path) = &args.out {
        write_json(path, &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn cmd_attn_dump(args: AttnDumpArgs) -> Result<()> {
    let (model, vocab, _task, packing) = Model::load(&args.checkpoint)?;
    let packed = match &args.relation {
        Some(rel) => pack_triple(&vocab, &args.head, rel, &args.tail, &packing)?,
        None => pack_pair(&vocab, &args.head, &args.tail, &packing)?,
    };
    let layer = args.layer.unwrap_or(model.config.num_layers - 1);
    let outputs = kgseq::encoder::forward_eval(&model.params, &model.config, &[packed.clone()])?;
    let heads = outputs[0].cls_attention(layer)?;
    let tokens: Vec<String> = packed
        .token_ids
        .iter()
        .map(|&t| vocab.token_str(t).to_string())
        .collect();
    let dump = serde_json::json!({
        "layer": layer,
        "mode": match packed.kind {
            kgseq::textseq::SeqKind::Triple => "triple",
            kgseq::textseq::SeqKind::Pair => "pair",
        },
        "tokens": tokens,
        "heads": heads,
    });
    if let Some(path) = &args.out {
        write_json(path, &dump)?;
    }
    println!("{}", serde_json::to_string_pretty(&dump)?);
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let started = Instant::now();
    let kg = load_dataset(&args.dataset, TextSource::Names)?;
    let cfg = BaselineConfig {
        dim: args.dim,
        margin: args.margin,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        negatives_per_positive: args.negatives,
        seed: args.seed,
    };
    info!(
        "training {} baseline (dim {}, {} epochs)",
        args.kind.as_str(),
        cfg.dim,
        cfg.epochs
    );
    let trained = train_baseline(args.kind, &kg, &cfg)?;
    if let Some(path) = &args.save {
        let (entity, relation) = match &trained.model {
            kgseq::baselines::BaselineModel::TransE(p) => (&p.entity, &p.relation),
            kgseq::baselines::BaselineModel::DistMult(p) => (&p.entity, &p.relation),
        };
        save_named_tensors(
            path,
            args.kind.as_str(),
            serde_json::json!({
                "config": cfg,
                "entities": kg.num_entities(),
                "relations": kg.num_relations(),
            }),
            &[("entity", entity), ("relation", relation)],
        )?;
        info!("saved baseline checkpoint to {}", path.display());
    }
    let report = par::with_workers(args.workers, || {
        run_ranking(&trained.model, &kg, args.task, args.split, !args.raw)
    })?;
    let metrics = MetricsJson::from_report(
        &format!("{}_{}", args.kind.as_str(), args.task.as_str()),
        args.split.as_str(),
        !args.raw,
        &report,
        started.elapsed().as_millis(),
    );
    if let Some(path) = &args.out {
        write_json(path, &metrics)?;
    }
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}
