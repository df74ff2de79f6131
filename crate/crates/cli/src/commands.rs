use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use kbe_core::fusion::{self, FusionConfig, ReScoreTable};
use kbe_core::store::{self, NameTable};
use kbe_core::synth::{generate_synthetic_kb, Pattern};
use kbe_core::trainer::{self, TrainConfig};
use kbe_core::{checkpoint, ranking, Error, KnowledgeBase, ModelKind, ModelParams, Result, Split, TiePolicy, Vocab};

use crate::config::render;
use crate::{EvalArgs, FuseArgs, SynthArgs, TrainArgs};

const ENTITY_NAMES: &str = "entities.txt";
const RELATION_NAMES: &str = "relations.txt";
const RUN_CONFIG: &str = "run_config.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text)
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn parse<T: std::str::FromStr<Err = Error>>(value: &str) -> Result<T> {
    value.parse()
}

fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let model: ModelKind = parse(&a.model)?;
    let mut cfg = TrainConfig::for_model(model);
    cfg.seed = a.seed;
    if let Some(v) = a.dim {
        cfg.dim = v;
    }
    if let Some(v) = &a.norm {
        cfg.norm = parse(v)?;
    }
    if let Some(v) = a.margin {
        cfg.margin = v;
    }
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = &a.optimizer {
        cfg.optimizer = parse(v)?;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.negatives {
        cfg.negatives = v;
    }
    if let Some(v) = &a.corruption {
        cfg.corruption = parse(v)?;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = a.normalize_entities {
        cfg.normalize_entities = v;
    }
    if let Some(v) = a.filtered_negatives {
        cfg.filtered_negatives = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn lower<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value).expect("enum serializes") {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let cfg = resolve_train_config(a)?;
    let kb = KnowledgeBase::load_dir(&a.data)?;
    create_dir(&a.out)?;
    let echo = [
        ("data", show(&a.data)),
        ("out", show(&a.out)),
        ("model", lower(&cfg.model)),
        ("dim", cfg.dim.to_string()),
        ("norm", lower(&cfg.norm)),
        ("margin", cfg.margin.to_string()),
        ("lr", cfg.learning_rate.to_string()),
        ("optimizer", lower(&cfg.optimizer)),
        ("epochs", cfg.epochs.to_string()),
        ("batch-size", cfg.batch_size.to_string()),
        ("negatives", cfg.negatives.to_string()),
        ("corruption", cfg.corruption.to_string()),
        ("lambda", cfg.lambda.to_string()),
        ("seed", cfg.seed.to_string()),
        ("normalize-entities", cfg.normalize_entities.to_string()),
        ("filtered-negatives", cfg.filtered_negatives.to_string()),
    ];
    write_file(&a.out.join(RUN_CONFIG), render(&echo))?;

    let quiet = a.quiet;
    let (mut report, params) = trainer::train_with_progress(&kb, &cfg, |epoch, loss| {
        if !quiet {
            eprintln!("{epoch}\t{loss}");
        }
    })?;
    checkpoint::save(&a.out, &params, cfg.seed)?;
    store::save_names(a.out.join(ENTITY_NAMES), &kb.vocab.entities)?;
    store::save_names(a.out.join(RELATION_NAMES), &kb.vocab.relations)?;
    report.checkpoint = Some(PathBuf::from(checkpoint::CHECKPOINT_FILE));
    write_json(&a.out.join("train_report.json"), &report)
}

/// Vocabulary saved next to a checkpoint, if any.
fn checkpoint_vocab(dir: &Path) -> Result<Option<Vocab>> {
    let (ents, rels) = (dir.join(ENTITY_NAMES), dir.join(RELATION_NAMES));
    if !ents.exists() || !rels.exists() {
        return Ok(None);
    }
    Ok(Some(Vocab::new(store::load_names(ents)?, store::load_names(rels)?)))
}

fn same_names(a: &NameTable, b: &NameTable) -> bool {
    a.names() == b.names()
}

fn check_vocab(saved: &Vocab, kb: &Vocab) -> Result<()> {
    if !same_names(&saved.entities, &kb.entities) || !same_names(&saved.relations, &kb.relations) {
        return Err(Error::Binding(
            "checkpoint vocabulary differs from the knowledge base vocabulary".into(),
        ));
    }
    Ok(())
}

fn load_model(dir: &Path) -> Result<ModelParams> {
    checkpoint::load(dir).map(|(_, params)| params)
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let split: Split = parse(&a.split)?;
    let policy: TiePolicy = parse(&a.tie_policy)?;
    let kb = KnowledgeBase::load_dir(&a.data)?;
    let params = load_model(&a.checkpoint)?;
    ranking::check_binding(&params, &kb)?;
    if let Some(saved) = checkpoint_vocab(&a.checkpoint)? {
        check_vocab(&saved, &kb.vocab)?;
    }
    let dataset = match &a.dataset {
        Some(name) => name.clone(),
        None => a
            .data
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into()),
    };

    create_dir(&a.out)?;
    let echo = [
        ("data", show(&a.data)),
        ("checkpoint", show(&a.checkpoint)),
        ("out", show(&a.out)),
        ("split", split.name().to_string()),
        ("tie-policy", lower(&policy)),
        ("dataset", dataset.clone()),
    ];
    write_file(&a.out.join(RUN_CONFIG), render(&echo))?;

    let report = kbe_core::evaluate_relation_prediction(&params, &kb, split, policy)?;
    let line = report.tsv_line(&dataset, &params.kind().to_string());
    write_json(&a.out.join("eval_report.json"), &report)?;
    write_file(&a.out.join("eval.tsv"), format!("{line}\n"))?;
    println!("{line}");
    Ok(())
}

fn parse_alphas(text: &str) -> Result<Vec<f64>> {
    let alphas = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad alpha {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if alphas.is_empty() {
        return Err(Error::Config("empty alpha list".into()));
    }
    Ok(alphas)
}

#[derive(Serialize)]
struct AlphaRun {
    alpha: f64,
    auc: f64,
    predictions: usize,
    correct: usize,
    curve: String,
}

#[derive(Serialize)]
struct FuseSummary {
    strategy: fusion::Strategy,
    scope: fusion::Scope,
    kbe_norm: fusion::KbeNorm,
    gold: usize,
    skipped_pairs: usize,
    baseline_auc: f64,
    baseline_curve: String,
    runs: Vec<AlphaRun>,
}

pub fn fuse(a: &FuseArgs) -> Result<()> {
    let alphas = parse_alphas(&a.alphas)?;
    let base = FusionConfig {
        alpha: 1.0,
        strategy: parse(&a.strategy)?,
        scope: parse(&a.scope)?,
        kbe_norm: parse(&a.kbe_norm)?,
    };
    for &alpha in &alphas {
        FusionConfig { alpha, ..base }.validate()?;
    }

    let table = ReScoreTable::load(&a.re_scores)?;
    let gold = fusion::load_gold(&a.gold)?;
    let params = load_model(&a.checkpoint)?;
    let vocab = match (&a.data, checkpoint_vocab(&a.checkpoint)?) {
        (Some(dir), _) => KnowledgeBase::load_dir(dir)?.vocab,
        (None, Some(v)) => v,
        (None, None) => {
            return Err(Error::Config(
                "no vocabulary: checkpoint directory has no name files and --data is missing".into(),
            ))
        }
    };

    create_dir(&a.out)?;
    let echo = [
        ("re-scores", show(&a.re_scores)),
        ("gold", show(&a.gold)),
        ("checkpoint", show(&a.checkpoint)),
        ("out", show(&a.out)),
        ("alphas", alphas.iter().map(f64::to_string).collect::<Vec<_>>().join(",")),
        ("strategy", lower(&base.strategy)),
        ("scope", lower(&base.scope)),
        ("kbe-norm", lower(&base.kbe_norm)),
    ];
    let mut echo = echo.to_vec();
    if let Some(dir) = &a.data {
        echo.insert(3, ("data", show(dir)));
    }
    write_file(&a.out.join(RUN_CONFIG), render(&echo))?;

    let mut baseline = fusion::re_only_ranking(&table, &vocab)?;
    let points = fusion::precision_recall_curve(&mut baseline, &gold)?;
    let baseline_curve = "curve_re_only.csv".to_string();
    fusion::write_curve_csv(a.out.join(&baseline_curve), &points)?;
    let baseline_auc = fusion::area_under_curve(&points);

    let mut runs = Vec::with_capacity(alphas.len());
    let mut skipped_pairs = 0;
    for &alpha in &alphas {
        let config = FusionConfig { alpha, ..base };
        let mut rescored = fusion::rescore(&table, &params, &vocab, &config)?;
        skipped_pairs = rescored.skipped;
        let points = fusion::precision_recall_curve(&mut rescored.predictions, &gold)?;
        let curve = format!("curve_alpha_{alpha}.csv");
        fusion::write_curve_csv(a.out.join(&curve), &points)?;
        runs.push(AlphaRun {
            alpha,
            auc: fusion::area_under_curve(&points),
            predictions: rescored.predictions.len(),
            correct: rescored.predictions.iter().filter(|p| p.gold).count(),
            curve,
        });
    }
    let summary = FuseSummary {
        strategy: base.strategy,
        scope: base.scope,
        kbe_norm: base.kbe_norm,
        gold: gold.len(),
        skipped_pairs,
        baseline_auc,
        baseline_curve,
        runs,
    };
    write_json(&a.out.join("summary.json"), &summary)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let pattern: Pattern = parse(&a.pattern)?;
    let kb = generate_synthetic_kb(a.entities, pattern, a.density, a.seed)?;
    kb.save(&a.out)?;
    let echo = [
        ("out", show(&a.out)),
        ("entities", a.entities.to_string()),
        ("pattern", a.pattern.clone()),
        ("density", a.density.to_string()),
        ("seed", a.seed.to_string()),
    ];
    write_file(&a.out.join(RUN_CONFIG), render(&echo))
}
