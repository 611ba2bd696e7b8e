//! Training and evaluation loops for the three task modes.
//!
//! - Top-k: each positive interaction is trained against `num_neg` sampled
//!   unseen items and evaluated against `test_num_neg` (or file-provided)
//!   negatives.
//! - CTR: labeled interactions, pointwise BCE, AUC and LogLoss.
//! - Impression: logged candidate lists with listwise losses; no negatives
//!   are ever sampled. Re-rankers additionally consume a frozen backbone.

mod config;
mod eval;
mod rerank;
mod sampling;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{higher_is_better, training_losses, RunConfig};
pub use eval::{
    ctr_predictions, ctr_report, evaluate, evaluate_ctr, evaluate_impressions, evaluate_ranking, evaluate_topk,
    impression_lists, topk_lists, EvalList,
};
pub use rerank::{run_rerank, Backbone};
pub use sampling::{eval_seed, sample_negatives, NegativeSampler};
pub use train::{train, train_with, TrainOutcome, TrainState};

use crate::corpus::{
    fingerprint_sources, load_or_build, read_base, read_context, read_impressions, read_sequential, Corpus,
    ImpressionGroup, InteractionRecord, ReaderOptions, Split,
};
use crate::metrics::MetricReport;
use crate::models::{init, load_checkpoint, save_checkpoint, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const CACHE_FILE: &str = "corpus.cache";

/// Everything a finished run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// The fully resolved configuration.
    pub config: RunConfig,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub dev_history: Vec<MetricReport>,
    pub train_loss: Vec<f64>,
    pub test: MetricReport,
    /// The frozen backbone's own test metrics (re-ranking runs).
    pub backbone_test: Option<MetricReport>,
    pub backbone_hash: Option<String>,
}

pub(crate) fn record_request(corpus: &Corpus, r: &InteractionRecord, items: Vec<usize>, history_max: usize) -> ScoreRequest {
    let history = if r.history.is_empty() {
        corpus.history_before(r.user, r.time, history_max)
    } else {
        r.history.clone()
    };
    ScoreRequest {
        user: r.user,
        items,
        history,
        situation: r.situation.clone(),
        base_scores: None,
        base_embeddings: None,
    }
}

pub(crate) fn group_request(corpus: &Corpus, g: &ImpressionGroup, history_max: usize) -> ScoreRequest {
    ScoreRequest {
        user: g.user,
        items: g.items.clone(),
        history: corpus.history_before(g.user, g.time, history_max),
        situation: g.situation.clone(),
        base_scores: None,
        base_embeddings: None,
    }
}

fn split_paths(dir: &Path) -> [PathBuf; 3] {
    ["train.tsv", "dev.tsv", "test.tsv"].map(|f| dir.join(f))
}

/// Reads `train.tsv`/`dev.tsv`/`test.tsv` (plus `user_meta.tsv` and
/// `item_meta.tsv` when present) from `config.data_dir`, going through a
/// fingerprinted cache stored next to them.
pub fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let dir = config
        .data_dir
        .as_deref()
        .ok_or_else(|| Error::Config("missing dataset path (--data_dir)".into()))?;
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let [train, dev, test] = split_paths(dir);
    for p in [&train, &dev, &test] {
        if !p.exists() {
            return Err(Error::NotFound(p.clone()));
        }
    }
    let user_meta = Some(dir.join("user_meta.tsv")).filter(|p| p.exists());
    let item_meta = Some(dir.join("item_meta.tsv")).filter(|p| p.exists());

    let impressions = config.model_mode == TaskMode::Impression;
    let sequential = config.model_name.is_sequential();
    let options = ReaderOptions {
        history_max: sequential.then_some(config.history_max),
        impressions,
    };
    let mut sources: Vec<&Path> = vec![&train, &dev, &test];
    sources.extend(user_meta.as_deref());
    sources.extend(item_meta.as_deref());
    let fp = fingerprint_sources(&sources, &options.describe())?;
    let (corpus, cached) = load_or_build(&dir.join(CACHE_FILE), &fp, || {
        let corpus = if impressions {
            read_impressions(&train, &dev, &test, &options)?
        } else if sequential {
            read_sequential(&train, &dev, &test, config.history_max)?
        } else {
            read_base(&train, &dev, &test, &options)?
        };
        let columns = corpus.raw_situation.columns.clone();
        read_context(corpus, user_meta.as_deref(), item_meta.as_deref(), &columns)
    })?;
    info!(
        "corpus: {} users, {} items, {} train records{}",
        corpus.n_users,
        corpus.n_items,
        corpus.splits.train.len(),
        if cached { " (cached)" } else { "" }
    );
    Ok(corpus)
}

/// Loads the configured dataset and runs [`run_on`].
pub fn run(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let corpus = load_corpus(config)?;
    run_on(config, &corpus)
}

/// Initializes, trains and test-evaluates the configured model on `corpus`.
/// Re-rankers go through [`run_rerank`].
pub fn run_on(config: &RunConfig, corpus: &Corpus) -> Result<RunResult> {
    config.validate()?;
    if config.model_name.is_reranker() {
        return run_rerank(config, corpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    let mut scorer = init(config.model_name, corpus, config.model_mode, &config.model_config(), &mut rng)?;
    let outcome = train(scorer.as_mut(), corpus, config)?;
    let test = evaluate(scorer.as_ref(), corpus, Split::Test, config, None)?;
    info!("best epoch {} test {}", outcome.best_epoch, test);
    let result = RunResult {
        config: config.clone(),
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        dev_history: outcome.dev_history,
        train_loss: outcome.train_loss,
        test,
        backbone_test: None,
        backbone_hash: None,
    };
    if let Some(dir) = &config.save_dir {
        save_run(scorer.as_ref(), corpus, &result, dir)?;
    }
    Ok(result)
}

pub(crate) fn save_run(scorer: &dyn Scorer, corpus: &Corpus, result: &RunResult, dir: &Path) -> Result<()> {
    save_checkpoint(scorer, corpus, dir)?;
    let path = dir.join(REPORT_FILE);
    fs::write(&path, serde_json::to_string_pretty(result)?).map_err(|e| Error::io(&path, e))
}

/// Evaluates a saved checkpoint on `split`. Re-ranker checkpoints need
/// `base_model_path` in `config`.
pub fn evaluate_checkpoint(config: &RunConfig, checkpoint: &Path, split: Split) -> Result<MetricReport> {
    let corpus = load_corpus(config)?;
    let scorer = load_checkpoint(checkpoint, &corpus)?;
    let config = RunConfig {
        model_mode: scorer.mode(),
        model_name: scorer.kind(),
        ..config.clone()
    };
    let backbone = if scorer.kind().is_reranker() {
        let path = config
            .base_model_path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("{} needs --base_model_path", scorer.kind())))?;
        Some(Backbone::load(path, &corpus)?)
    } else {
        None
    };
    evaluate(scorer.as_ref(), &corpus, split, &config, backbone.as_ref())
}

/// Backbone kinds accepted by [`run_rerank`].
pub fn backbone_kinds() -> Vec<ModelKind> {
    ModelKind::ALL.into_iter().filter(|&k| rerank::is_backbone_kind(k)).collect()
}
