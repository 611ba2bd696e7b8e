use std::path::Path;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Split};
use crate::models::{checkpoint_hash, init, load_checkpoint, read_manifest, ModelKind, ScoreRequest, Scorer, TaskMode};
use crate::{Error, Result};

use super::eval::evaluate_impressions;
use super::train::train_with_backbone;
use super::{RunConfig, RunResult};

/// A frozen ranker that supplies scores and item embeddings to a re-ranker.
pub struct Backbone {
    pub scorer: Box<dyn Scorer>,
}

impl Backbone {
    /// Loads a checkpoint whose model can rank impression lists and exposes
    /// item embeddings.
    pub fn load(dir: &Path, corpus: &Corpus) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let kind = manifest.model_name;
        if kind.is_reranker() || !kind.supports(TaskMode::Impression) {
            return Err(Error::Config(format!("{kind} cannot serve as a backbone ranker")));
        }
        let scorer = load_checkpoint(dir, corpus)?;
        Ok(Backbone { scorer })
    }

    pub fn emb_size(&self) -> usize {
        self.scorer.config().emb_size
    }

    /// Fills `base_scores` and `base_embeddings` of a request.
    pub fn decorate(&self, req: &mut ScoreRequest) -> Result<()> {
        req.base_scores = None;
        req.base_embeddings = None;
        let scores = self.scorer.forward(req)?;
        let embs = req
            .items
            .iter()
            .map(|&i| {
                self.scorer
                    .item_embedding(i)
                    .ok_or_else(|| Error::Model(format!("{} has no item embeddings", self.scorer.kind())))
            })
            .collect::<Result<Vec<_>>>()?;
        req.base_scores = Some(scores);
        req.base_embeddings = Some(embs);
        Ok(())
    }
}

/// Trains a re-ranker on train impressions over a frozen backbone and
/// evaluates both on the test split. Fails if the backbone checkpoint
/// changed on disk during the run.
pub fn run_rerank(config: &RunConfig, corpus: &Corpus) -> Result<RunResult> {
    config.validate()?;
    let path = config.base_model_path.as_deref().expect("validated");
    let hash_before = checkpoint_hash(path)?;
    let manifest = read_manifest(path)?;
    if let Some(name) = config.base_model_name {
        if name != manifest.model_name {
            return Err(Error::Config(format!(
                "base_model_name {name} but checkpoint holds {}",
                manifest.model_name
            )));
        }
    }
    let backbone = Backbone::load(path, corpus)?;
    if !corpus.has_impressions() {
        return Err(Error::InvalidData("re-ranking needs impression data".into()));
    }

    // The re-ranker's input width follows the backbone's embeddings.
    let mut model_config = config.model_config();
    model_config.emb_size = backbone.emb_size();
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    let mut scorer = init(config.model_name, corpus, TaskMode::Impression, &model_config, &mut rng)?;
    let outcome = train_with_backbone(scorer.as_mut(), corpus, config, Some(&backbone))?;
    let test = evaluate_impressions(scorer.as_ref(), corpus, Split::Test, config, Some(&backbone))?;
    let backbone_test = evaluate_impressions(backbone.scorer.as_ref(), corpus, Split::Test, config, None)?;
    info!("test {} (backbone {})", test, backbone_test);

    let hash_after = checkpoint_hash(path)?;
    if hash_after != hash_before {
        return Err(Error::Model("backbone checkpoint changed during re-ranking".into()));
    }
    let result = RunResult {
        config: RunConfig {
            emb_size: model_config.emb_size,
            ..config.clone()
        },
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        dev_history: outcome.dev_history,
        train_loss: outcome.train_loss,
        test,
        backbone_test: Some(backbone_test),
        backbone_hash: Some(hash_after),
    };
    if let Some(dir) = &config.save_dir {
        super::save_run(scorer.as_ref(), corpus, &result, dir)?;
    }
    Ok(result)
}

pub(crate) fn is_backbone_kind(kind: ModelKind) -> bool {
    !kind.is_reranker() && kind.supports(TaskMode::Impression)
}
