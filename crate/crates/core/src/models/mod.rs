//! The scorer interface and the concrete models.
//!
//! Every trainable model writes its own backward pass: `forward` maps a
//! [`ScoreRequest`] to one score per candidate and `backward` accumulates
//! `∂L/∂θ` for given `∂L/∂scores` into the gradient buffers of its
//! [`ParamSet`]. Neither keeps state between calls, so `backward`
//! recomputes whatever intermediates it needs.

mod bprmf;
mod checkpoint;
mod features;
mod fm;
mod fpmc;
mod linalg;
mod mlp;
mod mostpop;
mod prm;
mod view;
mod widedeep;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use bprmf::BprMf;
pub use checkpoint::{
    checkpoint_hash, load_checkpoint, read_manifest, save_checkpoint, schema_fingerprint, Manifest, ParamEntry,
    MANIFEST_FILE, PARAMS_FILE,
};
pub use features::FeatureSpace;
pub use fm::Fm;
pub use fpmc::Fpmc;
pub use mostpop::MostPopular;
pub use prm::PrmLite;
pub use widedeep::WideDeep;

use crate::corpus::Corpus;
use crate::params::ParamSet;
use crate::real::DoubleDouble;
use crate::{Error, Result};

/// Task categories a model can be trained and evaluated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskMode {
    TopK,
    #[serde(rename = "CTR")]
    Ctr,
    Impression,
}

impl TaskMode {
    pub fn parse(s: &str) -> Option<TaskMode> {
        match s.to_ascii_lowercase().as_str() {
            "topk" => Some(TaskMode::TopK),
            "ctr" => Some(TaskMode::Ctr),
            "impression" => Some(TaskMode::Impression),
            _ => None,
        }
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskMode::TopK => "TopK",
            TaskMode::Ctr => "CTR",
            TaskMode::Impression => "Impression",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    MostPopular,
    BprMf,
    Fpmc,
    Fm,
    WideDeep,
    PrmLite,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::MostPopular,
        ModelKind::BprMf,
        ModelKind::Fpmc,
        ModelKind::Fm,
        ModelKind::WideDeep,
        ModelKind::PrmLite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MostPopular => "POP",
            ModelKind::BprMf => "BPRMF",
            ModelKind::Fpmc => "FPMC",
            ModelKind::Fm => "FM",
            ModelKind::WideDeep => "WideDeep",
            ModelKind::PrmLite => "PRMLite",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s.to_ascii_lowercase().replace(['-', '_', '&'], "").as_str() {
            "pop" | "mostpopular" => Some(ModelKind::MostPopular),
            "bprmf" | "bpr" => Some(ModelKind::BprMf),
            "fpmc" => Some(ModelKind::Fpmc),
            "fm" => Some(ModelKind::Fm),
            "widedeep" | "widedeeplite" => Some(ModelKind::WideDeep),
            "prmlite" | "prm" => Some(ModelKind::PrmLite),
            _ => None,
        }
    }

    pub fn supports(self, mode: TaskMode) -> bool {
        use ModelKind::*;
        use TaskMode::*;
        matches!(
            (self, mode),
            (MostPopular | BprMf | Fpmc, TopK | Impression) | (Fm | WideDeep, TopK | Ctr) | (PrmLite, Impression)
        )
    }

    pub fn is_reranker(self) -> bool {
        self == ModelKind::PrmLite
    }

    pub fn is_context_aware(self) -> bool {
        matches!(self, ModelKind::Fm | ModelKind::WideDeep)
    }

    pub fn is_sequential(self) -> bool {
        self == ModelKind::Fpmc
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model hyperparameters that determine parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub emb_size: usize,
    /// Hidden layer widths of MLP components.
    pub hidden: Vec<usize>,
    /// Position-embedding width of the re-ranker.
    pub pos_dim: usize,
    /// Longest list the re-ranker has position embeddings for.
    pub max_list_len: usize,
    pub include_user_features: bool,
    pub include_item_features: bool,
    pub include_situation_features: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            emb_size: 64,
            hidden: vec![64, 64],
            pos_dim: 8,
            max_list_len: 50,
            include_user_features: true,
            include_item_features: true,
            include_situation_features: true,
        }
    }
}

/// Everything a scorer may need to score one candidate list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreRequest {
    pub user: usize,
    pub items: Vec<usize>,
    /// Earlier items of the user, oldest first.
    pub history: Vec<usize>,
    /// Situation values aligned with the corpus schema's situation features.
    pub situation: Vec<f64>,
    /// Backbone scores, one per candidate (re-rankers only).
    pub base_scores: Option<Vec<f64>>,
    /// Backbone item embeddings, one row per candidate (re-rankers only).
    pub base_embeddings: Option<Vec<Vec<f64>>>,
}

impl ScoreRequest {
    pub fn new(user: usize, items: Vec<usize>) -> Self {
        ScoreRequest {
            user,
            items,
            ..Default::default()
        }
    }
}

pub trait Scorer: Send + Sync {
    fn kind(&self) -> ModelKind;

    fn mode(&self) -> TaskMode;

    fn config(&self) -> &ModelConfig;

    /// One finite score per candidate. Context-aware models return logits;
    /// CTR probabilities are `σ(score)`.
    fn forward(&self, req: &ScoreRequest) -> Result<Vec<f64>>;

    /// Adds `∂L/∂θ` for the given `∂L/∂scores` into the gradient buffers.
    fn backward(&mut self, req: &ScoreRequest, d_scores: &[f64]) -> Result<()>;

    /// `forward` evaluated in double-double arithmetic, with parameter
    /// `(tensor, flat index)` shifted by `h` when `perturb` is given. Only
    /// the finite-difference gradient check uses it.
    fn forward_shadow(&self, req: &ScoreRequest, perturb: Option<(usize, usize, f64)>) -> Result<Vec<DoubleDouble>>;

    fn params(&self) -> &ParamSet;

    fn params_mut(&mut self) -> &mut ParamSet;

    /// The item representation handed to re-rankers, if the model has one.
    fn item_embedding(&self, _item: usize) -> Option<Vec<f64>> {
        None
    }
}

pub(crate) fn check_request(req: &ScoreRequest, n_users: usize, n_items: usize) -> Result<()> {
    if req.items.is_empty() {
        return Err(Error::Model("empty candidate list".into()));
    }
    if req.user >= n_users {
        return Err(Error::Model(format!("user {} out of range ({n_users})", req.user)));
    }
    if let Some(&i) = req.items.iter().chain(&req.history).find(|&&i| i >= n_items) {
        return Err(Error::Model(format!("item {i} out of range ({n_items})")));
    }
    if req.base_scores.is_some() || req.base_embeddings.is_some() {
        return Err(Error::Model("backbone inputs given to a non-reranking model".into()));
    }
    Ok(())
}

pub(crate) fn check_grad_len(req: &ScoreRequest, d_scores: &[f64]) -> Result<()> {
    if d_scores.len() != req.items.len() {
        return Err(Error::Model(format!(
            "gradient has {} entries for {} candidates",
            d_scores.len(),
            req.items.len()
        )));
    }
    Ok(())
}

/// Builds a freshly initialized model of `kind` for `corpus`.
///
/// Embeddings are drawn from `Normal(0, 0.01²)`, MLP weights are
/// Xavier-uniform and every bias starts at zero.
pub fn init(
    kind: ModelKind,
    corpus: &Corpus,
    mode: TaskMode,
    config: &ModelConfig,
    rng: &mut impl Rng,
) -> Result<Box<dyn Scorer>> {
    if !kind.supports(mode) {
        return Err(Error::Config(format!("model {kind} does not support {mode} mode")));
    }
    if config.emb_size == 0 && kind != ModelKind::Fm && kind != ModelKind::MostPopular {
        return Err(Error::Config(format!("{kind} needs emb_size >= 1")));
    }
    Ok(match kind {
        ModelKind::MostPopular => Box::new(MostPopular::new(corpus, mode, config)),
        ModelKind::BprMf => Box::new(BprMf::new(corpus.n_users, corpus.n_items, mode, config, rng)),
        ModelKind::Fpmc => Box::new(Fpmc::new(corpus.n_users, corpus.n_items, mode, config, rng)),
        ModelKind::Fm => Box::new(Fm::new(FeatureSpace::new(corpus, config), mode, config, rng)),
        ModelKind::WideDeep => Box::new(WideDeep::new(FeatureSpace::new(corpus, config), mode, config, rng)?),
        ModelKind::PrmLite => Box::new(PrmLite::new(mode, config, rng)?),
    })
}
