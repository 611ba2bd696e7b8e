use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::losses::LossKind;
use crate::models::{ModelConfig, ModelKind, TaskMode};
use crate::optim::OptimizerKind;
use crate::{Error, Result};

/// One training/evaluation run. Optional fields resolve to mode-dependent
/// defaults through the accessor methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model_mode: TaskMode,
    pub model_name: ModelKind,
    pub data_dir: Option<PathBuf>,
    /// Where the best checkpoint and the run report are written.
    pub save_dir: Option<PathBuf>,
    pub emb_size: usize,
    pub hidden: Vec<usize>,
    pub pos_dim: usize,
    pub max_list_len: usize,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub num_neg: usize,
    pub test_num_neg: usize,
    /// Cutoffs; `[5, 10, 20]` for Top-k, `[2, 5]` for impressions.
    pub topk: Option<Vec<usize>>,
    pub history_max: usize,
    /// `NDCG@5` for ranking modes, `AUC` for CTR.
    pub main_metric: Option<String>,
    pub random_seed: u64,
    /// `bpr` for Top-k, `bce` for CTR, `list_bpr` for impressions.
    pub loss_name: Option<LossKind>,
    pub base_model_name: Option<ModelKind>,
    pub base_model_path: Option<PathBuf>,
    pub include_user_features: bool,
    pub include_item_features: bool,
    pub include_situation_features: bool,
    /// Report CTR AUC as the mean of per-user AUCs instead of one global AUC.
    pub auc_per_user: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model_mode: TaskMode::TopK,
            model_name: ModelKind::BprMf,
            data_dir: None,
            save_dir: None,
            emb_size: 64,
            hidden: vec![64, 64],
            pos_dim: 8,
            max_list_len: 50,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            l2: 0.0,
            batch_size: 256,
            epochs: 200,
            patience: 10,
            num_neg: 1,
            test_num_neg: 99,
            topk: None,
            history_max: 20,
            main_metric: None,
            random_seed: 0,
            loss_name: None,
            base_model_name: None,
            base_model_path: None,
            include_user_features: true,
            include_item_features: true,
            include_situation_features: true,
            auc_per_user: false,
        }
    }
}

/// Losses a model can be trained with in each mode.
pub fn training_losses(mode: TaskMode) -> &'static [LossKind] {
    match mode {
        TaskMode::TopK => &[LossKind::Bpr, LossKind::SoftmaxCe],
        TaskMode::Ctr => &[LossKind::Bce],
        TaskMode::Impression => &[LossKind::ListBpr, LossKind::SoftmaxCe, LossKind::ListNet],
    }
}

/// Whether larger values of the named metric are better.
pub fn higher_is_better(metric: &str) -> bool {
    metric != "LogLoss"
}

impl RunConfig {
    pub fn cutoffs(&self) -> Vec<usize> {
        match (&self.topk, self.model_mode) {
            (Some(k), _) => k.clone(),
            (None, TaskMode::Impression) => vec![2, 5],
            (None, _) => vec![5, 10, 20],
        }
    }

    pub fn main_metric(&self) -> String {
        match (&self.main_metric, self.model_mode) {
            (Some(m), _) => m.clone(),
            (None, TaskMode::Ctr) => "AUC".into(),
            (None, _) => "NDCG@5".into(),
        }
    }

    pub fn loss(&self) -> LossKind {
        self.loss_name.unwrap_or(match self.model_mode {
            TaskMode::TopK => LossKind::Bpr,
            TaskMode::Ctr => LossKind::Bce,
            TaskMode::Impression => LossKind::ListBpr,
        })
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            emb_size: self.emb_size,
            hidden: self.hidden.clone(),
            pos_dim: self.pos_dim,
            max_list_len: self.max_list_len,
            include_user_features: self.include_user_features,
            include_item_features: self.include_item_features,
            include_situation_features: self.include_situation_features,
        }
    }

    /// Checks every cross-field rule; run before any data is touched.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let (mode, model) = (self.model_mode, self.model_name);
        if !model.supports(mode) {
            return err(format!("model {model} does not support {mode} mode"));
        }
        match mode {
            TaskMode::Ctr if self.num_neg != 0 => return err("num_neg must be 0 in CTR mode".into()),
            TaskMode::TopK if self.num_neg == 0 => return err("num_neg must be >= 1 in TopK mode".into()),
            _ => {}
        }
        if model.is_reranker() {
            if self.base_model_path.is_none() {
                return err(format!("{model} needs --base_model_path"));
            }
        } else if self.base_model_path.is_some() || self.base_model_name.is_some() {
            return err(format!("base_model_* only applies to re-rankers, not {model}"));
        }
        if self.emb_size == 0 && !matches!(model, ModelKind::Fm | ModelKind::MostPopular) {
            return err(format!("{model} needs emb_size >= 1"));
        }
        if self.batch_size == 0 {
            return err("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return err("epochs must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return err(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.history_max == 0 {
            return err("history_max must be >= 1".into());
        }
        if mode == TaskMode::TopK && self.test_num_neg == 0 {
            return err("test_num_neg must be >= 1".into());
        }
        let ks = self.cutoffs();
        if ks.is_empty() || ks.contains(&0) {
            return err("topk cutoffs must be non-empty and positive".into());
        }
        let loss = self.loss();
        if !training_losses(mode).contains(&loss) {
            return err(format!("loss {} is not available in {mode} mode", loss.name()));
        }
        let metric = self.main_metric();
        let valid = match mode {
            TaskMode::Ctr => metric == "AUC" || metric == "LogLoss",
            _ => metric.split_once('@').is_some_and(|(name, k)| {
                ["HR", "NDCG", "MAP", "Recall"].contains(&name) && k.parse().is_ok_and(|k: usize| ks.contains(&k))
            }),
        };
        if !valid {
            return err(format!("main_metric {metric} is not reported in {mode} mode with cutoffs {ks:?}"));
        }
        Ok(())
    }
}
