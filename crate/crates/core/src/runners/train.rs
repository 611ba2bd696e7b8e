use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Split};
use crate::losses::ListLoss;
use crate::metrics::MetricReport;
use crate::models::{ScoreRequest, Scorer, TaskMode};
use crate::optim::{step, OptimizerState};
use crate::{Error, Result};

use super::eval::{evaluate_ctr, evaluate_ranking, impression_lists, topk_lists};
use super::rerank::Backbone;
use super::sampling::NegativeSampler;
use super::{group_request, higher_is_better, record_request, RunConfig};

/// Early-stopping bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub epoch: usize,
    pub best_value: Option<f64>,
    pub best_epoch: usize,
    pub since_improvement: usize,
    patience: usize,
    higher_better: bool,
}

impl TrainState {
    pub fn new(patience: usize, higher_better: bool) -> Self {
        TrainState {
            epoch: 0,
            best_value: None,
            best_epoch: 0,
            since_improvement: 0,
            patience,
            higher_better,
        }
    }

    /// Records one epoch's dev value; true when it strictly improves on the
    /// best so far. Ties and NaN count as no improvement.
    pub fn observe(&mut self, value: f64) -> bool {
        self.epoch += 1;
        let better = match self.best_value {
            _ if value.is_nan() => false,
            None => true,
            Some(best) if self.higher_better => value > best,
            Some(best) => value < best,
        };
        if better {
            self.best_value = Some(value);
            self.best_epoch = self.epoch;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        better
    }

    /// Patience 0 behaves as 1: stop at the first non-improving epoch.
    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience.max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub dev_history: Vec<MetricReport>,
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_value: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Trains with dev evaluation after every epoch, then restores the
/// parameters of the best epoch.
pub fn train(scorer: &mut dyn Scorer, corpus: &Corpus, config: &RunConfig) -> Result<TrainOutcome> {
    train_with_backbone(scorer, corpus, config, None)
}

pub(crate) fn train_with_backbone(
    scorer: &mut dyn Scorer,
    corpus: &Corpus,
    config: &RunConfig,
    backbone: Option<&Backbone>,
) -> Result<TrainOutcome> {
    let ks = config.cutoffs();
    let mut dev_eval: Box<dyn FnMut(&dyn Scorer, usize) -> Result<MetricReport>> = match config.model_mode {
        TaskMode::Ctr => Box::new(|s: &dyn Scorer, _| evaluate_ctr(s, corpus, Split::Dev, config)),
        mode => {
            let lists = if mode == TaskMode::TopK {
                topk_lists(corpus, Split::Dev, config)?
            } else {
                impression_lists(corpus, Split::Dev, config, backbone)?
            };
            if lists.is_empty() {
                return Err(Error::InvalidData("dev split is empty; early stopping needs it".into()));
            }
            Box::new(move |s: &dyn Scorer, _| evaluate_ranking(s, &lists, &ks))
        }
    };
    train_with(scorer, corpus, config, backbone, &mut *dev_eval)
}

enum Unit {
    Record(usize),
    Group(usize),
}

/// [`train`] with an injected dev evaluator, called as `(scorer, epoch)`.
pub fn train_with(
    scorer: &mut dyn Scorer,
    corpus: &Corpus,
    config: &RunConfig,
    backbone: Option<&Backbone>,
    dev_eval: &mut dyn FnMut(&dyn Scorer, usize) -> Result<MetricReport>,
) -> Result<TrainOutcome> {
    let metric = config.main_metric();
    let mut state = TrainState::new(config.patience, higher_is_better(&metric));
    let mut opt = OptimizerState::new(config.optimizer, config.lr, config.l2);
    let loss_kind = config.loss();
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    rng.set_stream(1);

    let train = corpus.records(Split::Train);
    let mut units: Vec<Unit> = match config.model_mode {
        TaskMode::TopK => (0..train.len()).filter(|&i| train[i].is_positive()).map(Unit::Record).collect(),
        TaskMode::Ctr => {
            if train.iter().any(|r| r.label.is_none()) {
                return Err(Error::InvalidData("CTR training needs a label on every train record".into()));
            }
            (0..train.len()).map(Unit::Record).collect()
        }
        TaskMode::Impression => (0..corpus.groups(Split::Train).len()).map(Unit::Group).collect(),
    };
    if units.is_empty() {
        return Err(Error::EmptyTrain);
    }
    let sampler = NegativeSampler::new(corpus);
    let trainable = scorer.params().n_trainable() > 0;

    let mut outcome = TrainOutcome {
        dev_history: Vec::new(),
        train_loss: Vec::new(),
        best_epoch: 0,
        best_value: f64::NAN,
        epochs_run: 0,
        stopped_early: false,
    };
    let mut best = scorer.params().snapshot();
    let max_epochs = if trainable { config.epochs } else { 1 };

    for epoch in 1..=max_epochs {
        units.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_loss = 0usize;
        if trainable {
            for (b, batch) in units.chunks(config.batch_size).enumerate() {
                let mut batch_loss = 0.0;
                let scale = 1.0 / batch.len() as f64;
                for unit in batch {
                    let (req, labels) = match *unit {
                        Unit::Record(i) => {
                            let r = &train[i];
                            match config.model_mode {
                                TaskMode::TopK => {
                                    let negs = sampler.sample(&mut rng, r.user, config.num_neg, &[r.item])?;
                                    debug_assert!(negs.iter().all(|&n| !sampler.is_positive(r.user, n)));
                                    let mut items = vec![r.item];
                                    items.extend(negs);
                                    let mut labels = vec![0; items.len()];
                                    labels[0] = 1;
                                    (record_request(corpus, r, items, config.history_max), labels)
                                }
                                _ => (
                                    record_request(corpus, r, vec![r.item], config.history_max),
                                    vec![r.label.unwrap_or(1)],
                                ),
                            }
                        }
                        Unit::Group(g) => {
                            let g = &corpus.groups(Split::Train)[g];
                            let mut req: ScoreRequest = group_request(corpus, g, config.history_max);
                            if let Some(bb) = backbone {
                                bb.decorate(&mut req)?;
                            }
                            (req, g.labels.clone())
                        }
                    };
                    let scores = scorer.forward(&req)?;
                    if let ListLoss::Value { loss, grad } = loss_kind.evaluate(&scores, &labels) {
                        if !loss.is_finite() {
                            return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
                        }
                        batch_loss += loss;
                        n_loss += 1;
                        let d: Vec<f64> = grad.iter().map(|g| g * scale).collect();
                        scorer.backward(&req, &d)?;
                    }
                }
                step(scorer.params_mut(), &mut opt)?;
                epoch_loss += batch_loss;
            }
        }
        let mean_loss = if n_loss > 0 { epoch_loss / n_loss as f64 } else { 0.0 };
        let report = dev_eval(&*scorer, epoch)?;
        let value = report
            .get(&metric)
            .ok_or_else(|| Error::Metric(format!("dev report lacks main metric {metric}")))?;
        let improved = state.observe(value);
        if improved {
            best = scorer.params().snapshot();
        }
        info!(
            "epoch {epoch} loss={mean_loss:.6} dev:{metric}={value:.6}{}",
            if improved { " *best" } else { "" }
        );
        outcome.train_loss.push(mean_loss);
        outcome.dev_history.push(report);
        outcome.epochs_run = epoch;
        if state.should_stop() {
            outcome.stopped_early = true;
            break;
        }
    }
    scorer.params_mut().restore(&best);
    outcome.best_epoch = state.best_epoch;
    outcome.best_value = state.best_value.unwrap_or(f64::NAN);
    Ok(outcome)
}
