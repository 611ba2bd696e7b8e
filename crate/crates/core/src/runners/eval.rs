use crate::corpus::{Corpus, Split};
use crate::losses::{sigmoid, ScoredList};
use crate::metrics::{auc, evaluate_lists, log_loss, user_auc, MetricReport};
use crate::models::{ScoreRequest, Scorer, TaskMode};
use crate::{Error, Result};

use super::rerank::Backbone;
use super::sampling::{eval_rng, NegativeSampler};
use super::{group_request, record_request, RunConfig};

/// A scored candidate list with its labels; the unit of ranking evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalList {
    pub request: ScoreRequest,
    pub labels: Vec<u8>,
}

/// Top-k evaluation lists: each positive interaction of `split` against its
/// file-provided `neg_items`, or `test_num_neg` negatives drawn with a seed
/// derived from `(random_seed, user, item)`.
pub fn topk_lists(corpus: &Corpus, split: Split, config: &RunConfig) -> Result<Vec<EvalList>> {
    let sampler = NegativeSampler::new(corpus);
    corpus
        .records(split)
        .iter()
        .filter(|r| r.is_positive())
        .map(|r| {
            let negs = match &r.neg_items {
                Some(n) => n.clone(),
                None => {
                    let mut rng = eval_rng(config.random_seed, r.user, r.item);
                    sampler.sample(&mut rng, r.user, config.test_num_neg, &[r.item])?
                }
            };
            let mut items = Vec::with_capacity(negs.len() + 1);
            items.push(r.item);
            items.extend(negs);
            let mut labels = vec![0; items.len()];
            labels[0] = 1;
            Ok(EvalList {
                request: record_request(corpus, r, items, config.history_max),
                labels,
            })
        })
        .collect()
}

/// Impression evaluation lists: each logged group exactly as shown.
pub fn impression_lists(
    corpus: &Corpus,
    split: Split,
    config: &RunConfig,
    backbone: Option<&Backbone>,
) -> Result<Vec<EvalList>> {
    corpus
        .groups(split)
        .iter()
        .map(|g| {
            let mut request = group_request(corpus, g, config.history_max);
            if let Some(b) = backbone {
                b.decorate(&mut request)?;
            }
            Ok(EvalList {
                request,
                labels: g.labels.clone(),
            })
        })
        .collect()
}

/// Scores every list and averages HR/NDCG/MAP/Recall at `ks` over lists
/// with a positive. Ties rank by ascending item id.
pub fn evaluate_ranking(scorer: &dyn Scorer, lists: &[EvalList], ks: &[usize]) -> Result<MetricReport> {
    let scored = lists
        .iter()
        .map(|l| {
            let scores = scorer.forward(&l.request)?;
            Ok(ScoredList::with_ids(scores, l.labels.clone(), l.request.items.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_lists(&scored, ks)
}

pub fn evaluate_topk(scorer: &dyn Scorer, corpus: &Corpus, split: Split, config: &RunConfig) -> Result<MetricReport> {
    evaluate_ranking(scorer, &topk_lists(corpus, split, config)?, &config.cutoffs())
}

pub fn evaluate_impressions(
    scorer: &dyn Scorer,
    corpus: &Corpus,
    split: Split,
    config: &RunConfig,
    backbone: Option<&Backbone>,
) -> Result<MetricReport> {
    evaluate_ranking(scorer, &impression_lists(corpus, split, config, backbone)?, &config.cutoffs())
}

/// Click probabilities and labels for every record of `split`, in record
/// order.
pub fn ctr_predictions(scorer: &dyn Scorer, corpus: &Corpus, split: Split, config: &RunConfig) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for r in corpus.records(split) {
        let y = r
            .label
            .ok_or_else(|| Error::InvalidData(format!("CTR evaluation needs labels in the {} split", split.name())))?;
        let req = record_request(corpus, r, vec![r.item], config.history_max);
        preds.push(sigmoid(scorer.forward(&req)?[0]));
        labels.push(y);
    }
    Ok((preds, labels))
}

pub fn evaluate_ctr(scorer: &dyn Scorer, corpus: &Corpus, split: Split, config: &RunConfig) -> Result<MetricReport> {
    let (preds, labels) = ctr_predictions(scorer, corpus, split, config)?;
    if config.auc_per_user {
        let users: Vec<usize> = corpus.records(split).iter().map(|r| r.user).collect();
        ctr_report(&preds, &labels, Some(&users))
    } else {
        ctr_report(&preds, &labels, None)
    }
}

/// `AUC` and `LogLoss`; with `users`, AUC is the per-user mean.
pub fn ctr_report(preds: &[f64], labels: &[u8], users: Option<&[usize]>) -> Result<MetricReport> {
    let mut report = MetricReport {
        n_evaluated: preds.len(),
        ..Default::default()
    };
    let auc = match users {
        Some(u) => user_auc(preds, labels, u)?,
        None => auc(preds, labels)?,
    };
    report.entries.insert("AUC".into(), auc);
    report.entries.insert("LogLoss".into(), log_loss(preds, labels)?);
    Ok(report)
}

/// Mode-appropriate evaluation of `split`.
pub fn evaluate(
    scorer: &dyn Scorer,
    corpus: &Corpus,
    split: Split,
    config: &RunConfig,
    backbone: Option<&Backbone>,
) -> Result<MetricReport> {
    match config.model_mode {
        TaskMode::TopK => evaluate_topk(scorer, corpus, split, config),
        TaskMode::Ctr => evaluate_ctr(scorer, corpus, split, config),
        TaskMode::Impression => evaluate_impressions(scorer, corpus, split, config, backbone),
    }
}
