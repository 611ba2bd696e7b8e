//! Ranking and classification metrics.
//!
//! Lists are ranked by descending score with ties broken by ascending item
//! id, so every metric is deterministic under ties.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::losses::{bce, ScoredList};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub ids: Vec<usize>,
    pub relevance: Vec<u8>,
}

impl RankedList {
    pub fn n_positive(&self) -> usize {
        self.relevance.iter().filter(|&&r| r == 1).count()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Sorts candidates by descending score, ascending id on ties.
pub fn rank(scores: &[f64], ids: &[usize], labels: &[u8]) -> Result<RankedList> {
    if scores.len() != ids.len() || scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} scores, {} ids, {} labels",
            scores.len(),
            ids.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    Ok(RankedList {
        ids: order.iter().map(|&i| ids[i]).collect(),
        relevance: order.iter().map(|&i| labels[i]).collect(),
    })
}

fn top(list: &RankedList, k: usize) -> &[u8] {
    &list.relevance[..k.min(list.len())]
}

/// 1 if any relevant item is in the top `k`.
pub fn hr_at_k(list: &RankedList, k: usize) -> f64 {
    if top(list, k).contains(&1) {
        1.0
    } else {
        0.0
    }
}

/// Fraction of the list's positives that appear in the top `k`.
pub fn recall_at_k(list: &RankedList, k: usize) -> f64 {
    let n_pos = list.n_positive();
    if n_pos == 0 {
        return 0.0;
    }
    top(list, k).iter().filter(|&&r| r == 1).count() as f64 / n_pos as f64
}

/// Binary-gain NDCG; the ideal ordering places `min(k, #pos)` positives first.
pub fn ndcg_at_k(list: &RankedList, k: usize) -> f64 {
    let dcg: f64 = top(list, k)
        .iter()
        .enumerate()
        .filter(|(_, &r)| r == 1)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal = k.min(list.n_positive());
    if ideal == 0 {
        return 0.0;
    }
    let idcg: f64 = (0..ideal).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    dcg / idcg
}

/// Average precision at `k`, normalized by `min(k, #pos)`.
pub fn map_at_k(list: &RankedList, k: usize) -> f64 {
    let denom = k.min(list.n_positive());
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in top(list, k).iter().enumerate() {
        if r == 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Area under the ROC curve from tie-averaged rank statistics.
pub fn auc(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Metric("length mismatch".into()));
    }
    if predictions.iter().any(|p| p.is_nan()) {
        return Err(Error::Metric("NaN prediction".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric("AUC is undefined for single-class labels".into()));
    }
    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));
    // Sum of 1-based midranks of the positives.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && predictions[order[j + 1]] == predictions[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&o| labels[o] == 1).count();
        pos_rank_sum += midrank * pos_in_tie as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUC computed separately for each user and averaged without weights.
/// Users whose interactions are all of one class are skipped.
pub fn user_auc(predictions: &[f64], labels: &[u8], users: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.len() != users.len() {
        return Err(Error::Metric("length mismatch".into()));
    }
    let mut by_user: BTreeMap<usize, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
    for ((&p, &y), &u) in predictions.iter().zip(labels).zip(users) {
        let e = by_user.entry(u).or_default();
        e.0.push(p);
        e.1.push(y);
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, y) in by_user.values() {
        let pos = y.iter().filter(|&&l| l == 1).count();
        if pos == 0 || pos == y.len() {
            continue;
        }
        sum += auc(p, y)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("no user has both positive and negative labels".into()));
    }
    Ok(sum / n as f64)
}

/// Mean clipped binary cross-entropy.
pub fn log_loss(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Metric("log loss of empty input".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Metric("length mismatch".into()));
    }
    Ok(predictions.iter().zip(labels).map(|(&p, &y)| bce(p, y).0).sum::<f64>() / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ListMetric {
    Hr,
    Ndcg,
    Map,
    Recall,
}

impl ListMetric {
    pub const ALL: [ListMetric; 4] = [ListMetric::Hr, ListMetric::Ndcg, ListMetric::Map, ListMetric::Recall];

    pub fn name(self) -> &'static str {
        match self {
            ListMetric::Hr => "HR",
            ListMetric::Ndcg => "NDCG",
            ListMetric::Map => "MAP",
            ListMetric::Recall => "Recall",
        }
    }

    pub fn compute(self, list: &RankedList, k: usize) -> f64 {
        match self {
            ListMetric::Hr => hr_at_k(list, k),
            ListMetric::Ndcg => ndcg_at_k(list, k),
            ListMetric::Map => map_at_k(list, k),
            ListMetric::Recall => recall_at_k(list, k),
        }
    }
}

/// Metric name → value, keyed like `HR@5`, `NDCG@10`, `AUC`, `LogLoss`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub entries: BTreeMap<String, f64>,
    /// Lists or interactions that contributed.
    pub n_evaluated: usize,
    /// Lists dropped because they had no positive.
    pub n_excluded: usize,
}

impl MetricReport {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.entries).expect("metric map serializes")
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(k, v)| format!("{k}:{v:.4}")).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// HR, NDCG, MAP and Recall at every cutoff, averaged over lists with at
/// least one positive.
pub fn evaluate_lists(groups: &[ScoredList], ks: &[usize]) -> Result<MetricReport> {
    evaluate_lists_with(groups, ks, &ListMetric::ALL)
}

pub fn evaluate_lists_with(groups: &[ScoredList], ks: &[usize], metrics: &[ListMetric]) -> Result<MetricReport> {
    let mut sums = vec![vec![0.0; ks.len()]; metrics.len()];
    let mut n = 0usize;
    let mut excluded = 0usize;
    for g in groups {
        if g.n_positive() == 0 {
            excluded += 1;
            continue;
        }
        let ranked = rank(&g.scores, &g.ids, &g.labels)?;
        for (m, metric) in metrics.iter().enumerate() {
            for (j, &k) in ks.iter().enumerate() {
                sums[m][j] += metric.compute(&ranked, k);
            }
        }
        n += 1;
    }
    let mut report = MetricReport {
        n_evaluated: n,
        n_excluded: excluded,
        ..Default::default()
    };
    if n == 0 {
        return Err(Error::Metric("no list with a positive item".into()));
    }
    for (m, metric) in metrics.iter().enumerate() {
        for (j, &k) in ks.iter().enumerate() {
            report.entries.insert(format!("{}@{k}", metric.name()), sums[m][j] / n as f64);
        }
    }
    Ok(report)
}
