//! Training objectives with analytic gradients with respect to scores.
//!
//! All functions are pure. Gradients are `f64`; [`LossKind::value`] also
//! evaluates in any [`Real`] for the finite-difference check.

use serde::{Deserialize, Serialize};

use crate::real::Real;

/// Clip applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-7;

/// Scores and binary labels for one candidate list. `ids` are the item ids
/// used to break score ties when the list is ranked.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredList {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub ids: Vec<usize>,
}

impl ScoredList {
    /// A list whose tie-break ids are the positions `0..L`.
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Self {
        let ids = (0..scores.len()).collect();
        ScoredList { scores, labels, ids }
    }

    pub fn with_ids(scores: Vec<f64>, labels: Vec<u8>, ids: Vec<usize>) -> Self {
        ScoredList { scores, labels, ids }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Loss value and gradient for a list, or `Skipped` when the list cannot
/// contribute (no positives, or no negatives for pairwise losses).
#[derive(Debug, Clone, PartialEq)]
pub enum ListLoss {
    Value { loss: f64, grad: Vec<f64> },
    Skipped,
}

impl ListLoss {
    pub fn value(self) -> Option<(f64, Vec<f64>)> {
        match self {
            ListLoss::Value { loss, grad } => Some((loss, grad)),
            ListLoss::Skipped => None,
        }
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Pairwise BPR: `-ln σ(s_pos - s_neg)`. Returns `(loss, d_pos, d_neg)`.
pub fn bpr_pair(s_pos: f64, s_neg: f64) -> (f64, f64, f64) {
    let delta = s_pos - s_neg;
    let loss = softplus(-delta);
    let d_pos = sigmoid(delta) - 1.0;
    (loss, d_pos, -d_pos)
}

/// Mean pairwise BPR over every (positive, negative) pair of the list.
pub fn list_bpr(list: &ScoredList) -> ListLoss {
    let pos: Vec<usize> = (0..list.len()).filter(|&i| list.labels[i] == 1).collect();
    let neg: Vec<usize> = (0..list.len()).filter(|&i| list.labels[i] != 1).collect();
    if pos.is_empty() || neg.is_empty() {
        return ListLoss::Skipped;
    }
    let pairs = (pos.len() * neg.len()) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; list.len()];
    for &p in &pos {
        for &n in &neg {
            let (l, dp, dn) = bpr_pair(list.scores[p], list.scores[n]);
            loss += l;
            grad[p] += dp;
            grad[n] += dn;
        }
    }
    grad.iter_mut().for_each(|g| *g /= pairs);
    ListLoss::Value {
        loss: loss / pairs,
        grad,
    }
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

/// Cross-entropy of the softmax over the list against each positive,
/// averaged over positives.
pub fn softmax_ce(list: &ScoredList) -> ListLoss {
    let n_pos = list.n_positive();
    if n_pos == 0 {
        return ListLoss::Skipped;
    }
    let p = n_pos as f64;
    let logp = log_softmax(&list.scores);
    let loss = -logp
        .iter()
        .zip(&list.labels)
        .filter(|(_, &l)| l == 1)
        .map(|(lp, _)| lp)
        .sum::<f64>()
        / p;
    let grad = logp
        .iter()
        .zip(&list.labels)
        .map(|(lp, &l)| lp.exp() - if l == 1 { 1.0 / p } else { 0.0 })
        .collect();
    ListLoss::Value { loss, grad }
}

/// ListNet with the target distribution `labels / Σ labels`.
pub fn listnet(list: &ScoredList) -> ListLoss {
    let n_pos = list.n_positive();
    if n_pos == 0 {
        return ListLoss::Skipped;
    }
    let target: Vec<f64> = list.labels.iter().map(|&l| l as f64 / n_pos as f64).collect();
    listnet_with_target(&list.scores, &target)
}

/// `-Σ t_j ln softmax(s)_j` for an arbitrary target distribution.
pub fn listnet_with_target(scores: &[f64], target: &[f64]) -> ListLoss {
    let logp = log_softmax(scores);
    let loss = -target
        .iter()
        .zip(&logp)
        .filter(|(&t, _)| t > 0.0)
        .map(|(t, lp)| t * lp)
        .sum::<f64>();
    let grad = logp.iter().zip(target).map(|(lp, t)| lp.exp() - t).collect();
    ListLoss::Value { loss, grad }
}

/// Binary cross-entropy on a probability clipped to `[ε, 1-ε]`. The
/// derivative is zero outside the clip band.
pub fn bce(p: f64, y: u8) -> (f64, f64) {
    let clipped = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let y = y as f64;
    let loss = -(y * clipped.ln() + (1.0 - y) * (1.0 - clipped).ln());
    let d = if p < PROB_EPS || p > 1.0 - PROB_EPS {
        0.0
    } else {
        -y / clipped + (1.0 - y) / (1.0 - clipped)
    };
    (loss, d)
}

/// BCE applied to `σ(logit)`; returns `(loss, d_logit)`.
pub fn bce_logit(logit: f64, y: u8) -> (f64, f64) {
    let p = sigmoid(logit);
    let (loss, dp) = bce(p, y);
    (loss, dp * p * (1.0 - p))
}

/// Named objectives as selected by run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// First candidate is the positive; mean pairwise BPR over the rest.
    Bpr,
    ListBpr,
    SoftmaxCe,
    ListNet,
    /// Mean BCE of `σ(score)` against each candidate's label.
    Bce,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Bpr => "bpr",
            LossKind::ListBpr => "list_bpr",
            LossKind::SoftmaxCe => "softmax_ce",
            LossKind::ListNet => "listnet",
            LossKind::Bce => "bce",
        }
    }

    pub fn parse(s: &str) -> Option<LossKind> {
        match s {
            "bpr" | "BPR" => Some(LossKind::Bpr),
            "list_bpr" | "listbpr" => Some(LossKind::ListBpr),
            "softmax_ce" | "softmax" => Some(LossKind::SoftmaxCe),
            "listnet" => Some(LossKind::ListNet),
            "bce" | "BCE" => Some(LossKind::Bce),
            _ => None,
        }
    }

    /// Loss and gradient with respect to `scores` for one request's candidates.
    pub fn evaluate(self, scores: &[f64], labels: &[u8]) -> ListLoss {
        match self {
            LossKind::Bpr => {
                if scores.len() < 2 {
                    return ListLoss::Skipped;
                }
                let n = (scores.len() - 1) as f64;
                let mut grad = vec![0.0; scores.len()];
                let mut loss = 0.0;
                for j in 1..scores.len() {
                    let (l, dp, dn) = bpr_pair(scores[0], scores[j]);
                    loss += l / n;
                    grad[0] += dp / n;
                    grad[j] += dn / n;
                }
                ListLoss::Value { loss, grad }
            }
            LossKind::Bce => {
                let n = scores.len() as f64;
                let mut loss = 0.0;
                let mut grad = Vec::with_capacity(scores.len());
                for (&s, &y) in scores.iter().zip(labels) {
                    let (l, d) = bce_logit(s, y);
                    loss += l / n;
                    grad.push(d / n);
                }
                ListLoss::Value { loss, grad }
            }
            list => {
                let sl = ScoredList::new(scores.to_vec(), labels.to_vec());
                match list {
                    LossKind::ListBpr => list_bpr(&sl),
                    LossKind::SoftmaxCe => softmax_ce(&sl),
                    LossKind::ListNet => listnet(&sl),
                    _ => unreachable!(),
                }
            }
        }
    }

    /// The loss alone, in scalar type `T`; `None` where [`evaluate`]
    /// returns `Skipped`.
    ///
    /// [`evaluate`]: LossKind::evaluate
    pub fn value<T: Real>(self, scores: &[T], labels: &[u8]) -> Option<T> {
        let mean = |xs: &[T]| xs.iter().fold(T::zero(), |a, &x| a + x) / T::from_f64(xs.len() as f64);
        let pos: Vec<usize> = (0..scores.len()).filter(|&i| labels[i] == 1).collect();
        match self {
            LossKind::Bpr => {
                if scores.len() < 2 {
                    return None;
                }
                let terms: Vec<T> = scores[1..].iter().map(|&s| softplus_t(s - scores[0])).collect();
                Some(mean(&terms))
            }
            LossKind::ListBpr => {
                let neg: Vec<usize> = (0..scores.len()).filter(|&i| labels[i] != 1).collect();
                if pos.is_empty() || neg.is_empty() {
                    return None;
                }
                let terms: Vec<T> = pos
                    .iter()
                    .flat_map(|&p| neg.iter().map(move |&n| softplus_t(scores[n] - scores[p])))
                    .collect();
                Some(mean(&terms))
            }
            // With binary labels the ListNet target puts 1/P on each positive,
            // which makes it coincide with the softmax cross-entropy.
            LossKind::SoftmaxCe | LossKind::ListNet => {
                if pos.is_empty() {
                    return None;
                }
                let max = scores.iter().skip(1).fold(scores[0], |m, &s| m.max(s));
                let lse = max + scores.iter().fold(T::zero(), |a, &s| a + (s - max).exp()).ln();
                let terms: Vec<T> = pos.iter().map(|&p| lse - scores[p]).collect();
                Some(mean(&terms))
            }
            LossKind::Bce => {
                let (lo, hi) = (T::from_f64(PROB_EPS), T::from_f64(1.0 - PROB_EPS));
                let terms: Vec<T> = scores
                    .iter()
                    .zip(labels)
                    .map(|(&s, &y)| {
                        let p = T::one() / (T::one() + (-s).exp());
                        let p = if p < lo { lo } else if p > hi { hi } else { p };
                        -if y == 1 { p.ln() } else { (T::one() - p).ln() }
                    })
                    .collect();
                Some(mean(&terms))
            }
        }
    }
}

/// `ln(1 + e^x)` in any [`Real`].
fn softplus_t<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (T::one() + (-x).exp()).ln()
    } else {
        (T::one() + x.exp()).ln()
    }
}
