//! Shared finite-difference sweep over models, modes and losses.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recflex::losses::LossKind;
use recflex::models::{init, ModelConfig, ModelKind, ScoreRequest, Scorer, TaskMode};
use recflex::optim::{grad_check, GradCheckConfig, GradCheckReport};
use recflex::runners::training_losses;

/// Tolerance on the maximum relative error.
pub const TOL: f64 = 1e-6;

pub fn config() -> ModelConfig {
    ModelConfig {
        emb_size: 4,
        hidden: vec![6, 5],
        pos_dim: 3,
        max_list_len: 12,
        ..ModelConfig::default()
    }
}

/// Draws a candidate list whose labels suit `loss`.
pub fn sampler(
    kind: ModelKind,
    loss: LossKind,
    n_users: usize,
    n_items: usize,
    emb: usize,
) -> impl FnMut(&mut ChaCha8Rng) -> (ScoreRequest, Vec<u8>) {
    move |rng| {
        let len = rng.random_range(2..=8usize);
        let items: Vec<usize> = sample(rng, n_items, len).into_vec();
        let mut req = ScoreRequest::new(rng.random_range(0..n_users), items);
        req.history = (0..rng.random_range(0..4)).map(|_| rng.random_range(0..n_items)).collect();
        req.situation = vec![rng.random_range(0..4) as f64, rng.random_range(-2.0..2.0)];
        let mut labels = vec![0u8; len];
        match loss {
            LossKind::Bpr => labels[0] = 1,
            LossKind::Bce => labels.iter_mut().for_each(|l| *l = rng.random_range(0..2)),
            _ => {
                let n_pos = rng.random_range(1..len);
                sample(rng, len, n_pos).into_iter().for_each(|i| labels[i] = 1);
            }
        }
        if kind.is_reranker() {
            req.base_scores = Some((0..len).map(|_| rng.random_range(-3.0..3.0)).collect());
            req.base_embeddings = Some(
                (0..len)
                    .map(|_| (0..emb).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
            );
        }
        (req, labels)
    }
}

pub struct SweepEntry {
    pub kind: ModelKind,
    pub mode: TaskMode,
    pub loss: LossKind,
    pub report: GradCheckReport,
}

/// Runs the check for every model, every mode it supports and every loss
/// that mode trains with, 20 random parameter draws each.
pub fn sweep() -> Vec<SweepEntry> {
    let corpus = super::tiny_context_corpus(7, 15);
    let cfg = config();
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        for mode in [TaskMode::TopK, TaskMode::Ctr, TaskMode::Impression] {
            if !kind.supports(mode) {
                continue;
            }
            for &loss in training_losses(mode) {
                let mut rng = ChaCha8Rng::seed_from_u64(42);
                let mut model: Box<dyn Scorer> = init(kind, &corpus, mode, &cfg, &mut rng).unwrap();
                let check = GradCheckConfig {
                    n_trials: 20,
                    tol: TOL,
                    param_std: Some(0.4),
                    ..GradCheckConfig::default()
                };
                let report = grad_check(
                    model.as_mut(),
                    loss,
                    sampler(kind, loss, corpus.n_users, corpus.n_items, cfg.emb_size),
                    &check,
                    &mut rng,
                )
                .unwrap();
                out.push(SweepEntry { kind, mode, loss, report });
            }
        }
    }
    out
}
