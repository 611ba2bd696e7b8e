//! Rank-statistics metrics against brute-force recomputation from the
//! definitions: selection-sort ranking, pairwise AUC, explicit precision@i.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recflex::losses::{ScoredList, PROB_EPS};
use recflex::metrics::{auc, evaluate_lists, hr_at_k, log_loss, map_at_k, ndcg_at_k, rank, recall_at_k};

const TOL: f64 = 1e-12;
const N_LISTS: usize = 1000;

/// Repeatedly takes the highest remaining score, smallest id among equals.
fn oracle_order(scores: &[f64], ids: &[usize]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..scores.len()).collect();
    let mut out = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for c in 1..left.len() {
            let (a, b) = (left[c], left[best]);
            if scores[a] > scores[b] || (scores[a] == scores[b] && ids[a] < ids[b]) {
                best = c;
            }
        }
        out.push(left.remove(best));
    }
    out
}

fn oracle_metrics(rel: &[u8], k: usize) -> [f64; 4] {
    let cut = k.min(rel.len());
    let n_pos = rel.iter().filter(|&&r| r == 1).count();
    let hr = if rel[..cut].iter().any(|&r| r == 1) { 1.0 } else { 0.0 };
    let dcg = |r: &[u8]| -> f64 {
        (1..=cut).map(|i| r[i - 1] as f64 / ((i + 1) as f64).log2()).sum()
    };
    let mut ideal = rel.to_vec();
    ideal.sort_by(|a, b| b.cmp(a));
    let ndcg = dcg(rel) / dcg(&ideal);
    let mut ap = 0.0;
    for i in 1..=cut {
        if rel[i - 1] == 1 {
            let prec = rel[..i].iter().filter(|&&r| r == 1).count() as f64 / i as f64;
            ap += prec;
        }
    }
    let map = ap / k.min(n_pos) as f64;
    let recall = rel[..cut].iter().filter(|&&r| r == 1).count() as f64 / n_pos as f64;
    [hr, ndcg, map, recall]
}

fn oracle_auc(p: &[f64], y: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                num += if p[i] > p[j] {
                    1.0
                } else if p[i] == p[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / pairs
}

fn oracle_log_loss(p: &[f64], y: &[u8]) -> f64 {
    let mut s = 0.0;
    for (&p, &y) in p.iter().zip(y) {
        let q = p.max(PROB_EPS).min(1.0 - PROB_EPS);
        s += if y == 1 { -q.ln() } else { -(1.0 - q).ln() };
    }
    s / p.len() as f64
}

/// Scores on a coarse grid half the time so ties are common.
fn random_list(rng: &mut ChaCha8Rng) -> ScoredList {
    let len = rng.random_range(1..=30);
    let coarse = rng.random_bool(0.5);
    let scores: Vec<f64> = (0..len)
        .map(|_| if coarse { rng.random_range(0..4) as f64 } else { rng.random_range(-3.0..3.0) })
        .collect();
    let p_pos = rng.random_range(0.05..0.6);
    let mut labels: Vec<u8> = (0..len).map(|_| rng.random_bool(p_pos) as u8).collect();
    if !labels.contains(&1) {
        let i = rng.random_range(0..len);
        labels[i] = 1;
    }
    let mut ids: Vec<usize> = (0..1000).collect();
    for i in 0..len {
        let j = rng.random_range(i..ids.len());
        ids.swap(i, j);
    }
    ids.truncate(len);
    ScoredList::with_ids(scores, labels, ids)
}

#[test]
fn list_metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ks = [1, 2, 3, 5, 10, 20, 50];
    let mut lists = Vec::new();
    let mut multi = 0;
    let mut tied = 0;
    for _ in 0..N_LISTS {
        let l = random_list(&mut rng);
        multi += (l.n_positive() > 1) as usize;
        let mut s = l.scores.clone();
        s.sort_by(f64::total_cmp);
        tied += s.windows(2).any(|w| w[0] == w[1]) as usize;

        let ranked = rank(&l.scores, &l.ids, &l.labels).unwrap();
        let order = oracle_order(&l.scores, &l.ids);
        let rel: Vec<u8> = order.iter().map(|&i| l.labels[i]).collect();
        assert_eq!(ranked.ids, order.iter().map(|&i| l.ids[i]).collect::<Vec<_>>());
        assert_eq!(ranked.relevance, rel);
        for &k in &ks {
            let got = [hr_at_k(&ranked, k), ndcg_at_k(&ranked, k), map_at_k(&ranked, k), recall_at_k(&ranked, k)];
            let want = oracle_metrics(&rel, k);
            for m in 0..4 {
                assert!((got[m] - want[m]).abs() <= TOL, "metric {m} k={k}: {} vs {}", got[m], want[m]);
            }
        }
        lists.push(l);
    }
    assert!(multi > 300 && tied > 300, "corpus lacks ties or multi-positive lists");

    let report = evaluate_lists(&lists, &ks).unwrap();
    assert_eq!(report.n_evaluated, N_LISTS);
    for &k in &ks {
        let mut sums = [0.0; 4];
        for l in &lists {
            let order = oracle_order(&l.scores, &l.ids);
            let rel: Vec<u8> = order.iter().map(|&i| l.labels[i]).collect();
            let m = oracle_metrics(&rel, k);
            for j in 0..4 {
                sums[j] += m[j];
            }
        }
        for (name, s) in ["HR", "NDCG", "MAP", "Recall"].iter().zip(sums) {
            let got = report.get(&format!("{name}@{k}")).unwrap();
            assert!((got - s / N_LISTS as f64).abs() <= TOL, "{name}@{k}");
        }
    }
}

#[test]
fn metrics_invariant_under_monotone_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..N_LISTS {
        let l = random_list(&mut rng);
        let a = rng.random_range(0.1..3.0);
        let b = rng.random_range(-5.0..5.0);
        let mapped: Vec<f64> = l.scores.iter().map(|&s| (a * s + b).tanh() * 2.0 + (a * s).exp()).collect();
        let r1 = rank(&l.scores, &l.ids, &l.labels).unwrap();
        let r2 = rank(&mapped, &l.ids, &l.labels).unwrap();
        assert_eq!(r1, r2);
    }
}

#[test]
fn auc_and_log_loss_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..N_LISTS {
        let n = rng.random_range(2..=60);
        let coarse = case % 2 == 0;
        let p: Vec<f64> = (0..n)
            .map(|_| if coarse { rng.random_range(0..5) as f64 / 4.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        let mut y: Vec<u8> = (0..n).map(|_| rng.random_bool(0.4) as u8).collect();
        y[0] = 1;
        y[1] = 0;
        let got = auc(&p, &y).unwrap();
        assert!((got - oracle_auc(&p, &y)).abs() <= TOL, "case {case}");
        let ll = log_loss(&p, &y).unwrap();
        assert!((ll - oracle_log_loss(&p, &y)).abs() <= TOL, "case {case}");
    }
}
