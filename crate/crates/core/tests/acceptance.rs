//! Acceptance criteria, one `PASS`/`FAIL` line each (`SKIP` for the optional
//! real-data check when its dataset is absent). Run with `--nocapture` to
//! see the table; the test fails if any criterion fails.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use recflex::corpus::{prep_dataset, read_raw_interactions, write_prepared, PrepConfig, RawFormat, Split};
use recflex::harness::{run_experiment, ExperimentSpec};
use recflex::losses::ScoredList;
use recflex::metrics::{evaluate_lists, MetricReport};
use recflex::models::{checkpoint_hash, init, ModelKind, Scorer, TaskMode};
use recflex::optim::OptimizerKind;
use recflex::runners::{load_corpus, run_on, topk_lists, train_with, RunConfig};
use recflex::Error;

// Criterion 1
const GRAD_TOL: f64 = 1e-6;
const GRAD_BUDGET: Duration = Duration::from_secs(120);
// Criterion 2
const ORACLE_TOL: f64 = 1e-12;
const ORACLE_LISTS: usize = 1000;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
// Criterion 3
const TOPK_VS_POP: f64 = 1.2;
const TOPK_VS_ORACLE: f64 = 0.8;
/// 100 items minus 50 train positives minus the held-out item.
const TOPK_EVAL_NEGS: usize = 49;
const TOPK_BUDGET: Duration = Duration::from_secs(180);
// Criterion 4
const XOR_FM_MIN_AUC: f64 = 0.85;
const XOR_LINEAR_MAX_AUC: f64 = 0.75;
const XOR_NOISE: f64 = 0.1;
const XOR_BUDGET: Duration = Duration::from_secs(120);
// Criterion 5
const RERANK_MIN_GAIN: f64 = 0.05;
const RERANK_BUDGET: Duration = Duration::from_secs(300);
// Criterion 7
const STOP_PATIENCE: usize = 10;
// Criterion 8
const ML_HR5: (f64, f64) = (0.93, 1.00);
const ML_NDCG5: (f64, f64) = (0.70, 0.79);
const ML_BUDGET: Duration = Duration::from_secs(1800);

#[derive(Debug)]
enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    id: usize,
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn outcome(id: usize, name: &'static str, ok: bool, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn within(elapsed: Duration, budget: Duration) -> (bool, String) {
    (elapsed <= budget, format!("{:.1}s/{}s", elapsed.as_secs_f64(), budget.as_secs()))
}

fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) {
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn base_config(dir: &Path) -> RunConfig {
    RunConfig {
        data_dir: Some(dir.to_path_buf()),
        ..RunConfig::default()
    }
}

// ---------------------------------------------------------------- 1

fn gradient_integrity() -> Outcome {
    let start = Instant::now();
    let entries = common::gradcheck::sweep();
    let (fast, time) = within(start.elapsed(), GRAD_BUDGET);
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    let mut n = 0;
    for e in &entries {
        if e.report.no_parameters {
            continue;
        }
        n += 1;
        worst = worst.max(e.report.max_rel_err);
        if e.report.max_rel_err > GRAD_TOL || e.report.n_checked == 0 {
            failed.push(format!("{}/{}/{}", e.kind, e.mode, e.loss.name()));
        }
    }
    let ok = failed.is_empty() && fast && n >= 10;
    let mut detail = format!("{n} model×loss pairs, max rel err {worst:.2e} ≤ {GRAD_TOL:e}, {time}");
    if !failed.is_empty() {
        let _ = write!(detail, ", failing: {}", failed.join(" "));
    }
    outcome(1, "gradient integrity", ok, detail)
}

// ---------------------------------------------------------------- 2

/// Selection-sort ranking and per-definition metrics, independent of the
/// library's sort and rank statistics.
fn oracle_list_metrics(l: &ScoredList, k: usize) -> [f64; 3] {
    let mut left: Vec<usize> = (0..l.len()).collect();
    let mut rel = Vec::new();
    while !left.is_empty() {
        let mut b = 0;
        for c in 1..left.len() {
            let (x, y) = (left[c], left[b]);
            if l.scores[x] > l.scores[y] || (l.scores[x] == l.scores[y] && l.ids[x] < l.ids[y]) {
                b = c;
            }
        }
        rel.push(l.labels[left.remove(b)]);
    }
    let cut = k.min(rel.len());
    let n_pos = rel.iter().filter(|&&r| r == 1).count();
    let hr = rel[..cut].contains(&1) as u8 as f64;
    let dcg = |r: &[u8]| (0..cut).map(|i| r[i] as f64 / ((i + 2) as f64).log2()).sum::<f64>();
    let mut ideal = rel.clone();
    ideal.sort_by(|a, b| b.cmp(a));
    let mut ap = 0.0;
    for i in 0..cut {
        if rel[i] == 1 {
            ap += rel[..=i].iter().filter(|&&r| r == 1).count() as f64 / (i + 1) as f64;
        }
    }
    [hr, dcg(&rel) / dcg(&ideal), ap / k.min(n_pos) as f64]
}

fn oracle_auc(p: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..p.len() {
        for j in 0..p.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if p[i] > p[j] { 1.0 } else if p[i] == p[j] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ks = [1, 3, 5, 10];
    let mut max_diff = 0.0f64;
    let (mut ties, mut multi) = (0, 0);
    for _ in 0..ORACLE_LISTS {
        let len = rng.random_range(2..=25);
        let coarse = rng.random_bool(0.5);
        let scores: Vec<f64> = (0..len)
            .map(|_| if coarse { rng.random_range(0..3) as f64 } else { rng.random_range(0.0..1.0) })
            .collect();
        let mut labels: Vec<u8> = (0..len).map(|_| rng.random_bool(0.3) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let ids = sample(&mut rng, 500, len).into_vec();
        ties += coarse as usize;
        multi += (labels.iter().filter(|&&l| l == 1).count() > 1) as usize;
        let list = ScoredList::with_ids(scores.clone(), labels.clone(), ids);
        let report = evaluate_lists(std::slice::from_ref(&list), &ks).unwrap();
        for &k in &ks {
            let want = oracle_list_metrics(&list, k);
            for (name, w) in ["HR", "NDCG", "MAP"].iter().zip(want) {
                max_diff = max_diff.max((report.get(&format!("{name}@{k}")).unwrap() - w).abs());
            }
        }
        let probs: Vec<f64> = scores.iter().map(|s| s / 3.0).collect();
        max_diff = max_diff.max((recflex::metrics::auc(&probs, &labels).unwrap() - oracle_auc(&probs, &labels)).abs());
        let ll = recflex::metrics::log_loss(&probs, &labels).unwrap();
        let want: f64 = probs
            .iter()
            .zip(&labels)
            .map(|(&p, &y)| {
                let q = p.clamp(recflex::losses::PROB_EPS, 1.0 - recflex::losses::PROB_EPS);
                if y == 1 { -q.ln() } else { -(1.0 - q).ln() }
            })
            .sum::<f64>()
            / len as f64;
        max_diff = max_diff.max((ll - want).abs());
    }
    let (fast, time) = within(start.elapsed(), ORACLE_BUDGET);
    let ok = max_diff <= ORACLE_TOL && fast && ties > 0 && multi > 0;
    outcome(
        2,
        "metric oracle equivalence",
        ok,
        format!("{ORACLE_LISTS} lists ({ties} tied, {multi} multi-positive), max |diff| {max_diff:.1e} ≤ {ORACLE_TOL:e}, {time}"),
    )
}

// ---------------------------------------------------------------- 3

struct LowRank {
    users: Vec<Vec<f64>>,
    items: Vec<Vec<f64>>,
}

impl LowRank {
    fn score(&self, u: usize, i: usize) -> f64 {
        dot(&self.users[u], &self.items[i]) / (self.users[u].len() as f64).sqrt()
    }
}

/// 200 users × 100 items from rank-8 Gaussian factors. Each user picks 52
/// distinct items by Gumbel-top-k on `2·score`; in a random time order, the
/// first 50 train, the next one is dev and the last is test.
fn write_low_rank(dir: &Path) -> LowRank {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n_users, n_items, rank) = (200, 100, 8);
    let truth = LowRank {
        users: (0..n_users).map(|_| gaussian(&mut rng, rank)).collect(),
        items: (0..n_items).map(|_| gaussian(&mut rng, rank)).collect(),
    };
    let mut splits: [Vec<Vec<String>>; 3] = Default::default();
    let mut t = 0i64;
    for u in 0..n_users {
        let mut keyed: Vec<(f64, usize)> = (0..n_items)
            .map(|i| {
                let g: f64 = -(-rng.random_range(f64::MIN_POSITIVE..1.0).ln()).ln();
                (2.0 * truth.score(u, i) + g, i)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut picked: Vec<usize> = keyed[..52].iter().map(|&(_, i)| i).collect();
        for i in (1..picked.len()).rev() {
            picked.swap(i, rng.random_range(0..=i));
        }
        for (k, &i) in picked.iter().enumerate() {
            t += 1;
            let split = if k < 50 { 0 } else { k - 49 };
            splits[split].push(vec![u.to_string(), i.to_string(), t.to_string()]);
        }
    }
    for (name, rows) in ["train", "dev", "test"].iter().zip(&splits) {
        write_tsv(&dir.join(format!("{name}.tsv")), &["user_id", "item_id", "time"], rows);
    }
    truth
}

fn topk_config(dir: &Path) -> RunConfig {
    RunConfig {
        model_mode: TaskMode::TopK,
        emb_size: 16,
        optimizer: OptimizerKind::Adam,
        lr: 1e-3,
        batch_size: 256,
        epochs: 300,
        patience: 10,
        test_num_neg: TOPK_EVAL_NEGS,
        main_metric: Some("NDCG@10".into()),
        ..base_config(dir)
    }
}

fn topk_sanity(dir: &Path) -> Outcome {
    let start = Instant::now();
    let truth = write_low_rank(dir);
    let cfg = topk_config(dir);
    let corpus = load_corpus(&cfg).unwrap();

    // the generative oracle scores with the true factors
    let lists = topk_lists(&corpus, Split::Test, &cfg).unwrap();
    let scored: Vec<ScoredList> = lists
        .iter()
        .map(|l| {
            let u = corpus.user_ids.raw(l.request.user) as usize;
            let scores = l
                .request
                .items
                .iter()
                .map(|&i| truth.score(u, corpus.item_ids.raw(i) as usize))
                .collect();
            ScoredList::with_ids(scores, l.labels.clone(), l.request.items.clone())
        })
        .collect();
    let oracle = evaluate_lists(&scored, &[10]).unwrap().get("NDCG@10").unwrap();

    let pop = run_on(
        &RunConfig {
            model_name: ModelKind::MostPopular,
            ..cfg.clone()
        },
        &corpus,
    )
    .unwrap()
    .test
    .get("NDCG@10")
    .unwrap();
    let mf = run_on(&cfg, &corpus).unwrap();
    let bpr = mf.test.get("NDCG@10").unwrap();

    // the nominal 99 sampled negatives do not exist in this construction
    let infeasible = matches!(
        topk_lists(&corpus, Split::Test, &RunConfig { test_num_neg: 99, ..cfg.clone() }),
        Err(Error::NotEnoughNegatives { .. })
    );

    let (fast, time) = within(start.elapsed(), TOPK_BUDGET);
    let ok = bpr >= TOPK_VS_POP * pop && bpr >= TOPK_VS_ORACLE * oracle && infeasible && fast;
    outcome(
        3,
        "top-k sanity on low-rank data",
        ok,
        format!(
            "NDCG@10 BPRMF {bpr:.4} vs POP {pop:.4} (×{:.2} ≥ {TOPK_VS_POP}) vs oracle {oracle:.4} (×{:.2} ≥ {TOPK_VS_ORACLE}), \
             {TOPK_EVAL_NEGS} negatives (99 rejected: {infeasible}), best epoch {}, {time}",
            bpr / pop,
            bpr / oracle,
            mf.best_epoch
        ),
    )
}

// ---------------------------------------------------------------- 4

/// Label = a XOR b over two binary situation features, flipped with
/// probability 0.1; users and items carry no signal.
fn write_xor(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut t = 0i64;
    for (name, n) in [("train", 6000), ("dev", 1000), ("test", 2000)] {
        let rows: Vec<Vec<String>> = (0..n)
            .map(|_| {
                t += 1;
                let (a, b) = (rng.random_range(0..2u8), rng.random_range(0..2u8));
                let mut y = a ^ b;
                if rng.random_bool(XOR_NOISE) {
                    y ^= 1;
                }
                vec![
                    rng.random_range(0..50).to_string(),
                    rng.random_range(0..40).to_string(),
                    t.to_string(),
                    y.to_string(),
                    a.to_string(),
                    b.to_string(),
                ]
            })
            .collect();
        write_tsv(
            &dir.join(format!("{name}.tsv")),
            &["user_id", "item_id", "time", "label", "c_a_c", "c_b_c"],
            &rows,
        );
    }
}

fn ctr_interaction(dir: &Path) -> Outcome {
    let start = Instant::now();
    write_xor(dir);
    let cfg = RunConfig {
        model_mode: TaskMode::Ctr,
        model_name: ModelKind::Fm,
        num_neg: 0,
        emb_size: 8,
        lr: 1e-2,
        batch_size: 128,
        epochs: 100,
        patience: 5,
        ..base_config(dir)
    };
    let corpus = load_corpus(&cfg).unwrap();
    let fm = run_on(&cfg, &corpus).unwrap().test.get("AUC").unwrap();
    let linear = run_on(&RunConfig { emb_size: 0, ..cfg.clone() }, &corpus)
        .unwrap()
        .test
        .get("AUC")
        .unwrap();
    let (fast, time) = within(start.elapsed(), XOR_BUDGET);
    let ok = fm >= XOR_FM_MIN_AUC && linear <= XOR_LINEAR_MAX_AUC && fast;
    outcome(
        4,
        "CTR interaction recovery",
        ok,
        format!("test AUC FM(d=8) {fm:.4} ≥ {XOR_FM_MIN_AUC}, FM(d=0) {linear:.4} ≤ {XOR_LINEAR_MAX_AUC}, {time}"),
    )
}

// ---------------------------------------------------------------- 5

/// Impressions of 10 distinct items. The true utility of item `i` in list
/// `L` is `⟨u, e_i⟩/√d − 0.5·⟨e_i, mean_{j∈L} e_j⟩`; the item with the
/// highest utility is clicked. Item embeddings form tight clusters, so an
/// item from a cluster that dominates the list loses to an outlier.
fn write_impressions(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n_users, n_items, d, n_clusters) = (100, 80, 8, 4);
    let centers: Vec<Vec<f64>> = (0..n_clusters).map(|_| gaussian(&mut rng, d)).collect();
    let items: Vec<Vec<f64>> = (0..n_items)
        .map(|i| {
            let c = &centers[i % n_clusters];
            gaussian(&mut rng, d).iter().zip(c).map(|(z, c)| c + 0.3 * z).collect()
        })
        .collect();
    let users: Vec<Vec<f64>> = (0..n_users).map(|_| gaussian(&mut rng, d)).collect();
    let mut t = 0i64;
    let mut imp = 0;
    for (name, per_user) in [("train", 30), ("dev", 3), ("test", 5)] {
        let mut rows = Vec::new();
        for (u, uv) in users.iter().enumerate() {
            for _ in 0..per_user {
                imp += 1;
                // lists over-represent one cluster half the time
                let heavy = rng.random_range(0..n_clusters);
                let mut list: Vec<usize> = Vec::new();
                while list.len() < 10 {
                    let i = if rng.random_bool(0.5) {
                        heavy + n_clusters * rng.random_range(0..n_items / n_clusters)
                    } else {
                        rng.random_range(0..n_items)
                    };
                    if !list.contains(&i) {
                        list.push(i);
                    }
                }
                let mean: Vec<f64> =
                    (0..d).map(|k| list.iter().map(|&i| items[i][k]).sum::<f64>() / 10.0).collect();
                let utility = |i: usize| dot(uv, &items[i]) / (d as f64).sqrt() - 0.5 * dot(&items[i], &mean);
                let best = *list.iter().max_by(|&&a, &&b| utility(a).total_cmp(&utility(b))).unwrap();
                for &i in &list {
                    t += 1;
                    rows.push(vec![
                        u.to_string(),
                        i.to_string(),
                        t.to_string(),
                        ((i == best) as u8).to_string(),
                        format!("imp{imp}"),
                    ]);
                }
            }
        }
        write_tsv(
            &dir.join(format!("{name}.tsv")),
            &["user_id", "item_id", "time", "label", "impression_id"],
            &rows,
        );
    }
}

fn rerank_gain(dir: &Path) -> Outcome {
    let start = Instant::now();
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    write_impressions(&data);
    let backbone_dir = dir.join("backbone");
    let base = RunConfig {
        model_mode: TaskMode::Impression,
        model_name: ModelKind::BprMf,
        emb_size: 16,
        lr: 5e-3,
        batch_size: 64,
        epochs: 100,
        patience: 5,
        main_metric: Some("NDCG@5".into()),
        save_dir: Some(backbone_dir.clone()),
        ..base_config(&data)
    };
    let corpus = load_corpus(&base).unwrap();
    run_on(&base, &corpus).unwrap();
    let hash_before = checkpoint_hash(&backbone_dir).unwrap();

    let rerank = RunConfig {
        model_name: ModelKind::PrmLite,
        base_model_name: Some(ModelKind::BprMf),
        base_model_path: Some(backbone_dir.clone()),
        save_dir: None,
        hidden: vec![32],
        pos_dim: 4,
        max_list_len: 10,
        lr: 3e-3,
        ..base.clone()
    };
    let result = run_on(&rerank, &corpus).unwrap();
    let hash_after = checkpoint_hash(&backbone_dir).unwrap();
    let prm = result.test.get("NDCG@5").unwrap();
    let bb = result.backbone_test.as_ref().and_then(|r| r.get("NDCG@5")).unwrap();
    let gain = prm / bb - 1.0;
    let unchanged = hash_before == hash_after;
    let (fast, time) = within(start.elapsed(), RERANK_BUDGET);
    let ok = gain >= RERANK_MIN_GAIN && unchanged && fast;
    outcome(
        5,
        "re-ranking gain",
        ok,
        format!(
            "test NDCG@5 PRMLite {prm:.4} vs backbone {bb:.4} ({:+.1}% ≥ +{:.0}%), backbone hash unchanged: {unchanged}, {time}",
            100.0 * gain,
            100.0 * RERANK_MIN_GAIN
        ),
    )
}

// ---------------------------------------------------------------- 6

fn reproducibility(dir: &Path) -> Outcome {
    let data = dir.join("data");
    fs::create_dir_all(&data).unwrap();
    write_low_rank(&data);
    let cfg = RunConfig {
        epochs: 15,
        ..topk_config(&data)
    };
    let run_seeds = |seeds: Vec<u64>, out: &str| {
        let spec = ExperimentSpec {
            config: cfg.clone(),
            seeds,
            output_dir: Some(dir.join(out)),
        };
        run_experiment(&spec).unwrap()
    };
    run_seeds(vec![0], "a");
    run_seeds(vec![0], "b");
    let a = fs::read(dir.join("a/aggregate.json")).unwrap();
    let b = fs::read(dir.join("b/aggregate.json")).unwrap();
    let identical = a == b;
    let agg = run_seeds((0..5).collect(), "c");
    let varying: Vec<&String> = agg.metrics.iter().filter(|(_, ms)| ms.std > 0.0).map(|(k, _)| k).collect();
    let ndcg = &agg.metrics["NDCG@10"];
    let ok = identical && !varying.is_empty() && agg.n_failed == 0;
    outcome(
        6,
        "reproducibility",
        ok,
        format!(
            "seed [0] twice: aggregate.json identical={identical} ({} bytes); seeds 0..4: {} metrics with std>0, NDCG@10 {:.4}±{:.4}",
            a.len(),
            varying.len(),
            ndcg.mean,
            ndcg.std
        ),
    )
}

// ---------------------------------------------------------------- 7

fn early_stopping() -> Outcome {
    let corpus = common::tiny_context_corpus(6, 12);
    let cfg = RunConfig {
        model_name: ModelKind::BprMf,
        emb_size: 4,
        epochs: 100,
        patience: STOP_PATIENCE,
        lr: 1e-2,
        ..RunConfig::default()
    };
    // rises to a peak at epoch 4, then never strictly exceeds it
    let script = |e: usize| match e {
        1..=4 => 0.1 * e as f64,
        _ => 0.4 - 0.01 * ((e % 3) as f64),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = init(ModelKind::BprMf, &corpus, TaskMode::TopK, &cfg.model_config(), &mut rng).unwrap();
    let mut snapshots = Vec::new();
    let outcome_ = train_with(model.as_mut(), &corpus, &cfg, None, &mut |s: &dyn Scorer, epoch| {
        snapshots.push(s.params().snapshot());
        let mut r = MetricReport::default();
        r.entries.insert("NDCG@5".into(), script(epoch));
        Ok(r)
    })
    .unwrap();
    let expected_stop = 4 + STOP_PATIENCE;
    let restored = model.params().snapshot() == snapshots[3];
    let distinct = snapshots[3] != snapshots[snapshots.len() - 1];
    let ok = outcome_.epochs_run == expected_stop
        && outcome_.stopped_early
        && outcome_.best_epoch == 4
        && restored
        && distinct;
    outcome(
        7,
        "early stopping",
        ok,
        format!(
            "scripted dev peak at epoch 4, stopped after epoch {} (expected {expected_stop}), best epoch {}, best parameters restored: {restored}",
            outcome_.epochs_run, outcome_.best_epoch
        ),
    )
}

// ---------------------------------------------------------------- 8

fn movielens(dir: &Path) -> Outcome {
    let Ok(path) = std::env::var("ML1M_PATH") else {
        return Outcome {
            id: 8,
            name: "MovieLens-1M loose check",
            verdict: Verdict::Skip,
            detail: "ML1M_PATH not set (path to ratings.dat)".into(),
        };
    };
    let start = Instant::now();
    // five-core, sessions of 20, ratings 4–5 positive, 80/10/10 by time
    let raw = read_raw_interactions(Path::new(&path), RawFormat::MovieLens).unwrap();
    let out = prep_dataset(&raw, &PrepConfig::default()).unwrap();
    write_prepared(&out, dir).unwrap();
    let cfg = RunConfig {
        model_mode: TaskMode::Impression,
        model_name: ModelKind::BprMf,
        ..base_config(dir)
    };
    let corpus = load_corpus(&cfg).unwrap();
    let test = run_on(&cfg, &corpus).unwrap().test;
    let hr = test.get("HR@5").unwrap();
    let ndcg = test.get("NDCG@5").unwrap();
    let (fast, time) = within(start.elapsed(), ML_BUDGET);
    let ok = (ML_HR5.0..=ML_HR5.1).contains(&hr) && (ML_NDCG5.0..=ML_NDCG5.1).contains(&ndcg) && fast;
    outcome(
        8,
        "MovieLens-1M loose check",
        ok,
        format!("HR@5 {hr:.4} ∈ {ML_HR5:?}, NDCG@5 {ndcg:.4} ∈ {ML_NDCG5:?}, {time}"),
    )
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let sub = |name: &str| {
        let p = tmp.path().join(name);
        fs::create_dir_all(&p).unwrap();
        p
    };
    let results = [
        gradient_integrity(),
        metric_oracle(),
        topk_sanity(&sub("c3")),
        ctr_interaction(&sub("c4")),
        rerank_gain(&sub("c5")),
        reproducibility(&sub("c6")),
        early_stopping(),
        movielens(&sub("c8")),
    ];
    let mut failed = Vec::new();
    for r in &results {
        let tag = match r.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        println!("{tag} [{}] {}: {}", r.id, r.name, r.detail);
        if matches!(r.verdict, Verdict::Fail) {
            failed.push(r.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
