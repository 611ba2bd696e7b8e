//! Multi-seed experiments: run one configuration under several seeds,
//! aggregate mean and sample standard deviation, persist the results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::metrics::MetricReport;
use crate::runners::{self, RunConfig, RunResult};
use crate::{Error, Result};

pub const AGGREGATE_JSON: &str = "aggregate.json";
pub const AGGREGATE_TSV: &str = "aggregate.tsv";
pub const TIMINGS_JSON: &str = "timings.json";

pub fn seed_file(seed: u64) -> String {
    format!("result_seed{seed}.json")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(config: RunConfig) -> Self {
        ExperimentSpec {
            config,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Config(format!("seeds must be distinct: {:?}", self.seeds)));
        }
        self.config.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Outcome of one seed: its test report, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub result: Option<RunResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    /// The resolved configuration shared by every seed (seed field excluded).
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedOutcome>,
    /// Test metric → mean and sample std over successful seeds.
    pub metrics: BTreeMap<String, MeanStd>,
    pub n_failed: usize,
    /// Wall-clock seconds per seed. Kept out of `aggregate.json` so that
    /// repeated runs produce identical files.
    #[serde(skip)]
    pub seconds: Vec<f64>,
}

/// Mean and sample standard deviation (`n − 1`; 0 for a single value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

/// Aggregates test reports per metric. A metric missing from some report
/// is aggregated over the reports that have it.
pub fn aggregate(reports: &[&MetricReport]) -> BTreeMap<String, MeanStd> {
    let mut by_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in reports {
        for (k, v) in &r.entries {
            by_metric.entry(k.clone()).or_default().push(*v);
        }
    }
    by_metric.into_iter().map(|(k, v)| (k, mean_std(&v))).collect()
}

/// Runs every seed on the dataset named by the configuration.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateResult> {
    spec.validate()?;
    let corpus = runners::load_corpus(&spec.config)?;
    run_experiment_on(spec, &corpus)
}

/// Runs every seed on an already loaded corpus and writes results when the
/// spec names an output directory.
pub fn run_experiment_on(spec: &ExperimentSpec, corpus: &Corpus) -> Result<AggregateResult> {
    run_experiment_with(spec, |config| runners::run_on(config, corpus))
}

/// [`run_experiment_on`] with an injectable single-run function.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    mut run_one: impl FnMut(&RunConfig) -> Result<RunResult>,
) -> Result<AggregateResult> {
    spec.validate()?;
    let mut per_seed = Vec::new();
    let mut seconds = Vec::new();
    for &seed in &spec.seeds {
        let mut config = spec.config.clone();
        config.random_seed = seed;
        if let (Some(out), Some(_)) = (&spec.output_dir, &config.save_dir) {
            config.save_dir = Some(out.join(format!("seed{seed}")));
        }
        let start = Instant::now();
        let outcome = match run_one(&config) {
            Ok(r) => {
                info!("seed {seed}: {}", r.test);
                SeedOutcome {
                    seed,
                    result: Some(r),
                    error: None,
                }
            }
            Err(e) => {
                warn!("seed {seed} failed: {e}");
                SeedOutcome {
                    seed,
                    result: None,
                    error: Some(e.to_string()),
                }
            }
        };
        seconds.push(start.elapsed().as_secs_f64());
        per_seed.push(outcome);
    }
    let ok: Vec<&MetricReport> = per_seed.iter().filter_map(|s| s.result.as_ref().map(|r| &r.test)).collect();
    if ok.is_empty() {
        let first = per_seed.iter().find_map(|s| s.error.clone()).unwrap_or_default();
        return Err(Error::Model(format!("all {} seeds failed; first error: {first}", spec.seeds.len())));
    }
    let result = AggregateResult {
        config: RunConfig {
            random_seed: 0,
            ..spec.config.clone()
        },
        seeds: spec.seeds.clone(),
        metrics: aggregate(&ok),
        n_failed: per_seed.len() - ok.len(),
        per_seed,
        seconds,
    };
    if let Some(dir) = &spec.output_dir {
        write_results(&result, dir)?;
    }
    Ok(result)
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes `result_seed<k>.json` per seed, `aggregate.json`, `aggregate.tsv`
/// (metric, mean, std) and `timings.json`.
pub fn write_results(result: &AggregateResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in &result.per_seed {
        write_file(&dir.join(seed_file(s.seed)), &serde_json::to_string_pretty(s)?)?;
    }
    write_file(&dir.join(AGGREGATE_JSON), &serde_json::to_string_pretty(result)?)?;
    let mut tsv = String::from("metric\tmean\tstd\n");
    for (k, v) in &result.metrics {
        tsv.push_str(&format!("{k}\t{}\t{}\n", v.mean, v.std));
    }
    write_file(&dir.join(AGGREGATE_TSV), &tsv)?;
    write_file(&dir.join(TIMINGS_JSON), &serde_json::to_string_pretty(&result.seconds)?)
}

/// Reads what [`write_results`] wrote. A missing directory or aggregate
/// file is [`Error::NotFound`].
pub fn read_results(dir: &Path) -> Result<AggregateResult> {
    let path = dir.join(AGGREGATE_JSON);
    if !path.exists() {
        return Err(Error::NotFound(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut result: AggregateResult = serde_json::from_str(&text)?;
    let timings = dir.join(TIMINGS_JSON);
    if timings.exists() {
        let text = fs::read_to_string(&timings).map_err(|e| Error::io(&timings, e))?;
        result.seconds = serde_json::from_str(&text)?;
    }
    Ok(result)
}

/// Warns when stored results were produced under a different configuration;
/// returns whether they match.
pub fn check_provenance(stored: &AggregateResult, config: &RunConfig) -> bool {
    let current = RunConfig {
        random_seed: 0,
        ..config.clone()
    };
    if stored.config != current {
        warn!("provenance: stored results were produced with a different configuration");
        return false;
    }
    true
}
