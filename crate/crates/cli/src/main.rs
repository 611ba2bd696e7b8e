//! `recflex` command line: dataset preparation, training, evaluation,
//! re-ranking and multi-seed experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;

use recflex::corpus::{prep_dataset, read_raw_interactions, write_prepared, PrepConfig, RawFormat, Situation, Split, SplitSpec};
use recflex::harness::{run_experiment, ExperimentSpec};
use recflex::losses::LossKind;
use recflex::models::{ModelKind, TaskMode};
use recflex::optim::OptimizerKind;
use recflex::runners::{self, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "recflex", version, about = "Train and evaluate recommenders across task modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, sessionize and split a raw interaction log into train/dev/test files.
    Prep(PrepArgs),
    /// Train a model, then evaluate the best epoch on the test split.
    Train(RunArgs),
    /// Evaluate a saved checkpoint.
    Eval(EvalArgs),
    /// Train a re-ranker on top of a frozen backbone checkpoint.
    Rerank(RunArgs),
    /// Repeat a training run over several seeds and aggregate the results.
    Exp(ExpArgs),
}

fn parse_mode(s: &str) -> Result<TaskMode, String> {
    TaskMode::parse(s).ok_or_else(|| format!("unknown mode `{s}` (TopK, CTR, Impression)"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| format!("unknown model `{s}` (POP, BPRMF, FPMC, FM, WideDeep, PRMLite)"))
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::parse(s).ok_or_else(|| format!("unknown loss `{s}` (bpr, list_bpr, softmax_ce, listnet, bce)"))
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    OptimizerKind::parse(s).ok_or_else(|| format!("unknown optimizer `{s}` (Adam, SGD)"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "dev" => Ok(Split::Dev),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split `{s}` (train, dev, test)")),
    }
}

/// Flags mirroring the fields of the run configuration.
#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
struct RunArgs {
    /// Task mode: TopK, CTR or Impression [default: TopK; Impression for rerank]
    #[arg(long, value_parser = parse_mode)]
    model_mode: Option<TaskMode>,
    /// Model: POP, BPRMF, FPMC, FM, WideDeep, PRMLite [default: BPRMF; PRMLite for rerank]
    #[arg(long, value_parser = parse_model)]
    model_name: Option<ModelKind>,
    /// Directory holding train.tsv, dev.tsv, test.tsv and optional user_meta.tsv / item_meta.tsv
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Directory for the best checkpoint and report.json
    #[arg(long)]
    save_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    emb_size: usize,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "64,64")]
    hidden: Vec<usize>,
    /// Re-ranker position embedding width
    #[arg(long, default_value_t = 8)]
    pos_dim: usize,
    /// Longest list the re-ranker has position embeddings for
    #[arg(long, default_value_t = 50)]
    max_list_len: usize,
    /// Adam or SGD
    #[arg(long, value_parser = parse_optimizer, default_value = "Adam")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// L2 coefficient, applied to the rows touched by each step
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    /// Maximum number of epochs
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Stop after this many epochs without strict dev improvement
    #[arg(long, default_value_t = 10)]
    patience: usize,
    /// Sampled training negatives per positive (must be 0 in CTR mode)
    #[arg(long, default_value_t = 1)]
    num_neg: usize,
    /// Sampled evaluation negatives when the data has no neg_items
    #[arg(long, default_value_t = 99)]
    test_num_neg: usize,
    /// Metric cutoffs, comma separated [default: 5,10,20; 2,5 in Impression mode]
    #[arg(long, value_delimiter = ',')]
    topk: Option<Vec<usize>>,
    /// Most recent history items given to sequential models
    #[arg(long, default_value_t = 20)]
    history_max: usize,
    /// Dev metric for early stopping [default: NDCG@5; AUC in CTR mode]
    #[arg(long)]
    main_metric: Option<String>,
    #[arg(long, default_value_t = 0)]
    random_seed: u64,
    /// bpr, softmax_ce, list_bpr, listnet or bce [default: bpr; bce in CTR mode; list_bpr in Impression mode]
    #[arg(long, value_parser = parse_loss)]
    loss_name: Option<LossKind>,
    /// Backbone model kind, checked against the checkpoint (re-rankers only)
    #[arg(long, value_parser = parse_model)]
    base_model_name: Option<ModelKind>,
    /// Backbone checkpoint directory (re-rankers only)
    #[arg(long)]
    base_model_path: Option<PathBuf>,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    include_user_features: bool,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    include_item_features: bool,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    include_situation_features: bool,
    /// Report CTR AUC as the mean of per-user AUCs
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    auc_per_user: bool,
}

impl RunArgs {
    fn resolve(&self, default_mode: TaskMode, default_model: ModelKind) -> RunConfig {
        RunConfig {
            model_mode: self.model_mode.unwrap_or(default_mode),
            model_name: self.model_name.unwrap_or(default_model),
            data_dir: self.data_dir.clone(),
            save_dir: self.save_dir.clone(),
            emb_size: self.emb_size,
            hidden: self.hidden.clone(),
            pos_dim: self.pos_dim,
            max_list_len: self.max_list_len,
            optimizer: self.optimizer,
            lr: self.lr,
            l2: self.l2,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            num_neg: self.num_neg,
            test_num_neg: self.test_num_neg,
            topk: self.topk.clone(),
            history_max: self.history_max,
            main_metric: self.main_metric.clone(),
            random_seed: self.random_seed,
            loss_name: self.loss_name,
            base_model_name: self.base_model_name,
            base_model_path: self.base_model_path.clone(),
            include_user_features: self.include_user_features,
            include_item_features: self.include_item_features,
            include_situation_features: self.include_situation_features,
            auc_per_user: self.auc_per_user,
        }
    }
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
struct EvalArgs {
    /// Checkpoint directory to evaluate
    #[arg(long)]
    checkpoint: PathBuf,
    /// Split to evaluate: train, dev or test
    #[arg(long, value_parser = parse_split, default_value = "test")]
    split: Split,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
struct ExpArgs {
    /// Seeds, comma separated and distinct
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Directory for result_seed<k>.json, aggregate.json and aggregate.tsv
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
#[command(rename_all = "snake_case")]
struct PrepArgs {
    /// Raw interaction file
    #[arg(long)]
    input: PathBuf,
    /// Raw format: tsv (user_id, item_id, time[, rating] header) or movielens (user::item::rating::time)
    #[arg(long, default_value = "tsv")]
    format: String,
    /// Output directory for train.tsv, dev.tsv and test.tsv
    #[arg(long)]
    out: PathBuf,
    /// Minimum positive interactions per user and item
    #[arg(long, default_value_t = 5)]
    k_core: usize,
    /// Train/dev/test fractions in time order
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.1,0.1")]
    split: Vec<f64>,
    /// Split by time instead: dev_start,test_start (unix seconds)
    #[arg(long, value_delimiter = ',', conflicts_with = "split")]
    split_times: Option<Vec<i64>>,
    /// Impression length; 0 writes one interaction per row without impressions
    #[arg(long, default_value_t = 20)]
    session_len: usize,
    /// Ratings at or above this are positive
    #[arg(long, default_value_t = 4.0)]
    pos_threshold: f64,
    /// Situation features to derive, comma separated (hour, weekday, period)
    #[arg(long, value_delimiter = ',', default_value = "hour,weekday,period")]
    situations: Vec<String>,
}

fn print_config(config: &RunConfig) -> Result<()> {
    println!("resolved config: {}", serde_json::to_string(config)?);
    Ok(())
}

fn prep(args: &PrepArgs) -> Result<()> {
    let format = match args.format.to_ascii_lowercase().as_str() {
        "tsv" => RawFormat::Tsv,
        "movielens" | "ml" => RawFormat::MovieLens,
        other => bail!("unknown raw format `{other}` (tsv, movielens)"),
    };
    let split = match &args.split_times {
        Some(t) if t.len() == 2 => SplitSpec::Times {
            dev_start: t[0],
            test_start: t[1],
        },
        Some(_) => bail!("--split_times needs exactly two values"),
        None if args.split.len() == 3 => SplitSpec::Ratios([args.split[0], args.split[1], args.split[2]]),
        None => bail!("--split needs exactly three fractions"),
    };
    let situations = args
        .situations
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| Situation::parse(s).with_context(|| format!("unknown situation `{s}` (hour, weekday, period)")))
        .collect::<Result<Vec<_>>>()?;
    let config = PrepConfig {
        k_core: args.k_core,
        split,
        session_len: args.session_len,
        pos_threshold: args.pos_threshold,
        situations,
    };
    println!("resolved prep config: {}", serde_json::to_string(&config)?);
    let raw = read_raw_interactions(&args.input, format)?;
    let out = prep_dataset(&raw, &config)?;
    write_prepared(&out, &args.out)?;
    println!(
        "wrote {} train, {} dev, {} test rows to {}",
        out.train.len(),
        out.dev.len(),
        out.test.len(),
        args.out.display()
    );
    Ok(())
}

fn train(config: RunConfig) -> Result<()> {
    config.validate()?;
    print_config(&config)?;
    let result = runners::run(&config)?;
    info!("best epoch {} of {}", result.best_epoch, result.epochs_run);
    println!("test: {}", result.test.to_json());
    if let Some(b) = &result.backbone_test {
        println!("backbone test: {}", b.to_json());
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let config = args.run.resolve(TaskMode::TopK, ModelKind::BprMf);
    print_config(&config)?;
    let report = runners::evaluate_checkpoint(&config, &args.checkpoint, args.split)?;
    println!("{}: {}", args.split.name(), report.to_json());
    Ok(())
}

fn exp(args: &ExpArgs) -> Result<()> {
    let config = args.run.resolve(TaskMode::TopK, ModelKind::BprMf);
    let spec = ExperimentSpec {
        config,
        seeds: args.seeds.clone(),
        output_dir: args.output_dir.clone(),
    };
    spec.validate()?;
    print_config(&spec.config)?;
    let result = run_experiment(&spec)?;
    for (metric, v) in &result.metrics {
        println!("{metric}\t{:.6}\t{:.6}", v.mean, v.std);
    }
    if result.n_failed > 0 {
        println!("{} of {} seeds failed", result.n_failed, result.seeds.len());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prep(a) => prep(&a),
        Command::Train(a) => train(a.resolve(TaskMode::TopK, ModelKind::BprMf)),
        Command::Rerank(a) => {
            let config = a.resolve(TaskMode::Impression, ModelKind::PrmLite);
            if !config.model_name.is_reranker() {
                bail!("rerank needs a re-ranking model, got {}", config.model_name);
            }
            train(config)
        }
        Command::Eval(a) => eval(&a),
        Command::Exp(a) => exp(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
