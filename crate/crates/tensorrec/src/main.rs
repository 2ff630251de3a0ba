use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tensorrec::commands;
use tensorrec::config::KeyValues;
use tensorrec::report::{format_comparison, format_headline, write_metrics_tsv};
use tensorrec::{Error, Result};

/// Coupled tensor factorization recommender.
#[derive(Parser)]
#[command(name = "tensorrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` settings file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (directory for ingest/synth, file otherwise)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an interaction log into a split dataset directory
    Ingest(IngestArgs),
    /// Generate a planted synthetic corpus with features and a split
    Synth(SynthArgs),
    /// Train one model variant and write its checkpoint
    Train(TrainArgs),
    /// Evaluate checkpoints and compare them against a reference
    Eval(EvalArgs),
    /// Print the top-n items for a user and interval
    Predict(PredictArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    k_core: Option<usize>,
    #[arg(long)]
    min_timestamp: Option<i64>,
    #[arg(long)]
    interval_seconds: Option<i64>,
    /// Train, validation and test ratios, e.g. 0.8,0.1,0.1
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    items: Option<usize>,
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    feature_noise: Option<f64>,
    #[arg(long)]
    split: Option<String>,
}

#[derive(Args)]
struct ModelInputs {
    /// Dataset directory
    #[arg(long)]
    data: Option<PathBuf>,
    /// Item feature file (binary or text)
    #[arg(long)]
    features: Option<PathBuf>,
    /// none, per_dim_standardize or unit_l2_column
    #[arg(long)]
    normalization: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: ModelInputs,
    #[arg(long)]
    variant: Option<String>,
    /// Per-iteration trace TSV
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    iter_max: Option<usize>,
    #[arg(long)]
    k1: Option<usize>,
    #[arg(long)]
    k2: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cutoff of the metrics recorded in the trace
    #[arg(long)]
    cutoff: Option<usize>,
    /// Extra `key=value` settings
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: ModelInputs,
    /// Checkpoint file; repeat for several models
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    /// validation or test
    #[arg(long)]
    holdout: Option<String>,
    /// e.g. 5,10,20,50,100
    #[arg(long)]
    cutoffs: Option<String>,
    /// Model (checkpoint file stem) to compare against
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    include_cold: bool,
    /// Rank items the user already bought in training
    #[arg(long)]
    include_train: bool,
    /// Evaluate a seeded sample of at most this many contexts
    #[arg(long)]
    max_contexts: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    inputs: ModelInputs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    user: String,
    #[arg(long)]
    interval: usize,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    exclude_train: bool,
}

struct Settings(KeyValues);

impl Settings {
    fn load(common: &Common) -> Result<Self> {
        let mut kv = match &common.config {
            Some(p) => KeyValues::parse(&std::fs::read_to_string(p).map_err(|source| Error::File {
                path: p.clone(),
                source,
            })?)?,
            None => KeyValues::new(),
        };
        if let Some(seed) = common.seed {
            kv.set("seed", seed);
        }
        if let Some(out) = &common.out {
            kv.set("out", out.display());
        }
        Ok(Settings(kv))
    }

    fn set<T: std::fmt::Display>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.0.set(key, v);
        }
    }

    fn set_path(&mut self, key: &str, value: &Option<PathBuf>) {
        self.set(key, value.as_ref().map(|p| p.display()));
    }

    fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.0.set(key, true);
        }
    }

    fn inputs(&mut self, inputs: &ModelInputs) {
        self.set_path("data", &inputs.data);
        self.set_path("features", &inputs.features);
        self.set("normalization", inputs.normalization.as_ref());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => {
            let mut s = Settings::load(&a.common)?;
            s.set_path("input", &a.input);
            s.set("k_core", a.k_core);
            s.set("min_timestamp", a.min_timestamp);
            s.set("interval_seconds", a.interval_seconds);
            s.set("split", a.split);
            print!("{}", commands::ingest(&s.0)?);
        }
        Command::Synth(a) => {
            let mut s = Settings::load(&a.common)?;
            s.set("users", a.users);
            s.set("items", a.items);
            s.set("intervals", a.intervals);
            s.set("groups", a.groups);
            s.set("density", a.density);
            s.set("feature_dim", a.feature_dim);
            s.set("feature_noise", a.feature_noise);
            s.set("split", a.split);
            print!("{}", commands::synth(&s.0)?);
        }
        Command::Train(a) => {
            let mut s = Settings::load(&a.common)?;
            s.inputs(&a.inputs);
            s.set("variant", a.variant);
            s.set_path("trace", &a.trace);
            s.set("iter_max", a.iter_max);
            s.set("k1", a.k1);
            s.set("k2", a.k2);
            s.set("learning_rate", a.learning_rate);
            s.set("batch_size", a.batch_size);
            s.set("cutoff", a.cutoff);
            for item in &a.set {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
                s.0.set(k.trim(), v.trim());
            }
            let outcome = commands::train(&s.0)?;
            let iterations = outcome.trace.records.len();
            let status = if outcome.trace.converged { "converged" } else { "stopped" };
            println!("{} {status} after {iterations} iterations", outcome.checkpoint.model.variant());
            let reports = vec![("validation".to_owned(), outcome.validation)];
            write_metrics_tsv(std::io::stdout().lock(), &reports)?;
        }
        Command::Eval(a) => {
            let mut s = Settings::load(&a.common)?;
            s.inputs(&a.inputs);
            let list: Vec<String> = a.checkpoints.iter().map(|p| p.display().to_string()).collect();
            s.0.set("checkpoints", list.join(","));
            s.set("holdout", a.holdout);
            s.set("cutoffs", a.cutoffs);
            s.set("reference", a.reference);
            s.flag("include_cold", a.include_cold);
            s.flag("include_train", a.include_train);
            s.set("max_contexts", a.max_contexts);
            let outcome = commands::eval(&s.0)?;
            print!("{}", format_comparison(&outcome.comparison));
            print!("{}", format_headline(&outcome.reports));
        }
        Command::Predict(a) => {
            let mut s = Settings::load(&a.common)?;
            s.inputs(&a.inputs);
            s.0.set("checkpoint", a.checkpoint.display());
            s.0.set("user", &a.user);
            s.0.set("interval", a.interval);
            s.set("n", a.n);
            s.flag("exclude_train", a.exclude_train);
            for (item, score) in commands::predict(&s.0)? {
                println!("{item}\t{score:.6}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
