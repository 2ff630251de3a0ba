//! The ingest, synth, train, eval and predict commands.
//!
//! Every command reads its settings from a [`KeyValues`] map, so a config
//! file and command-line flags can be merged before the command runs.

use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use tensorrec_core::data::{
    build_dataset, build_time_grid, filter_min_timestamp, kcore_filter, split_dataset, Dataset, Holdout,
    SplitRatios, WEEK_SECONDS,
};
use tensorrec_core::eval::{compare_models, evaluate_model, Comparison, EvalProtocol, MetricsReport, DEFAULT_CUTOFFS};
use tensorrec_core::features::{normalize_features, FeatureMatrix, Normalization};
use tensorrec_core::models::{top_n, Model, Variant};
use tensorrec_core::synth::{synth_corpus, CorpusSpec};
use tensorrec_core::training::{train_model, TrainConfig, TrainTrace, Validation};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{parse_list, parse_normalization, parse_ratios, synthetic_run_config, train_config, KeyValues};
use crate::error::{create, open, Error, Result};
use crate::feature_file::{load_features, save_features};
use crate::interactions::{parse_interactions, write_interactions};
use crate::report::{write_metrics_tsv, write_trace_tsv};
use crate::store::{manifest, read_data_dir, write_data_dir, DataDir};

pub const RUN_CONFIG_FILE: &str = "run.conf";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const FEATURES_FILE: &str = "features.bin";

fn path(kv: &KeyValues, key: &str) -> Result<PathBuf> {
    kv.get(key)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config(format!("missing `{key}`")))
}

fn ratios(kv: &KeyValues) -> Result<SplitRatios> {
    kv.get("split").map_or(Ok(SplitRatios::default()), parse_ratios)
}

fn normalization(kv: &KeyValues) -> Result<Normalization> {
    kv.get("normalization").map_or(Ok(Normalization::default()), parse_normalization)
}

fn protocol(kv: &KeyValues) -> Result<EvalProtocol> {
    Ok(EvalProtocol {
        exclude_train: !kv.parsed("include_train")?.unwrap_or(false),
        include_cold: kv.parsed("include_cold")?.unwrap_or(false),
        max_contexts: kv.parsed("max_contexts")?,
        seed: kv.parsed("seed")?.unwrap_or(0),
    })
}

/// Parse, filter, discretize, split and write a dataset directory.
/// Keys: `input`, `out`, `k_core` (5), `min_timestamp`, `interval_seconds`
/// (one week), `split` (`0.8,0.1,0.1`), `seed` (0).
pub fn ingest(kv: &KeyValues) -> Result<KeyValues> {
    let input = path(kv, "input")?;
    let out = path(kv, "out")?;
    let k_core: usize = kv.parsed("k_core")?.unwrap_or(5);
    let interval_seconds: i64 = kv.parsed("interval_seconds")?.unwrap_or(WEEK_SECONDS);
    let seed: u64 = kv.parsed("seed")?.unwrap_or(0);
    if k_core == 0 {
        return Err(Error::Config("k_core must be at least 1".into()));
    }
    let mut xs = parse_interactions(BufReader::new(open(&input)?))?;
    if let Some(min) = kv.parsed("min_timestamp")? {
        xs = filter_min_timestamp(&xs, min);
    }
    let xs = kcore_filter(&xs, k_core);
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let grid = build_time_grid(&xs, interval_seconds)?;
    let dataset = build_dataset(&xs, &grid)?;
    let split = split_dataset(&dataset, ratios(kv)?, seed)?;
    let mut extra = KeyValues::new();
    extra.set("source", input.display());
    extra.set("k_core", k_core);
    if let Some(min) = kv.get("min_timestamp") {
        extra.set("min_timestamp", min);
    }
    let m = manifest(&split, &grid, &extra);
    write_data_dir(&out, &split, &m)?;
    Ok(m)
}

/// Synthetic corpus settings from keys `users`, `items`, `intervals`,
/// `groups`, `density`, `feature_dim`, `feature_noise` over the defaults.
pub fn corpus_spec(kv: &KeyValues) -> Result<CorpusSpec> {
    let mut s = CorpusSpec::default();
    macro_rules! field {
        ($key:literal, $target:expr) => {
            if let Some(v) = kv.parsed($key)? {
                $target = v;
            }
        };
    }
    field!("users", s.users);
    field!("items", s.items);
    field!("intervals", s.intervals);
    field!("groups", s.groups);
    field!("density", s.density);
    field!("feature_dim", s.feature_dim);
    field!("feature_noise", s.feature_noise);
    Ok(s)
}

/// Writes a planted synthetic corpus to `out`: the raw interactions, the
/// item feature file, a split dataset directory and a matching `run.conf`.
pub fn synth(kv: &KeyValues) -> Result<KeyValues> {
    let out = path(kv, "out")?;
    let seed: u64 = kv.parsed("seed")?.unwrap_or(0);
    let spec = corpus_spec(kv)?;
    let corpus = synth_corpus(&spec, seed)?;
    if corpus.interactions.is_empty() {
        return Err(Error::EmptyInput);
    }
    std::fs::create_dir_all(&out).map_err(|source| Error::File { path: out.clone(), source })?;
    write_interactions(BufWriter::new(create(&out.join(INTERACTIONS_FILE))?), &corpus.interactions)?;
    save_features(&out.join(FEATURES_FILE), &corpus.features, &corpus.item_ids)?;

    let grid = build_time_grid(&corpus.interactions, spec.interval_seconds)?;
    let dataset = build_dataset(&corpus.interactions, &grid)?;
    let split = split_dataset(&dataset, ratios(kv)?, seed)?;
    let mut extra = KeyValues::new();
    extra.set("source", "synthetic");
    extra.set("groups", spec.groups);
    extra.set("density", spec.density);
    extra.set("feature_dim", spec.feature_dim);
    extra.set("feature_noise", spec.feature_noise);
    let m = manifest(&split, &grid, &extra);
    write_data_dir(&out, &split, &m)?;

    let mut run = synthetic_run_config();
    run.set("data", out.display());
    run.set("features", out.join(FEATURES_FILE).display());
    std::fs::write(out.join(RUN_CONFIG_FILE), run.to_string()).map_err(|source| Error::File {
        path: out.join(RUN_CONFIG_FILE),
        source,
    })?;
    Ok(m)
}

/// Loads and normalizes the feature file named by `features`, if any.
fn features_for(kv: &KeyValues, train: &Dataset) -> Result<Option<FeatureMatrix>> {
    match kv.get("features").filter(|s| !s.is_empty()) {
        Some(p) => {
            let f = load_features(Path::new(p), train.items())?;
            Ok(Some(normalize_features(&f, normalization(kv)?)))
        }
        None => Ok(None),
    }
}

fn require_features(variant: Variant, features: Option<&FeatureMatrix>) -> Result<()> {
    if variant.uses_features() && features.is_none() {
        return Err(Error::MissingFlag {
            variant: variant.name(),
            flag: "features",
        });
    }
    Ok(())
}

fn variant(kv: &KeyValues) -> Result<Variant> {
    let name = kv.get("variant").ok_or_else(|| Error::Config("missing `variant`".into()))?;
    Variant::from_name(name).ok_or_else(|| Error::Config(format!("unknown variant `{name}`")))
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub trace: TrainTrace,
    /// Final metrics on the validation holdout at the default cutoffs.
    pub validation: MetricsReport,
}

/// Trains `variant` on `data` and writes the checkpoint to `out`, plus the
/// per-iteration trace to `trace` when given. Training keys follow
/// [`train_config`]; `cutoff` (10) selects the traced metric.
pub fn train(kv: &KeyValues) -> Result<TrainOutcome> {
    let variant = variant(kv)?;
    let data = read_data_dir(&path(kv, "data")?)?;
    let out = path(kv, "out")?;
    let config: TrainConfig = train_config(kv, TrainConfig::default())?;
    let cutoff: usize = kv.parsed("cutoff")?.unwrap_or(10);
    let protocol = protocol(kv)?;
    let train = &data.split.train;
    let features = if variant.uses_features() { features_for(kv, train)? } else { None };
    require_features(variant, features.as_ref())?;

    let validation = Validation {
        holdout: &data.split.validation,
        cutoff,
        protocol,
    };
    let start = Instant::now();
    let clock = || start.elapsed().as_secs_f64();
    let (model, trace) = train_model(variant, train, features.as_ref(), &config, Some(&validation), &clock)?;
    let checkpoint = Checkpoint::new(model, train);
    save_checkpoint(&out, &checkpoint)?;
    if let Some(p) = kv.get("trace").filter(|s| !s.is_empty()) {
        write_trace_tsv(BufWriter::new(create(Path::new(p))?), &trace, cutoff)?;
    }
    let scorer = checkpoint.model.scorer(features.as_ref())?;
    let report = evaluate_model(&scorer, train, &data.split.validation, &DEFAULT_CUTOFFS, &protocol)?;
    Ok(TrainOutcome {
        checkpoint,
        trace,
        validation: report,
    })
}

fn model_name(path: &Path, model: &Model) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map_or_else(|| model.variant().name().to_owned(), str::to_owned)
}

fn holdout<'a>(data: &'a DataDir, kv: &KeyValues) -> Result<&'a [Holdout]> {
    match kv.get("holdout").unwrap_or("test") {
        "test" => Ok(&data.split.test),
        "validation" => Ok(&data.split.validation),
        other => Err(Error::Config(format!("holdout must be `validation` or `test`, not `{other}`"))),
    }
}

pub struct EvalOutcome {
    pub reports: Vec<(String, MetricsReport)>,
    pub comparison: Comparison,
}

/// Evaluates the comma-separated `checkpoints` on the `holdout` set
/// (`test` by default). Models are named by file stem; `reference`
/// defaults to the first. With `out`, the metrics TSV is written there.
pub fn eval(kv: &KeyValues) -> Result<EvalOutcome> {
    let data = read_data_dir(&path(kv, "data")?)?;
    let cutoffs: Vec<usize> = kv.get("cutoffs").map_or(Ok(DEFAULT_CUTOFFS.to_vec()), parse_list)?;
    let protocol = protocol(kv)?;
    let holdout = holdout(&data, kv)?;
    let train = &data.split.train;
    let paths: Vec<PathBuf> = kv
        .get("checkpoints")
        .map(|s| s.split(',').map(|p| PathBuf::from(p.trim())).collect())
        .unwrap_or_default();
    if paths.is_empty() {
        return Err(Error::Config("no checkpoints given".into()));
    }
    let mut features = None;
    let mut reports = Vec::new();
    for p in &paths {
        let ckpt = load_checkpoint(p)?;
        ckpt.check(train)?;
        let variant = ckpt.model.variant();
        if variant.uses_features() && features.is_none() {
            features = features_for(kv, train)?;
        }
        let f = if variant.uses_features() { features.as_ref() } else { None };
        require_features(variant, f)?;
        let scorer = ckpt.model.scorer(f)?;
        let report = evaluate_model(&scorer, train, holdout, &cutoffs, &protocol)?;
        reports.push((model_name(p, &ckpt.model), report));
    }
    let reference = kv.get("reference").unwrap_or(&reports[0].0).to_owned();
    let comparison = compare_models(&reports, &reference)?;
    if let Some(out) = kv.get("out").filter(|s| !s.is_empty()) {
        write_metrics_tsv(BufWriter::new(create(Path::new(out))?), &reports)?;
    }
    Ok(EvalOutcome { reports, comparison })
}

/// Top-`n` items (raw ids with scores) for raw `user` in `interval`.
/// `exclude_train` drops items the user bought in training.
pub fn predict(kv: &KeyValues) -> Result<Vec<(String, f64)>> {
    let data = read_data_dir(&path(kv, "data")?)?;
    let train = &data.split.train;
    let ckpt = load_checkpoint(&path(kv, "checkpoint")?)?;
    ckpt.check(train)?;
    let raw_user = kv.get("user").ok_or_else(|| Error::Config("missing `user`".into()))?;
    let user = train.users().get(raw_user).ok_or_else(|| Error::UnknownUser(raw_user.to_owned()))?;
    let interval: usize = kv.require("interval")?;
    if interval >= train.num_intervals() {
        return Err(Error::UnknownInterval {
            interval,
            intervals: train.num_intervals(),
        });
    }
    let n: usize = kv.parsed("n")?.unwrap_or(10);
    let exclude: bool = kv.parsed("exclude_train")?.unwrap_or(false);
    let variant = ckpt.model.variant();
    let features = if variant.uses_features() { features_for(kv, train)? } else { None };
    require_features(variant, features.as_ref())?;
    let scorer = ckpt.model.scorer(features.as_ref())?;
    let items = top_n(&scorer, train, user, interval, n, exclude)?;
    items
        .into_iter()
        .map(|q| {
            let score = ckpt.model.predict(features.as_ref(), user, q, interval)?;
            Ok((train.items().raw(q).unwrap_or_default().to_owned(), score))
        })
        .collect()
}
