//! `key = value` text files: dataset manifests and run configurations.

use std::fmt;
use std::str::FromStr;

use tensorrec_core::data::SplitRatios;
use tensorrec_core::features::Normalization;
use tensorrec_core::training::TrainConfig;

use crate::error::{Error, Result};

/// Ordered `key = value` pairs. Later assignments replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses lines of `key = value`; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            kv.set(k, v.trim());
        }
        Ok(kv)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
    }

    /// Copies every entry of `other` over this one.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Parses `key` if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("invalid value for `{key}`: {v}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn parse_normalization(s: &str) -> Result<Normalization> {
    match s {
        "none" => Ok(Normalization::None),
        "per_dim_standardize" => Ok(Normalization::PerDimStandardize),
        "unit_l2_column" => Ok(Normalization::UnitL2Column),
        _ => Err(Error::Config(format!("unknown normalization `{s}`"))),
    }
}

pub fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::None => "none",
        Normalization::PerDimStandardize => "per_dim_standardize",
        Normalization::UnitL2Column => "unit_l2_column",
    }
}

/// Comma-separated list such as `5,10,20`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid list element `{x}` in `{s}`")))
        })
        .collect()
}

pub fn parse_ratios(s: &str) -> Result<SplitRatios> {
    match parse_list::<f64>(s)?.as_slice() {
        &[a, b, c] => Ok(SplitRatios::new(a, b, c)?),
        _ => Err(Error::Config(format!("split ratios need three values: {s}"))),
    }
}

/// Keys understood by [`train_config`].
pub const TRAIN_KEYS: &[&str] = &[
    "k1",
    "k2",
    "lambda1",
    "lambda2",
    "lambda3",
    "lambda4",
    "lambda5",
    "lambda6",
    "lambda7",
    "lambda8",
    "regularization",
    "learning_rate",
    "batch_size",
    "negatives",
    "iter_max",
    "tolerance",
    "patience",
    "seed",
    "init_scale",
    "mse_zeros",
];

/// Applies recognized training keys on top of `base`. `regularization`
/// sets λ3..λ8 at once before the individual keys are applied;
/// `mse_zeros = dense` selects exact dense evaluation for the squared loss.
pub fn train_config(kv: &KeyValues, base: TrainConfig) -> Result<TrainConfig> {
    let mut c = base;
    macro_rules! field {
        ($key:literal, $target:expr) => {
            if let Some(v) = kv.parsed($key)? {
                $target = v;
            }
        };
    }
    field!("k1", c.k1);
    field!("k2", c.k2);
    if let Some(v) = kv.parsed("regularization")? {
        c.lambdas = c.lambdas.with_regularization(v);
    }
    field!("lambda1", c.lambdas.user_item);
    field!("lambda2", c.lambdas.time_item);
    field!("lambda3", c.lambdas.user);
    field!("lambda4", c.lambdas.item_user);
    field!("lambda5", c.lambdas.time);
    field!("lambda6", c.lambdas.item_time);
    field!("lambda7", c.lambdas.user_feature);
    field!("lambda8", c.lambdas.time_feature);
    field!("learning_rate", c.learning_rate);
    field!("batch_size", c.batch_size);
    field!("negatives", c.negatives_per_positive);
    field!("iter_max", c.iter_max);
    field!("tolerance", c.convergence.tolerance);
    field!("patience", c.convergence.patience);
    field!("seed", c.seed);
    field!("init_scale", c.init_scale);
    match kv.get("mse_zeros") {
        Some("dense") => c.mse_zeros_per_positive = None,
        Some(_) => c.mse_zeros_per_positive = kv.parsed("mse_zeros")?,
        None => {}
    }
    c.validate()?;
    Ok(c)
}

/// The run configuration matching [`TrainConfig::synthetic`] with unit-norm
/// features, as written next to synthetic corpora.
pub fn synthetic_run_config() -> KeyValues {
    let c = TrainConfig::synthetic();
    let mut kv = KeyValues::new();
    kv.set("k1", c.k1);
    kv.set("k2", c.k2);
    kv.set("regularization", c.lambdas.user);
    kv.set("learning_rate", c.learning_rate);
    kv.set("batch_size", c.batch_size);
    kv.set("iter_max", c.iter_max);
    kv.set("init_scale", c.init_scale);
    kv.set("normalization", normalization_name(Normalization::UnitL2Column));
    kv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let kv = KeyValues::parse("# run\nk1 = 4\n\nlearning_rate=0.1\nk1 = 6\n").unwrap();
        assert_eq!(kv.get("k1"), Some("6"));
        assert_eq!(kv.to_string(), "k1 = 6\nlearning_rate = 0.1\n");
        assert!(KeyValues::parse("no equals sign").is_err());
        assert!(KeyValues::parse(" = 3").is_err());
    }

    #[test]
    fn training_keys_override_the_base() {
        let kv = KeyValues::parse("regularization = 0.02\nlambda3 = 0.7\niter_max = 3\nmse_zeros = dense").unwrap();
        let c = train_config(&kv, TrainConfig::default()).unwrap();
        assert_eq!(c.lambdas.user, 0.7);
        assert_eq!(c.lambdas.time, 0.02);
        assert_eq!(c.lambdas.user_item, 0.1);
        assert_eq!(c.iter_max, 3);
        assert_eq!(c.mse_zeros_per_positive, None);
        let bad = KeyValues::parse("k1 = ten").unwrap();
        assert!(matches!(train_config(&bad, TrainConfig::default()), Err(Error::Config(_))));
        let invalid = KeyValues::parse("learning_rate = -1").unwrap();
        assert!(train_config(&invalid, TrainConfig::default()).is_err());
    }

    #[test]
    fn synthetic_config_reproduces_the_preset() {
        let kv = synthetic_run_config();
        assert_eq!(train_config(&kv, TrainConfig::default()).unwrap(), TrainConfig::synthetic());
    }

    #[test]
    fn lists_and_ratios() {
        assert_eq!(parse_list::<usize>("5, 10,20").unwrap(), [5, 10, 20]);
        assert!(parse_ratios("0.8,0.1,0.1").is_ok());
        assert!(parse_ratios("0.8,0.1").is_err());
        assert!(parse_ratios("0.8,0.3,0.1").is_err());
        assert_eq!(parse_normalization("unit_l2_column").unwrap(), Normalization::UnitL2Column);
        assert!(parse_normalization("l2").is_err());
    }
}
