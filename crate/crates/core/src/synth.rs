//! Planted-structure synthetic purchase logs.
//!
//! Users and items each belong to one of `groups` style groups. A purchase
//! of item `q` by user `p` in interval `r` happens with probability
//! proportional to `popularity(q) · affinity(p, q) · season(q, r)`, where
//! affinity is 1 within a group and `cross_affinity` across groups, and the
//! seasonal curve of an item peaks at a phase shared (up to jitter) by its
//! group. Item features are drawn around per-group centroids, so they carry
//! both the style and the seasonal signal.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Interaction, WEEK_SECONDS};
use crate::error::{Error, Result};
use crate::features::{synth_features, FeatureMatrix, PlantedStyle};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub users: usize,
    pub items: usize,
    pub intervals: usize,
    pub groups: usize,
    /// Expected fraction of (user, item, interval) cells that are purchases.
    pub density: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub cross_affinity: f64,
    /// Relative amplitude of the seasonal curve, in `[0, 1]`.
    pub seasonality: f64,
    /// Spread of the log-normal item popularity.
    pub popularity_spread: f64,
    pub interval_seconds: i64,
    /// First timestamp; aligned down to an interval boundary.
    pub start_timestamp: i64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            users: 200,
            items: 300,
            intervals: 8,
            groups: 4,
            density: 0.005,
            feature_dim: 32,
            feature_noise: 0.3,
            cross_affinity: 0.05,
            seasonality: 0.9,
            popularity_spread: 0.5,
            interval_seconds: WEEK_SECONDS,
            start_timestamp: 1_262_217_600,
        }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if self.users == 0 || self.items == 0 || self.intervals == 0 || self.groups == 0 {
            return err("corpus sizes and group count must be positive");
        }
        if self.feature_dim == 0 {
            return err("feature dimension must be positive");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return err("density must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.seasonality) || self.cross_affinity < 0.0 {
            return err("seasonality must lie in [0, 1] and cross affinity be non-negative");
        }
        if self.interval_seconds <= 0 || self.start_timestamp < 0 {
            return err("interval length must be positive and the start non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Purchases in timestamp order.
    pub interactions: Vec<Interaction>,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub user_groups: Vec<usize>,
    pub item_groups: Vec<usize>,
    /// Columns follow `item_ids` order.
    pub features: FeatureMatrix,
}

pub fn synth_corpus(spec: &CorpusSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = spec.groups;
    let user_groups: Vec<usize> = (0..spec.users).map(|_| rng.random_range(0..g)).collect();
    let item_groups: Vec<usize> = (0..spec.items).map(|_| rng.random_range(0..g)).collect();
    let popularity: Vec<f64> = (0..spec.items)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            libm::exp(spec.popularity_spread * z)
        })
        .collect();
    let phase: Vec<f64> = item_groups
        .iter()
        .map(|&gq| (gq as f64 + rng.random_range(-0.25..0.25)) / g as f64)
        .collect();

    let season = |q: usize, r: usize| {
        let x = r as f64 / spec.intervals as f64 - phase[q];
        1.0 + spec.seasonality * libm::cos(2.0 * PI * x)
    };
    let affinity = |p: usize, q: usize| {
        if user_groups[p] == item_groups[q] {
            1.0
        } else {
            spec.cross_affinity
        }
    };
    let mut total = 0.0;
    for p in 0..spec.users {
        for q in 0..spec.items {
            for r in 0..spec.intervals {
                total += popularity[q] * affinity(p, q) * season(q, r);
            }
        }
    }
    let cells = (spec.users * spec.items * spec.intervals) as f64;
    let scale = spec.density * cells / total;

    let user_ids: Vec<String> = (0..spec.users).map(|p| format!("u{p:05}")).collect();
    let item_ids: Vec<String> = (0..spec.items).map(|q| format!("i{q:05}")).collect();
    let origin = spec.start_timestamp.div_euclid(spec.interval_seconds) * spec.interval_seconds;
    let mut interactions = Vec::new();
    for p in 0..spec.users {
        for q in 0..spec.items {
            for r in 0..spec.intervals {
                let prob = (scale * popularity[q] * affinity(p, q) * season(q, r)).min(1.0);
                if rng.random::<f64>() < prob {
                    let offset = rng.random_range(0..spec.interval_seconds);
                    interactions.push(Interaction {
                        user: user_ids[p].clone(),
                        item: item_ids[q].clone(),
                        timestamp: origin + r as i64 * spec.interval_seconds + offset,
                    });
                }
            }
        }
    }
    interactions.sort_by(|a, b| {
        (a.timestamp, &a.user, &a.item).cmp(&(b.timestamp, &b.user, &b.item))
    });

    let style = PlantedStyle {
        groups: g,
        noise: spec.feature_noise,
        assignment: Some(item_groups.clone()),
    };
    let features = synth_features(spec.items, spec.feature_dim, Some(&style), seed ^ 0x5eed_f00d)?.features;
    Ok(SyntheticCorpus {
        interactions,
        user_ids,
        item_ids,
        user_groups,
        item_groups,
        features,
    })
}
