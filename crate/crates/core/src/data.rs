//! Interaction ingestion: k-core filtering, time discretization, the
//! binary purchase tensor with its two coupled matrices, and the
//! train/validation/test split.
//!
//! The tensor `A` (user × item × interval) is stored as its sorted list of
//! positive triples. The coupled matrices are kept as their row sets:
//! `Q+_p` (items bought by user `p`, the rows of `B`) and `Q+_r` (items
//! bought in interval `r`, the rows of `C`).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default interval width: one week.
pub const WEEK_SECONDS: i64 = 604_800;

/// One timestamped purchase event, before indexing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub timestamp: i64,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: i64) -> Result<Self> {
        let (user, item) = (user.into(), item.into());
        if user.is_empty() || item.is_empty() {
            return Err(Error::InvalidInteraction(String::from("empty user or item id")));
        }
        if timestamp < 0 {
            return Err(Error::InvalidInteraction(format!("negative timestamp {timestamp}")));
        }
        Ok(Interaction {
            user,
            item,
            timestamp,
        })
    }
}

/// Keeps interactions at or after `min_timestamp`.
pub fn filter_min_timestamp(interactions: &[Interaction], min_timestamp: i64) -> Vec<Interaction> {
    interactions
        .iter()
        .filter(|i| i.timestamp >= min_timestamp)
        .cloned()
        .collect()
}

/// Iteratively drops users and items with fewer than `k` records until every
/// survivor has at least `k`. Input order is preserved.
pub fn kcore_filter(interactions: &[Interaction], k: usize) -> Vec<Interaction> {
    assert!(k >= 1, "k-core requires k >= 1");
    let mut alive: Vec<bool> = alloc::vec![true; interactions.len()];
    loop {
        let mut user_count: BTreeMap<&str, usize> = BTreeMap::new();
        let mut item_count: BTreeMap<&str, usize> = BTreeMap::new();
        for (rec, _) in interactions.iter().zip(&alive).filter(|(_, a)| **a) {
            *user_count.entry(rec.user.as_str()).or_default() += 1;
            *item_count.entry(rec.item.as_str()).or_default() += 1;
        }
        let mut changed = false;
        for (rec, a) in interactions.iter().zip(alive.iter_mut()) {
            if *a && (user_count[rec.user.as_str()] < k || item_count[rec.item.as_str()] < k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    interactions
        .iter()
        .zip(&alive)
        .filter(|(_, a)| **a)
        .map(|(rec, _)| rec.clone())
        .collect()
}

/// Fixed-width time discretization anchored at the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub origin: i64,
    pub interval_seconds: i64,
    pub num_intervals: usize,
}

impl TimeGrid {
    /// Interval index of `timestamp`, or `None` when it falls outside the grid.
    pub fn interval_of(&self, timestamp: i64) -> Option<usize> {
        if timestamp < self.origin {
            return None;
        }
        let idx = ((timestamp - self.origin) / self.interval_seconds) as usize;
        (idx < self.num_intervals).then_some(idx)
    }

    /// First timestamp of interval `r`.
    pub fn interval_start(&self, r: usize) -> i64 {
        self.origin + r as i64 * self.interval_seconds
    }
}

pub fn build_time_grid(interactions: &[Interaction], interval_seconds: i64) -> Result<TimeGrid> {
    if interval_seconds <= 0 {
        return Err(Error::InvalidConfig(format!(
            "interval_seconds must be positive, got {interval_seconds}"
        )));
    }
    let min = interactions.iter().map(|i| i.timestamp).min().ok_or(Error::EmptyInput)?;
    let max = interactions.iter().map(|i| i.timestamp).max().ok_or(Error::EmptyInput)?;
    let origin = min.div_euclid(interval_seconds) * interval_seconds;
    let num_intervals = ((max - origin) / interval_seconds) as usize + 1;
    Ok(TimeGrid {
        origin,
        interval_seconds,
        num_intervals,
    })
}

/// Bidirectional raw-id ↔ dense-index map; indices follow first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a vocabulary from ids listed in index order.
    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab::new();
        for id in ids {
            let id = id.into();
            if vocab.index.contains_key(&id) {
                return Err(Error::InvalidInteraction(format!("duplicate vocabulary id {id:?}")));
            }
            vocab.intern(&id);
        }
        Ok(vocab)
    }

    pub fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(String::from(raw));
        self.index.insert(String::from(raw), i);
        i
    }

    pub fn get(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// An indexed purchase: user `p` bought item `q` in interval `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub user: usize,
    pub item: usize,
    pub interval: usize,
}

impl Triple {
    pub const fn new(user: usize, item: usize, interval: usize) -> Self {
        Triple {
            user,
            item,
            interval,
        }
    }
}

/// Indexed positives of the purchase tensor and its coupled matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    users: Arc<Vocab>,
    items: Arc<Vocab>,
    num_intervals: usize,
    positives: Vec<Triple>,
    user_items: Vec<Vec<usize>>,
    interval_items: Vec<Vec<usize>>,
    user_interval_items: BTreeMap<(usize, usize), Vec<usize>>,
    item_counts: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset over fixed vocabularies from indexed triples.
    /// Duplicates collapse; every index must be in range.
    pub fn from_triples(
        users: Arc<Vocab>,
        items: Arc<Vocab>,
        num_intervals: usize,
        triples: impl IntoIterator<Item = Triple>,
    ) -> Result<Self> {
        let (num_users, num_items) = (users.len(), items.len());
        let mut set = BTreeSet::new();
        for t in triples {
            crate::error::check_index("user", t.user, num_users)?;
            crate::error::check_index("item", t.item, num_items)?;
            crate::error::check_index("interval", t.interval, num_intervals)?;
            set.insert(t);
        }
        let positives: Vec<Triple> = set.into_iter().collect();

        let mut user_sets = alloc::vec![BTreeSet::new(); num_users];
        let mut interval_sets = alloc::vec![BTreeSet::new(); num_intervals];
        let mut user_interval_items: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        let mut item_counts = alloc::vec![0usize; num_items];
        for t in &positives {
            user_sets[t.user].insert(t.item);
            interval_sets[t.interval].insert(t.item);
            // positives are sorted by (user, item, interval); push keeps each list sorted
            user_interval_items
                .entry((t.user, t.interval))
                .or_default()
                .push(t.item);
            item_counts[t.item] += 1;
        }
        let collect = |sets: Vec<BTreeSet<usize>>| -> Vec<Vec<usize>> {
            sets.into_iter().map(|s| s.into_iter().collect()).collect()
        };
        Ok(Dataset {
            users,
            items,
            num_intervals,
            positives,
            user_items: collect(user_sets),
            interval_items: collect(interval_sets),
            user_interval_items,
            item_counts,
        })
    }

    /// Same vocabularies and grid, different positives.
    pub fn with_positives(&self, triples: impl IntoIterator<Item = Triple>) -> Result<Self> {
        Self::from_triples(
            Arc::clone(&self.users),
            Arc::clone(&self.items),
            self.num_intervals,
            triples,
        )
    }

    /// P
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Q
    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// R
    pub fn num_intervals(&self) -> usize {
        self.num_intervals
    }

    pub fn users(&self) -> &Vocab {
        &self.users
    }

    pub fn items(&self) -> &Vocab {
        &self.items
    }

    pub fn user_vocab(&self) -> &Arc<Vocab> {
        &self.users
    }

    pub fn item_vocab(&self) -> &Arc<Vocab> {
        &self.items
    }

    /// Distinct positive triples of `A`, sorted by (user, item, interval).
    pub fn positives(&self) -> &[Triple] {
        &self.positives
    }

    /// Distinct `(p, q)` positives of `B`.
    pub fn positives_user_item(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .flat_map(|(p, items)| items.iter().map(move |&q| (p, q)))
    }

    /// Distinct `(r, q)` positives of `C`.
    pub fn positives_interval_item(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.interval_items
            .iter()
            .enumerate()
            .flat_map(|(r, items)| items.iter().map(move |&q| (r, q)))
    }

    /// `Q+_p`, sorted.
    pub fn user_items(&self, user: usize) -> &[usize] {
        &self.user_items[user]
    }

    /// `Q+_r`, sorted.
    pub fn interval_items(&self, interval: usize) -> &[usize] {
        &self.interval_items[interval]
    }

    /// `Q+_pr`, sorted; empty when the user bought nothing in `interval`.
    pub fn user_interval_items(&self, user: usize, interval: usize) -> &[usize] {
        self.user_interval_items
            .get(&(user, interval))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.positives.binary_search(&t).is_ok()
    }

    pub fn is_user_item(&self, user: usize, item: usize) -> bool {
        self.user_items[user].binary_search(&item).is_ok()
    }

    pub fn is_interval_item(&self, interval: usize, item: usize) -> bool {
        self.interval_items[interval].binary_search(&item).is_ok()
    }

    /// Number of positive triples per item.
    pub fn item_counts(&self) -> &[usize] {
        &self.item_counts
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Indexes interactions against `grid`, assigning dense ids in first-appearance order.
pub fn build_dataset(interactions: &[Interaction], grid: &TimeGrid) -> Result<Dataset> {
    let mut users = Vocab::new();
    let mut items = Vocab::new();
    let mut triples = Vec::with_capacity(interactions.len());
    for rec in interactions {
        let r = grid
            .interval_of(rec.timestamp)
            .ok_or(Error::TimestampOutOfGrid {
                timestamp: rec.timestamp,
            })?;
        let p = users.intern(&rec.user);
        let q = items.intern(&rec.item);
        triples.push(Triple::new(p, q, r));
    }
    Dataset::from_triples(Arc::new(users), Arc::new(items), grid.num_intervals, triples)
}

/// A held-out positive. `cold` marks triples whose user or item has no
/// training positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Holdout {
    pub triple: Triple,
    pub cold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub validation: Vec<Holdout>,
    pub test: Vec<Holdout>,
    pub seed: u64,
}

/// Train/validation/test ratios, checked to be non-negative and to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios([f64; 3]);

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = [train, validation, test];
        let sum: f64 = r.iter().sum();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::RatioError(r));
        }
        Ok(SplitRatios(r))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([0.8, 0.1, 0.1])
    }
}

/// Shuffles the positive triples with a seeded permutation and cuts them at
/// the ratio boundaries. Holdout triples keep the full-dataset indices.
pub fn split_dataset(dataset: &Dataset, ratios: SplitRatios, seed: u64) -> Result<Split> {
    let mut triples = dataset.positives().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples.shuffle(&mut rng);

    let n = triples.len();
    let [r_train, r_val, _] = ratios.as_array();
    let n_train = libm::round(n as f64 * r_train).min(n as f64) as usize;
    let n_val = (libm::round(n as f64 * r_val) as usize).min(n - n_train);

    let train = dataset.with_positives(triples[..n_train].iter().copied())?;
    let mut user_seen = alloc::vec![false; dataset.num_users()];
    let mut item_seen = alloc::vec![false; dataset.num_items()];
    for t in train.positives() {
        user_seen[t.user] = true;
        item_seen[t.item] = true;
    }
    let holdout = |ts: &[Triple]| -> Vec<Holdout> {
        ts.iter()
            .map(|&triple| Holdout {
                triple,
                cold: !user_seen[triple.user] || !item_seen[triple.item],
            })
            .collect()
    };
    let validation = holdout(&triples[n_train..n_train + n_val]);
    let test = holdout(&triples[n_train + n_val..]);
    Ok(Split {
        train,
        validation,
        test,
        seed,
    })
}
