//! Top-n evaluation: Recall@n and NDCG@n averaged over `(user, interval)`
//! contexts that own held-out positives.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Holdout};
use crate::error::{Error, Result};
use crate::math::log2;
use crate::models::{rank_by_score, Scorer};

pub const DEFAULT_CUTOFFS: [usize; 5] = [5, 10, 20, 50, 100];

/// `|top-n ∩ relevant| / |relevant|`. `relevant` must be free of duplicates.
pub fn recall_at_n(ranked: &[usize], relevant: &[usize], n: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevant);
    }
    let hits = ranked.iter().take(n).filter(|q| relevant.contains(q)).count();
    Ok(hits as f64 / relevant.len() as f64)
}

/// Binary-gain NDCG with a `log2(i + 1)` discount; the ideal DCG is
/// truncated at `min(n, |relevant|)`.
pub fn ndcg_at_n(ranked: &[usize], relevant: &[usize], n: usize) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevant);
    }
    let dcg: f64 = ranked
        .iter()
        .take(n)
        .enumerate()
        .filter(|(_, q)| relevant.contains(q))
        .map(|(i, _)| 1.0 / log2(i as f64 + 2.0))
        .sum();
    let ideal: f64 = (0..n.min(relevant.len())).map(|i| 1.0 / log2(i as f64 + 2.0)).sum();
    Ok(dcg / ideal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalProtocol {
    /// Skip items the user bought in training when ranking.
    pub exclude_train: bool,
    /// Include holdout triples flagged cold-start.
    pub include_cold: bool,
    /// Evaluate a seeded random subset of at most this many contexts.
    pub max_contexts: Option<usize>,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            exclude_train: true,
            include_cold: false,
            max_contexts: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cutoffs: Vec<usize>,
    /// Mean Recall@n, aligned with `cutoffs`.
    pub recall: Vec<f64>,
    /// Mean NDCG@n, aligned with `cutoffs`.
    pub ndcg: Vec<f64>,
    /// Number of `(user, interval)` contexts averaged over.
    pub users_evaluated: usize,
    pub protocol: EvalProtocol,
}

impl MetricsReport {
    pub fn recall_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.recall[i])
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == n).map(|i| self.ndcg[i])
    }
}

/// Groups holdout positives by `(user, interval)`, dropping cold triples
/// unless requested and (with `exclude_train`) items the user already
/// bought in training, which could never be ranked.
pub fn evaluation_contexts(
    train: &Dataset,
    holdout: &[Holdout],
    protocol: &EvalProtocol,
) -> Vec<((usize, usize), Vec<usize>)> {
    let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for h in holdout {
        if h.cold && !protocol.include_cold {
            continue;
        }
        let t = h.triple;
        if protocol.exclude_train && train.is_user_item(t.user, t.item) {
            continue;
        }
        let items = groups.entry((t.user, t.interval)).or_default();
        if !items.contains(&t.item) {
            items.push(t.item);
        }
    }
    let mut contexts: Vec<_> = groups.into_iter().collect();
    if let Some(max) = protocol.max_contexts {
        if contexts.len() > max {
            let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
            contexts.shuffle(&mut rng);
            contexts.truncate(max);
            contexts.sort_unstable_by_key(|(k, _)| *k);
        }
    }
    contexts
}

/// Ranks items for every evaluation context and macro-averages the metrics.
pub fn evaluate_model<S: Scorer + ?Sized>(
    scorer: &S,
    train: &Dataset,
    holdout: &[Holdout],
    cutoffs: &[usize],
    protocol: &EvalProtocol,
) -> Result<MetricsReport> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::InvalidConfig(String::from("cutoffs must be positive")));
    }
    let contexts = evaluation_contexts(train, holdout, protocol);
    let max_n = *cutoffs.iter().max().unwrap();
    let num_items = scorer.num_items();
    let mut recall = vec![0.0; cutoffs.len()];
    let mut ndcg = vec![0.0; cutoffs.len()];
    let mut scores = vec![0.0; num_items];
    let mut ranked = Vec::with_capacity(num_items);

    for ((user, interval), relevant) in &contexts {
        scorer.score_items(*user, *interval, &mut scores);
        ranked.clear();
        if protocol.exclude_train {
            let seen = train.user_items(*user);
            ranked.extend((0..num_items).filter(|q| seen.binary_search(q).is_err()));
        } else {
            ranked.extend(0..num_items);
        }
        rank_by_score(&scores, &mut ranked, max_n);
        for (i, &n) in cutoffs.iter().enumerate() {
            recall[i] += recall_at_n(&ranked, relevant, n)?;
            ndcg[i] += ndcg_at_n(&ranked, relevant, n)?;
        }
    }
    let count = contexts.len();
    if count > 0 {
        recall.iter_mut().chain(ndcg.iter_mut()).for_each(|x| *x /= count as f64);
    }
    Ok(MetricsReport {
        cutoffs: cutoffs.to_vec(),
        recall,
        ndcg,
        users_evaluated: count,
        protocol: *protocol,
    })
}

/// One row of a model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub cutoff: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub users_evaluated: usize,
    /// `(m − ref) / ref`; `None` when the reference value is zero.
    pub recall_improvement: Option<f64>,
    pub ndcg_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

fn relative(value: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| (value - reference) / reference)
}

/// Tabulates reports against the one named `reference`.
pub fn compare_models(reports: &[(String, MetricsReport)], reference: &str) -> Result<Comparison> {
    let Some((_, base)) = reports.iter().find(|(name, _)| name == reference) else {
        return Err(Error::InvalidConfig(alloc::format!("unknown reference model {reference:?}")));
    };
    let mut rows = Vec::new();
    for (name, report) in reports {
        if report.cutoffs != base.cutoffs {
            return Err(Error::CutoffMismatch(alloc::format!(
                "{name} has {:?}, {reference} has {:?}",
                report.cutoffs,
                base.cutoffs
            )));
        }
        for (i, &cutoff) in report.cutoffs.iter().enumerate() {
            rows.push(ComparisonRow {
                model: name.clone(),
                cutoff,
                recall: report.recall[i],
                ndcg: report.ndcg[i],
                users_evaluated: report.users_evaluated,
                recall_improvement: relative(report.recall[i], base.recall[i]),
                ndcg_improvement: relative(report.ndcg[i], base.ndcg[i]),
            });
        }
    }
    Ok(Comparison {
        reference: String::from(reference),
        rows,
    })
}
