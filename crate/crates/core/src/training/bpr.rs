use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::factorization::{Axis, MfFactors, PairwiseModel, VbprFactors};
use super::sampler::sample_into;
use super::{
    fill_uniform, init_params, train_mse_cmtf, ConvergenceMonitor, Lambdas, PreferencePair,
    TraceRecord, TrainConfig, TrainTrace, Validation,
};
use crate::data::Dataset;
use crate::error::{check_index, Error, Result};
use crate::eval::evaluate_model;
use crate::features::FeatureMatrix;
use crate::matrix::{axpy, Matrix};
use crate::models::{Baseline, CpFactors, DcfaParams, Dims, Model, PitfFactors, Scorer, Variant};

/// Which parameter columns receive the `-λΘ` regularization gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegScope {
    /// Every column: the exact gradient of the full objective.
    Full,
    /// Only columns touched by a pair, once per touch (stochastic steps).
    TouchedColumns,
}

pub(crate) fn pairwise_objective<M: PairwiseModel>(
    model: &M,
    features: Option<&FeatureMatrix>,
    pairs: &[PreferencePair],
    lambdas: &Lambdas,
) -> f64 {
    let data: f64 = pairs.iter().map(|pair| model.pair_value(features, pair, lambdas)).sum();
    let reg: f64 = model
        .factors()
        .iter()
        .zip(model.reg_coefficients(lambdas))
        .map(|(m, c)| 0.5 * c * m.squared_norm())
        .sum();
    data - reg
}

fn add_touched_regularization<M: PairwiseModel>(
    model: &M,
    pair: &PreferencePair,
    coefficients: &[f64],
    axes: &[Axis],
    grad: &mut M,
) {
    for (((m, g), axis), &c) in model
        .factors()
        .into_iter()
        .zip(grad.factors_mut())
        .zip(axes)
        .zip(coefficients)
    {
        if c == 0.0 {
            continue;
        }
        let (cols, n) = axis.columns(pair);
        for &j in &cols[..n] {
            axpy(g.col_mut(j), -c, m.col(j));
        }
    }
}

pub(crate) fn pairwise_gradient<M: PairwiseModel>(
    model: &M,
    features: Option<&FeatureMatrix>,
    pairs: &[PreferencePair],
    lambdas: &Lambdas,
    scope: RegScope,
) -> M {
    let mut grad = model.zeros_like();
    let coefficients = model.reg_coefficients(lambdas);
    let axes = model.axes();
    for pair in pairs {
        model.add_pair_gradient(features, pair, lambdas, 1.0, &mut grad);
        if scope == RegScope::TouchedColumns {
            add_touched_regularization(model, pair, &coefficients, &axes, &mut grad);
        }
    }
    if scope == RegScope::Full {
        for ((m, g), c) in model.factors().into_iter().zip(grad.factors_mut()).zip(coefficients) {
            g.add_scaled(-c, m);
        }
    }
    grad
}

fn check_pairs(params: &DcfaParams, dataset: &Dataset, pairs: &[PreferencePair]) -> Result<()> {
    let d = params.dims();
    if (d.users, d.items, d.intervals)
        != (dataset.num_users(), dataset.num_items(), dataset.num_intervals())
    {
        return Err(Error::InvalidConfig(alloc::format!(
            "model dims {d:?} do not match the dataset"
        )));
    }
    for pair in pairs {
        check_index("user", pair.user, d.users)?;
        check_index("item", pair.pos, d.items)?;
        check_index("item", pair.neg, d.items)?;
        check_index("interval", pair.interval, d.intervals)?;
    }
    Ok(())
}

fn checked_features<'a>(
    params: &DcfaParams,
    features: Option<&'a FeatureMatrix>,
) -> Result<Option<&'a FeatureMatrix>> {
    if !params.has_features() {
        return Ok(None);
    }
    let f = features.ok_or(Error::VariantMismatch {
        variant: "dcfa",
        reason: "feature matrix required",
    })?;
    params.validate(Some(f))?;
    Ok(Some(f))
}

/// Pairwise ranking objective over `pairs`: for each pair the tensor term
/// `ln σ(Â_pqr − Â_pq'r)`, plus `λ1 ln σ(B̂_pq − B̂_pq')` and
/// `λ2 ln σ(Ĉ_rq − Ĉ_rq')`, minus `Σ λ/2 ‖Θ‖²` over the full parameter set.
pub fn bpr_pair_objective(
    params: &DcfaParams,
    features: Option<&FeatureMatrix>,
    dataset: &Dataset,
    pairs: &[PreferencePair],
    lambdas: &Lambdas,
) -> Result<f64> {
    check_pairs(params, dataset, pairs)?;
    let f = checked_features(params, features)?;
    Ok(pairwise_objective(params, f, pairs, lambdas))
}

/// Analytic gradient of [`bpr_pair_objective`] over `batch`. With
/// [`RegScope::Full`] this is the exact gradient; with
/// [`RegScope::TouchedColumns`] the regularization part is restricted to
/// columns the batch touches.
pub fn bpr_gradient(
    params: &DcfaParams,
    features: Option<&FeatureMatrix>,
    dataset: &Dataset,
    batch: &[PreferencePair],
    lambdas: &Lambdas,
    scope: RegScope,
) -> Result<DcfaParams> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_pairs(params, dataset, batch)?;
    let f = checked_features(params, features)?;
    Ok(pairwise_gradient(params, f, batch, lambdas, scope))
}

struct PairwiseScorer<'a, M> {
    model: &'a M,
    features: Option<&'a FeatureMatrix>,
    num_items: usize,
}

impl<M: PairwiseModel> Scorer for PairwiseScorer<'_, M> {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_items(&self, user: usize, interval: usize, out: &mut [f64]) {
        for (q, o) in out.iter_mut().enumerate() {
            *o = self.model.score(self.features, user, q, interval);
        }
    }
}

/// Marks columns touched in a batch so updates skip the rest.
struct Touched {
    flags: [Vec<bool>; 3],
    lists: [Vec<usize>; 3],
}

impl Touched {
    fn new(dataset: &Dataset) -> Self {
        Touched {
            flags: [
                vec![false; dataset.num_users()],
                vec![false; dataset.num_items()],
                vec![false; dataset.num_intervals()],
            ],
            lists: Default::default(),
        }
    }

    fn slot(axis: Axis) -> usize {
        match axis {
            Axis::User => 0,
            Axis::Item => 1,
            Axis::Interval => 2,
        }
    }

    fn mark(&mut self, pair: &PreferencePair) {
        for axis in [Axis::User, Axis::Item, Axis::Interval] {
            let s = Self::slot(axis);
            let (cols, n) = axis.columns(pair);
            for &j in &cols[..n] {
                if !self.flags[s][j] {
                    self.flags[s][j] = true;
                    self.lists[s].push(j);
                }
            }
        }
    }

    fn columns(&self, axis: Axis) -> &[usize] {
        &self.lists[Self::slot(axis)]
    }

    fn clear(&mut self) {
        for s in 0..3 {
            for &j in &self.lists[s] {
                self.flags[s][j] = false;
            }
            self.lists[s].clear();
        }
    }
}

/// Mini-batch ascent shared by every pairwise-trained model.
pub(crate) fn train_pairwise<M: PairwiseModel>(
    mut model: M,
    dataset: &Dataset,
    features: Option<&FeatureMatrix>,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
    clock: &dyn Fn() -> f64,
) -> Result<(M, TrainTrace)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut trace = TrainTrace::default();
    if config.iter_max == 0 {
        return Ok((model, trace));
    }

    let slice = model.user_item_slice();
    let mut records: Vec<(usize, usize, usize)> = if slice {
        dataset.positives_user_item().map(|(p, q)| (p, q, 0)).collect()
    } else {
        dataset.positives().iter().map(|t| (t.user, t.item, t.interval)).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    let lambdas = &config.lambdas;
    let coefficients = model.reg_coefficients(lambdas);
    let axes = model.axes();
    let eta = config.learning_rate;
    let mut grad = model.zeros_like();
    let mut touched = Touched::new(dataset);
    let mut monitor = ConvergenceMonitor::new(config.convergence);
    let mut epoch_pairs: Vec<PreferencePair> =
        Vec::with_capacity(records.len() * config.negatives_per_positive);
    let mut negatives = Vec::with_capacity(config.negatives_per_positive);

    for iteration in 1..=config.iter_max {
        records.shuffle(&mut rng);
        epoch_pairs.clear();
        for batch in records.chunks(config.batch_size) {
            let start = epoch_pairs.len();
            for &(p, q, r) in batch {
                negatives.clear();
                let exclude_interval = (!slice).then_some(r);
                sample_into(
                    dataset,
                    p,
                    exclude_interval,
                    config.negatives_per_positive,
                    &mut rng,
                    &mut negatives,
                )?;
                epoch_pairs.extend(negatives.iter().map(|&qn| PreferencePair::new(p, q, qn, r)));
            }
            let pairs = &epoch_pairs[start..];
            for pair in pairs {
                model.add_pair_gradient(features, pair, lambdas, 1.0, &mut grad);
                add_touched_regularization(&model, pair, &coefficients, &axes, &mut grad);
                touched.mark(pair);
            }
            for ((m, g), axis) in model.factors_mut().into_iter().zip(grad.factors_mut()).zip(&axes) {
                for &j in touched.columns(*axis) {
                    axpy(m.col_mut(j), eta, g.col(j));
                    g.col_mut(j).fill(0.0);
                }
            }
            touched.clear();
        }

        let objective = pairwise_objective(&model, features, &epoch_pairs, lambdas)
            / epoch_pairs.len().max(1) as f64;
        if !objective.is_finite() || !model.factors().iter().all(|m| m.is_finite()) {
            return Err(Error::Diverged { iteration });
        }
        let (recall, ndcg) = match validation {
            Some(v) => {
                let scorer = PairwiseScorer {
                    model: &model,
                    features,
                    num_items: dataset.num_items(),
                };
                let report = evaluate_model(&scorer, dataset, v.holdout, &[v.cutoff], &v.protocol)?;
                (Some(report.recall[0]), Some(report.ndcg[0]))
            }
            None => (None, None),
        };
        trace.records.push(TraceRecord {
            iteration,
            objective,
            recall,
            ndcg,
            seconds: clock(),
        });
        if monitor.observe(objective) {
            trace.converged = true;
            break;
        }
    }
    Ok((model, trace))
}

fn check_feature_count(dataset: &Dataset, features: Option<&FeatureMatrix>) -> Result<()> {
    match features {
        Some(f) if f.num_items() != dataset.num_items() => Err(Error::FeatureCountMismatch {
            expected: dataset.num_items(),
            found: f.num_items(),
        }),
        _ => Ok(()),
    }
}

/// Trains the coupled factorization with the mini-batch pairwise procedure.
/// Passing `features` trains the feature-augmented model.
pub fn train_bpr(
    dataset: &Dataset,
    features: Option<&FeatureMatrix>,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
) -> Result<(DcfaParams, TrainTrace)> {
    train_bpr_timed(dataset, features, config, validation, &|| 0.0)
}

/// [`train_bpr`] with a clock (seconds since start) for the trace.
pub fn train_bpr_timed(
    dataset: &Dataset,
    features: Option<&FeatureMatrix>,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
    clock: &dyn Fn() -> f64,
) -> Result<(DcfaParams, TrainTrace)> {
    config.validate()?;
    check_feature_count(dataset, features)?;
    let dims = Dims {
        users: dataset.num_users(),
        items: dataset.num_items(),
        intervals: dataset.num_intervals(),
        k1: config.k1,
        k2: config.k2,
        k_features: features.map_or(0, FeatureMatrix::dim),
    };
    let params = init_params(config, dims, config.seed);
    train_pairwise(params, dataset, features, config, validation, clock)
}

fn random_matrix(dim: usize, count: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::zeros(dim, count);
    fill_uniform(&mut m, scale, rng);
    m
}

/// Trains (or constructs) any model variant on `dataset`.
///
/// `rand` and `mp` need no optimization; `tucker` has no trainer.
pub fn train_model(
    variant: Variant,
    dataset: &Dataset,
    features: Option<&FeatureMatrix>,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
    clock: &dyn Fn() -> f64,
) -> Result<(Model, TrainTrace)> {
    config.validate()?;
    check_feature_count(dataset, features)?;
    let (p, q, r, k) = (
        dataset.num_users(),
        dataset.num_items(),
        dataset.num_intervals(),
        config.k1,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.init_scale;
    let need_features = || {
        features.ok_or(Error::VariantMismatch {
            variant: variant.name(),
            reason: "feature matrix required",
        })
    };
    let out = match variant {
        Variant::Rand => (
            Model::Baseline(Baseline::Rand {
                seed: config.seed,
                items: q,
            }),
            TrainTrace::default(),
        ),
        Variant::Mp => (Model::Baseline(Baseline::popularity(dataset)), TrainTrace::default()),
        Variant::Mf => {
            let init = MfFactors {
                u: random_matrix(k, p, scale, &mut rng),
                v: random_matrix(k, q, scale, &mut rng),
            };
            let (m, trace) = train_pairwise(init, dataset, None, config, validation, clock)?;
            (Model::Baseline(Baseline::Mf { u: m.u, v: m.v }), trace)
        }
        Variant::Vbpr => {
            let f = need_features()?;
            let init = VbprFactors {
                u: random_matrix(k, p, scale, &mut rng),
                v: random_matrix(k, q, scale, &mut rng),
                m: random_matrix(f.dim(), p, scale, &mut rng),
            };
            let (m, trace) = train_pairwise(init, dataset, Some(f), config, validation, clock)?;
            (
                Model::Baseline(Baseline::Vbpr {
                    u: m.u,
                    v: m.v,
                    m: m.m,
                }),
                trace,
            )
        }
        Variant::Cp => {
            let init = CpFactors {
                u: random_matrix(k, p, scale, &mut rng),
                v: random_matrix(k, q, scale, &mut rng),
                t: random_matrix(k, r, scale, &mut rng),
            };
            let (m, trace) = train_pairwise(init, dataset, None, config, validation, clock)?;
            (Model::Baseline(Baseline::Cp(m)), trace)
        }
        Variant::Pitf => {
            let mut init = PitfFactors::zeros(k, p, q, r);
            for m in init.matrices_mut() {
                fill_uniform(m, scale, &mut rng);
            }
            let (m, trace) = train_pairwise(init, dataset, None, config, validation, clock)?;
            (Model::Baseline(Baseline::Pitf(m)), trace)
        }
        Variant::Cmtf => {
            let (m, trace) = train_mse_cmtf(dataset, config, validation, clock)?;
            (Model::Baseline(Baseline::Cmtf(m)), trace)
        }
        Variant::Dcf => {
            let (m, trace) = train_bpr_timed(dataset, None, config, validation, clock)?;
            (Model::Factorized(m), trace)
        }
        Variant::Dcfa => {
            let f = need_features()?;
            let (m, trace) = train_bpr_timed(dataset, Some(f), config, validation, clock)?;
            (Model::Factorized(m), trace)
        }
        Variant::Tucker => {
            return Err(Error::VariantMismatch {
                variant: "tucker",
                reason: "no trainer is provided for the Tucker model",
            })
        }
    };
    Ok(out)
}
