//! Squared-loss coupled matrix–tensor factorization (the CMTF baseline):
//! a CP-form tensor `Â_pqr = Σ_k U_kp V_kq T_kr` fitted jointly with
//! `B̂ = UᵀV` and `Ĉ = TᵀV`, all sharing the item matrix `V`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fill_uniform, ConvergenceMonitor, Lambdas, TraceRecord, TrainConfig, TrainTrace, Validation};
use crate::data::{Dataset, Triple};
use crate::error::{Error, Result};
use crate::eval::evaluate_model;
use crate::math::dot;
use crate::matrix::axpy;
use crate::models::{Baseline, CpFactors, Model};

/// Largest tensor evaluated cell by cell.
pub const DENSE_CELL_LIMIT: usize = 1_000_000;

/// The cells entering the squared-error terms, with their targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MseEntries {
    pub tensor: Vec<(Triple, f64)>,
    /// `(user, item, target)`
    pub user_item: Vec<(usize, usize, f64)>,
    /// `(interval, item, target)`
    pub time_item: Vec<(usize, usize, f64)>,
}

impl MseEntries {
    /// Every cell of `A`, `B` and `C`.
    pub fn dense(dataset: &Dataset) -> Result<Self> {
        let (p, q, r) = (dataset.num_users(), dataset.num_items(), dataset.num_intervals());
        if p * q * r > DENSE_CELL_LIMIT {
            return Err(Error::InvalidConfig(alloc::format!(
                "dense evaluation limited to {DENSE_CELL_LIMIT} cells, tensor has {}",
                p * q * r
            )));
        }
        let target = |b: bool| if b { 1.0 } else { 0.0 };
        let mut e = MseEntries::default();
        for user in 0..p {
            for item in 0..q {
                e.user_item.push((user, item, target(dataset.is_user_item(user, item))));
                for interval in 0..r {
                    let t = Triple::new(user, item, interval);
                    e.tensor.push((t, target(dataset.contains(t))));
                }
            }
        }
        for interval in 0..r {
            for item in 0..q {
                e.time_item
                    .push((interval, item, target(dataset.is_interval_item(interval, item))));
            }
        }
        Ok(e)
    }

    /// All positives plus `zeros_per_positive` uniformly drawn zero cells per
    /// positive, for each of the three arrays.
    pub fn sampled<R: Rng + ?Sized>(dataset: &Dataset, zeros_per_positive: usize, rng: &mut R) -> Self {
        let (p, q, r) = (dataset.num_users(), dataset.num_items(), dataset.num_intervals());
        let mut e = MseEntries::default();
        e.tensor.extend(dataset.positives().iter().map(|&t| (t, 1.0)));
        e.user_item.extend(dataset.positives_user_item().map(|(a, b)| (a, b, 1.0)));
        e.time_item.extend(dataset.positives_interval_item().map(|(a, b)| (a, b, 1.0)));

        // rejection sampling; a bounded number of attempts keeps near-dense arrays from stalling
        let attempts = |wanted: usize| wanted.saturating_mul(20) + 100;
        let want = e.tensor.len() * zeros_per_positive;
        let mut got = 0;
        for _ in 0..attempts(want) {
            if got == want {
                break;
            }
            let t = Triple::new(rng.random_range(0..p), rng.random_range(0..q), rng.random_range(0..r));
            if !dataset.contains(t) {
                e.tensor.push((t, 0.0));
                got += 1;
            }
        }
        let want = e.user_item.len() * zeros_per_positive;
        let mut got = 0;
        for _ in 0..attempts(want) {
            if got == want {
                break;
            }
            let (a, b) = (rng.random_range(0..p), rng.random_range(0..q));
            if !dataset.is_user_item(a, b) {
                e.user_item.push((a, b, 0.0));
                got += 1;
            }
        }
        let want = e.time_item.len() * zeros_per_positive;
        let mut got = 0;
        for _ in 0..attempts(want) {
            if got == want {
                break;
            }
            let (a, b) = (rng.random_range(0..r), rng.random_range(0..q));
            if !dataset.is_interval_item(a, b) {
                e.time_item.push((a, b, 0.0));
                got += 1;
            }
        }
        e
    }

    pub fn len(&self) -> usize {
        self.tensor.len() + self.user_item.len() + self.time_item.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `½‖A−Â‖² + λ1/2‖B−B̂‖² + λ2/2‖C−Ĉ‖² + λ3/2‖U‖² + λ4/2‖V‖² + λ5/2‖T‖²`,
/// with the Frobenius terms restricted to `entries`.
pub fn mse_objective(params: &CpFactors, entries: &MseEntries, lambdas: &Lambdas) -> f64 {
    let sq = |x: f64| x * x;
    let a: f64 = entries
        .tensor
        .iter()
        .map(|(t, y)| sq(y - params.score(t.user, t.item, t.interval)))
        .sum();
    let b: f64 = entries
        .user_item
        .iter()
        .map(|&(p, q, y)| sq(y - dot(params.u.col(p), params.v.col(q))))
        .sum();
    let c: f64 = entries
        .time_item
        .iter()
        .map(|&(r, q, y)| sq(y - dot(params.t.col(r), params.v.col(q))))
        .sum();
    0.5 * a
        + 0.5 * lambdas.user_item * b
        + 0.5 * lambdas.time_item * c
        + 0.5 * lambdas.user * params.u.squared_norm()
        + 0.5 * lambdas.item_user * params.v.squared_norm()
        + 0.5 * lambdas.time * params.t.squared_norm()
}

/// Exact gradient of [`mse_objective`].
pub fn mse_gradient(params: &CpFactors, entries: &MseEntries, lambdas: &Lambdas) -> CpFactors {
    let mut g = CpFactors::zeros(params.u.dim(), params.u.count(), params.v.count(), params.t.count());
    for (t, y) in &entries.tensor {
        add_tensor_gradient(params, *t, *y, 1.0, &mut g);
    }
    for &(p, q, y) in &entries.user_item {
        let w = -lambdas.user_item * (y - dot(params.u.col(p), params.v.col(q)));
        axpy(g.u.col_mut(p), w, params.v.col(q));
        axpy(g.v.col_mut(q), w, params.u.col(p));
    }
    for &(r, q, y) in &entries.time_item {
        let w = -lambdas.time_item * (y - dot(params.t.col(r), params.v.col(q)));
        axpy(g.t.col_mut(r), w, params.v.col(q));
        axpy(g.v.col_mut(q), w, params.t.col(r));
    }
    g.u.add_scaled(lambdas.user, &params.u);
    g.v.add_scaled(lambdas.item_user, &params.v);
    g.t.add_scaled(lambdas.time, &params.t);
    g
}

/// Adds `weight ×` the gradient of `½(y − Â_pqr)²` to `g`.
fn add_tensor_gradient(params: &CpFactors, t: Triple, y: f64, weight: f64, g: &mut CpFactors) {
    let (p, q, r) = (t.user, t.item, t.interval);
    let w = -weight * (y - params.score(p, q, r));
    let (up, vq, tr) = (params.u.col(p), params.v.col(q), params.t.col(r));
    for k in 0..up.len() {
        g.u.col_mut(p)[k] += w * vq[k] * tr[k];
        g.v.col_mut(q)[k] += w * up[k] * tr[k];
        g.t.col_mut(r)[k] += w * up[k] * vq[k];
    }
}

#[derive(Clone, Copy)]
enum Entry {
    Tensor(Triple, f64),
    UserItem(usize, usize, f64),
    TimeItem(usize, usize, f64),
}

/// Stochastic gradient descent on [`mse_objective`]; zero cells are
/// resampled every epoch unless `config.mse_zeros_per_positive` is `None`,
/// in which case every cell is used.
pub fn train_mse_cmtf(
    dataset: &Dataset,
    config: &TrainConfig,
    validation: Option<&Validation<'_>>,
    clock: &dyn Fn() -> f64,
) -> Result<(CpFactors, TrainTrace)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (p, q, r, k) = (
        dataset.num_users(),
        dataset.num_items(),
        dataset.num_intervals(),
        config.k1,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = CpFactors::zeros(k, p, q, r);
    for m in [&mut params.u, &mut params.v, &mut params.t] {
        fill_uniform(m, config.init_scale, &mut rng);
    }
    rng.set_stream(1);
    let mut trace = TrainTrace::default();
    let l = config.lambdas;
    let eta = config.learning_rate;
    let dense = match config.mse_zeros_per_positive {
        None => Some(MseEntries::dense(dataset)?),
        Some(_) => None,
    };
    let mut monitor = ConvergenceMonitor::new(config.convergence);
    let mut scratch = CpFactors::zeros(k, 1, 1, 1);

    for iteration in 1..=config.iter_max {
        let entries = match (&dense, config.mse_zeros_per_positive) {
            (Some(d), _) => d.clone(),
            (None, Some(z)) => MseEntries::sampled(dataset, z, &mut rng),
            (None, None) => unreachable!(),
        };
        let mut order: Vec<Entry> = entries
            .tensor
            .iter()
            .map(|&(t, y)| Entry::Tensor(t, y))
            .chain(entries.user_item.iter().map(|&(a, b, y)| Entry::UserItem(a, b, y)))
            .chain(entries.time_item.iter().map(|&(a, b, y)| Entry::TimeItem(a, b, y)))
            .collect();
        order.shuffle(&mut rng);

        for entry in order {
            match entry {
                Entry::Tensor(t, y) => {
                    let (up, vq, tr) = (params.u.col(t.user), params.v.col(t.item), params.t.col(t.interval));
                    let e = y - params.score(t.user, t.item, t.interval);
                    for i in 0..k {
                        scratch.u.col_mut(0)[i] = e * vq[i] * tr[i] - l.user * up[i];
                        scratch.v.col_mut(0)[i] = e * up[i] * tr[i] - l.item_user * vq[i];
                        scratch.t.col_mut(0)[i] = e * up[i] * vq[i] - l.time * tr[i];
                    }
                    axpy(params.u.col_mut(t.user), eta, scratch.u.col(0));
                    axpy(params.v.col_mut(t.item), eta, scratch.v.col(0));
                    axpy(params.t.col_mut(t.interval), eta, scratch.t.col(0));
                }
                Entry::UserItem(a, b, y) => {
                    let (ua, vb) = (params.u.col(a), params.v.col(b));
                    let e = l.user_item * (y - dot(ua, vb));
                    for i in 0..k {
                        scratch.u.col_mut(0)[i] = e * vb[i] - l.user * ua[i];
                        scratch.v.col_mut(0)[i] = e * ua[i] - l.item_user * vb[i];
                    }
                    axpy(params.u.col_mut(a), eta, scratch.u.col(0));
                    axpy(params.v.col_mut(b), eta, scratch.v.col(0));
                }
                Entry::TimeItem(a, b, y) => {
                    let (ta, vb) = (params.t.col(a), params.v.col(b));
                    let e = l.time_item * (y - dot(ta, vb));
                    for i in 0..k {
                        scratch.t.col_mut(0)[i] = e * vb[i] - l.time * ta[i];
                        scratch.v.col_mut(0)[i] = e * ta[i] - l.item_user * vb[i];
                    }
                    axpy(params.t.col_mut(a), eta, scratch.t.col(0));
                    axpy(params.v.col_mut(b), eta, scratch.v.col(0));
                }
            }
        }

        let objective = mse_objective(&params, &entries, &l) / entries.len().max(1) as f64;
        if !objective.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        let (recall, ndcg) = match validation {
            Some(v) => {
                let model = Model::Baseline(Baseline::Cmtf(params.clone()));
                let scorer = model.scorer(None)?;
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
    Ok((params, trace))
}
