//! Parameter learning: pairwise ranking (BPR) over the tensor and its two
//! coupled matrices, squared loss for the CMTF baseline, and a
//! finite-difference gradient checker.

mod bpr;
mod factorization;
mod gradcheck;
mod mse;
mod sampler;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::EvalProtocol;
use crate::data::Holdout;
use crate::matrix::Matrix;
use crate::models::{DcfaParams, Dims};

pub use bpr::{
    bpr_gradient, bpr_pair_objective, train_bpr, train_bpr_timed, train_model, RegScope,
};
pub use factorization::{Axis, MfFactors, VbprFactors};
pub use gradcheck::{
    grad_check, BlockReport, BprObjective, Differentiable, FnObjective, GradCheckConfig,
    GradCheckReport, MseObjective, ParamBlock,
};
pub use mse::{mse_gradient, mse_objective, train_mse_cmtf, MseEntries};
pub use sampler::sample_negatives;

/// Loss weights. `user_item` and `time_item` weight the coupled-matrix
/// terms; the rest are per-matrix L2 coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lambdas {
    /// weight of the user × item term
    pub user_item: f64,
    /// weight of the time × item term
    pub time_item: f64,
    /// `U`
    pub user: f64,
    /// `V`
    pub item_user: f64,
    /// `T`
    pub time: f64,
    /// `W`
    pub item_time: f64,
    /// `M`
    pub user_feature: f64,
    /// `N`
    pub time_feature: f64,
}

impl Lambdas {
    pub const fn zero() -> Self {
        Lambdas {
            user_item: 0.0,
            time_item: 0.0,
            user: 0.0,
            item_user: 0.0,
            time: 0.0,
            item_time: 0.0,
            user_feature: 0.0,
            time_feature: 0.0,
        }
    }

    /// Regularization coefficients in `U, V, T, W, M, N` order.
    pub fn regularization(&self) -> [f64; 6] {
        [
            self.user,
            self.item_user,
            self.time,
            self.item_time,
            self.user_feature,
            self.time_feature,
        ]
    }

    pub fn with_regularization(mut self, value: f64) -> Self {
        self.user = value;
        self.item_user = value;
        self.time = value;
        self.item_time = value;
        self.user_feature = value;
        self.time_feature = value;
        self
    }

    fn validate(&self) -> Result<()> {
        let all = [self.user_item, self.time_item];
        if all.iter().chain(&self.regularization()).any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidConfig(format!("lambdas must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

impl Default for Lambdas {
    /// Best-performing setting reported for the feature-augmented model.
    fn default() -> Self {
        Lambdas {
            user_item: 0.1,
            time_item: 0.1,
            user: 0.3,
            item_user: 0.3,
            time: 0.5,
            item_time: 0.2,
            user_feature: 0.5,
            time_feature: 0.5,
        }
    }
}

/// Stop once the relative change of the epoch objective stays below
/// `tolerance` for `patience` consecutive epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub tolerance: f64,
    pub patience: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            tolerance: 1e-5,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k1: usize,
    pub k2: usize,
    pub lambdas: Lambdas,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub iter_max: usize,
    pub convergence: Convergence,
    pub seed: u64,
    pub init_scale: f64,
    /// Zero entries sampled per positive by the squared-loss trainer;
    /// `None` evaluates every cell.
    pub mse_zeros_per_positive: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k1: 10,
            k2: 10,
            lambdas: Lambdas::default(),
            learning_rate: 0.05,
            batch_size: 32,
            negatives_per_positive: 5,
            iter_max: 200,
            convergence: Convergence::default(),
            seed: 0,
            init_scale: 0.1,
            mse_zeros_per_positive: Some(5),
        }
    }
}

impl TrainConfig {
    /// Settings for the desk-scale synthetic corpus: weak per-touch
    /// regularization and a wider initialization so the multiplicative
    /// models leave the flat region around zero.
    pub fn synthetic() -> Self {
        TrainConfig {
            lambdas: Lambdas::default().with_regularization(0.01),
            init_scale: 0.5,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lambdas.validate()?;
        let bad = |what: &str| Err(Error::InvalidConfig(String::from(what)));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives per positive must be at least 1");
        }
        if self.k1 == 0 || self.k2 == 0 {
            return bad("latent dimensions must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be non-negative");
        }
        Ok(())
    }
}

/// One sampled preference: `pos` is a positive of `(user, interval)` and
/// `neg` lies outside both `Q+_user` and `Q+_interval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PreferencePair {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
    pub interval: usize,
}

impl PreferencePair {
    pub const fn new(user: usize, pos: usize, neg: usize, interval: usize) -> Self {
        PreferencePair {
            user,
            pos,
            neg,
            interval,
        }
    }
}

/// Fills `m` with i.i.d. uniform values on `[-scale, scale)`.
pub(crate) fn fill_uniform<R: Rng>(m: &mut Matrix, scale: f64, rng: &mut R) {
    for x in m.as_mut_slice() {
        let u: f64 = rng.random();
        *x = scale * (2.0 * u - 1.0);
    }
}

/// Random factor matrices with entries uniform on `[-init_scale, init_scale)`.
pub fn init_params(config: &TrainConfig, dims: Dims, seed: u64) -> DcfaParams {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut params = DcfaParams::zeros(Dims {
        k1: config.k1,
        k2: config.k2,
        ..dims
    });
    for m in params.matrices_mut() {
        fill_uniform(m, config.init_scale, &mut rng);
    }
    params
}

/// Validation set consulted after every epoch.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub holdout: &'a [Holdout],
    pub cutoff: usize,
    pub protocol: EvalProtocol,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Mean objective over the epoch's sampled pairs (or entries).
    pub objective: f64,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Whether training stopped on the convergence rule before `iter_max`.
    pub converged: bool,
}

/// Tracks the relative-change stopping rule.
pub(crate) struct ConvergenceMonitor {
    rule: Convergence,
    last: Option<f64>,
    streak: usize,
}

impl ConvergenceMonitor {
    pub(crate) fn new(rule: Convergence) -> Self {
        ConvergenceMonitor {
            rule,
            last: None,
            streak: 0,
        }
    }

    /// Records an epoch objective; true once the rule is satisfied.
    pub(crate) fn observe(&mut self, objective: f64) -> bool {
        if let Some(prev) = self.last {
            let rel = (objective - prev).abs() / prev.abs().max(1e-12);
            if rel < self.rule.tolerance {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.last = Some(objective);
        self.rule.patience > 0 && self.streak >= self.rule.patience
    }
}
