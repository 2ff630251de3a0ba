//! Scoring functions: the coupled factorization (with and without item
//! features), its coupled-matrix predictors, and the baseline predictors.
//!
//! With `S1 = U_p·V_q + M_p·F_q` and `S2 = T_r·W_q + N_r·F_q`, the
//! factorized model predicts `Â_pqr = S1 · S2`, `B̂_pq = S1` and
//! `Ĉ_rq = S2`. Without feature matrices the `M`/`N` terms vanish.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{check_index, Error, Result};
use crate::features::FeatureMatrix;
use crate::math::dot;
use crate::matrix::Matrix;

/// Sizes of a factorized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub users: usize,
    pub items: usize,
    pub intervals: usize,
    /// Latent size of the user-item factors.
    pub k1: usize,
    /// Latent size of the time-item factors.
    pub k2: usize,
    /// Feature dimension; 0 for the plain model.
    pub k_features: usize,
}

/// Factor matrices `U (K1×P)`, `V (K1×Q)`, `T (K2×R)`, `W (K2×Q)` and, for
/// the feature-augmented model, `M (K×P)` and `N (K×R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcfaParams {
    pub u: Matrix,
    pub v: Matrix,
    pub t: Matrix,
    pub w: Matrix,
    pub m: Option<Matrix>,
    pub n: Option<Matrix>,
}

impl DcfaParams {
    pub fn zeros(dims: Dims) -> Self {
        let with_features = dims.k_features > 0;
        DcfaParams {
            u: Matrix::zeros(dims.k1, dims.users),
            v: Matrix::zeros(dims.k1, dims.items),
            t: Matrix::zeros(dims.k2, dims.intervals),
            w: Matrix::zeros(dims.k2, dims.items),
            m: with_features.then(|| Matrix::zeros(dims.k_features, dims.users)),
            n: with_features.then(|| Matrix::zeros(dims.k_features, dims.intervals)),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims {
            users: self.u.count(),
            items: self.v.count(),
            intervals: self.t.count(),
            k1: self.u.dim(),
            k2: self.t.dim(),
            k_features: self.m.as_ref().map_or(0, Matrix::dim),
        }
    }

    pub fn has_features(&self) -> bool {
        self.m.is_some()
    }

    /// The matrices in checkpoint order `U, V, T, W[, M, N]`.
    pub fn matrices(&self) -> Vec<&Matrix> {
        let mut out = vec![&self.u, &self.v, &self.t, &self.w];
        out.extend(self.m.iter());
        out.extend(self.n.iter());
        out
    }

    pub fn matrices_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = vec![&mut self.u, &mut self.v, &mut self.t, &mut self.w];
        out.extend(self.m.iter_mut());
        out.extend(self.n.iter_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }

    /// Checks shapes agree with each other and with `features`.
    pub fn validate(&self, features: Option<&FeatureMatrix>) -> Result<()> {
        let d = self.dims();
        let shape_err = |what| Error::InvalidConfig(alloc::format!("inconsistent {what} shape"));
        if self.v.dim() != d.k1 || self.w.dim() != d.k2 || self.w.count() != d.items {
            return Err(shape_err("item factor"));
        }
        match (&self.m, &self.n) {
            (None, None) => Ok(()),
            (Some(m), Some(n)) => {
                if m.count() != d.users || n.count() != d.intervals || n.dim() != m.dim() {
                    return Err(shape_err("feature-preference"));
                }
                if let Some(f) = features {
                    check_features(f, m.dim(), d.items)?;
                }
                Ok(())
            }
            _ => Err(shape_err("feature-preference")),
        }
    }

    fn check_triple(&self, p: usize, q: usize, r: usize) -> Result<()> {
        check_index("user", p, self.u.count())?;
        check_index("item", q, self.v.count())?;
        check_index("interval", r, self.t.count())
    }

    /// `S1 = U_p·V_q (+ M_p·F_q)`, no bounds checks.
    #[inline]
    pub(crate) fn user_score(&self, features: Option<&FeatureMatrix>, p: usize, q: usize) -> f64 {
        let mut s = dot(self.u.col(p), self.v.col(q));
        if let (Some(m), Some(f)) = (&self.m, features) {
            s += dot(m.col(p), f.item(q));
        }
        s
    }

    /// `S2 = T_r·W_q (+ N_r·F_q)`, no bounds checks.
    #[inline]
    pub(crate) fn time_score(&self, features: Option<&FeatureMatrix>, r: usize, q: usize) -> f64 {
        let mut s = dot(self.t.col(r), self.w.col(q));
        if let (Some(n), Some(f)) = (&self.n, features) {
            s += dot(n.col(r), f.item(q));
        }
        s
    }

    fn feature_arg<'a>(
        &self,
        features: Option<&'a FeatureMatrix>,
    ) -> Result<Option<&'a FeatureMatrix>> {
        match (&self.m, features) {
            (None, _) => Ok(None),
            (Some(m), Some(f)) => {
                check_features(f, m.dim(), self.v.count())?;
                Ok(Some(f))
            }
            (Some(_), None) => Err(Error::VariantMismatch {
                variant: "dcfa",
                reason: "feature matrix required",
            }),
        }
    }
}

fn check_features(f: &FeatureMatrix, dim: usize, items: usize) -> Result<()> {
    if f.dim() != dim {
        return Err(Error::FeatureDimMismatch {
            expected: dim,
            found: f.dim(),
        });
    }
    if f.num_items() != items {
        return Err(Error::FeatureCountMismatch {
            expected: items,
            found: f.num_items(),
        });
    }
    Ok(())
}

/// `Â_pqr = (U_p·V_q)(T_r·W_q)`; feature matrices, if present, are ignored.
pub fn predict_dcf(params: &DcfaParams, p: usize, q: usize, r: usize) -> Result<f64> {
    params.check_triple(p, q, r)?;
    Ok(dot(params.u.col(p), params.v.col(q)) * dot(params.t.col(r), params.w.col(q)))
}

/// `Â_pqr = (U_p·V_q + M_p·F_q)(T_r·W_q + N_r·F_q)`.
pub fn predict_dcfa(
    params: &DcfaParams,
    features: &FeatureMatrix,
    p: usize,
    q: usize,
    r: usize,
) -> Result<f64> {
    params.check_triple(p, q, r)?;
    if !params.has_features() {
        return Err(Error::VariantMismatch {
            variant: "dcf",
            reason: "model has no feature-preference matrices",
        });
    }
    let f = params.feature_arg(Some(features))?;
    Ok(params.user_score(f, p, q) * params.time_score(f, r, q))
}

/// `B̂_pq`. Feature terms are included iff the model carries `M`.
pub fn predict_b(params: &DcfaParams, features: Option<&FeatureMatrix>, p: usize, q: usize) -> Result<f64> {
    check_index("user", p, params.u.count())?;
    check_index("item", q, params.v.count())?;
    let f = params.feature_arg(features)?;
    Ok(params.user_score(f, p, q))
}

/// `Ĉ_rq`. Feature terms are included iff the model carries `N`.
pub fn predict_c(params: &DcfaParams, features: Option<&FeatureMatrix>, r: usize, q: usize) -> Result<f64> {
    check_index("interval", r, params.t.count())?;
    check_index("item", q, params.v.count())?;
    let f = params.feature_arg(features)?;
    Ok(params.time_score(f, r, q))
}

/// Dense Tucker core `K1 × K2 × K3`, element `(i, j, k)` at `(i*K2 + j)*K3 + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuckerCore {
    pub shape: [usize; 3],
    pub values: Vec<f64>,
}

impl TuckerCore {
    pub fn zeros(shape: [usize; 3]) -> Self {
        TuckerCore {
            shape,
            values: vec![0.0; shape[0] * shape[1] * shape[2]],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.shape[1] + j) * self.shape[2] + k]
    }
}

/// The six factor matrices of the pairwise-interaction model.
#[derive(Debug, Clone, PartialEq)]
pub struct PitfFactors {
    /// user factors paired with items
    pub user_item: Matrix,
    /// item factors paired with users
    pub item_user: Matrix,
    /// user factors paired with intervals
    pub user_time: Matrix,
    /// interval factors paired with users
    pub time_user: Matrix,
    /// item factors paired with intervals
    pub item_time: Matrix,
    /// interval factors paired with items
    pub time_item: Matrix,
}

impl PitfFactors {
    pub fn zeros(k: usize, users: usize, items: usize, intervals: usize) -> Self {
        PitfFactors {
            user_item: Matrix::zeros(k, users),
            item_user: Matrix::zeros(k, items),
            user_time: Matrix::zeros(k, users),
            time_user: Matrix::zeros(k, intervals),
            item_time: Matrix::zeros(k, items),
            time_item: Matrix::zeros(k, intervals),
        }
    }

    pub fn matrices(&self) -> [&Matrix; 6] {
        [
            &self.user_item,
            &self.item_user,
            &self.user_time,
            &self.time_user,
            &self.item_time,
            &self.time_item,
        ]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 6] {
        [
            &mut self.user_item,
            &mut self.item_user,
            &mut self.user_time,
            &mut self.time_user,
            &mut self.item_time,
            &mut self.time_item,
        ]
    }
}

/// Three factor matrices sharing one latent size (`U`, `V`, `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    pub u: Matrix,
    pub v: Matrix,
    pub t: Matrix,
}

impl CpFactors {
    pub fn zeros(k: usize, users: usize, items: usize, intervals: usize) -> Self {
        CpFactors {
            u: Matrix::zeros(k, users),
            v: Matrix::zeros(k, items),
            t: Matrix::zeros(k, intervals),
        }
    }

    #[inline]
    pub(crate) fn score(&self, p: usize, q: usize, r: usize) -> f64 {
        let (u, v, t) = (self.u.col(p), self.v.col(q), self.t.col(r));
        (0..u.len()).map(|k| u[k] * v[k] * t[k]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Seeded hash-based pseudorandom scores.
    Rand { seed: u64, items: usize },
    /// Item popularity in the training set.
    Mp { popularity: Vec<f64> },
    Mf { u: Matrix, v: Matrix },
    /// `U_p·V_q + M_p·F_q`
    Vbpr { u: Matrix, v: Matrix, m: Matrix },
    Cp(CpFactors),
    /// CP-form tensor learned jointly with its coupled matrices under squared loss.
    Cmtf(CpFactors),
    Pitf(PitfFactors),
    Tucker {
        core: TuckerCore,
        u: Matrix,
        v: Matrix,
        t: Matrix,
    },
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Rand { .. } => "rand",
            Baseline::Mp { .. } => "mp",
            Baseline::Mf { .. } => "mf",
            Baseline::Vbpr { .. } => "vbpr",
            Baseline::Cp(_) => "cp",
            Baseline::Cmtf(_) => "cmtf",
            Baseline::Pitf(_) => "pitf",
            Baseline::Tucker { .. } => "tucker",
        }
    }

    pub fn popularity(train: &Dataset) -> Self {
        Baseline::Mp {
            popularity: train.item_counts().iter().map(|&c| c as f64).collect(),
        }
    }

    /// `(users, items, intervals)` the baseline can address; `None` means unbounded.
    fn limits(&self) -> (Option<usize>, usize, Option<usize>) {
        match self {
            Baseline::Rand { items, .. } => (None, *items, None),
            Baseline::Mp { popularity } => (None, popularity.len(), None),
            Baseline::Mf { u, v } | Baseline::Vbpr { u, v, .. } => (Some(u.count()), v.count(), None),
            Baseline::Cp(f) | Baseline::Cmtf(f) => (Some(f.u.count()), f.v.count(), Some(f.t.count())),
            Baseline::Pitf(f) => (
                Some(f.user_item.count()),
                f.item_user.count(),
                Some(f.time_user.count()),
            ),
            Baseline::Tucker { u, v, t, .. } => (Some(u.count()), v.count(), Some(t.count())),
        }
    }

    pub fn num_items(&self) -> usize {
        self.limits().1
    }

    fn needs_features(&self) -> Option<usize> {
        match self {
            Baseline::Vbpr { m, .. } => Some(m.dim()),
            _ => None,
        }
    }

    /// Unchecked score.
    #[inline]
    pub(crate) fn score(&self, features: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> f64 {
        match self {
            Baseline::Rand { seed, .. } => hash_unit(*seed, p, q, r),
            Baseline::Mp { popularity } => popularity[q],
            Baseline::Mf { u, v } => dot(u.col(p), v.col(q)),
            Baseline::Vbpr { u, v, m } => {
                let f = features.expect("vbpr scored without features");
                dot(u.col(p), v.col(q)) + dot(m.col(p), f.item(q))
            }
            Baseline::Cp(f) | Baseline::Cmtf(f) => f.score(p, q, r),
            Baseline::Pitf(f) => {
                dot(f.user_item.col(p), f.item_user.col(q))
                    + dot(f.user_time.col(p), f.time_user.col(r))
                    + dot(f.item_time.col(q), f.time_item.col(r))
            }
            Baseline::Tucker { core, u, v, t } => {
                let (up, vq, tr) = (u.col(p), v.col(q), t.col(r));
                let [k1, k2, k3] = core.shape;
                let mut s = 0.0;
                for i in 0..k1 {
                    for j in 0..k2 {
                        for k in 0..k3 {
                            s += core.get(i, j, k) * up[i] * vq[j] * tr[k];
                        }
                    }
                }
                s
            }
        }
    }
}

/// SplitMix64 finalizer over `(seed, p, q, r)` mapped to `[0, 1)`.
fn hash_unit(seed: u64, p: usize, q: usize, r: usize) -> f64 {
    let mut x = seed;
    for v in [p as u64, q as u64, r as u64] {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(v);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
    }
    (x >> 11) as f64 / (1u64 << 53) as f64
}

pub fn predict_baseline(
    baseline: &Baseline,
    features: Option<&FeatureMatrix>,
    p: usize,
    q: usize,
    r: usize,
) -> Result<f64> {
    let (users, items, intervals) = baseline.limits();
    if let Some(limit) = users {
        check_index("user", p, limit)?;
    }
    check_index("item", q, items)?;
    if let Some(limit) = intervals {
        check_index("interval", r, limit)?;
    }
    if let Some(dim) = baseline.needs_features() {
        let f = features.ok_or(Error::VariantMismatch {
            variant: baseline.name(),
            reason: "feature matrix required",
        })?;
        check_features(f, dim, items)?;
    }
    Ok(baseline.score(features, p, q, r))
}

/// Model variants, with the tag byte used in checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rand,
    Mp,
    Mf,
    Vbpr,
    Cp,
    Pitf,
    Tucker,
    Cmtf,
    Dcf,
    Dcfa,
}

impl Variant {
    pub const ALL: [Variant; 10] = [
        Variant::Rand,
        Variant::Mp,
        Variant::Mf,
        Variant::Vbpr,
        Variant::Cp,
        Variant::Pitf,
        Variant::Tucker,
        Variant::Cmtf,
        Variant::Dcf,
        Variant::Dcfa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rand => "rand",
            Variant::Mp => "mp",
            Variant::Mf => "mf",
            Variant::Vbpr => "vbpr",
            Variant::Cp => "cp",
            Variant::Pitf => "pitf",
            Variant::Tucker => "tucker",
            Variant::Cmtf => "cmtf",
            Variant::Dcf => "dcf",
            Variant::Dcfa => "dcfa",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn tag(self) -> u8 {
        Self::ALL.iter().position(|v| *v == self).unwrap() as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(tag as usize).copied()
    }

    pub fn uses_features(self) -> bool {
        matches!(self, Variant::Vbpr | Variant::Dcfa)
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Any trained or constructed model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// DCF when `M`/`N` are absent, DCFA otherwise.
    Factorized(DcfaParams),
    Baseline(Baseline),
}

impl Model {
    pub fn variant(&self) -> Variant {
        match self {
            Model::Factorized(p) if p.has_features() => Variant::Dcfa,
            Model::Factorized(_) => Variant::Dcf,
            Model::Baseline(b) => match b {
                Baseline::Rand { .. } => Variant::Rand,
                Baseline::Mp { .. } => Variant::Mp,
                Baseline::Mf { .. } => Variant::Mf,
                Baseline::Vbpr { .. } => Variant::Vbpr,
                Baseline::Cp(_) => Variant::Cp,
                Baseline::Cmtf(_) => Variant::Cmtf,
                Baseline::Pitf(_) => Variant::Pitf,
                Baseline::Tucker { .. } => Variant::Tucker,
            },
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            Model::Factorized(p) => p.v.count(),
            Model::Baseline(b) => b.num_items(),
        }
    }

    pub fn predict(&self, features: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> Result<f64> {
        match self {
            Model::Factorized(params) if params.has_features() => {
                let f = features.ok_or(Error::VariantMismatch {
                    variant: "dcfa",
                    reason: "feature matrix required",
                })?;
                predict_dcfa(params, f, p, q, r)
            }
            Model::Factorized(params) => predict_dcf(params, p, q, r),
            Model::Baseline(b) => predict_baseline(b, features, p, q, r),
        }
    }

    /// Binds the model to its feature matrix (when needed) for ranking.
    pub fn scorer<'a>(&'a self, features: Option<&'a FeatureMatrix>) -> Result<ModelScorer<'a>> {
        match self {
            Model::Factorized(params) => {
                params.validate(None)?;
                params.feature_arg(features)?;
            }
            Model::Baseline(b) => {
                if let Some(dim) = b.needs_features() {
                    let f = features.ok_or(Error::VariantMismatch {
                        variant: b.name(),
                        reason: "feature matrix required",
                    })?;
                    check_features(f, dim, b.num_items())?;
                }
            }
        }
        let features = if self.variant().uses_features() { features } else { None };
        Ok(ModelScorer {
            model: self,
            features,
        })
    }
}

/// Scores every item for a `(user, interval)` context.
pub trait Scorer {
    fn num_items(&self) -> usize;

    /// Writes the score of each item into `out` (length `num_items`).
    fn score_items(&self, user: usize, interval: usize, out: &mut [f64]);
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn num_items(&self) -> usize {
        (**self).num_items()
    }

    fn score_items(&self, user: usize, interval: usize, out: &mut [f64]) {
        (**self).score_items(user, interval, out)
    }
}

/// Adapts a closure `(p, q, r) -> score` into a [`Scorer`].
pub struct FnScorer<F> {
    pub num_items: usize,
    pub score: F,
}

impl<F: Fn(usize, usize, usize) -> f64> Scorer for FnScorer<F> {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_items(&self, user: usize, interval: usize, out: &mut [f64]) {
        for (q, o) in out.iter_mut().enumerate() {
            *o = (self.score)(user, q, interval);
        }
    }
}

pub struct ModelScorer<'a> {
    model: &'a Model,
    features: Option<&'a FeatureMatrix>,
}

impl Scorer for ModelScorer<'_> {
    fn num_items(&self) -> usize {
        self.model.num_items()
    }

    fn score_items(&self, user: usize, interval: usize, out: &mut [f64]) {
        match self.model {
            Model::Factorized(params) => {
                for (q, o) in out.iter_mut().enumerate() {
                    *o = params.user_score(self.features, user, q)
                        * params.time_score(self.features, interval, q);
                }
            }
            Model::Baseline(b) => {
                for (q, o) in out.iter_mut().enumerate() {
                    *o = b.score(self.features, user, q, interval);
                }
            }
        }
    }
}

/// Orders item indices by descending score, ties by ascending index.
pub(crate) fn rank_by_score(scores: &[f64], candidates: &mut Vec<usize>, n: usize) {
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if n < candidates.len() {
        candidates.select_nth_unstable_by(n, cmp);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(cmp);
}

/// The `n` best items for `(user, interval)`. With `exclude_train`, items the
/// user bought in `train` are skipped. Returns fewer than `n` items only when
/// the catalog is exhausted.
pub fn top_n<S: Scorer + ?Sized>(
    scorer: &S,
    train: &Dataset,
    user: usize,
    interval: usize,
    n: usize,
    exclude_train: bool,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidConfig(alloc::string::String::from("n must be at least 1")));
    }
    check_index("user", user, train.num_users())?;
    check_index("interval", interval, train.num_intervals())?;
    let items = scorer.num_items();
    let mut scores = vec![0.0; items];
    scorer.score_items(user, interval, &mut scores);
    let mut candidates: Vec<usize> = if exclude_train {
        let seen = train.user_items(user);
        (0..items).filter(|q| seen.binary_search(q).is_err()).collect()
    } else {
        (0..items).collect()
    };
    rank_by_score(&scores, &mut candidates, n);
    Ok(candidates)
}
