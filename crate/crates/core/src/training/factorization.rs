//! Per-model pair terms and their analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::{Lambdas, PreferencePair};
use crate::features::FeatureMatrix;
use crate::math::{dot, ln_sigmoid, sigmoid};
use crate::matrix::{axpy, Matrix};
use crate::models::{CpFactors, DcfaParams, PitfFactors};

/// Which entity a factor matrix's columns belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    User,
    Item,
    Interval,
}

impl Axis {
    /// Columns of this axis touched by `pair`.
    pub(crate) fn columns(self, pair: &PreferencePair) -> ([usize; 2], usize) {
        match self {
            Axis::User => ([pair.user, 0], 1),
            Axis::Item => ([pair.pos, pair.neg], 2),
            Axis::Interval => ([pair.interval, 0], 1),
        }
    }
}

/// A model trainable with the pairwise ranking machinery.
pub(crate) trait PairwiseModel: Clone {
    fn factors(&self) -> Vec<&Matrix>;
    fn factors_mut(&mut self) -> Vec<&mut Matrix>;
    /// Axis of each factor, in `factors()` order.
    fn axes(&self) -> Vec<Axis>;
    /// L2 coefficient of each factor, in `factors()` order.
    fn reg_coefficients(&self, lambdas: &Lambdas) -> Vec<f64>;
    /// True for models over the user × item slice only.
    fn user_item_slice(&self) -> bool {
        false
    }
    fn score(&self, features: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> f64;
    /// Log-likelihood terms contributed by one pair.
    fn pair_value(&self, features: Option<&FeatureMatrix>, pair: &PreferencePair, lambdas: &Lambdas) -> f64;
    /// Adds `scale ×` the gradient of [`pair_value`](Self::pair_value) to `grad`.
    fn add_pair_gradient(
        &self,
        features: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        lambdas: &Lambdas,
        scale: f64,
        grad: &mut Self,
    );

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.factors_mut().into_iter().for_each(|m| m.fill(0.0));
        z
    }
}

impl PairwiseModel for DcfaParams {
    fn factors(&self) -> Vec<&Matrix> {
        self.matrices()
    }

    fn factors_mut(&mut self) -> Vec<&mut Matrix> {
        self.matrices_mut()
    }

    fn axes(&self) -> Vec<Axis> {
        let mut axes = vec![Axis::User, Axis::Item, Axis::Interval, Axis::Item];
        if self.has_features() {
            axes.extend([Axis::User, Axis::Interval]);
        }
        axes
    }

    fn reg_coefficients(&self, l: &Lambdas) -> Vec<f64> {
        let mut c = l.regularization().to_vec();
        c.truncate(self.axes().len());
        c
    }

    fn score(&self, f: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> f64 {
        self.user_score(f, p, q) * self.time_score(f, r, q)
    }

    fn pair_value(&self, f: Option<&FeatureMatrix>, pair: &PreferencePair, l: &Lambdas) -> f64 {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        let (s1q, s1n) = (self.user_score(f, p, q), self.user_score(f, p, qn));
        let (s2q, s2n) = (self.time_score(f, r, q), self.time_score(f, r, qn));
        ln_sigmoid(s1q * s2q - s1n * s2n)
            + l.user_item * ln_sigmoid(s1q - s1n)
            + l.time_item * ln_sigmoid(s2q - s2n)
    }

    fn add_pair_gradient(
        &self,
        f: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        l: &Lambdas,
        scale: f64,
        g: &mut Self,
    ) {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        let (s1q, s1n) = (self.user_score(f, p, q), self.user_score(f, p, qn));
        let (s2q, s2n) = (self.time_score(f, r, q), self.time_score(f, r, qn));
        // weights of the tensor, user-item and time-item terms
        let wa = scale * sigmoid(-(s1q * s2q - s1n * s2n));
        let wb = scale * l.user_item * sigmoid(-(s1q - s1n));
        let wc = scale * l.time_item * sigmoid(-(s2q - s2n));

        // d/dS1(q) = wa·S2(q) + wb,  d/dS1(q') = -(wa·S2(q') + wb)
        let d1q = wa * s2q + wb;
        let d1n = -(wa * s2n + wb);
        // d/dS2(q) = wa·S1(q) + wc,  d/dS2(q') = -(wa·S1(q') + wc)
        let d2q = wa * s1q + wc;
        let d2n = -(wa * s1n + wc);

        axpy(g.u.col_mut(p), d1q, self.v.col(q));
        axpy(g.u.col_mut(p), d1n, self.v.col(qn));
        axpy(g.v.col_mut(q), d1q, self.u.col(p));
        axpy(g.v.col_mut(qn), d1n, self.u.col(p));

        axpy(g.t.col_mut(r), d2q, self.w.col(q));
        axpy(g.t.col_mut(r), d2n, self.w.col(qn));
        axpy(g.w.col_mut(q), d2q, self.t.col(r));
        axpy(g.w.col_mut(qn), d2n, self.t.col(r));

        if let (Some(gm), Some(gn), Some(f)) = (g.m.as_mut(), g.n.as_mut(), f) {
            axpy(gm.col_mut(p), d1q, f.item(q));
            axpy(gm.col_mut(p), d1n, f.item(qn));
            axpy(gn.col_mut(r), d2q, f.item(q));
            axpy(gn.col_mut(r), d2n, f.item(qn));
        }
    }
}

/// Plain matrix factorization over the user × item slice.
#[derive(Debug, Clone, PartialEq)]
pub struct MfFactors {
    pub u: Matrix,
    pub v: Matrix,
}

impl PairwiseModel for MfFactors {
    fn factors(&self) -> Vec<&Matrix> {
        vec![&self.u, &self.v]
    }

    fn factors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.u, &mut self.v]
    }

    fn axes(&self) -> Vec<Axis> {
        vec![Axis::User, Axis::Item]
    }

    fn reg_coefficients(&self, l: &Lambdas) -> Vec<f64> {
        vec![l.user, l.item_user]
    }

    fn user_item_slice(&self) -> bool {
        true
    }

    fn score(&self, _: Option<&FeatureMatrix>, p: usize, q: usize, _: usize) -> f64 {
        dot(self.u.col(p), self.v.col(q))
    }

    fn pair_value(&self, f: Option<&FeatureMatrix>, pair: &PreferencePair, _: &Lambdas) -> f64 {
        ln_sigmoid(self.score(f, pair.user, pair.pos, 0) - self.score(f, pair.user, pair.neg, 0))
    }

    fn add_pair_gradient(
        &self,
        f: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        _: &Lambdas,
        scale: f64,
        g: &mut Self,
    ) {
        let PreferencePair { user: p, pos: q, neg: qn, .. } = *pair;
        let w = scale * sigmoid(-(self.score(f, p, q, 0) - self.score(f, p, qn, 0)));
        axpy(g.u.col_mut(p), w, self.v.col(q));
        axpy(g.u.col_mut(p), -w, self.v.col(qn));
        axpy(g.v.col_mut(q), w, self.u.col(p));
        axpy(g.v.col_mut(qn), -w, self.u.col(p));
    }
}

/// `U_p·V_q + M_p·F_q` over the user × item slice.
#[derive(Debug, Clone, PartialEq)]
pub struct VbprFactors {
    pub u: Matrix,
    pub v: Matrix,
    pub m: Matrix,
}

impl PairwiseModel for VbprFactors {
    fn factors(&self) -> Vec<&Matrix> {
        vec![&self.u, &self.v, &self.m]
    }

    fn factors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.u, &mut self.v, &mut self.m]
    }

    fn axes(&self) -> Vec<Axis> {
        vec![Axis::User, Axis::Item, Axis::User]
    }

    fn reg_coefficients(&self, l: &Lambdas) -> Vec<f64> {
        vec![l.user, l.item_user, l.user_feature]
    }

    fn user_item_slice(&self) -> bool {
        true
    }

    fn score(&self, f: Option<&FeatureMatrix>, p: usize, q: usize, _: usize) -> f64 {
        let f = f.expect("vbpr needs features");
        dot(self.u.col(p), self.v.col(q)) + dot(self.m.col(p), f.item(q))
    }

    fn pair_value(&self, f: Option<&FeatureMatrix>, pair: &PreferencePair, _: &Lambdas) -> f64 {
        ln_sigmoid(self.score(f, pair.user, pair.pos, 0) - self.score(f, pair.user, pair.neg, 0))
    }

    fn add_pair_gradient(
        &self,
        f: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        _: &Lambdas,
        scale: f64,
        g: &mut Self,
    ) {
        let PreferencePair { user: p, pos: q, neg: qn, .. } = *pair;
        let w = scale * sigmoid(-(self.score(f, p, q, 0) - self.score(f, p, qn, 0)));
        let f = f.expect("vbpr needs features");
        axpy(g.u.col_mut(p), w, self.v.col(q));
        axpy(g.u.col_mut(p), -w, self.v.col(qn));
        axpy(g.v.col_mut(q), w, self.u.col(p));
        axpy(g.v.col_mut(qn), -w, self.u.col(p));
        axpy(g.m.col_mut(p), w, f.item(q));
        axpy(g.m.col_mut(p), -w, f.item(qn));
    }
}

impl PairwiseModel for CpFactors {
    fn factors(&self) -> Vec<&Matrix> {
        vec![&self.u, &self.v, &self.t]
    }

    fn factors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.u, &mut self.v, &mut self.t]
    }

    fn axes(&self) -> Vec<Axis> {
        vec![Axis::User, Axis::Item, Axis::Interval]
    }

    fn reg_coefficients(&self, l: &Lambdas) -> Vec<f64> {
        vec![l.user, l.item_user, l.time]
    }

    fn score(&self, _: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> f64 {
        CpFactors::score(self, p, q, r)
    }

    fn pair_value(&self, _: Option<&FeatureMatrix>, pair: &PreferencePair, _: &Lambdas) -> f64 {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        ln_sigmoid(CpFactors::score(self, p, q, r) - CpFactors::score(self, p, qn, r))
    }

    fn add_pair_gradient(
        &self,
        _: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        _: &Lambdas,
        scale: f64,
        g: &mut Self,
    ) {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        let w = scale * sigmoid(-(CpFactors::score(self, p, q, r) - CpFactors::score(self, p, qn, r)));
        let (up, vq, vn, tr) = (self.u.col(p), self.v.col(q), self.v.col(qn), self.t.col(r));
        for k in 0..up.len() {
            g.u.col_mut(p)[k] += w * (vq[k] - vn[k]) * tr[k];
            g.v.col_mut(q)[k] += w * up[k] * tr[k];
            g.v.col_mut(qn)[k] -= w * up[k] * tr[k];
            g.t.col_mut(r)[k] += w * up[k] * (vq[k] - vn[k]);
        }
    }
}

impl PairwiseModel for PitfFactors {
    fn factors(&self) -> Vec<&Matrix> {
        self.matrices().to_vec()
    }

    fn factors_mut(&mut self) -> Vec<&mut Matrix> {
        Vec::from(self.matrices_mut())
    }

    fn axes(&self) -> Vec<Axis> {
        vec![
            Axis::User,
            Axis::Item,
            Axis::User,
            Axis::Interval,
            Axis::Item,
            Axis::Interval,
        ]
    }

    fn reg_coefficients(&self, l: &Lambdas) -> Vec<f64> {
        vec![l.user, l.item_user, l.user, l.time, l.item_user, l.time]
    }

    fn score(&self, _: Option<&FeatureMatrix>, p: usize, q: usize, r: usize) -> f64 {
        dot(self.user_item.col(p), self.item_user.col(q))
            + dot(self.user_time.col(p), self.time_user.col(r))
            + dot(self.item_time.col(q), self.time_item.col(r))
    }

    fn pair_value(&self, f: Option<&FeatureMatrix>, pair: &PreferencePair, _: &Lambdas) -> f64 {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        ln_sigmoid(self.score(f, p, q, r) - self.score(f, p, qn, r))
    }

    fn add_pair_gradient(
        &self,
        f: Option<&FeatureMatrix>,
        pair: &PreferencePair,
        _: &Lambdas,
        scale: f64,
        g: &mut Self,
    ) {
        let PreferencePair { user: p, pos: q, neg: qn, interval: r } = *pair;
        let w = scale * sigmoid(-(self.score(f, p, q, r) - self.score(f, p, qn, r)));
        // the user-interval term cancels in the difference
        axpy(g.user_item.col_mut(p), w, self.item_user.col(q));
        axpy(g.user_item.col_mut(p), -w, self.item_user.col(qn));
        axpy(g.item_user.col_mut(q), w, self.user_item.col(p));
        axpy(g.item_user.col_mut(qn), -w, self.user_item.col(p));
        axpy(g.time_item.col_mut(r), w, self.item_time.col(q));
        axpy(g.time_item.col_mut(r), -w, self.item_time.col(qn));
        axpy(g.item_time.col_mut(q), w, self.time_item.col(r));
        axpy(g.item_time.col_mut(qn), -w, self.time_item.col(r));
    }
}
