//! Central finite-difference gradient checking.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bpr::{pairwise_gradient, pairwise_objective, RegScope};
use super::factorization::PairwiseModel;
use super::{mse_gradient, mse_objective, Lambdas, MseEntries, PreferencePair};
use crate::features::FeatureMatrix;
use crate::matrix::Matrix;
use crate::models::{CpFactors, DcfaParams};

/// A named contiguous run of coordinates (one parameter matrix).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub len: usize,
}

impl ParamBlock {
    pub fn new(name: &str, len: usize) -> Self {
        ParamBlock {
            name: String::from(name),
            len,
        }
    }
}

/// A scalar objective over a flat parameter vector.
pub trait Differentiable {
    fn blocks(&self) -> Vec<ParamBlock>;
    fn value(&self, theta: &[f64]) -> f64;
    fn gradient(&self, theta: &[f64]) -> Vec<f64>;
}

/// Closure-backed [`Differentiable`].
pub struct FnObjective<V, G> {
    pub blocks: Vec<ParamBlock>,
    pub value: V,
    pub gradient: G,
}

impl<V, G> Differentiable for FnObjective<V, G>
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn blocks(&self) -> Vec<ParamBlock> {
        self.blocks.clone()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        (self.value)(theta)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (self.gradient)(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tolerance: f64,
    /// Differences at or below this are accepted regardless of relative error.
    pub abs_floor: f64,
    /// Above this many coordinates a random subsample of this size is checked.
    pub max_coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tolerance: 1e-4,
            abs_floor: 1e-8,
            max_coordinates: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Offsets within the block exceeding the tolerance.
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.failures.is_empty())
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

/// Compares the analytic gradient at `theta` with central differences
/// `(f(θ+h) − f(θ−h)) / 2h`. Relative error is `|a − n| / max(|a|, |n|)`,
/// counted only where `|a − n|` exceeds the absolute floor.
pub fn grad_check(objective: &dyn Differentiable, theta: &[f64], config: &GradCheckConfig) -> GradCheckReport {
    let blocks = objective.blocks();
    let total: usize = blocks.iter().map(|b| b.len).sum();
    assert_eq!(total, theta.len(), "blocks do not cover the parameter vector");
    assert!(config.step > 0.0, "finite-difference step must be positive");
    let analytic = objective.gradient(theta);

    let mut coords: Vec<usize> = if total > config.max_coordinates {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        index::sample(&mut rng, total, config.max_coordinates).into_vec()
    } else {
        (0..total).collect()
    };
    coords.sort_unstable();

    let mut reports: Vec<BlockReport> = blocks
        .iter()
        .map(|b| BlockReport {
            name: b.name.clone(),
            checked: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            failures: Vec::new(),
        })
        .collect();
    let starts: Vec<usize> = blocks
        .iter()
        .scan(0, |acc, b| {
            let s = *acc;
            *acc += b.len;
            Some(s)
        })
        .collect();

    let mut probe = theta.to_vec();
    for i in coords {
        let h = config.step;
        probe[i] = theta[i] + h;
        let up = objective.value(&probe);
        probe[i] = theta[i] - h;
        let down = objective.value(&probe);
        probe[i] = theta[i];
        let numeric = (up - down) / (2.0 * h);

        let b = starts.partition_point(|&s| s <= i) - 1;
        let report = &mut reports[b];
        report.checked += 1;
        let abs = (analytic[i] - numeric).abs();
        report.max_abs_error = report.max_abs_error.max(abs);
        if abs > config.abs_floor {
            let rel = abs / analytic[i].abs().max(numeric.abs());
            report.max_rel_error = report.max_rel_error.max(rel);
            if rel > config.rel_tolerance {
                report.failures.push(i - starts[b]);
            }
        }
    }
    GradCheckReport { blocks: reports }
}

fn flatten(factors: &[&Matrix]) -> Vec<f64> {
    factors.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn unflatten<M: PairwiseModel>(template: &M, theta: &[f64]) -> M {
    let mut out = template.clone();
    let mut offset = 0;
    for m in out.factors_mut() {
        let n = m.len();
        m.as_mut_slice().copy_from_slice(&theta[offset..offset + n]);
        offset += n;
    }
    out
}

const FACTOR_NAMES: [&str; 6] = ["U", "V", "T", "W", "M", "N"];

/// The pairwise ranking objective of a factorized model over a fixed pair
/// set, exposed as a [`Differentiable`] over its flattened matrices.
pub struct BprObjective<'a> {
    pub template: &'a DcfaParams,
    pub features: Option<&'a FeatureMatrix>,
    pub pairs: &'a [PreferencePair],
    pub lambdas: Lambdas,
}

impl BprObjective<'_> {
    pub fn flatten(params: &DcfaParams) -> Vec<f64> {
        flatten(&params.matrices())
    }

    pub fn unflatten(&self, theta: &[f64]) -> DcfaParams {
        unflatten(self.template, theta)
    }
}

impl Differentiable for BprObjective<'_> {
    fn blocks(&self) -> Vec<ParamBlock> {
        self.template
            .matrices()
            .iter()
            .zip(FACTOR_NAMES)
            .map(|(m, name)| ParamBlock::new(name, m.len()))
            .collect()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        pairwise_objective(&self.unflatten(theta), self.features, self.pairs, &self.lambdas)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = pairwise_gradient(
            &self.unflatten(theta),
            self.features,
            self.pairs,
            &self.lambdas,
            RegScope::Full,
        );
        flatten(&g.matrices())
    }
}

/// Generic pairwise objective for baseline models (crate tests).
#[cfg(test)]
pub(crate) struct PairwiseObjective<'a, M> {
    pub template: &'a M,
    pub features: Option<&'a FeatureMatrix>,
    pub pairs: &'a [PreferencePair],
    pub lambdas: Lambdas,
}

#[cfg(test)]
impl<M: PairwiseModel> Differentiable for PairwiseObjective<'_, M> {
    fn blocks(&self) -> Vec<ParamBlock> {
        self.template
            .factors()
            .iter()
            .enumerate()
            .map(|(i, m)| ParamBlock::new(FACTOR_NAMES[i.min(5)], m.len()))
            .collect()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        pairwise_objective(&unflatten(self.template, theta), self.features, self.pairs, &self.lambdas)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = pairwise_gradient(
            &unflatten(self.template, theta),
            self.features,
            self.pairs,
            &self.lambdas,
            RegScope::Full,
        );
        flatten(&g.factors())
    }
}

/// The squared-loss CMTF objective as a [`Differentiable`].
pub struct MseObjective<'a> {
    pub template: &'a CpFactors,
    pub entries: &'a MseEntries,
    pub lambdas: Lambdas,
}

impl Differentiable for MseObjective<'_> {
    fn blocks(&self) -> Vec<ParamBlock> {
        let t = self.template;
        alloc::vec![
            ParamBlock::new("U", t.u.len()),
            ParamBlock::new("V", t.v.len()),
            ParamBlock::new("T", t.t.len()),
        ]
    }

    fn value(&self, theta: &[f64]) -> f64 {
        mse_objective(&unflatten(self.template, theta), self.entries, &self.lambdas)
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let g = mse_gradient(&unflatten(self.template, theta), self.entries, &self.lambdas);
        flatten(&[&g.u, &g.v, &g.t])
    }
}

impl MseObjective<'_> {
    pub fn flatten(params: &CpFactors) -> Vec<f64> {
        flatten(&[&params.u, &params.v, &params.t])
    }
}
