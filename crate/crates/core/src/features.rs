//! Per-item dense side features (`F`, feature dimension × items).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Vocab;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Named contiguous block of feature rows, e.g. a CNN block followed by an
/// aesthetic block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureBlock {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Matrix,
    blocks: Vec<FeatureBlock>,
}

impl FeatureMatrix {
    /// Wraps a `K × Q` matrix, checking that every entry is finite and the
    /// block lengths add up to `K`.
    pub fn new(data: Matrix, blocks: Vec<FeatureBlock>) -> Result<Self> {
        let k = data.dim();
        let total: usize = blocks.iter().map(|b| b.len).sum();
        if total != k {
            return Err(Error::FeatureDimMismatch {
                expected: k,
                found: total,
            });
        }
        check_finite(&data)?;
        Ok(FeatureMatrix { data, blocks })
    }

    /// Single-block matrix.
    pub fn from_matrix(data: Matrix) -> Result<Self> {
        let blocks = vec![FeatureBlock {
            name: String::from("features"),
            len: data.dim(),
        }];
        Self::new(data, blocks)
    }

    /// Assembles a matrix from `(raw item id, vector)` records, placing each
    /// vector at the item's dense index. Records for ids outside the
    /// vocabulary are ignored; every vocabulary item must be covered.
    pub fn from_records<'a, I>(dim: usize, records: I, items: &Vocab) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a [f64])>,
    {
        let mut data = Matrix::zeros(dim, items.len());
        let mut seen = vec![false; items.len()];
        for (raw, values) in records {
            if values.len() != dim {
                return Err(Error::FeatureDimMismatch {
                    expected: dim,
                    found: values.len(),
                });
            }
            if let Some(q) = items.get(raw) {
                data.col_mut(q).copy_from_slice(values);
                seen[q] = true;
            }
        }
        if let Some(q) = seen.iter().position(|s| !s) {
            return Err(Error::MissingItem(String::from(items.raw(q).unwrap_or_default())));
        }
        Self::from_matrix(data)
    }

    /// Feature dimension `K`.
    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn num_items(&self) -> usize {
        self.data.count()
    }

    /// `F_*q`
    #[inline]
    pub fn item(&self, q: usize) -> &[f64] {
        self.data.col(q)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }
}

fn check_finite(m: &Matrix) -> Result<()> {
    for j in 0..m.count() {
        if let Some(i) = m.col(j).iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEntry { row: i, item: j });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    /// Each feature row gets mean 0 and population variance 1; constant rows become 0.
    #[default]
    PerDimStandardize,
    /// Each nonzero item column is scaled to unit Euclidean norm.
    UnitL2Column,
}

pub fn normalize_features(features: &FeatureMatrix, mode: Normalization) -> FeatureMatrix {
    let mut out = features.clone();
    let m = &mut out.data;
    match mode {
        Normalization::None => {}
        Normalization::PerDimStandardize => {
            let n = m.count() as f64;
            for i in 0..m.dim() {
                let mean = (0..m.count()).map(|j| m.get(i, j)).sum::<f64>() / n;
                let var = (0..m.count())
                    .map(|j| {
                        let d = m.get(i, j) - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / n;
                let scale = mean.abs().max(1.0);
                let constant = var <= 1e-24 * scale * scale;
                let sd = math::sqrt(var);
                for j in 0..m.count() {
                    let v = if constant { 0.0 } else { (m.get(i, j) - mean) / sd };
                    m.set(i, j, v);
                }
            }
        }
        Normalization::UnitL2Column => {
            for j in 0..m.count() {
                let col = m.col_mut(j);
                let norm = math::sqrt(col.iter().map(|x| x * x).sum());
                if norm > 0.0 {
                    col.iter_mut().for_each(|x| *x /= norm);
                }
            }
        }
    }
    out
}

/// Planted style structure for synthetic features: each item belongs to one
/// of `groups` groups and its vector is the group centroid plus `noise`
/// times standard normal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedStyle {
    pub groups: usize,
    pub noise: f64,
    /// Fixed group labels (one per item); drawn uniformly when absent.
    pub assignment: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFeatures {
    pub features: FeatureMatrix,
    /// Group label per item when a planted structure was requested.
    pub labels: Option<Vec<usize>>,
}

/// Seeded synthetic features. Entries are rounded to `f32` precision so the
/// binary feature file stores them exactly.
pub fn synth_features(
    num_items: usize,
    dim: usize,
    planted: Option<&PlantedStyle>,
    seed: u64,
) -> Result<SyntheticFeatures> {
    if num_items == 0 || dim == 0 {
        return Err(Error::InvalidConfig(String::from(
            "synthetic features need at least one item and one dimension",
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let round = |x: f64| x as f32 as f64;

    let Some(style) = planted else {
        let data = Matrix::from_fn(dim, num_items, |_, _| round(normal()));
        return Ok(SyntheticFeatures {
            features: FeatureMatrix::from_matrix(data)?,
            labels: None,
        });
    };
    if style.groups == 0 {
        return Err(Error::InvalidConfig(String::from("planted style needs at least one group")));
    }
    let centroids = Matrix::from_fn(dim, style.groups, |_, _| normal());
    let labels = match &style.assignment {
        Some(a) => {
            if a.len() != num_items || a.iter().any(|&g| g >= style.groups) {
                return Err(Error::InvalidConfig(String::from(
                    "planted assignment must label every item with a valid group",
                )));
            }
            a.clone()
        }
        None => {
            let mut label_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            (0..num_items).map(|_| label_rng.random_range(0..style.groups)).collect()
        }
    };
    let data = Matrix::from_fn(dim, num_items, |i, j| {
        round(centroids.get(i, labels[j]) + style.noise * normal())
    });
    Ok(SyntheticFeatures {
        features: FeatureMatrix::from_matrix(data)?,
        labels: Some(labels),
    })
}
