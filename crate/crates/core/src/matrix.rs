use alloc::vec;
use alloc::vec::Vec;

/// Dense `dim × count` factor matrix whose columns are the per-entity vectors.
///
/// Storage is column-contiguous, so `col(j)` is a plain slice. The on-disk
/// checkpoint layout is row-major; see [`Matrix::to_row_major`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    count: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize, count: usize) -> Self {
        Matrix {
            dim,
            count,
            data: vec![0.0; dim * count],
        }
    }

    /// Builds a matrix from column-contiguous storage.
    pub fn from_columns(dim: usize, count: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * count, "column data has the wrong length");
        Matrix { dim, count, data }
    }

    pub fn from_fn(dim: usize, count: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * count);
        for j in 0..count {
            for i in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, count, data }
    }

    /// Builds a matrix from row-major storage (`rows = dim`, `cols = count`).
    pub fn from_row_major(dim: usize, count: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), dim * count, "row-major data has the wrong length");
        Self::from_fn(dim, count, |i, j| values[i * count + j])
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.dim {
            for j in 0..self.count {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Number of rows, i.e. the latent (or feature) dimension.
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns, i.e. entities.
    #[inline]
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.dim + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.dim + i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    /// `self += alpha * other`, column by column.
    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.dim, self.count), (other.dim, other.count));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

/// `column += alpha * v`
#[inline]
pub(crate) fn axpy(column: &mut [f64], alpha: f64, v: &[f64]) {
    debug_assert_eq!(column.len(), v.len());
    for (c, x) in column.iter_mut().zip(v) {
        *c += alpha * x;
    }
}
