//! Linear operators used by the least-squares solver: an explicit
//! compressed-row matrix and the dense matrices used in tests.

use std::iter::Sum;

use nalgebra::{DMatrix, Scalar as NaScalar};
use num_traits::Float;
use rayon::prelude::*;

/// Rows per block of the transposed product. Partial column sums are formed
/// per block and added in block order, so results do not depend on the number
/// of threads.
pub const ROW_BLOCK: usize = 2048;

pub trait LinearOperator<T>: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[T], y: &mut [T]);
    /// `x = Aᵀ y`.
    fn apply_transpose(&self, y: &[T], x: &mut [T]);
}

/// Compressed-row sparse matrix with `u32` column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDesignMatrix<T> {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Float + Send + Sync + Sum> SparseDesignMatrix<T> {
    /// Builds from per-row `(column, value)` lists; zero values are dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, T)>>) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                debug_assert!((c as usize) < ncols);
                if v != T::zero() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (c, v) = self.row(i);
        c.iter()
            .position(|&cc| cc as usize == j)
            .map_or(T::zero(), |p| v[p])
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<T>
    where
        T: NaScalar,
    {
        let mut d = DMatrix::from_element(self.nrows(), self.ncols, T::zero());
        for i in 0..self.nrows() {
            let (c, v) = self.row(i);
            for (&cc, &vv) in c.iter().zip(v) {
                d[(i, cc as usize)] = vv;
            }
        }
        d
    }

    /// Converts the stored values, e.g. to single precision.
    pub fn cast<U: Float + Send + Sync + Sum>(&self) -> SparseDesignMatrix<U> {
        SparseDesignMatrix {
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|v| U::from(*v).expect("representable value")).collect(),
        }
    }
}

impl<T: Float + Send + Sync + Sum> LinearOperator<T> for SparseDesignMatrix<T> {
    fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&cc, &vv)| vv * x[cc as usize]).sum();
        });
    }

    fn apply_transpose(&self, y: &[T], x: &mut [T]) {
        let m = self.nrows();
        let n = self.ncols;
        let blocks: Vec<usize> = (0..m.div_ceil(ROW_BLOCK)).collect();
        let partials: Vec<Vec<T>> = blocks
            .par_iter()
            .map(|&b| {
                let mut acc = vec![T::zero(); n];
                for i in (b * ROW_BLOCK)..((b + 1) * ROW_BLOCK).min(m) {
                    let yi = y[i];
                    if yi == T::zero() {
                        continue;
                    }
                    let (c, v) = self.row(i);
                    for (&cc, &vv) in c.iter().zip(v) {
                        acc[cc as usize] = acc[cc as usize] + vv * yi;
                    }
                }
                acc
            })
            .collect();
        x.iter_mut().for_each(|v| *v = T::zero());
        for p in partials {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi = *xi + pi;
            }
        }
    }
}

impl<T: Float + NaScalar + Send + Sync> LinearOperator<T> for DMatrix<T> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..self.ncols()).fold(T::zero(), |acc, j| acc + self[(i, j)] * x[j]);
        }
    }

    fn apply_transpose(&self, y: &[T], x: &mut [T]) {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (0..self.nrows()).fold(T::zero(), |acc, i| acc + self[(i, j)] * y[i]);
        }
    }
}
