//! Row-major dense containers used across the crate.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A `rows × cols` row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                &[rows * cols],
                &[data.len()],
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row-wise concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "Matrix::hcat rows",
                &[self.rows],
                &[other.rows],
            ));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Gathers the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// A `batch × n × dim` row-major tensor: `n` points of dimension `dim` per batch item.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    batch: usize,
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(batch: usize, n: usize, dim: usize) -> Self {
        Self {
            batch,
            n,
            dim,
            data: vec![0.0; batch * n * dim],
        }
    }

    pub fn from_vec(batch: usize, n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * n * dim {
            return Err(Error::shape(
                "Tensor3::from_vec",
                &[batch * n * dim],
                &[data.len()],
            ));
        }
        Ok(Self {
            batch,
            n,
            dim,
            data,
        })
    }

    /// Views a `(batch·n) × dim` matrix as `batch × n × dim`.
    pub fn from_matrix(m: Matrix, n: usize) -> Result<Self> {
        if n == 0 || m.rows() % n != 0 {
            return Err(Error::shape("Tensor3::from_matrix rows", &[n], &[m.rows()]));
        }
        let batch = m.rows() / n;
        let dim = m.cols();
        Ok(Self {
            batch,
            n,
            dim,
            data: m.into_vec(),
        })
    }

    pub fn into_matrix(self) -> Matrix {
        Matrix {
            rows: self.batch * self.n,
            cols: self.dim,
            data: self.data,
        }
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        [self.batch, self.n, self.dim]
    }

    #[inline]
    pub fn point(&self, b: usize, i: usize) -> &[f64] {
        let o = (b * self.n + i) * self.dim;
        &self.data[o..o + self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, b: usize, i: usize) -> &mut [f64] {
        let o = (b * self.n + i) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    /// All `n × dim` values of batch item `b`.
    #[inline]
    pub fn item(&self, b: usize) -> &[f64] {
        let len = self.n * self.dim;
        &self.data[b * len..(b + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
