//! Symmetric tensors in dimension 1, 2 or 3.
//!
//! Only the upper triangle is stored. The Frobenius pairing counts every
//! off-diagonal entry twice, so callers never see the storage layout.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_DIM: usize = 3;
const MAX_ENTRIES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor<T> {
    dim: usize,
    entries: [T; MAX_ENTRIES],
}

#[inline]
fn slot(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

impl<T: Real> SymTensor<T> {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { dim, entries: [T::zero(); MAX_ENTRIES] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, T::one())
    }

    /// `s * I`.
    pub fn scalar(dim: usize, s: T) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.set(i, i, s);
        }
        t
    }

    pub fn diag(values: &[T]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            t.set(i, i, v);
        }
        t
    }

    /// Builds from a full matrix, reading the upper triangle only.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let dim = rows.len();
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, rows[i][j]);
            }
        }
        t
    }

    /// Symmetric part `(G + G^t)/2` of a row-major `dim x dim` matrix.
    pub fn sym_part(dim: usize, grad: &[T]) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, T::half() * (grad[i * dim + j] + grad[j * dim + i]));
            }
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[slot(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.entries[slot(self.dim, i, j)] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    pub fn deviatoric(&self) -> Self {
        self.deviatoric_split().0
    }

    /// Returns `(T0, tr T)` with `T = T0 + (tr T / d) I` and `tr T0 = 0`.
    pub fn deviatoric_split(&self) -> (Self, T) {
        let tr = self.trace();
        let mean = tr / T::from_usize_lossy(self.dim);
        let mut dev = *self;
        for i in 0..self.dim {
            dev.set(i, i, self.get(i, i) - mean);
        }
        (dev, tr)
    }

    /// Frobenius pairing `sum_ij A_ij B_ij`.
    pub fn contract(&self, other: &Self) -> Result<T> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self.dot(other))
    }

    /// Pairing without the dimension check, for hot loops where the
    /// dimension is fixed by construction.
    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            acc += self.get(i, i) * other.get(i, i);
            for j in i + 1..self.dim {
                acc += T::two() * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    /// Pairing with a full row-major matrix, `S : G`.
    pub fn dot_full(&self, grad: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.get(i, j) * grad[i * self.dim + j];
            }
        }
        acc
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = *self;
        out.entries.iter_mut().for_each(|e| *e = *e * s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for (a, b) in out.entries.iter_mut().zip(other.entries.iter()) {
            *a += *b;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    /// Dense row-major copy.
    pub fn to_full(&self) -> Vec<T> {
        let d = self.dim;
        let mut m = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.get(i, j);
            }
        }
        m
    }

    /// Number of independent components, `d(d+1)/2`.
    pub fn components(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Independent components in `(0,0), (0,1), .., (1,1), ..` order.
    pub fn upper(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(Self::components(self.dim));
        for i in 0..self.dim {
            for j in i..self.dim {
                v.push(self.get(i, j));
            }
        }
        v
    }

    pub fn from_upper(dim: usize, values: &[T]) -> Self {
        let mut t = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                t.set(i, j, values[k]);
                k += 1;
            }
        }
        t
    }
}
