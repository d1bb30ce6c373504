//! Dense and banded direct solvers used by the steppers.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves `A x = b` for a dense row-major `n x n` matrix with partial pivoting.
pub fn solve_dense<T: Real>(mut a: Vec<T>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == T::zero() || !pmax.is_finite() {
            return Err(Error::LinearSolveFailure(format!("singular pivot at column {k}")));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let akk = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / akk;
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let v = a[k * n + j];
                a[i * n + j] -= f * v;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(b)
}

/// Square matrix stored by diagonals within a fixed half bandwidth.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    bw: usize,
    // row i, column j stored at i * (2 bw + 1) + (j + bw - i)
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn new(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![T::zero(); n * (2 * bw + 1)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if i.abs_diff(j) > self.bw {
            T::zero()
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Off-diagonal entries of row `i` with their columns.
    pub fn row_offdiag(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        (lo..=hi).filter(move |&j| j != i).map(move |j| (j, self.get(i, j)))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
            })
            .collect()
    }

    /// Gaussian elimination without pivoting. Intended for M-matrices,
    /// for which no pivoting is needed and fill stays inside the band.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let (n, bw) = (self.n, self.bw);
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let w = 2 * bw + 1;
        let at = |i: usize, j: usize| i * w + (j + bw - i);
        for k in 0..n {
            let akk = a[at(k, k)];
            if akk == T::zero() || !akk.is_finite() {
                return Err(Error::LinearSolveFailure(format!("zero pivot at row {k}")));
            }
            let hi = (k + bw).min(n - 1);
            for i in k + 1..=hi {
                let f = a[at(i, k)] / akk;
                if f == T::zero() {
                    continue;
                }
                for j in k..=hi {
                    let v = a[at(k, j)];
                    a[at(i, j)] -= f * v;
                }
                let xk = x[k];
                x[i] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let hi = (k + bw).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=hi {
                s -= a[at(k, j)] * x[j];
            }
            x[k] = s / a[at(k, k)];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolveFailure("non-finite solution".into()));
        }
        Ok(x)
    }
}
