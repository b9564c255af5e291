//! Banded LU without pivoting for the implicit finite-volume solves.
//!
//! The systems assembled by the Fokker-Planck module are M-matrices
//! (nonpositive off-diagonals, strictly positive column-dominant diagonal),
//! for which elimination without pivoting is stable and every Schur
//! complement keeps the sign pattern. That sign pattern is what guarantees
//! nonnegative solutions for nonnegative right-hand sides, including in
//! floating point: forward and backward substitution only add nonnegative
//! products, so no cancellation can produce a negative entry. A generic
//! pivoting solver would forfeit that guarantee.

use crate::{Error, Result};

/// Square banded matrix with half-bandwidth `kb` stored row-major,
/// entry (i, j) at `data[i * (2 kb + 1) + (j - i + kb)]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kb: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kb: usize) -> Self {
        assert!(n > 0 && kb < n);
        BandedMatrix {
            n,
            kb,
            data: vec![0.0; n * (2 * kb + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kb >= i && j <= i + self.kb, "({i},{j}) outside band");
        i * (2 * self.kb + 1) + (j + self.kb - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kb < i || j > i + self.kb {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// In-place LU factorization without pivoting.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kb) = (self.n, self.kb);
        let w = 2 * kb + 1;
        for k in 0..n {
            let pivot = self.data[k * w + kb];
            if !(pivot > 0.0) {
                return Err(Error::Shape(format!(
                    "non-positive pivot {pivot} at row {k}; matrix is not an M-matrix"
                )));
            }
            let imax = (k + kb).min(n - 1);
            for i in (k + 1)..=imax {
                let s_ik = i * w + (k + kb - i);
                let l = self.data[s_ik] / pivot;
                self.data[s_ik] = l;
                if l != 0.0 {
                    let jmax = (k + kb).min(n - 1);
                    for j in (k + 1)..=jmax {
                        let s_ij = i * w + (j + kb - i);
                        let s_kj = k * w + (j + kb - k);
                        self.data[s_ij] -= l * self.data[s_kj];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kb,
            data: self.data,
        })
    }
}

/// Factorized banded system ready for repeated solves.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kb: usize,
    data: Vec<f64>,
}

impl BandedLu {
    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kb) = (self.n, self.kb);
        let w = 2 * kb + 1;
        // Forward: L y = b with unit diagonal.
        for i in 1..n {
            let jmin = i.saturating_sub(kb);
            let mut acc = b[i];
            for j in jmin..i {
                acc -= self.data[i * w + (j + kb - i)] * b[j];
            }
            b[i] = acc;
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            let jmax = (i + kb).min(n - 1);
            let mut acc = b[i];
            for j in (i + 1)..=jmax {
                acc -= self.data[i * w + (j + kb - i)] * b[j];
            }
            b[i] = acc / self.data[i * w + kb];
        }
    }
}
