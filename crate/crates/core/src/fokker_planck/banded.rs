//! LU factorization of banded matrices without pivoting.
//!
//! Meant for diagonally dominant M-matrices, where elimination without
//! pivoting is stable and the factors stay within the band.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    /// Zero `n x n` matrix with half-bandwidth `bw`.
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// In-place Doolittle factorization.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.slot(k, k)];
            if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
                return Err(Error::LinearSolveFailure(format!("zero pivot in row {k}")));
            }
            let hi = (k + bw + 1).min(n);
            for i in k + 1..hi {
                let sik = self.slot(i, k);
                if self.data[sik] == 0.0 {
                    continue;
                }
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                for j in k + 1..hi {
                    let (sij, skj) = (self.slot(i, j), self.slot(k, j));
                    self.data[sij] -= l * self.data[skj];
                }
            }
        }
        Ok(BandedLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let (n, bw) = (m.n, m.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for j in lo..i {
                s -= m.data[m.slot(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw + 1).min(n);
            let mut s = x[i];
            for j in i + 1..hi {
                s -= m.data[m.slot(i, j)] * x[j];
            }
            x[i] = s / m.data[m.slot(i, i)];
        }
        x
    }
}
