//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: row `kl + ku + i - j` of column
//! `j` holds `A[i][j]`, and `kl` extra rows above hold the fill-in produced by
//! row interchanges.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandedError {
    #[error("matrix is singular at pivot {0}")]
    Singular(usize),
    #[error("entry ({row}, {col}) lies outside the band")]
    OutsideBand { row: usize, col: usize },
}

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Column-major band storage, `ldab = 2 kl + ku + 1` rows per column.
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        col * self.ldab() + self.kl + self.ku + row - col
    }

    #[inline]
    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && row + self.ku >= col && col + self.kl >= row
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.ab[self.offset(row, col)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) -> Result<(), BandedError> {
        if !self.in_band(row, col) {
            return Err(BandedError::OutsideBand { row, col });
        }
        let k = self.offset(row, col);
        self.ab[k] += value;
        Ok(())
    }

    pub fn set_zero(&mut self) {
        self.ab.iter_mut().for_each(|v| *v = 0.0);
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (col, &xc) in x.iter().enumerate() {
            let lo = col.saturating_sub(self.ku);
            let hi = (col + self.kl).min(self.n - 1);
            for (row, yr) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yr += self.ab[self.offset(row, col)] * xc;
            }
        }
        y
    }

    /// Factorizes in place.
    pub fn factorize(mut self) -> Result<BandedLu, BandedError> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let ldab = self.ldab();
        let kv = ku + kl;
        let mut pivots = vec![0usize; n];
        // Upper bound on the column reached by the factor's upper triangle.
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j, rows j..=j+km.
            let col = j * ldab;
            let mut p = 0usize;
            let mut best = self.ab[col + kv].abs();
            for r in 1..=km {
                let v = self.ab[col + kv + r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(BandedError::Singular(j));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                // Swap rows j and j+p across columns j..=ju.
                for c in j..=ju {
                    let a = c * ldab + kv + j - c;
                    let b = c * ldab + kv + j + p - c;
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[col + kv];
            for r in 1..=km {
                self.ab[col + kv + r] /= pivot;
            }
            for c in (j + 1)..=ju {
                let top = self.ab[c * ldab + kv + j - c];
                if top == 0.0 {
                    continue;
                }
                for r in 1..=km {
                    let l = self.ab[col + kv + r];
                    self.ab[c * ldab + kv + j + r - c] -= l * top;
                }
            }
        }
        Ok(BandedLu { m: self, pivots })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    m: BandedMatrix,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        let ldab = self.m.ldab();
        let kv = ku + kl;
        let ab = &self.m.ab;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=km {
                    b[j + r] -= ab[j * ldab + kv + r] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = j * ldab;
            b[j] /= ab[col + kv];
            let bj = b[j];
            if bj != 0.0 {
                let reach = kv.min(j);
                for r in 1..=reach {
                    b[j - r] -= ab[col + kv - r] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
