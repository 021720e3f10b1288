//! Banded LU without pivoting. Only used on nonsingular M-matrices, where
//! every pivot is positive and elimination is stable.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub(crate) struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub(crate) fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.at(k, k)];
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::SingularSystem { row: k, pivot });
            }
            let end = (k + bw + 1).min(n);
            for i in k + 1..end {
                let ik = self.at(i, k);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..end {
                    let kj = self.data[self.at(k, j)];
                    let ij = self.at(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[self.at(i, k)] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + bw + 1).min(n) {
                s -= self.data[self.at(i, j)] * b[j];
            }
            b[i] = s / self.data[self.at(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_m_matrix() {
        let n = 6;
        let mut m = Banded::zeros(n, 1);
        let mut dense = [[0.0f64; 6]; 6];
        for i in 0..n {
            m.add(i, i, 3.0 + i as f64);
            dense[i][i] = 3.0 + i as f64;
            if i > 0 {
                m.add(i, i - 1, -1.0);
                dense[i][i - 1] = -1.0;
            }
            if i + 1 < n {
                m.add(i, i + 1, -1.5);
                dense[i][i + 1] = -1.5;
            }
        }
        let x: [f64; 6] = [1.0, -2.0, 0.5, 3.0, 0.0, 1.25];
        let mut b: Vec<f64> = (0..n).map(|i| (0..n).map(|j| dense[i][j] * x[j]).sum()).collect();
        m.factor().unwrap();
        m.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_positive_pivot() {
        let mut m = Banded::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(0, 1, -1.0);
        m.add(1, 0, -1.0);
        m.add(1, 1, 1.0);
        assert!(matches!(m.factor(), Err(Error::SingularSystem { row: 1, .. })));
    }
}
