//! Small dense complex linear algebra: LU with partial pivoting and a
//! solver. Used for Pade systems and by reference oracles in tests.

use crate::{c64, C64, Error, Result};

/// Dense row-major complex matrix.
#[derive(Debug, Clone)]
pub struct CMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CMatrix { n_rows, n_cols, data: vec![c64(0.0, 0.0); n_rows * n_cols] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn mat_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }
}

/// LU factorization with partial pivoting, stored in place.
pub struct Lu {
    lu: CMatrix,
    piv: Vec<usize>,
}

pub fn lu_decompose(a: &CMatrix) -> Result<Lu> {
    assert_eq!(a.n_rows, a.n_cols);
    let n = a.n_rows;
    let mut lu = a.clone();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = lu.at(k, k).norm();
        for i in k + 1..n {
            let v = lu.at(i, k).norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::RootFinding("singular matrix in LU factorization".into()));
        }
        if p != k {
            for j in 0..n {
                let tmp = lu.at(k, j);
                lu.set(k, j, lu.at(p, j));
                lu.set(p, j, tmp);
            }
            piv.swap(k, p);
        }
        let pivot = lu.at(k, k);
        for i in k + 1..n {
            let f = lu.at(i, k) / pivot;
            lu.set(i, k, f);
            if f.norm() == 0.0 {
                continue;
            }
            for j in k + 1..n {
                let v = lu.at(i, j) - f * lu.at(k, j);
                lu.set(i, j, v);
            }
        }
    }
    Ok(Lu { lu, piv })
}

impl Lu {
    /// Determinant from the U diagonal and the pivot permutation parity.
    pub fn det(&self) -> C64 {
        let n = self.lu.n_rows;
        let mut d = c64(1.0, 0.0);
        for i in 0..n {
            d *= self.lu.at(i, i);
        }
        // permutation parity
        let mut perm = self.piv.clone();
        let mut sign = 1.0f64;
        for i in 0..n {
            while perm[i] != i {
                let j = perm[i];
                perm.swap(i, j);
                sign = -sign;
            }
        }
        d * sign
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.n_rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let f = self.lu.at(i, j) * x[j];
                x[i] -= f;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let f = self.lu.at(i, j) * x[j];
                x[i] -= f;
            }
            x[i] /= self.lu.at(i, i);
        }
        x
    }
}

/// Solves `a x = b` for a single right-hand side.
pub fn solve(a: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    Ok(lu_decompose(a)?.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_random_system() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let mut a = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a.set(i, j, c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        let x_true: Vec<C64> = (0..n).map(|k| c64(k as f64, -(k as f64) / 2.0)).collect();
        let b = a.mat_vec(&x_true);
        let x = solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).norm() < 1e-10);
        }
    }
}
