//! Symmetric banded matrices with Cholesky factorization and a
//! Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};

/// Symmetric matrix storing the lower band `A[i][i - d]`, `0 <= d <= bandwidth`.
#[derive(Debug, Clone)]
pub struct SymBandMatrix {
    n: usize,
    bandwidth: usize,
    // Row-major: row i holds d = 0..=bandwidth.
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        SymBandMatrix {
            n,
            bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.bandwidth, "entry ({i}, {j}) outside bandwidth {}", self.bandwidth);
        hi * (self.bandwidth + 1) + d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        if hi - lo > self.bandwidth {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to the symmetric pair `(i, j)`, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn add_diagonal(&mut self, diag: &[f64], scale: f64) {
        for (i, d) in diag.iter().enumerate() {
            self.add(i, i, scale * d);
        }
    }

    /// Linear combination `a * self + b * other` (same shape).
    pub fn combine(&self, a: f64, other: &SymBandMatrix, b: f64) -> SymBandMatrix {
        assert_eq!(self.n, other.n);
        assert_eq!(self.bandwidth, other.bandwidth);
        SymBandMatrix {
            n: self.n,
            bandwidth: self.bandwidth,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> SymBandMatrix {
        SymBandMatrix {
            n: self.n,
            bandwidth: self.bandwidth,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = self.bandwidth + 1;
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for d in 1..=self.bandwidth.min(i) {
                let a = row[d];
                if a != 0.0 {
                    y[i] += a * x[i - d];
                    y[i - d] += a * x[i];
                }
            }
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut ay = vec![0.0; self.n];
        self.matvec(y, &mut ay);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * (self.bandwidth + 1)]).collect()
    }

    /// Banded Cholesky `A = L L^T`; fails if the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let b = self.bandwidth;
        let w = b + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let jmin = i.saturating_sub(b);
            for j in jmin..=i {
                // L[i][j] = (A[i][j] - Σ_k L[i][k] L[j][k]) / L[j][j], k in [max(i,j)-b, j)
                let mut sum = l[i * w + (i - j)];
                let kmin = jmin.max(j.saturating_sub(b));
                for k in kmin..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::LinearSolver(format!(
                            "matrix not positive definite at row {i} (pivot {sum})"
                        )));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(BandCholesky { n, bandwidth: b, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bandwidth: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.bandwidth + 1;
        for i in 0..self.n {
            let mut s = x[i];
            for d in 1..=self.bandwidth.min(i) {
                s -= self.l[i * w + d] * x[i - d];
            }
            x[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = x[i];
            for d in 1..=self.bandwidth.min(self.n - 1 - i) {
                s -= self.l[(i + d) * w + d] * x[i + d];
            }
            x[i] = s / self.l[i * w];
        }
    }
}

/// Jacobi-preconditioned CG. `x` holds the initial guess and receives the
/// solution; returns the iteration count.
pub fn conjugate_gradient(a: &SymBandMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return Ok(it);
        }
        if it == max_iter {
            break;
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::LinearSolver(format!("CG breakdown (p^T A p = {pap})")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver(format!("CG did not reach tol {tol} in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, bw: usize, seed: u64) -> SymBandMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SymBandMatrix::zeros(n, bw);
        for i in 0..n {
            for d in 1..=bw.min(i) {
                a.add(i, i - d, rng.random_range(-1.0..1.0));
            }
        }
        for i in 0..n {
            a.add(i, i, 2.0 * bw as f64 + 1.0);
        }
        a
    }

    fn dense(a: &SymBandMatrix) -> Vec<Vec<f64>> {
        (0..a.dim()).map(|i| (0..a.dim()).map(|j| a.get(i, j)).collect()).collect()
    }

    #[test]
    fn matvec_matches_dense() {
        let a = random_spd(23, 4, 1);
        let d = dense(&a);
        let x: Vec<f64> = (0..23).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 23];
        a.matvec(&x, &mut y);
        for i in 0..23 {
            let expect: f64 = (0..23).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_solves() {
        let a = random_spd(40, 6, 2);
        let x_true: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        let mut b = vec![0.0; 40];
        a.matvec(&x_true, &mut b);
        let chol = a.cholesky().unwrap();
        chol.solve_in_place(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_agrees_with_cholesky() {
        let a = random_spd(60, 5, 3);
        let b: Vec<f64> = (0..60).map(|i| 1.0 + (i as f64 * 0.1).sin()).collect();
        let mut x_direct = b.clone();
        a.cholesky().unwrap().solve_in_place(&mut x_direct);
        let mut x_cg = vec![0.0; 60];
        conjugate_gradient(&a, &b, &mut x_cg, 1e-13, 500).unwrap();
        for (p, q) in x_direct.iter().zip(&x_cg) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let mut a = SymBandMatrix::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }
}
