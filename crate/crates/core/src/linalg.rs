//! Dense square matrices small enough to live on the stack of a chart point.
//!
//! Dimensions in this crate are tiny (a spacetime has n ≤ 4 in practice), so
//! plain row-major storage with partial-pivot LU and cyclic Jacobi is enough.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| (0..n).fold(T::zero(), |acc, k| acc + self[(i, k)] * other[(k, j)]))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] + other[(i, j)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    /// Bilinear form `uᵀ M v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            if u[i] == T::zero() {
                continue;
            }
            let mut row = T::zero();
            for j in 0..n {
                row = row + self[(i, j)] * v[j];
            }
            acc = acc + u[i] * row;
        }
        acc
    }

    pub fn trace(&self) -> T {
        (0..self.n).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// LU factorisation with partial pivoting. Returns `None` for an exactly
    /// singular matrix; near-singularity is judged by callers through `det`.
    pub fn lu(&self) -> Option<Lu<T>> {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == T::zero() || !pivot.is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                for j in k + 1..n {
                    let akj = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * akj;
                }
            }
        }
        Some(Lu { a, perm, sign })
    }

    pub fn det(&self) -> T {
        self.lu().map_or(T::zero(), |lu| lu.det())
    }

    /// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.clone();
        let eps = T::epsilon();
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.data.iter().fold(T::zero(), |m, x| m + *x * *x);
            if off <= eps * eps * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let two = T::one() + T::one();
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let t = if theta == T::zero() { T::one() } else { t };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    /// Lower-triangular `L` with `L Lᵀ = self`, for symmetric positive definite input.
    pub fn cholesky(&self) -> Option<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= T::zero() {
                        return None;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Some(l)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Clone, Debug)]
pub struct Lu<T> {
    a: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
}

impl<T: Real> Lu<T> {
    pub fn det(&self) -> T {
        (0..self.a.n).fold(self.sign, |acc, i| acc * self.a[(i, i)])
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.a.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] = x[i] - self.a[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] = x[i] - self.a[(i, k)] * x[k];
            }
            x[i] = x[i] / self.a[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.a.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_inverse_and_det() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let lu = m.lu().unwrap();
        assert_relative_eq!(lu.det(), -1.0);
        assert_eq!(lu.inverse(), m);

        let m = Matrix::from_rows(&[vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 0.0], vec![2.0, 0.0, 5.0]]);
        let inv = m.lu().unwrap().inverse();
        let id = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(id[(i, j)], if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        assert_relative_eq!(m.det(), 4.0 * 15.0 - 1.0 * 5.0 + 2.0 * (-6.0), epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_has_no_lu() {
        let m: Matrix<f64> = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(m.lu().is_none() || m.det().abs() < 1e-15);
    }

    #[test]
    fn jacobi_eigenvalues() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let ev = m.symmetric_eigenvalues();
        assert_relative_eq!(ev[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1], 1.0, epsilon = 1e-14);

        let m = Matrix::from_rows(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        let ev = m.symmetric_eigenvalues();
        let s2 = 2f64.sqrt();
        for (a, b) in ev.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn cholesky_reconstructs() {
        let m = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = m.cholesky().unwrap();
        let back = l.mul(&l.transpose());
        assert_relative_eq!(back[(0, 1)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(back[(1, 1)], 3.0, epsilon = 1e-14);
        assert!(Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).cholesky().is_none());
    }

    #[test]
    fn works_in_single_precision() {
        let m: Matrix<f32> = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]);
        assert_relative_eq!(m.det(), 1.0f32);
    }
}
