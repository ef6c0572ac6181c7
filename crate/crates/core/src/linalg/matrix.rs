use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;

/// Default ceiling on the 1-norm condition number accepted by [`invert`].
pub const DEFAULT_COND_LIMIT: f64 = 1e12;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds from row-major storage; `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<T>) -> Result<Self> {
        let n = (data.len() as f64).sqrt().round() as usize;
        if n * n != data.len() {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let v: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| T::lit(x)).collect())
            .collect();
        Self::from_rows(&v).expect("square literal")
    }

    /// `u vᵀ`
    pub fn outer(u: &Vector<T>, v: &Vector<T>) -> Self {
        let n = u.dim();
        debug_assert_eq!(n, v.dim());
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(u[i] * v[j]);
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vector<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|x| x.as_f64()).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    /// `self + c * other`
    pub fn axpy(&self, c: T, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + c * b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.n, v.dim());
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v.iter()).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what })
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.n == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                got: self.n,
            })
        }
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// LU factorisation with partial pivoting.
    pub fn lu(&self) -> Lu<T> {
        Lu::new(self)
    }

    pub fn det(&self) -> T {
        self.lu().det()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<T> {
        crate::linalg::eigen::symmetric_eigenvalues(self)
    }

    /// Singular values, ascending.
    pub fn singular_values(&self) -> Vec<T> {
        let gram = self.transpose().matmul(self);
        gram.symmetric_eigenvalues()
            .into_iter()
            .map(|l| l.max(T::zero()).sqrt())
            .collect()
    }

    /// Induced 2-norm (largest singular value).
    pub fn spectral_norm(&self) -> T {
        self.singular_values().last().copied().unwrap_or(T::zero())
    }

    /// Ratio of extreme singular values; infinite for singular matrices.
    pub fn spectral_condition(&self) -> T {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&lo), Some(&hi)) if lo > T::zero() => hi / lo,
            _ => T::infinity(),
        }
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

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        self.axpy(T::one(), rhs)
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        self.axpy(-T::one(), rhs)
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs)
    }
}

impl<T: Scalar> Mul<&Vector<T>> for &Matrix<T> {
    type Output = Vector<T>;
    fn mul(self, rhs: &Vector<T>) -> Vector<T> {
        self.mul_vec(rhs)
    }
}

/// Packed LU factors `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    factors: Matrix<T>,
    perm: Vec<usize>,
    parity: bool,
    singular: bool,
}

impl<T: Scalar> Lu<T> {
    fn new(a: &Matrix<T>) -> Self {
        let n = a.dim();
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = false;
        let mut singular = false;
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, f[(i, k)].abs()))
                    .fold(
                        (k, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot == T::zero() {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    f.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                parity = !parity;
            }
            let d = f[(k, k)];
            for i in k + 1..n {
                let l = f[(i, k)] / d;
                f[(i, k)] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let u = f[(k, j)];
                        f[(i, j)] -= l * u;
                    }
                }
            }
        }
        Self {
            factors: f,
            perm,
            parity,
            singular,
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> T {
        if self.singular {
            return T::zero();
        }
        let d = (0..self.factors.dim())
            .map(|i| self.factors[(i, i)])
            .fold(T::one(), |acc, x| acc * x);
        if self.parity {
            -d
        } else {
            d
        }
    }

    /// Solves `A x = b`. Meaningless when [`Lu::is_singular`] is true.
    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let n = self.factors.dim();
        let f = &self.factors;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = f[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = f[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] /= f[(i, i)];
        }
        Vector::from_vec(x)
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.factors.dim();
        let mut inv = Matrix::zeros(n);
        for j in 0..n {
            let col = self.solve(&Vector::basis(n, j));
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// A matrix inverse together with the 1-norm condition number and determinant.
#[derive(Debug, Clone)]
pub struct Inverse<T> {
    pub inverse: Matrix<T>,
    pub cond_1: T,
    pub det: T,
}

/// Inverts `m`, rejecting it when its 1-norm condition number exceeds `cond_limit`.
///
/// The condition number is `‖M‖₁ ‖M⁻¹‖₁`, exact for the computed inverse.
pub fn invert<T: Scalar>(m: &Matrix<T>, cond_limit: T) -> Result<Inverse<T>> {
    let lu = m.lu();
    let det = lu.det();
    if lu.is_singular() {
        return Err(Error::IllConditioned {
            cond: f64::INFINITY,
            det: 0.0,
        });
    }
    let inverse = lu.inverse();
    let cond_1 = m.norm_1() * inverse.norm_1();
    if !cond_1.is_finite() || cond_1 > cond_limit {
        return Err(Error::IllConditioned {
            cond: cond_1.as_f64(),
            det: det.as_f64(),
        });
    }
    Ok(Inverse {
        inverse,
        cond_1,
        det,
    })
}
