//! Cyclic Jacobi eigenvalue iteration for small symmetric matrices.

use crate::linalg::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 64;

/// Eigenvalues of `(A + Aᵀ) / 2`, sorted ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.dim();
    let half = T::lit(0.5);
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = half * (a[(i, j)] + a[(j, i)]);
        }
    }

    let scale = m.frobenius_norm();
    if scale == T::zero() {
        return vec![T::zero(); n];
    }
    let tol = T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }

    let mut ev: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_sorted() {
        let m = Matrix::<f64>::from_diag(&[3.0, -1.0, 2.0]);
        assert_eq!(symmetric_eigenvalues(&m), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let m = Matrix::<f64>::from_f64_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = symmetric_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn trace_and_determinant_preserved() {
        let m = Matrix::<f64>::from_f64_rows(&[
            &[4.0, 1.0, -2.0, 0.5],
            &[1.0, 3.0, 0.0, 1.0],
            &[-2.0, 0.0, 5.0, -1.0],
            &[0.5, 1.0, -1.0, 2.0],
        ]);
        let ev = symmetric_eigenvalues(&m);
        let tr: f64 = ev.iter().sum();
        let det: f64 = ev.iter().product();
        assert!((tr - m.trace()).abs() < 1e-12);
        assert!((det - m.det()).abs() < 1e-10 * det.abs());
    }
}
