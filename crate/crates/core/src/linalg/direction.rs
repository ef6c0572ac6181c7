use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Scalar;

/// Norm at or below which a vector has no defined direction (metres).
pub const DEFAULT_DIRECTION_EPS: f64 = 1e-9;

/// Unit vector on the sphere `S^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionVector<T>(Vector<T>);

/// Tolerance on `| |y| - 1 |` accepted by [`DirectionVector::new`].
pub fn unit_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::lit(8.0) * T::epsilon())
}

impl<T: Scalar> DirectionVector<T> {
    /// Wraps `v`, which must already be unit-norm.
    pub fn new(v: Vector<T>) -> Result<Self> {
        v.check_finite("direction")?;
        let norm = v.norm();
        if (norm - T::one()).abs() > unit_tolerance::<T>() {
            return Err(Error::NotUnit {
                norm: norm.as_f64(),
            });
        }
        Ok(Self(v))
    }

    pub fn from_f64(v: &[f64]) -> Result<Self> {
        Self::new(Vector::from_f64(v))
    }

    pub fn as_vector(&self) -> &Vector<T> {
        &self.0
    }

    pub fn into_vector(self) -> Vector<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }

    /// `π_y = I − y yᵀ`, the orthogonal projector onto the complement of `y`.
    pub fn projector(&self) -> Matrix<T> {
        projector(self)
    }

    /// `π_y x` without forming the matrix.
    pub fn project(&self, x: &Vector<T>) -> Vector<T> {
        x.axpy(-self.0.dot(x), &self.0)
    }
}

impl<T> std::ops::Index<usize> for DirectionVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// `I − y yᵀ`.
pub fn projector<T: Scalar>(y: &DirectionVector<T>) -> Matrix<T> {
    let n = y.dim();
    let mut p = Matrix::outer(y.as_vector(), y.as_vector()).scale(-T::one());
    for i in 0..n {
        p[(i, i)] += T::one();
    }
    p
}

/// `x / |x|`, failing with `DegenerateDirection` when `|x| <= eps`.
pub fn direction<T: Scalar>(x: &Vector<T>, eps: T) -> Result<DirectionVector<T>> {
    x.check_finite("direction input")?;
    let norm = x.norm();
    if norm <= eps {
        return Err(Error::DegenerateDirection {
            norm: norm.as_f64(),
            eps: eps.as_f64(),
        });
    }
    Ok(DirectionVector(x.scale(T::one() / norm)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps() -> f64 {
        DEFAULT_DIRECTION_EPS
    }

    #[test]
    fn projector_along_z() {
        let y = DirectionVector::<f64>::from_f64(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(projector(&y), Matrix::from_diag(&[1.0, 1.0, 0.0]));
    }

    #[test]
    fn projector_diagonal_direction() {
        let s = 1.0 / 2f64.sqrt();
        let y = DirectionVector::<f64>::from_f64(&[s, s, 0.0]).unwrap();
        let expect =
            Matrix::<f64>::from_f64_rows(&[&[0.5, -0.5, 0.0], &[-0.5, 0.5, 0.0], &[0.0, 0.0, 1.0]]);
        let p = projector(&y);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p[(i, j)] - expect[(i, j)]).abs() < 1e-15);
            }
        }
        assert!(p.mul_vec(y.as_vector()).norm() < 1e-15);
    }

    #[test]
    fn direction_examples() {
        let d = direction(&Vector::<f64>::from_f64(&[0.0, 0.0, 3.0]), eps()).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0, 1.0]);
        let d = direction(&Vector::<f64>::from_f64(&[3.0, 4.0, 0.0]), eps()).unwrap();
        assert!((d[0] - 0.6).abs() < 1e-15 && (d[1] - 0.8).abs() < 1e-15 && d[2] == 0.0);
        assert!(matches!(
            direction(&Vector::<f64>::zeros(3), eps()),
            Err(Error::DegenerateDirection { .. })
        ));
    }

    #[test]
    fn non_unit_rejected() {
        assert!(matches!(
            DirectionVector::<f64>::from_f64(&[1.0, 1.0]),
            Err(Error::NotUnit { .. })
        ));
    }

    #[test]
    fn project_matches_matrix() {
        let y = direction(&Vector::<f64>::from_f64(&[1.0, -2.0, 0.5]), eps()).unwrap();
        let x = Vector::from_f64(&[0.3, 0.7, -1.1]);
        let a = y.project(&x);
        let b = projector(&y).mul_vec(&x);
        assert!((&a - &b).norm() < 1e-15);
    }

    #[test]
    fn f32_directions() {
        let d = direction(&Vector::<f32>::from_f64(&[3.0, 4.0]), 1e-6).unwrap();
        let p = d.projector();
        assert!(p.mul_vec(d.as_vector()).norm() < 1e-6);
    }
}
