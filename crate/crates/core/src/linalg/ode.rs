//! Fixed-step one-step integrators over a flattened state vector.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::scalar::Scalar;

fn check_step<T: Scalar>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidStep(h.as_f64()))
    }
}

fn eval<T, F>(f: &mut F, t: T, x: &Vector<T>) -> Result<Vector<T>>
where
    T: Scalar,
    F: FnMut(T, &Vector<T>) -> Result<Vector<T>>,
{
    let dx = f(t, x)?;
    if dx.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: dx.dim(),
        });
    }
    if !dx.is_finite() {
        return Err(Error::NonFiniteField { t: t.as_f64() });
    }
    Ok(dx)
}

/// Classical fourth-order Runge-Kutta step of `ẋ = f(t, x)`.
pub fn rk4_step<T, F>(mut f: F, t: T, state: &Vector<T>, h: T) -> Result<Vector<T>>
where
    T: Scalar,
    F: FnMut(T, &Vector<T>) -> Result<Vector<T>>,
{
    check_step(h)?;
    let half = h * T::lit(0.5);
    let k1 = eval(&mut f, t, state)?;
    let k2 = eval(&mut f, t + half, &state.axpy(half, &k1))?;
    let k3 = eval(&mut f, t + half, &state.axpy(half, &k2))?;
    let k4 = eval(&mut f, t + h, &state.axpy(h, &k3))?;
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let next: Vector<T> = (0..state.dim())
        .map(|i| state[i] + sixth * (k1[i] + two * (k2[i] + k3[i]) + k4[i]))
        .collect();
    Ok(next)
}

/// Explicit Euler step, kept as a low-order cross-check.
pub fn euler_step<T, F>(mut f: F, t: T, state: &Vector<T>, h: T) -> Result<Vector<T>>
where
    T: Scalar,
    F: FnMut(T, &Vector<T>) -> Result<Vector<T>>,
{
    check_step(h)?;
    let k1 = eval(&mut f, t, state)?;
    Ok(state.axpy(h, &k1))
}
