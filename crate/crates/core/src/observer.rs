//! Cascade observer: basic bearing filter, the `M` matrix flow and the dual observer.
//!
//! The observer integrates three coupled states driven by the bearing `y` and the
//! measured (biased) velocity `v`:
//!
//! ```text
//! x̂₁' = v − k π_y x̂₁
//! M'  = I − k π_y M
//! ẑ⋆' = v⋆ − k⋆ π_{y⋆} ẑ⋆      y⋆ = M⁻¹y / |M⁻¹y|,  v⋆ = M⁻¹(v − M⁻¹x̂₁)
//! ```
//!
//! Position and bias estimates are then `x̂ = M ẑ⋆` and `â = ẑ⋆ − M⁻¹x̂₁`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    direction, invert, rk4_step, DirectionVector, Inverse, Matrix, Vector, DEFAULT_COND_LIMIT,
    DEFAULT_DIRECTION_EPS,
};
use crate::scalar::Scalar;

/// `M` is rejected once its determinant drops below this value.
pub const DET_FLOOR: f64 = 1e-12;

/// Whether the full cascade runs or only the basic bearing filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverMode {
    #[default]
    Cascade,
    BasicFilter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains<T> {
    /// basic filter gain (1/s)
    pub k: T,
    /// dual observer gain (1/s)
    pub k_star: T,
}

impl<T: Scalar> Gains<T> {
    pub fn new(k: T, k_star: T) -> Result<Self> {
        let g = Self { k, k_star };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > T::zero() && self.k.is_finite()) {
            return Err(Error::InvalidGain {
                name: "k",
                value: self.k.as_f64(),
            });
        }
        if !(self.k_star > T::zero() && self.k_star.is_finite()) {
            return Err(Error::InvalidGain {
                name: "k_star",
                value: self.k_star.as_f64(),
            });
        }
        Ok(())
    }
}

/// Bearing and measured velocity at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<T> {
    pub y: DirectionVector<T>,
    pub v: Vector<T>,
    pub t: T,
}

/// Everything the observer integrates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState<T> {
    pub x_hat_1: Vector<T>,
    /// has units of seconds
    pub m: Matrix<T>,
    pub z_hat_star: Vector<T>,
    pub t: T,
}

impl<T: Scalar> ObserverState<T> {
    pub fn new(x_hat_1: Vector<T>, m: Matrix<T>, z_hat_star: Vector<T>, t: T) -> Result<Self> {
        let n = x_hat_1.dim();
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        m.check_dim(n)?;
        z_hat_star.check_dim(n)?;
        x_hat_1.check_finite("x_hat_1")?;
        m.check_finite("M")?;
        z_hat_star.check_finite("z_hat_star")?;
        Ok(Self {
            x_hat_1,
            m,
            z_hat_star,
            t,
        })
    }

    /// `x̂₁ = 0`, `M = I`, `ẑ⋆ = 0` at `t = 0`.
    pub fn initial(n: usize) -> Self {
        Self {
            x_hat_1: Vector::zeros(n),
            m: Matrix::identity(n),
            z_hat_star: Vector::zeros(n),
            t: T::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.x_hat_1.dim()
    }

    fn flatten(&self) -> Vector<T> {
        Vector::concat(&[
            self.x_hat_1.as_slice(),
            self.m.as_slice(),
            self.z_hat_star.as_slice(),
        ])
    }

    fn unflatten(n: usize, s: &Vector<T>, t: T) -> Self {
        let m = Matrix::from_row_major(s.as_slice()[n..n + n * n].to_vec())
            .expect("state layout is n + n² + n");
        Self {
            x_hat_1: s.segment(0, n),
            m,
            z_hat_star: s.segment(n + n * n, n),
            t,
        }
    }
}

/// Reconstructed estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverOutput<T> {
    pub x_hat: Vector<T>,
    pub a_hat: Vector<T>,
    pub y_star: DirectionVector<T>,
    pub v_star: Vector<T>,
}

/// Inverse of `M` under the observer's invertibility guard.
pub fn guarded_inverse<T: Scalar>(m: &Matrix<T>) -> Result<Inverse<T>> {
    let inv = invert(m, T::lit(DEFAULT_COND_LIMIT))?;
    if inv.det < T::lit(DET_FLOOR) {
        return Err(Error::IllConditioned {
            cond: inv.cond_1.as_f64(),
            det: inv.det.as_f64(),
        });
    }
    Ok(inv)
}

/// `v − k π_y x̂₁`
pub fn basic_filter_rhs<T: Scalar>(
    x_hat_1: &Vector<T>,
    y: &DirectionVector<T>,
    v: &Vector<T>,
    k: T,
) -> Vector<T> {
    v.axpy(-k, &y.project(x_hat_1))
}

/// `I − k π_y M`
pub fn m_matrix_rhs<T: Scalar>(m: &Matrix<T>, y: &DirectionVector<T>, k: T) -> Matrix<T> {
    let n = m.dim();
    Matrix::identity(n).axpy(-k, &y.projector().matmul(m))
}

fn dual_output_with<T: Scalar>(
    m_inv: &Matrix<T>,
    y: &DirectionVector<T>,
) -> Result<DirectionVector<T>> {
    direction(&m_inv.mul_vec(y.as_vector()), T::lit(DEFAULT_DIRECTION_EPS))
}

fn dual_velocity_with<T: Scalar>(
    m_inv: &Matrix<T>,
    v: &Vector<T>,
    x_hat_1: &Vector<T>,
) -> Vector<T> {
    m_inv.mul_vec(&(v - &m_inv.mul_vec(x_hat_1)))
}

/// `y⋆ = M⁻¹y / |M⁻¹y|`
pub fn dual_output<T: Scalar>(m: &Matrix<T>, y: &DirectionVector<T>) -> Result<DirectionVector<T>> {
    let inv = invert(m, T::lit(DEFAULT_COND_LIMIT))?;
    dual_output_with(&inv.inverse, y)
}

/// `v⋆ = M⁻¹(v − M⁻¹x̂₁)`
pub fn dual_velocity<T: Scalar>(
    m: &Matrix<T>,
    v: &Vector<T>,
    x_hat_1: &Vector<T>,
) -> Result<Vector<T>> {
    let inv = invert(m, T::lit(DEFAULT_COND_LIMIT))?;
    Ok(dual_velocity_with(&inv.inverse, v, x_hat_1))
}

/// `v⋆ − k⋆ π_{y⋆} ẑ⋆`
pub fn dual_observer_rhs<T: Scalar>(
    z_hat_star: &Vector<T>,
    y_star: &DirectionVector<T>,
    v_star: &Vector<T>,
    k_star: T,
) -> Vector<T> {
    v_star.axpy(-k_star, &y_star.project(z_hat_star))
}

fn check_measurement<T: Scalar>(state: &ObserverState<T>, meas: &Measurement<T>) -> Result<()> {
    let n = state.dim();
    if meas.y.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: meas.y.dim(),
        });
    }
    meas.v.check_dim(n)?;
    meas.v.check_finite("measured velocity")
}

/// Advances the full cascade by one RK4 step of length `h`.
///
/// The measurement is held constant over the step. `y⋆` and `v⋆` are recomputed at
/// each stage from the stage values of `M` and `x̂₁`.
pub fn observer_step<T: Scalar>(
    state: &ObserverState<T>,
    meas: &Measurement<T>,
    gains: &Gains<T>,
    h: T,
) -> Result<ObserverState<T>> {
    gains.validate()?;
    check_measurement(state, meas)?;
    guarded_inverse(&state.m)?;
    let n = state.dim();
    let y = &meas.y;
    let v = &meas.v;
    let field = |t: T, s: &Vector<T>| -> Result<Vector<T>> {
        let stage = ObserverState::unflatten(n, s, t);
        let m_inv = guarded_inverse(&stage.m)?.inverse;
        let y_star = dual_output_with(&m_inv, y)?;
        let v_star = dual_velocity_with(&m_inv, v, &stage.x_hat_1);
        let dx = basic_filter_rhs(&stage.x_hat_1, y, v, gains.k);
        let dm = m_matrix_rhs(&stage.m, y, gains.k);
        let dz = dual_observer_rhs(&stage.z_hat_star, &y_star, &v_star, gains.k_star);
        Ok(Vector::concat(&[
            dx.as_slice(),
            dm.as_slice(),
            dz.as_slice(),
        ]))
    };
    let next = rk4_step(field, state.t, &state.flatten(), h)?;
    let out = ObserverState::unflatten(n, &next, state.t + h);
    guarded_inverse(&out.m)?;
    Ok(out)
}

/// Advances only `x̂₁` (cascade disabled); `M` and `ẑ⋆` are carried unchanged.
pub fn basic_filter_step<T: Scalar>(
    state: &ObserverState<T>,
    meas: &Measurement<T>,
    k: T,
    h: T,
) -> Result<ObserverState<T>> {
    if !(k > T::zero() && k.is_finite()) {
        return Err(Error::InvalidGain {
            name: "k",
            value: k.as_f64(),
        });
    }
    check_measurement(state, meas)?;
    let field = |_t: T, x: &Vector<T>| Ok(basic_filter_rhs(x, &meas.y, &meas.v, k));
    let x_hat_1 = rk4_step(field, state.t, &state.x_hat_1, h)?;
    Ok(ObserverState {
        x_hat_1,
        m: state.m.clone(),
        z_hat_star: state.z_hat_star.clone(),
        t: state.t + h,
    })
}

/// `x̂ = M ẑ⋆`, `â = ẑ⋆ − M⁻¹x̂₁`, plus the current `y⋆` and `v⋆`.
pub fn reconstruct<T: Scalar>(
    state: &ObserverState<T>,
    meas: &Measurement<T>,
) -> Result<ObserverOutput<T>> {
    check_measurement(state, meas)?;
    let m_inv = guarded_inverse(&state.m)?.inverse;
    let x_hat = state.m.mul_vec(&state.z_hat_star);
    let a_hat = &state.z_hat_star - &m_inv.mul_vec(&state.x_hat_1);
    let y_star = dual_output_with(&m_inv, &meas.y)?;
    let v_star = dual_velocity_with(&m_inv, &meas.v, &state.x_hat_1);
    Ok(ObserverOutput {
        x_hat,
        a_hat,
        y_star,
        v_star,
    })
}

/// Output of the basic filter alone: `x̂ = x̂₁` and no bias estimate.
pub fn basic_output<T: Scalar>(
    state: &ObserverState<T>,
    meas: &Measurement<T>,
) -> ObserverOutput<T> {
    let n = state.dim();
    ObserverOutput {
        x_hat: state.x_hat_1.clone(),
        a_hat: Vector::zeros(n),
        y_star: meas.y.clone(),
        v_star: meas.v.clone(),
    }
}

/// Analysis-only `z = x̂₁ + M a` for a known true bias.
pub fn virtual_state<T: Scalar>(state: &ObserverState<T>, a_true: &Vector<T>) -> Vector<T> {
    &state.x_hat_1 + &state.m.mul_vec(a_true)
}
