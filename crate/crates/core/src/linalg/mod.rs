//! Small dense linear algebra and fixed-step ODE stepping.

mod direction;
pub mod eigen;
mod matrix;
mod ode;
mod vector;

pub use direction::{direction, projector, unit_tolerance, DirectionVector, DEFAULT_DIRECTION_EPS};
pub use matrix::{invert, Inverse, Lu, Matrix, DEFAULT_COND_LIMIT};
pub use ode::{euler_step, rk4_step};
pub use vector::Vector;
