//! Position and constant velocity-bias estimation from a bearing measurement.
//!
//! A basic filter `x̂₁` tracks the position up to a bias-driven offset, the matrix
//! flow `M` records how that offset accumulates, and a dual observer on the
//! transformed output `y⋆ = M⁻¹y / |M⁻¹y|` recovers both position and bias.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the crate
//! root pick one.
//!
//! ```
//! use bearing_core::{circle_scenario, simulate};
//!
//! let mut sc = circle_scenario::<f64>();
//! sc.duration = 1.0;
//! let trace = simulate(&sc).unwrap();
//! assert_eq!(trace.samples.len(), 101);
//! ```

// negated float comparisons in this crate are NaN guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod excitation;
pub mod linalg;
pub mod observer;
pub mod scalar;
pub mod sim;

pub use analysis::{
    bound_report, check_transition_bounds, determinant_floor, fit_decay_rate, gamma_bound, m_flow,
    m_health, transition_matrix, ultimate_bound_check, BoundId, BoundOptions, BoundReport,
    DecayFit, Horizon, MHealth, TransitionAudit, TransitionAuditConfig, UltimateBoundCheck,
    Violation,
};
pub use error::{Error, Result};
pub use excitation::{
    distinguishing_input, dual_pe_check, indistinguishable_pair, output_history, pe_derivative,
    pe_equivalence_audit, pe_integral, pe_report, pe_scalar, window_max_speed, CircularInput,
    DirectionSignal, EquivalenceAudit, PeReport,
};
pub use linalg::{
    direction, euler_step, invert, projector, rk4_step, DirectionVector, Inverse, Matrix, Vector,
};
pub use observer::{
    basic_filter_step, observer_step, reconstruct, virtual_state, Gains, Measurement, ObserverMode,
    ObserverOutput, ObserverState,
};
pub use scalar::Scalar;
pub use sim::{
    circle_scenario, measure, radial_scenario, simulate, true_kinematics_step, NoiseKind, NoiseRng,
    NoiseSpec, Scenario, SimFailure, SimulationTrace, TraceSample, Trajectory,
};

pub type Vector64 = Vector<f64>;
pub type Vector32 = Vector<f32>;
pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Direction64 = DirectionVector<f64>;
pub type Direction32 = DirectionVector<f32>;
pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type Trace64 = SimulationTrace<f64>;
pub type Trace32 = SimulationTrace<f32>;
pub type ObserverState64 = ObserverState<f64>;
pub type ObserverState32 = ObserverState<f32>;
