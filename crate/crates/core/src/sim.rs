//! Ground-truth kinematics, input generators, measurement noise and the co-simulation loop.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{direction, rk4_step, DirectionVector, Matrix, Vector, DEFAULT_DIRECTION_EPS};
use crate::observer::{
    basic_filter_step, basic_output, observer_step, reconstruct, virtual_state, Gains, Measurement,
    ObserverMode, ObserverOutput, ObserverState,
};
use crate::scalar::Scalar;

/// Generator of the total velocity `v + a`; the observer sees `v = (v + a) − a_true`.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory<T> {
    /// `speed · (−sin ωt, cos ωt, 0, …)`: a circle of radius `speed / ω` in the first two axes.
    Circle { speed: T, omega: T },
    /// Constant total velocity.
    Constant { velocity: Vector<T> },
}

impl<T: Scalar> Trajectory<T> {
    pub fn total_velocity(&self, n: usize, t: T) -> Vector<T> {
        match self {
            Trajectory::Circle { speed, omega } => {
                let mut v = Vector::zeros(n);
                let phase = *omega * t;
                v[0] = -*speed * phase.sin();
                v[1] = *speed * phase.cos();
                v
            }
            Trajectory::Constant { velocity } => velocity.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    /// i.i.d. per-axis uniform noise added to the position before projection.
    UniformPosition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub kind: NoiseKind,
    /// metres
    pub half_width: T,
    /// ChaCha stream id, combined with the scenario seed.
    pub stream: u64,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            half_width: T::zero(),
            stream: 0,
        }
    }

    pub fn uniform(half_width: T) -> Self {
        Self {
            kind: NoiseKind::UniformPosition,
            half_width,
            stream: 0,
        }
    }
}

/// Seeded noise stream.
///
/// Algorithm: `ChaCha8Rng::seed_from_u64(seed)` with `set_stream(stream)`; each
/// uniform draw takes one `next_u64`, keeps its top 53 bits as `u ∈ [0, 1)` and
/// returns `half_width · (2u − 1)`. Components are drawn in axis order.
#[derive(Debug, Clone)]
pub struct NoiseRng {
    rng: ChaCha8Rng,
}

impl NoiseRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn symmetric<T: Scalar>(&mut self, half_width: T) -> T {
        half_width * T::lit(2.0 * self.unit() - 1.0)
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub n: usize,
    pub trajectory: Trajectory<T>,
    pub a_true: Vector<T>,
    pub x0: Vector<T>,
    pub gains: Gains<T>,
    pub mode: ObserverMode,
    pub m0: Matrix<T>,
    pub x_hat_1_0: Vector<T>,
    pub z_hat_star_0: Vector<T>,
    /// integration step (s)
    pub h: T,
    /// s
    pub duration: T,
    pub noise: NoiseSpec<T>,
    pub seed: u64,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidScenario(msg.into()))
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        for (name, v) in [
            ("a_true", &self.a_true),
            ("x0", &self.x0),
            ("x_hat_1_0", &self.x_hat_1_0),
            ("z_hat_star_0", &self.z_hat_star_0),
        ] {
            if v.dim() != n {
                return invalid(format!("{name} has dimension {}, expected {n}", v.dim()));
            }
            if !v.is_finite() {
                return invalid(format!("{name} has non-finite entries"));
            }
        }
        if self.m0.dim() != n {
            return invalid(format!("m0 is {0}x{0}, expected {n}x{n}", self.m0.dim()));
        }
        if !self.m0.is_finite() {
            return invalid("m0 has non-finite entries");
        }
        self.gains.validate()?;
        if !(self.h > T::zero() && self.h.is_finite()) {
            return Err(Error::InvalidStep(self.h.as_f64()));
        }
        if !(self.duration.is_finite() && self.duration >= T::lit(10.0) * self.h) {
            return invalid(format!(
                "duration {} must be at least 10 steps of {}",
                self.duration, self.h
            ));
        }
        if self.x0.norm() <= T::lit(DEFAULT_DIRECTION_EPS) {
            return Err(Error::DegenerateDirection {
                norm: self.x0.norm().as_f64(),
                eps: DEFAULT_DIRECTION_EPS,
            });
        }
        let tol = T::lit(1e-12) * (T::one() + self.m0.max_abs());
        if !self.m0.is_symmetric(tol) {
            return invalid("m0 must be symmetric");
        }
        if self
            .m0
            .symmetric_eigenvalues()
            .first()
            .is_none_or(|&l| l <= T::zero())
        {
            return invalid("m0 must be positive definite");
        }
        match &self.trajectory {
            Trajectory::Circle { speed, omega } => {
                if !(speed.is_finite() && omega.is_finite()) {
                    return invalid("trajectory parameters must be finite");
                }
            }
            Trajectory::Constant { velocity } => {
                if velocity.dim() != n || !velocity.is_finite() {
                    return invalid(format!("trajectory velocity must be {n} finite entries"));
                }
            }
        }
        if !(self.noise.half_width >= T::zero() && self.noise.half_width.is_finite()) {
            return invalid("noise half_width must be finite and non-negative");
        }
        Ok(())
    }

    /// Measured velocity `v(t) = (v + a)(t) − a_true`.
    pub fn measured_velocity(&self, t: T) -> Vector<T> {
        &self.trajectory.total_velocity(self.n, t) - &self.a_true
    }

    /// `floor(duration / h) + 1`
    pub fn sample_count(&self) -> usize {
        let steps = (self.duration / self.h).as_f64();
        (steps + 1e-9 * steps.max(1.0)).floor() as usize + 1
    }

    pub fn initial_state(&self) -> ObserverState<T> {
        ObserverState {
            x_hat_1: self.x_hat_1_0.clone(),
            m: self.m0.clone(),
            z_hat_star: self.z_hat_star_0.clone(),
            t: T::zero(),
        }
    }
}

/// The circular experiment: a target circling at 3 m altitude above the camera with
/// a constant velocity bias `a = (0.33, 0.66, 0.99)` and gains `k = 0.5`, `k⋆ = 5`.
pub fn circle_scenario<T: Scalar>() -> Scenario<T> {
    Scenario {
        n: 3,
        trajectory: Trajectory::Circle {
            speed: T::lit(0.5),
            omega: T::lit(0.5),
        },
        a_true: Vector::from_f64(&[0.33, 0.66, 0.99]),
        x0: Vector::from_f64(&[1.0, 0.0, 3.0]),
        gains: Gains {
            k: T::lit(0.5),
            k_star: T::lit(5.0),
        },
        mode: ObserverMode::Cascade,
        m0: Matrix::identity(3),
        x_hat_1_0: Vector::zeros(3),
        z_hat_star_0: Vector::zeros(3),
        h: T::lit(0.01),
        duration: T::lit(100.0),
        noise: NoiseSpec::none(),
        seed: 1,
    }
}

/// Constant total velocity with `x0` on the same ray: the bearing never moves.
pub fn radial_scenario<T: Scalar>() -> Scenario<T> {
    let velocity = Vector::from_f64(&[0.1, 0.2, 0.3]);
    Scenario {
        trajectory: Trajectory::Constant {
            velocity: velocity.clone(),
        },
        x0: velocity.scale(T::lit(10.0)),
        ..circle_scenario()
    }
}

/// One RK4 step of `ẋ = v + a` with `v` held over the step.
pub fn true_kinematics_step<T: Scalar>(
    x: &Vector<T>,
    v_meas: &Vector<T>,
    a_true: &Vector<T>,
    h: T,
) -> Result<Vector<T>> {
    let total = v_meas + a_true;
    rk4_step(|_t, _x| Ok(total.clone()), T::zero(), x, h)
}

fn truth_step<T: Scalar>(scenario: &Scenario<T>, x: &Vector<T>, t: T) -> Result<Vector<T>> {
    rk4_step(
        |s, _x| Ok(scenario.trajectory.total_velocity(scenario.n, s)),
        t,
        x,
        scenario.h,
    )
}

/// `direction(x + w)` with `w` drawn from `noise`.
pub fn measure<T: Scalar>(
    x: &Vector<T>,
    noise: &NoiseSpec<T>,
    rng: &mut NoiseRng,
) -> Result<DirectionVector<T>> {
    let eps = T::lit(DEFAULT_DIRECTION_EPS);
    match noise.kind {
        NoiseKind::None => direction(x, eps),
        NoiseKind::UniformPosition => {
            let noisy: Vector<T> = x
                .iter()
                .map(|&xi| xi + rng.symmetric(noise.half_width))
                .collect();
            direction(&noisy, eps)
        }
    }
}

/// One recorded instant of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample<T> {
    pub t: T,
    pub x_true: Vector<T>,
    pub v_meas: Vector<T>,
    pub y: DirectionVector<T>,
    pub state: ObserverState<T>,
    pub output: ObserverOutput<T>,
    /// `|x − z|` for the cascade, `|x − x̂₁|` for the basic filter
    pub err_xz: T,
    /// `|x − x̂|`
    pub err_x: T,
    /// `|â − a|`
    pub err_a: T,
}

/// Where and why a simulation stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFailure {
    pub t: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace<T> {
    pub scenario: Scenario<T>,
    pub samples: Vec<TraceSample<T>>,
    pub failure: Option<SimFailure>,
}

impl<T: Scalar> SimulationTrace<T> {
    pub fn dim(&self) -> usize {
        self.scenario.n
    }

    pub fn h(&self) -> T {
        self.scenario.h
    }

    /// Time of the last recorded sample.
    pub fn span(&self) -> T {
        self.samples.last().map_or(T::zero(), |s| s.t)
    }

    pub fn last(&self) -> Option<&TraceSample<T>> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<T> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn series(&self, f: impl Fn(&TraceSample<T>) -> T) -> Vec<T> {
        self.samples.iter().map(f).collect()
    }

    /// Sample index nearest to time `t`.
    pub fn index_at(&self, t: T) -> usize {
        let i = (t / self.h()).round().as_f64().max(0.0) as usize;
        i.min(self.samples.len().saturating_sub(1))
    }
}

fn record<T: Scalar>(
    scenario: &Scenario<T>,
    t: T,
    x: &Vector<T>,
    meas: &Measurement<T>,
    state: &ObserverState<T>,
) -> Result<TraceSample<T>> {
    let output = match scenario.mode {
        ObserverMode::Cascade => reconstruct(state, meas)?,
        ObserverMode::BasicFilter => basic_output(state, meas),
    };
    let err_xz = match scenario.mode {
        ObserverMode::Cascade => (x - &virtual_state(state, &scenario.a_true)).norm(),
        ObserverMode::BasicFilter => (x - &state.x_hat_1).norm(),
    };
    Ok(TraceSample {
        t,
        x_true: x.clone(),
        v_meas: meas.v.clone(),
        y: meas.y.clone(),
        state: state.clone(),
        err_x: (x - &output.x_hat).norm(),
        err_a: (&output.a_hat - &scenario.a_true).norm(),
        output,
        err_xz,
    })
}

/// Co-integrates truth and observer on the grid `t_i = i h`.
///
/// Each step measures the current truth, records the sample, advances the observer
/// with that measurement held, then advances the truth. A runtime fault ends the
/// trace at the failing step and is reported in [`SimulationTrace::failure`].
pub fn simulate<T: Scalar>(scenario: &Scenario<T>) -> Result<SimulationTrace<T>> {
    scenario.validate()?;
    let count = scenario.sample_count();
    let mut rng = NoiseRng::new(scenario.seed, scenario.noise.stream);
    let mut samples = Vec::with_capacity(count);
    let mut x = scenario.x0.clone();
    let mut state = scenario.initial_state();
    let mut failure = None;

    for i in 0..count {
        let t = T::from_count(i) * scenario.h;
        let result = (|| -> Result<(ObserverState<T>, Vector<T>)> {
            let y = measure(&x, &scenario.noise, &mut rng)?;
            let meas = Measurement {
                y,
                v: scenario.measured_velocity(t),
                t,
            };
            samples.push(record(scenario, t, &x, &meas, &state)?);
            if i + 1 == count {
                return Ok((state.clone(), x.clone()));
            }
            let mut next = match scenario.mode {
                ObserverMode::Cascade => observer_step(&state, &meas, &scenario.gains, scenario.h)?,
                ObserverMode::BasicFilter => {
                    basic_filter_step(&state, &meas, scenario.gains.k, scenario.h)?
                }
            };
            next.t = T::from_count(i + 1) * scenario.h;
            let x_next = truth_step(scenario, &x, t)?;
            Ok((next, x_next))
        })();
        match result {
            Ok((s, xn)) => {
                state = s;
                x = xn;
            }
            Err(error) => {
                failure = Some(SimFailure {
                    t: t.as_f64(),
                    error,
                });
                break;
            }
        }
    }

    Ok(SimulationTrace {
        scenario: scenario.clone(),
        samples,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinematics_examples() {
        let x = Vector::<f64>::from_f64(&[1.0, 2.0, 3.0]);
        let a = Vector::from_f64(&[0.33, 0.66, 0.99]);
        let still = true_kinematics_step(&x, &(-&a), &a, 0.1).unwrap();
        assert_eq!(still, x);
        let moved = true_kinematics_step(
            &x,
            &Vector::from_f64(&[1.0, 0.0, 0.0]),
            &Vector::zeros(3),
            0.5,
        )
        .unwrap();
        assert_eq!(moved.as_slice(), &[1.5, 2.0, 3.0]);
    }

    #[test]
    fn circle_scenario_parameters() {
        let s = circle_scenario::<f64>();
        assert_eq!(s.a_true.as_slice(), &[0.33, 0.66, 0.99]);
        assert_eq!((s.gains.k, s.gains.k_star), (0.5, 5.0));
        assert_eq!(s.x0[2], 3.0);
        assert_eq!(s.sample_count(), 10_001);
        // measured velocity subtracts the bias from the circle tangent
        let v0 = s.measured_velocity(0.0);
        assert!(
            (v0[0] + 0.33).abs() < 1e-15
                && (v0[1] - (0.5 - 0.66)).abs() < 1e-15
                && (v0[2] + 0.99).abs() < 1e-15
        );
        s.validate().unwrap();
    }

    #[test]
    fn measure_noise_free_and_bounded() {
        let mut rng = NoiseRng::new(7, 0);
        let y = measure(
            &Vector::<f64>::from_f64(&[0.0, 0.0, 3.0]),
            &NoiseSpec::none(),
            &mut rng,
        )
        .unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 1.0]);
        for _ in 0..10_000 {
            let w = rng.symmetric(0.5f64);
            assert!(w.abs() <= 0.5);
        }
    }

    #[test]
    fn noise_stream_is_deterministic() {
        let draw = |seed, stream| {
            let mut r = NoiseRng::new(seed, stream);
            (0..16).map(|_| r.unit()).collect::<Vec<_>>()
        };
        assert_eq!(draw(1, 0), draw(1, 0));
        assert_ne!(draw(1, 0), draw(2, 0));
        assert_ne!(draw(1, 0), draw(1, 1));
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut s = circle_scenario::<f64>();
        s.x0 = Vector::zeros(3);
        assert!(matches!(
            s.validate(),
            Err(Error::DegenerateDirection { .. })
        ));

        let mut s = circle_scenario::<f64>();
        s.m0 = Matrix::from_f64_rows(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));

        let mut s = circle_scenario::<f64>();
        s.m0 = Matrix::from_diag(&[1.0, -1.0, 1.0]);
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));

        let mut s = circle_scenario::<f64>();
        s.duration = 0.05;
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));

        let mut s = circle_scenario::<f64>();
        s.gains.k = -1.0;
        assert!(matches!(
            s.validate(),
            Err(Error::InvalidGain { name: "k", .. })
        ));
    }

    #[test]
    fn short_run_is_well_formed() {
        let mut s = circle_scenario::<f64>();
        s.duration = 1.0;
        let trace = simulate(&s).unwrap();
        assert!(trace.failure.is_none());
        assert_eq!(trace.samples.len(), 101);
        for (i, smp) in trace.samples.iter().enumerate() {
            assert_eq!(smp.t, i as f64 * 0.01);
            assert_eq!(smp.state.t, smp.t);
        }
        let first = &trace.samples[0];
        // x̃_z(0) = x0 − a with x̂₁ = 0, M = I
        let expect = (&s.x0 - &s.a_true).norm();
        assert!((first.err_xz - expect).abs() < 1e-15);
        assert!((first.err_a - s.a_true.norm()).abs() < 1e-15);
    }

    #[test]
    fn runs_in_f32() {
        let mut s = circle_scenario::<f32>();
        s.duration = 2.0;
        let trace = simulate(&s).unwrap();
        assert!(trace.failure.is_none());
        assert_eq!(trace.samples.len(), 201);
    }
}
