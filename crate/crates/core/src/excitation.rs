//! Persistence-of-excitation measures for direction signals and observability witnesses.
//!
//! A direction signal `y(t)` is persistently exciting when every window of length `δ`
//! satisfies `∫ π_{y(τ)} dτ ≥ μ I`. The integral criterion is evaluated with the
//! trapezoid rule on the sample grid; the derivative criterion looks for
//! `|ẏ| ≥ ε` somewhere in each window, with `ẏ` from central differences.

use std::collections::VecDeque;

use serde::Serialize;

use crate::analysis::gamma_bound;
use crate::error::{Error, Result};
use crate::linalg::{direction, rk4_step, DirectionVector, Matrix, Vector, DEFAULT_DIRECTION_EPS};
use crate::observer::dual_output;
use crate::scalar::Scalar;
use crate::sim::SimulationTrace;

/// Relative spacing tolerance for "uniform" sampling.
const SPACING_TOL: f64 = 1e-9;

/// Uniformly sampled trajectory `t ↦ y(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSignal<T> {
    t0: T,
    h: T,
    samples: Vec<DirectionVector<T>>,
}

impl<T: Scalar> DirectionSignal<T> {
    pub fn uniform(t0: T, h: T, samples: Vec<DirectionVector<T>>) -> Result<Self> {
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::InvalidStep(h.as_f64()));
        }
        if let Some(first) = samples.first() {
            let n = first.dim();
            if let Some(bad) = samples.iter().find(|y| y.dim() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: bad.dim(),
                });
            }
        }
        Ok(Self { t0, h, samples })
    }

    /// Builds from explicit timestamps, which must be strictly increasing with
    /// constant spacing.
    pub fn from_samples(times: &[T], samples: Vec<DirectionVector<T>>) -> Result<Self> {
        if times.len() != samples.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: samples.len(),
            });
        }
        if times.len() < 2 {
            return Err(Error::WindowTooShort {
                delta: 0.0,
                h: 0.0,
                span: 0.0,
            });
        }
        let h = (times[times.len() - 1] - times[0]) / T::from_count(times.len() - 1);
        let tol = T::lit(SPACING_TOL) * h.max(T::one());
        for (i, w) in times.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if !(dt > T::zero()) || (dt - h).abs() > tol {
                return Err(Error::NonUniformSampling { index: i + 1 });
            }
        }
        Self::uniform(times[0], h, samples)
    }

    /// Sample `t ↦ f(t)` on `t0 + i h` for `i < count`.
    pub fn sample_fn(t0: T, h: T, count: usize, f: impl Fn(T) -> Vector<T>) -> Result<Self> {
        let eps = T::lit(DEFAULT_DIRECTION_EPS);
        let samples = (0..count)
            .map(|i| direction(&f(t0 + T::from_count(i) * h), eps))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(t0, h, samples)
    }

    /// The measured bearing of a simulation.
    pub fn bearing(trace: &SimulationTrace<T>) -> Result<Self> {
        let ys = trace.samples.iter().map(|s| s.y.clone()).collect();
        Self::uniform(T::zero(), trace.h(), ys)
    }

    /// The dual output `M⁻¹y / |M⁻¹y|` along a simulation.
    pub fn dual(trace: &SimulationTrace<T>) -> Result<Self> {
        let ys = trace
            .samples
            .iter()
            .map(|s| dual_output(&s.state.m, &s.y))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(T::zero(), trace.h(), ys)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |y| y.dim())
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + T::from_count(i) * self.h
    }

    pub fn span(&self) -> T {
        T::from_count(self.samples.len().saturating_sub(1)) * self.h
    }

    pub fn samples(&self) -> &[DirectionVector<T>] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> &DirectionVector<T> {
        &self.samples[i]
    }

    /// Number of steps in a window of length `delta`.
    pub fn window_steps(&self, delta: T) -> Result<usize> {
        let err = || Error::WindowTooShort {
            delta: delta.as_f64(),
            h: self.h.as_f64(),
            span: self.span().as_f64(),
        };
        let tol = T::lit(SPACING_TOL) * self.h;
        if !delta.is_finite() || delta < T::lit(2.0) * self.h - tol || delta > self.span() + tol {
            return Err(err());
        }
        let w = (delta / self.h).round().as_f64() as usize;
        if w < 2 || w + 1 > self.samples.len() {
            return Err(err());
        }
        Ok(w)
    }

    /// Central-difference `|ẏ|` at every sample (one-sided at the ends).
    pub fn speeds(&self) -> Vec<T> {
        let n = self.samples.len();
        if n < 2 {
            return vec![T::zero(); n];
        }
        (0..n)
            .map(|i| {
                let (lo, hi) = if i == 0 {
                    (0, 1)
                } else if i == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (i - 1, i + 1)
                };
                let d = self.samples[hi].as_vector() - self.samples[lo].as_vector();
                d.norm() / (T::from_count(hi - lo) * self.h)
            })
            .collect()
    }
}

/// Windowed trapezoid integrals of per-sample matrices, via prefix sums.
fn windowed_matrix_integrals<T: Scalar>(h: T, mats: &[Matrix<T>], w: usize) -> Vec<Matrix<T>> {
    let n = mats[0].dim();
    let half = h * T::lit(0.5);
    let mut prefix = Vec::with_capacity(mats.len());
    prefix.push(Matrix::zeros(n));
    for i in 1..mats.len() {
        let step = (&mats[i - 1] + &mats[i]).scale(half);
        let next = &prefix[i - 1] + &step;
        prefix.push(next);
    }
    (0..mats.len() - w)
        .map(|i| &prefix[i + w] - &prefix[i])
        .collect()
}

fn windowed_scalar_integrals<T: Scalar>(h: T, vals: &[T], w: usize) -> Vec<T> {
    let half = h * T::lit(0.5);
    let mut prefix = Vec::with_capacity(vals.len());
    prefix.push(T::zero());
    for i in 1..vals.len() {
        let next = prefix[i - 1] + half * (vals[i - 1] + vals[i]);
        prefix.push(next);
    }
    (0..vals.len() - w)
        .map(|i| prefix[i + w] - prefix[i])
        .collect()
}

/// Smallest eigenvalue of `∫ π_y` over every window `[t_i, t_i + δ]` on the grid.
///
/// Values are clamped to `[0, δ]`, the exact range of the integral's spectrum.
pub fn pe_integral<T: Scalar>(sig: &DirectionSignal<T>, delta: T) -> Result<Vec<T>> {
    let w = sig.window_steps(delta)?;
    let span = T::from_count(w) * sig.h;
    let projectors: Vec<Matrix<T>> = sig.samples.iter().map(|y| y.projector()).collect();
    Ok(windowed_matrix_integrals(sig.h, &projectors, w)
        .iter()
        .map(|m| m.symmetric_eigenvalues()[0].max(T::zero()).min(span))
        .collect())
}

/// `∫ |π_y b|²` over every window, for a fixed unit `b`.
pub fn pe_scalar<T: Scalar>(
    sig: &DirectionSignal<T>,
    b: &DirectionVector<T>,
    delta: T,
) -> Result<Vec<T>> {
    let w = sig.window_steps(delta)?;
    if b.dim() != sig.dim() {
        return Err(Error::DimensionMismatch {
            expected: sig.dim(),
            got: b.dim(),
        });
    }
    let vals: Vec<T> = sig
        .samples
        .iter()
        .map(|y| y.project(b.as_vector()).norm_squared())
        .collect();
    Ok(windowed_scalar_integrals(sig.h, &vals, w))
}

/// Maximum central-difference `|ẏ|` over every window.
pub fn window_max_speed<T: Scalar>(sig: &DirectionSignal<T>, delta: T) -> Result<Vec<T>> {
    let w = sig.window_steps(delta)?;
    let speeds = sig.speeds();
    let mut out = Vec::with_capacity(speeds.len() - w);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for (j, &s) in speeds.iter().enumerate() {
        while dq.back().is_some_and(|&b| speeds[b] <= s) {
            dq.pop_back();
        }
        dq.push_back(j);
        if j >= w {
            let start = j - w;
            while dq.front().is_some_and(|&f| f < start) {
                dq.pop_front();
            }
            out.push(speeds[*dq.front().expect("window non-empty")]);
        }
    }
    Ok(out)
}

/// Per window: does `|ẏ(τ)| ≥ ε` hold for some sample `τ` in the window?
pub fn pe_derivative<T: Scalar>(
    sig: &DirectionSignal<T>,
    delta: T,
    epsilon: T,
) -> Result<Vec<bool>> {
    Ok(window_max_speed(sig, delta)?
        .into_iter()
        .map(|s| s >= epsilon)
        .collect())
}

/// Windowed excitation statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeReport<T> {
    /// window length (s)
    pub delta: T,
    /// certified excitation level: smallest window eigenvalue minus `h² δ`
    pub mu: T,
    pub lambda_min_per_window: Vec<T>,
    pub derivative_epsilon: T,
    pub passes_integral: bool,
    pub passes_derivative: bool,
    /// `μk / (δ(1 + k²δ)²)` when the integral criterion passes, else 0 (1/s)
    pub gamma: T,
}

/// Runs both criteria on `sig` and derives the convergence rate for gain `k`.
pub fn pe_report<T: Scalar>(
    sig: &DirectionSignal<T>,
    delta: T,
    epsilon: T,
    k: T,
) -> Result<PeReport<T>> {
    let lambdas = pe_integral(sig, delta)?;
    let delta_eff = T::from_count(sig.window_steps(delta)?) * sig.h;
    let lambda_min = lambdas.iter().copied().fold(T::infinity(), T::min);
    let mu = lambda_min - sig.h * sig.h * delta_eff;
    let passes_integral = mu > T::zero() && mu < delta_eff;
    let passes_derivative = pe_derivative(sig, delta, epsilon)?.into_iter().all(|p| p);
    let gamma = if passes_integral {
        gamma_bound(k, delta_eff, mu)?
    } else {
        T::zero()
    };
    Ok(PeReport {
        delta: delta_eff,
        mu,
        lambda_min_per_window: lambdas,
        derivative_epsilon: epsilon,
        passes_integral,
        passes_derivative,
        gamma,
    })
}

/// Excitation report for the dual output `y⋆` of a cascade trace, with `γ` for `k⋆`.
pub fn dual_pe_check<T: Scalar>(
    trace: &SimulationTrace<T>,
    delta: T,
    epsilon: T,
) -> Result<PeReport<T>> {
    let sig = DirectionSignal::dual(trace)?;
    pe_report(&sig, delta, epsilon, trace.scenario.gains.k_star)
}

/// Side-by-side integral and derivative criteria with per-signal thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceAudit<T> {
    pub lambda_min: Vec<T>,
    pub max_speed: Vec<T>,
    pub mu_threshold: T,
    pub epsilon_threshold: T,
    pub integral_pass: Vec<bool>,
    pub derivative_pass: Vec<bool>,
    /// windows where exactly one criterion passes
    pub violations: Vec<usize>,
}

impl<T> EquivalenceAudit<T> {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative threshold, against the signal's own peak, separating "excited" from rounding.
const AUDIT_RELATIVE: f64 = 1e-8;

/// Compares the two excitation criteria window by window.
///
/// Thresholds are calibrated per signal: `μ = max(ρ · max λ, 10⁻⁹ δ)` and
/// `ε = max(ρ · max |ẏ|, 10⁻⁹)` with `ρ = 10⁻⁸`, so a window passes a criterion
/// when it is distinguishable from numerical zero.
pub fn pe_equivalence_audit<T: Scalar>(
    sig: &DirectionSignal<T>,
    delta: T,
) -> Result<EquivalenceAudit<T>> {
    let lambda_min = pe_integral(sig, delta)?;
    let max_speed = window_max_speed(sig, delta)?;
    let rho = T::lit(AUDIT_RELATIVE);
    let peak = |v: &[T]| v.iter().copied().fold(T::zero(), T::max);
    let mu_threshold = (rho * peak(&lambda_min)).max(T::lit(1e-9) * delta);
    let epsilon_threshold = (rho * peak(&max_speed)).max(T::lit(1e-9));
    let integral_pass: Vec<bool> = lambda_min.iter().map(|&l| l >= mu_threshold).collect();
    let derivative_pass: Vec<bool> = max_speed.iter().map(|&s| s >= epsilon_threshold).collect();
    let violations = integral_pass
        .iter()
        .zip(&derivative_pass)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect();
    Ok(EquivalenceAudit {
        lambda_min,
        max_speed,
        mu_threshold,
        epsilon_threshold,
        integral_pass,
        derivative_pass,
        violations,
    })
}

/// Two initial positions on the ray of `v + a` that no constant input can tell apart.
pub fn indistinguishable_pair<T: Scalar>(
    v_const: &Vector<T>,
    a: &Vector<T>,
    k1: T,
    k2: T,
) -> Result<(Vector<T>, Vector<T>)> {
    for (name, k) in [("k1", k1), ("k2", k2)] {
        if !(k > T::zero() && k.is_finite()) {
            return Err(Error::InvalidGain {
                name,
                value: k.as_f64(),
            });
        }
    }
    let total = v_const + a;
    let norm = total.norm();
    if norm <= T::lit(DEFAULT_DIRECTION_EPS) {
        return Err(Error::DegenerateDirection {
            norm: norm.as_f64(),
            eps: DEFAULT_DIRECTION_EPS,
        });
    }
    Ok((total.scale(k1), total.scale(k2)))
}

/// The input `v(t) = (cos t, sin t, 0, …, 0)`, which distinguishes any two initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircularInput {
    n: usize,
}

impl CircularInput {
    pub fn eval<T: Scalar>(&self, t: T) -> Vector<T> {
        let mut v = Vector::zeros(self.n);
        v[0] = t.cos();
        v[1] = t.sin();
        v
    }
}

pub fn distinguishing_input(n: usize) -> Result<CircularInput> {
    if n < 2 {
        return Err(Error::DimensionTooSmall(n));
    }
    Ok(CircularInput { n })
}

/// Bearings of `ẋ = v(t) + a` from `x0`, sampled every `h` for `steps` steps.
pub fn output_history<T: Scalar>(
    x0: &Vector<T>,
    a: &Vector<T>,
    input: impl Fn(T) -> Vector<T>,
    h: T,
    steps: usize,
) -> Result<Vec<DirectionVector<T>>> {
    let eps = T::lit(DEFAULT_DIRECTION_EPS);
    let mut x = x0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(direction(&x, eps)?);
    for i in 0..steps {
        let t = T::from_count(i) * h;
        x = rk4_step(|s, _x| Ok(&input(s) + a), t, &x, h)?;
        out.push(direction(&x, eps)?);
    }
    Ok(out)
}
