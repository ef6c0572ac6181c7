//! Quantitative convergence guarantees checked against simulated traces.
//!
//! Every check here compares a trace with a closed-form envelope:
//!
//! * transition matrix of `x̃' = −k π_y x̃`: `e^{−kT} ≤ ‖Φ(t+T, t)‖ ≤ e^{−γT}`
//!   with `γ = μk / (δ(1 + k²δ)²)`;
//! * basic filter under a constant bias: `|x̃₁(t)| ≤ |x̃₁(0)| + |a|/γ`, and
//!   ultimately `|x̃₁| ≤ |a|/γ`;
//! * `M` flow: `det M > 0`, Jacobi's formula `Δ' = Δ tr(M⁻¹M')`, the late-time
//!   floor `Δ ≥ (n / (k(n−1)))ⁿ`, and `κ(M) ≤ (2/Δ)(‖M‖_F / √n)ⁿ`.
//!
//! Discretisation slack: 5% on the trace-level bounds and `10⁻³` on the
//! transition envelope.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::excitation::{pe_report, DirectionSignal, PeReport};
use crate::linalg::{direction, DirectionVector, Matrix, DEFAULT_DIRECTION_EPS};
use crate::observer::{guarded_inverse, m_matrix_rhs, ObserverMode};
use crate::scalar::Scalar;
use crate::sim::{NoiseRng, SimulationTrace};

/// Relative slack on trace-level bounds.
pub const BOUND_SLACK: f64 = 0.05;
/// Relative slack on the upper transition envelope.
pub const TRANSITION_TOL: f64 = 1e-3;
/// Maximum accepted relative residual of Jacobi's formula.
pub const JACOBI_TOL: f64 = 1e-3;
/// Fraction of a trace treated as "late time".
pub const LATE_FRACTION: f64 = 0.2;
/// A run must last `SETTLE_FACTOR / γ` before late-time claims are assessed.
pub const SETTLE_FACTOR: f64 = 8.0;

/// `μk / (δ(1 + k²δ)²)`
pub fn gamma_bound<T: Scalar>(k: T, delta: T, mu: T) -> Result<T> {
    if !(k > T::zero() && k.is_finite()) {
        return Err(Error::InvalidGain {
            name: "k",
            value: k.as_f64(),
        });
    }
    if !(mu > T::zero() && mu < delta && delta.is_finite()) {
        return Err(Error::InvalidPe {
            mu: mu.as_f64(),
            delta: delta.as_f64(),
        });
    }
    let s = T::one() + k * k * delta;
    Ok(mu * k / (delta * s * s))
}

/// `(n / (k(n−1)))ⁿ`, the level below which `det M` cannot decrease.
pub fn determinant_floor<T: Scalar>(n: usize, k: T) -> T {
    let nf = T::from_count(n);
    (nf / (k * (nf - T::one()))).powi(n as i32)
}

/// Midpoint of samples `i` and `i+1`, from the cubic through four neighbours when available.
fn midpoint<T: Scalar>(sig: &DirectionSignal<T>, i: usize) -> Result<DirectionVector<T>> {
    let ys = sig.samples();
    let mid = if i >= 1 && i + 2 < ys.len() {
        let nine = T::lit(9.0);
        let v = ys[i]
            .as_vector()
            .scale(nine)
            .axpy(nine, ys[i + 1].as_vector())
            .axpy(-T::one(), ys[i - 1].as_vector())
            .axpy(-T::one(), ys[i + 2].as_vector());
        v.scale(T::lit(1.0 / 16.0))
    } else {
        ys[i]
            .as_vector()
            .axpy(T::one(), ys[i + 1].as_vector())
            .scale(T::lit(0.5))
    };
    direction(&mid, T::lit(DEFAULT_DIRECTION_EPS))
}

fn grid_index<T: Scalar>(sig: &DirectionSignal<T>, t: T) -> Result<usize> {
    let pos = (t - sig.t0()) / sig.h();
    let tol = T::lit(1e-6);
    if !pos.is_finite() || pos < -tol || pos > T::from_count(sig.len().saturating_sub(1)) + tol {
        return Err(Error::WindowTooShort {
            delta: t.as_f64(),
            h: sig.h().as_f64(),
            span: sig.span().as_f64(),
        });
    }
    Ok(pos.round().as_f64() as usize)
}

/// Integrates `X' = rhs(y(t), X)` by RK4 on the sample grid from index `i0` to `i1`,
/// calling `visit` after every step.
fn integrate_on_signal<T, F, V>(
    sig: &DirectionSignal<T>,
    i0: usize,
    i1: usize,
    init: Matrix<T>,
    rhs: F,
    mut visit: V,
) -> Result<Matrix<T>>
where
    T: Scalar,
    F: Fn(&DirectionVector<T>, &Matrix<T>) -> Matrix<T>,
    V: FnMut(usize, &Matrix<T>),
{
    let h = sig.h();
    let half = h * T::lit(0.5);
    let two = T::lit(2.0);
    let mut x = init;
    for i in i0..i1 {
        let ya = sig.get(i);
        let ym = midpoint(sig, i)?;
        let yb = sig.get(i + 1);
        let k1 = rhs(ya, &x);
        let k2 = rhs(&ym, &x.axpy(half, &k1));
        let k3 = rhs(&ym, &x.axpy(half, &k2));
        let k4 = rhs(yb, &x.axpy(h, &k3));
        let incr = k1.axpy(two, &k2).axpy(two, &k3).axpy(T::one(), &k4);
        x = x.axpy(h / T::lit(6.0), &incr);
        if !x.is_finite() {
            return Err(Error::NonFiniteField {
                t: sig.time(i + 1).as_f64(),
            });
        }
        visit(i + 1, &x);
    }
    Ok(x)
}

/// `Φ(t1, t0)` of `Φ' = −k π_{y(t)} Φ`, `Φ(t0) = I`. Times snap to the sample grid.
pub fn transition_matrix<T: Scalar>(
    sig: &DirectionSignal<T>,
    k: T,
    t0: T,
    t1: T,
) -> Result<Matrix<T>> {
    let i0 = grid_index(sig, t0)?;
    let i1 = grid_index(sig, t1)?;
    if i1 < i0 {
        return Err(Error::WindowTooShort {
            delta: (t1 - t0).as_f64(),
            h: sig.h().as_f64(),
            span: sig.span().as_f64(),
        });
    }
    let n = sig.dim();
    integrate_on_signal(
        sig,
        i0,
        i1,
        Matrix::identity(n),
        |y, phi| y.projector().matmul(phi).scale(-k),
        |_, _| {},
    )
}

/// `M(t)` along a direction signal from `m0`, one matrix per sample.
pub fn m_flow<T: Scalar>(sig: &DirectionSignal<T>, k: T, m0: Matrix<T>) -> Result<Vec<Matrix<T>>> {
    let mut out = Vec::with_capacity(sig.len());
    out.push(m0.clone());
    integrate_on_signal(
        sig,
        0,
        sig.len() - 1,
        m0,
        |y, m| m_matrix_rhs(m, y, k),
        |_, m| out.push(m.clone()),
    )?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    TransitionLower,
    TransitionUpper,
    UltimateSup,
    UltimateLimsup,
    DetPositive,
    DetFloor,
    ConditionBound,
    JacobiIdentity,
}

/// A failed bound: `margin` is `bound − observed` (negative) or the excess residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub bound: BoundId,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionCheck<T> {
    pub t0: T,
    pub t1: T,
    pub norm: T,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionAudit<T> {
    pub checks: Vec<TransitionCheck<T>>,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Copy)]
pub struct TransitionAuditConfig<T> {
    /// base window; intervals of δ, 2δ and 4δ are audited in turn
    pub delta: T,
    pub pairs: usize,
    pub seed: u64,
}

/// Samples `pairs` intervals and checks `e^{−kT} ≤ ‖Φ‖ ≤ e^{−γT}(1 + 10⁻³)` on each.
///
/// Interval starts are drawn uniformly from the grid with [`NoiseRng`]; lengths that
/// do not fit in the signal are skipped.
pub fn check_transition_bounds<T: Scalar>(
    sig: &DirectionSignal<T>,
    k: T,
    gamma: T,
    cfg: &TransitionAuditConfig<T>,
) -> Result<TransitionAudit<T>> {
    let spans: Vec<T> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&m| cfg.delta * T::lit(m))
        .filter(|&s| s <= sig.span())
        .collect();
    if spans.is_empty() {
        return Err(Error::WindowTooShort {
            delta: cfg.delta.as_f64(),
            h: sig.h().as_f64(),
            span: sig.span().as_f64(),
        });
    }
    let mut rng = NoiseRng::new(cfg.seed, 0);
    let mut checks = Vec::with_capacity(cfg.pairs);
    let mut violations = Vec::new();
    let h = sig.h();
    for j in 0..cfg.pairs {
        let span = spans[j % spans.len()];
        let steps = (span / h).round().as_f64() as usize;
        let free = sig.len() - 1 - steps;
        let start = ((rng.unit() * (free + 1) as f64) as usize).min(free);
        let t0 = sig.time(start);
        let t1 = sig.time(start + steps);
        let phi = transition_matrix(sig, k, t0, t1)?;
        let dt = t1 - t0;
        let norm = phi.spectral_norm();
        let lower = (-k * dt).exp();
        let upper = (-gamma * dt).exp();
        if norm < lower * (T::one() - T::lit(1e-12)) {
            violations.push(Violation {
                t: t0.as_f64(),
                bound: BoundId::TransitionLower,
                margin: (norm - lower).as_f64(),
            });
        }
        let ceiling = upper * (T::one() + T::lit(TRANSITION_TOL));
        if norm > ceiling {
            violations.push(Violation {
                t: t0.as_f64(),
                bound: BoundId::TransitionUpper,
                margin: (ceiling - norm).as_f64(),
            });
        }
        checks.push(TransitionCheck {
            t0,
            t1,
            norm,
            lower,
            upper,
        });
    }
    Ok(TransitionAudit { checks, violations })
}

/// Whether a trace is long enough for late-time claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Evaluated,
    #[serde(rename = "insufficient horizon")]
    InsufficientHorizon,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UltimateBoundCheck<T> {
    /// `|x̃₁(0)| + |a|/γ`
    pub sup_bound: T,
    pub sup_observed: T,
    /// `|a|/γ`
    pub late_bound: T,
    /// max of `|x̃₁|` over the final 20% of the run, when the horizon allows
    pub late_observed: Option<T>,
    pub horizon: Horizon,
    pub violations: Vec<Violation>,
}

/// Basic-filter error envelope under a constant bias.
///
/// `x̂₁` evolves independently of `M` and `ẑ⋆`, so any trace carries the basic
/// filter error `x − x̂₁`.
pub fn ultimate_bound_check<T: Scalar>(
    trace: &SimulationTrace<T>,
    gamma: T,
) -> UltimateBoundCheck<T> {
    let errs: Vec<T> = trace
        .samples
        .iter()
        .map(|s| (&s.x_true - &s.state.x_hat_1).norm())
        .collect();
    let a = trace.scenario.a_true.norm();
    let e0 = errs.first().copied().unwrap_or(T::zero());
    let slack = T::one() + T::lit(BOUND_SLACK);
    let abs_tol = T::lit(1e-9);
    let (late_bound, sup_bound) = if gamma > T::zero() {
        let b = a / gamma;
        (b, e0 + b)
    } else {
        (T::infinity(), T::infinity())
    };
    let mut violations = Vec::new();
    let (sup_idx, sup_observed) =
        errs.iter()
            .copied()
            .enumerate()
            .fold(
                (0, T::zero()),
                |best, (i, e)| if e > best.1 { (i, e) } else { best },
            );
    if sup_observed > sup_bound * slack + abs_tol {
        violations.push(Violation {
            t: trace.samples[sup_idx].t.as_f64(),
            bound: BoundId::UltimateSup,
            margin: (sup_bound * slack - sup_observed).as_f64(),
        });
    }

    let horizon = if gamma <= T::zero() {
        Horizon::NotApplicable
    } else if trace.span() >= T::lit(SETTLE_FACTOR) / gamma {
        Horizon::Evaluated
    } else {
        Horizon::InsufficientHorizon
    };
    let late_observed = (horizon == Horizon::Evaluated).then(|| {
        let start = late_start(errs.len());
        let (i, e) =
            errs[start..]
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, T::zero()),
                    |best, (i, e)| if e > best.1 { (i, e) } else { best },
                );
        if e > late_bound * slack + abs_tol {
            violations.push(Violation {
                t: trace.samples[start + i].t.as_f64(),
                bound: BoundId::UltimateLimsup,
                margin: (late_bound * slack - e).as_f64(),
            });
        }
        e
    });
    UltimateBoundCheck {
        sup_bound,
        sup_observed,
        late_bound,
        late_observed,
        horizon,
        violations,
    }
}

fn late_start(len: usize) -> usize {
    ((1.0 - LATE_FRACTION) * len.saturating_sub(1) as f64).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MHealth<T> {
    pub det_min: T,
    /// `(n / (k(n−1)))ⁿ`
    pub det_floor: T,
    pub det_late_min: Option<T>,
    pub cond_max: T,
    /// `(2/Δ)(‖M‖_F/√n)ⁿ` at the sample of largest condition number
    pub cond_bound_at_max: T,
    pub jacobi_max_residual: Option<T>,
    pub horizon: Horizon,
    pub violations: Vec<Violation>,
}

/// Determinant, condition number and Jacobi-formula checks on the recorded `M(t)`.
///
/// The late-time floor is only assessed when the trace spans at least `settle`
/// seconds. The Jacobi residual at sample `i` is
/// `|Δ'_num − Δ tr(M⁻¹M')| / (Δ (|tr M⁻¹| + k(n−1)))`: the denominator is the size of
/// the two terms whose difference is `Δ'`, which stays meaningful when `Δ' ≈ 0`.
pub fn m_health<T: Scalar>(trace: &SimulationTrace<T>, k: T, settle: Option<T>) -> MHealth<T> {
    let n = trace.dim();
    let nf = T::from_count(n);
    let h = trace.h();
    let mut violations = Vec::new();
    let dets: Vec<T> = trace.samples.iter().map(|s| s.state.m.det()).collect();

    let mut det_min = T::infinity();
    let mut cond_max = T::zero();
    let mut cond_bound_at_max = T::zero();
    for (s, &det) in trace.samples.iter().zip(&dets) {
        det_min = det_min.min(det);
        if !(det > T::zero()) {
            violations.push(Violation {
                t: s.t.as_f64(),
                bound: BoundId::DetPositive,
                margin: det.as_f64(),
            });
            continue;
        }
        let cond = s.state.m.spectral_condition();
        let bound = T::lit(2.0) / det * (s.state.m.frobenius_norm() / nf.sqrt()).powi(n as i32);
        if cond > bound * (T::one() + T::lit(1e-9)) {
            violations.push(Violation {
                t: s.t.as_f64(),
                bound: BoundId::ConditionBound,
                margin: (bound - cond).as_f64(),
            });
        }
        if cond > cond_max || cond_max == T::zero() {
            cond_max = cond;
            cond_bound_at_max = bound;
        }
    }

    let jacobi_max_residual = (trace.scenario.mode == ObserverMode::Cascade && dets.len() >= 3)
        .then(|| {
            let mut worst = T::zero();
            for i in 1..dets.len() - 1 {
                let s = &trace.samples[i];
                let det = dets[i];
                if !(det > T::zero()) {
                    continue;
                }
                let Ok(inv) = guarded_inverse(&s.state.m) else {
                    continue;
                };
                let mdot = m_matrix_rhs(&s.state.m, &s.y, k);
                let jac = det * inv.inverse.matmul(&mdot).trace();
                let numeric = (dets[i + 1] - dets[i - 1]) / (T::lit(2.0) * h);
                let scale = det * (inv.inverse.trace().abs() + k * (nf - T::one()));
                let r = (numeric - jac).abs() / scale;
                if r > T::lit(JACOBI_TOL) {
                    violations.push(Violation {
                        t: s.t.as_f64(),
                        bound: BoundId::JacobiIdentity,
                        margin: (r - T::lit(JACOBI_TOL)).as_f64(),
                    });
                }
                worst = worst.max(r);
            }
            worst
        });

    let det_floor = determinant_floor(n, k);
    let horizon = match settle {
        Some(s) if trace.span() >= s => Horizon::Evaluated,
        Some(_) => Horizon::InsufficientHorizon,
        None => Horizon::NotApplicable,
    };
    let det_late_min = (horizon == Horizon::Evaluated
        && trace.scenario.mode == ObserverMode::Cascade)
        .then(|| {
            let start = late_start(dets.len());
            let (i, d) = dets[start..].iter().copied().enumerate().fold(
                (0, T::infinity()),
                |best, (i, d)| if d < best.1 { (i, d) } else { best },
            );
            let floor = det_floor * (T::one() - T::lit(BOUND_SLACK));
            if d < floor {
                violations.push(Violation {
                    t: trace.samples[start + i].t.as_f64(),
                    bound: BoundId::DetFloor,
                    margin: (d - floor).as_f64(),
                });
            }
            d
        });

    MHealth {
        det_min,
        det_floor,
        det_late_min,
        cond_max,
        cond_bound_at_max,
        jacobi_max_residual,
        horizon,
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit<T> {
    /// minus the least-squares slope of `ln e(t)` (1/s)
    pub rate: T,
    pub r_squared: T,
    pub points: usize,
}

/// Least-squares fit of `ln e(t)` over `[t_start, t_end]`.
pub fn fit_decay_rate<T: Scalar>(
    times: &[T],
    values: &[T],
    t_start: T,
    t_end: T,
) -> Result<DecayFit<T>> {
    let mut pts = Vec::new();
    for (&t, &e) in times.iter().zip(values) {
        if t < t_start || t > t_end {
            continue;
        }
        if !(e.as_f64() > 1e-300) {
            return Err(Error::NonPositiveError {
                t: t.as_f64(),
                value: e.as_f64(),
            });
        }
        pts.push((t, e.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::WindowTooShort {
            delta: (t_end - t_start).as_f64(),
            h: 0.0,
            span: 0.0,
        });
    }
    let m = T::from_count(pts.len());
    let tm = pts.iter().map(|p| p.0).sum::<T>() / m;
    let lm = pts.iter().map(|p| p.1).sum::<T>() / m;
    let stt: T = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let stl: T = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let sll: T = pts.iter().map(|p| (p.1 - lm) * (p.1 - lm)).sum();
    let slope = stl / stt;
    let sse: T = pts
        .iter()
        .map(|p| {
            let r = p.1 - (lm + slope * (p.0 - tm));
            r * r
        })
        .sum();
    let r_squared = if sll > T::zero() {
        T::one() - sse / sll
    } else {
        T::one()
    };
    Ok(DecayFit {
        rate: -slope,
        r_squared,
        points: pts.len(),
    })
}

/// Options for [`bound_report`].
#[derive(Debug, Clone, Copy)]
pub struct BoundOptions<T> {
    pub delta: T,
    pub epsilon: T,
    pub pairs: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for BoundOptions<T> {
    fn default() -> Self {
        Self {
            delta: T::lit(4.0 * std::f64::consts::PI),
            epsilon: T::lit(0.05),
            pairs: 50,
            seed: 1,
        }
    }
}

/// Every bound check on one trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub gamma_theory: T,
    pub gamma_empirical: Option<T>,
    pub ultimate_bound_theory: T,
    pub ultimate_bound_observed: Option<T>,
    pub late_time: Horizon,
    pub det_floor_theory: T,
    pub det_min_observed: T,
    pub det_late_min_observed: Option<T>,
    pub cond_bound_theory: T,
    pub cond_max_observed: T,
    pub jacobi_max_residual: Option<T>,
    pub transition_pairs_checked: usize,
    pub violations: Vec<Violation>,
}

impl<T> BoundReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Runs the excitation certificate, transition audit, ultimate bound and `M` checks.
pub fn bound_report<T: Scalar>(
    trace: &SimulationTrace<T>,
    opts: &BoundOptions<T>,
) -> Result<(BoundReport<T>, PeReport<T>)> {
    let k = trace.scenario.gains.k;
    let sig = DirectionSignal::bearing(trace)?;
    let pe = pe_report(&sig, opts.delta, opts.epsilon, k)?;
    let gamma = pe.gamma;
    let mut violations = Vec::new();

    let mut pairs = 0;
    if pe.passes_integral {
        let audit = check_transition_bounds(
            &sig,
            k,
            gamma,
            &TransitionAuditConfig {
                delta: pe.delta,
                pairs: opts.pairs,
                seed: opts.seed,
            },
        )?;
        pairs = audit.checks.len();
        violations.extend(audit.violations);
    }

    let ultimate = ultimate_bound_check(trace, gamma);
    violations.extend(ultimate.violations.iter().cloned());

    let settle = (gamma > T::zero()).then(|| T::lit(SETTLE_FACTOR) / gamma);
    let health = m_health(trace, k, settle);
    violations.extend(health.violations.iter().cloned());

    // stop the fit once the error reaches round-off level
    let span = trace.span();
    let errs = trace.series(|s| s.err_xz);
    let floor = errs.first().copied().unwrap_or(T::zero()) * T::lit(1e-9);
    let t_end = trace
        .samples
        .iter()
        .find(|s| s.err_xz < floor)
        .map_or(span, |s| s.t)
        .min(span * T::lit(0.8));
    let gamma_empirical = fit_decay_rate(&trace.times(), &errs, span * T::lit(0.1), t_end)
        .ok()
        .map(|f| f.rate);

    violations.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap_or(std::cmp::Ordering::Equal));
    Ok((
        BoundReport {
            gamma_theory: gamma,
            gamma_empirical,
            ultimate_bound_theory: ultimate.late_bound,
            ultimate_bound_observed: ultimate.late_observed,
            late_time: ultimate.horizon,
            det_floor_theory: health.det_floor,
            det_min_observed: health.det_min,
            det_late_min_observed: health.det_late_min,
            cond_bound_theory: health.cond_bound_at_max,
            cond_max_observed: health.cond_max,
            jacobi_max_residual: health.jacobi_max_residual,
            transition_pairs_checked: pairs,
            violations,
        },
        pe,
    ))
}
