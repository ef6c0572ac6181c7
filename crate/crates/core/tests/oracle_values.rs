//! Values frozen from an independent numpy/scipy reimplementation (adaptive
//! quadrature and `solve_ivp` at rtol 1e-12 for the continuous-time quantities).

use bearing_core::{
    circle_scenario, pe_integral, pe_report, simulate, transition_matrix, DirectionSignal, Vector,
};

fn circle_bearing(duration: f64) -> DirectionSignal<f64> {
    let count = (duration / 0.01).round() as usize + 1;
    DirectionSignal::sample_fn(0.0, 0.01, count, |t: f64| {
        Vector::from_f64(&[(0.5 * t).cos(), (0.5 * t).sin(), 3.0])
    })
    .unwrap()
}

#[test]
fn bias_estimate_after_100s() {
    let tr = simulate(&circle_scenario::<f64>()).unwrap();
    let a_hat = &tr.last().unwrap().output.a_hat;
    let oracle = [0.29946443, 0.64832307, 0.98575586];
    for i in 0..3 {
        assert!((a_hat[i] - oracle[i]).abs() < 1e-7, "{a_hat:?}");
    }
    let last = tr.last().unwrap();
    assert!((last.err_xz - 0.14760560825521724).abs() < 1e-9);
    assert!((last.err_x - 0.29908620802790226).abs() < 1e-9);
    assert!((last.err_a - 0.03296641061192719).abs() < 1e-9);
}

#[test]
fn window_excitation_of_circle() {
    // continuous ∫ π_y over any 12.57 s window: λ_min = 1.256999889
    let sig = circle_bearing(100.0);
    let lambdas = pe_integral(&sig, 12.57).unwrap();
    for l in &lambdas {
        assert!((l - 1.256999889).abs() < 1e-5, "{l}");
    }
    let rep = pe_report(&sig, 12.57, 0.05, 0.5).unwrap();
    assert!((rep.mu - (1.256999889 - 1e-4 * 12.57)).abs() < 1e-5);
}

#[test]
fn transition_norm_over_one_period() {
    let sig = circle_bearing(20.0);
    let steps = (4.0 * std::f64::consts::PI / 0.01).round() as usize;
    let t1 = sig.time(steps);
    let phi = transition_matrix(&sig, 0.5, 0.0, t1).unwrap();
    // the grid endpoint is 12.57, 3.6e-3 past 4π (where the oracle gives 0.7577517718)
    assert!((t1 - 12.57).abs() < 1e-12);
    assert!(
        (phi.spectral_norm() - 0.7576796258).abs() < 1e-5,
        "{}",
        phi.spectral_norm()
    );
}
