use bearing_core::linalg::direction;
use bearing_core::{
    distinguishing_input, indistinguishable_pair, output_history, pe_equivalence_audit,
    pe_integral, pe_report, pe_scalar, DirectionSignal, DirectionVector, NoiseRng, Vector,
};
use proptest::prelude::*;

fn tumbling(duration: f64, h: f64, w1: f64, w2: f64) -> DirectionSignal<f64> {
    let count = (duration / h).round() as usize + 1;
    DirectionSignal::sample_fn(0.0, h, count, |t| {
        Vector::from_f64(&[
            (w1 * t).cos() * (w2 * t).cos() + 0.3,
            (w1 * t).sin() * (w2 * t).cos(),
            (w2 * t).sin() + 2.0,
        ])
    })
    .unwrap()
}

fn random_unit(rng: &mut NoiseRng, n: usize) -> DirectionVector<f64> {
    loop {
        let v: Vector<f64> = (0..n).map(|_| rng.symmetric(1.0)).collect();
        if v.norm() > 0.1 {
            return direction(&v, 1e-9).unwrap();
        }
    }
}

fn scalar_minimum_within(sig: &DirectionSignal<f64>, delta: f64, seed: u64) {
    let lambdas = pe_integral(sig, delta).unwrap();
    let mut best = vec![f64::INFINITY; lambdas.len()];
    let mut rng = NoiseRng::new(seed, 0);
    for _ in 0..10_000 {
        let b = random_unit(&mut rng, 3);
        for (m, v) in best.iter_mut().zip(pe_scalar(sig, &b, delta).unwrap()) {
            *m = m.min(v);
        }
    }
    for (i, (&l, &m)) in lambdas.iter().zip(&best).enumerate() {
        assert!(m >= l - 1e-12, "window {i}: {m} < {l}");
        assert!((m - l) <= 0.02 * l, "window {i}: {m} vs {l}");
    }
}

#[test]
fn scalar_minimum_matches_matrix_eigenvalue() {
    let circle = DirectionSignal::sample_fn(0.0, 0.05, 601, |t: f64| {
        Vector::from_f64(&[(0.5 * t).cos(), (0.5 * t).sin(), 3.0])
    })
    .unwrap();
    scalar_minimum_within(&circle, 12.57, 11);
    scalar_minimum_within(&tumbling(20.0, 0.05, 1.0, 0.4), 8.0, 12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn window_values_within_range(w1 in 0.0f64..2.0, w2 in 0.0f64..1.0, delta in 0.5f64..4.0) {
        let sig = tumbling(8.0, 0.02, w1, w2);
        for l in pe_integral(&sig, delta).unwrap() {
            prop_assert!(l >= 0.0 && l <= delta + 1e-12);
        }
        let rep = pe_report(&sig, delta, 0.01, 0.5).unwrap();
        if rep.passes_integral {
            prop_assert!(rep.mu > 0.0 && rep.mu < rep.delta);
            prop_assert!(rep.gamma > 0.0);
        }
    }
}

#[test]
fn constant_input_pair_is_indistinguishable() {
    let v = Vector::<f64>::from_f64(&[0.1, 0.2, 0.3]);
    let a = Vector::from_f64(&[0.33, 0.66, 0.99]);
    let (x1, x2) = indistinguishable_pair(&v, &a, 1.0, 2.5).unwrap();
    let vc = v.clone();
    let h1 = output_history(&x1, &a, |_t| vc.clone(), 0.01, 2000).unwrap();
    let h2 = output_history(&x2, &a, |_t| vc.clone(), 0.01, 2000).unwrap();
    for (p, q) in h1.iter().zip(&h2) {
        for i in 0..3 {
            assert!((p[i] - q[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn circular_input_separates_random_pairs() {
    let input = distinguishing_input(3).unwrap();
    let a = Vector::from_f64(&[0.33, 0.66, 0.99]);
    let mut rng = NoiseRng::new(5, 0);
    for _ in 0..100 {
        let draw = |rng: &mut NoiseRng| -> Vector<f64> {
            let mut v: Vector<f64> = (0..3).map(|_| rng.symmetric(3.0)).collect();
            v[2] += 5.0;
            v
        };
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        let hp = output_history(&p, &a, |t| input.eval(t), 0.05, 400).unwrap();
        let hq = output_history(&q, &a, |t| input.eval(t), 0.05, 400).unwrap();
        let gap = hp
            .iter()
            .zip(&hq)
            .map(|(u, w)| (u.as_vector() - w.as_vector()).norm())
            .fold(0.0, f64::max);
        assert!(gap > 1e-6, "pair {p:?} {q:?} not separated");
    }
}

#[test]
fn audit_flips_together_when_motion_stops() {
    // circle for 20 s, then frozen at the last bearing
    let h = 0.01;
    let stop = 20.0;
    let count = 4001;
    let sig = DirectionSignal::sample_fn(0.0, h, count, |t: f64| {
        let s = t.min(stop);
        Vector::from_f64(&[(0.5 * s).cos(), (0.5 * s).sin(), 3.0])
    })
    .unwrap();
    let audit = pe_equivalence_audit(&sig, 5.0).unwrap();
    let first_fail = |v: &[bool]| v.iter().position(|p| !p).unwrap();
    let fi = first_fail(&audit.integral_pass);
    let fd = first_fail(&audit.derivative_pass);
    assert!(
        fi.abs_diff(fd) <= 1,
        "integral flips at {fi}, derivative at {fd}"
    );
    assert!(audit.violations.len() <= 2, "{:?}", audit.violations);
    assert!(audit.integral_pass[0] && audit.derivative_pass[0]);
}
