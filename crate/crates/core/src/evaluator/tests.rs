use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::circuit::{CircuitBuilder, Clifford, Prep};
use crate::pauli::{Letter, PauliString};
use crate::testutil::*;

fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
}

#[test]
fn rz_on_plus_gives_cos() {
    let mut b = CircuitBuilder::new(1);
    let t = b.param("phi");
    b.clifford(Clifford::H(0));
    b.rotation(PauliString::single(1, 0, Letter::Z).unwrap(), t, 1.0);
    let c = b.build(Prep::InCircuit { prefix: 1 }, 1).unwrap();
    let x = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Letter::X).unwrap())]).unwrap();
    for phi in [0.0, 0.3, 1.2, -2.5, PI] {
        let bound = c.bind(&[phi]).unwrap();
        assert_close(expval_heisenberg(&bound, &x).unwrap(), phi.cos(), 1e-14, "heisenberg");
        assert_close(expval_full(&bound, &x).unwrap(), phi.cos(), 1e-14, "full");
        assert_close(expval_cone(&bound, &x).unwrap(), phi.cos(), 1e-14, "cone");
    }
}

#[test]
fn single_qubit_heisenberg_signs() {
    // RY(φ)|0⟩: ⟨Z⟩ = cos φ, ⟨X⟩ = sin φ. RX(φ)|0⟩: ⟨Y⟩ = −sin φ.
    for (axis, obs, f) in [
        (Letter::Y, Letter::Z, f64::cos as fn(f64) -> f64),
        (Letter::Y, Letter::X, f64::sin),
        (Letter::X, Letter::Y, |p: f64| -p.sin()),
        (Letter::X, Letter::Z, f64::cos),
    ] {
        let mut b = CircuitBuilder::new(1);
        let t = b.param("phi");
        b.rotation(PauliString::single(1, 0, axis).unwrap(), t, 1.0);
        let c = b.build(Prep::InCircuit { prefix: 0 }, 1).unwrap();
        let h = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, obs).unwrap())]).unwrap();
        for phi in [0.4, -1.1, 2.9] {
            let bound = c.bind(&[phi]).unwrap();
            assert_close(expval_heisenberg(&bound, &h).unwrap(), f(phi), 1e-14, "heisenberg");
            assert_close(expval_full(&bound, &h).unwrap(), f(phi), 1e-14, "full");
        }
    }
}

#[test]
fn identity_circuit_cone_uses_one_qubit() {
    let n = 40;
    let c = CircuitBuilder::new(n).build(Prep::InCircuit { prefix: 0 }, 0).unwrap();
    let h = PauliSum::from_terms(n, [(1.0, PauliString::single(n, 3, Letter::Z).unwrap())]).unwrap();
    let plan = ConePlan::new(&c, &h, DEFAULT_CONE_CAP).unwrap();
    assert_eq!(plan.max_cone(), 1);
    assert_eq!(expval_cone(&c.bind(&[]).unwrap(), &h).unwrap(), 1.0);
}

#[test]
fn backends_agree_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let n = rng.random_range(1..=12);
        let layers = rng.random_range(1..=3);
        let c = random_circuit(&mut rng, n, layers, 3);
        let h = random_observable(&mut rng, n, 4, 3);
        let bound = c.bind(&random_theta(&mut rng, 3)).unwrap();
        let full = expval_full(&bound, &h).unwrap();
        let cone = expval_cone(&bound, &h).unwrap();
        let heis = expval_heisenberg(&bound, &h).unwrap();
        assert_close(cone, full, 1e-10, &format!("cone case {case}"));
        assert_close(heis, full, 1e-10, &format!("heisenberg case {case}"));
    }
}

#[test]
fn heisenberg_matches_full_on_tableau_preps() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..60 {
        let n = rng.random_range(2..=10);
        let c = with_tableau_prep(&random_circuit(&mut rng, n, 2, 2), random_tableau(&mut rng, n));
        let h = random_observable(&mut rng, n, 5, 3);
        let bound = c.bind(&random_theta(&mut rng, 2)).unwrap();
        let full = expval_full(&bound, &h).unwrap();
        assert_close(expval_heisenberg(&bound, &h).unwrap(), full, 1e-10, &format!("case {case}"));
        assert!(matches!(expval_cone(&bound, &h), Err(Error::WrongBackend(_))));
    }
}

#[test]
fn engines_match_parameter_shift() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..40 {
        let n = rng.random_range(2..=8);
        let base = random_circuit(&mut rng, n, 2, 4);
        let h = random_observable(&mut rng, n, 4, 2);
        let theta = random_theta(&mut rng, 4);
        let reference = parameter_shift_gradient(Backend::Full, &base, &h, &theta).unwrap();
        let e_ref = expval_full(&base.bind(&theta).unwrap(), &h).unwrap();
        for backend in [Backend::Full, Backend::Cone, Backend::Heisenberg] {
            let ev = Evaluator::new(backend, &base, &h).unwrap();
            let (e, g) = ev.energy_and_gradient(&theta).unwrap();
            assert_close(e, e_ref, 1e-10, &format!("{backend} energy, case {case}"));
            assert_close(ev.energy(&theta).unwrap(), e_ref, 1e-10, "energy-only path");
            for (a, b) in g.iter().zip(&reference) {
                assert_close(*a, *b, 1e-9, &format!("{backend} gradient, case {case}"));
            }
        }
        let tab = with_tableau_prep(&base, random_tableau(&mut rng, n));
        let reference = parameter_shift_gradient(Backend::Full, &tab, &h, &theta).unwrap();
        for backend in [Backend::Full, Backend::Heisenberg] {
            let (_, g) = Evaluator::new(backend, &tab, &h).unwrap().energy_and_gradient(&theta).unwrap();
            for (a, b) in g.iter().zip(&reference) {
                assert_close(*a, *b, 1e-9, &format!("{backend} tableau gradient, case {case}"));
            }
        }
    }
}

#[test]
fn parameter_shift_on_rx() {
    let mut b = CircuitBuilder::new(1);
    let t = b.param("t");
    b.rotation(PauliString::single(1, 0, Letter::X).unwrap(), t, 1.0);
    let c = b.build(Prep::InCircuit { prefix: 0 }, 1).unwrap();
    let z = PauliSum::from_terms(1, [(1.0, PauliString::single(1, 0, Letter::Z).unwrap())]).unwrap();
    for theta in [0.0, 0.7, -2.0, 3.0] {
        let g = parameter_shift_gradient(Backend::Full, &c, &z, &[theta]).unwrap();
        assert_close(g[0], -theta.sin(), 1e-14, "d<Z>/dθ");
    }
}

#[test]
fn heisenberg_term_cap_is_a_resource_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 8;
    let c = random_circuit(&mut rng, n, 6, 3);
    let h = random_observable(&mut rng, n, 3, 2);
    let plan = HeisenbergPlan::new(&c, &h, 4);
    assert!(matches!(plan.run(&[0.3, 0.5, 0.7], false), Err(Error::Resource(_))));
}

#[test]
fn zero_shots_rejected_and_z_on_zero_is_exact() {
    let c = CircuitBuilder::new(2).build(Prep::InCircuit { prefix: 0 }, 0).unwrap().bind(&[]).unwrap();
    let z = PauliString::single(2, 1, Letter::Z).unwrap();
    assert!(measure_pauli_sampled(&c, &z, 0, 1).is_err());
    for shots in [1, 17, 1000] {
        let est = measure_pauli_sampled(&c, &z, shots, 5).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
    }
}

#[test]
fn sampled_means_match_reported_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 5;
    let c = random_circuit(&mut rng, n, 3, 3);
    let bound = c.bind(&random_theta(&mut rng, 3)).unwrap();
    let p = PauliString::parse(n, "X0 Y2 Z3").unwrap();
    let exact = prepare_state(&bound, 25).unwrap().expectation_pauli(&p).unwrap().re;
    let shots = 2000;
    let ests: Vec<ShotEstimate> = (0..50).map(|s| measure_pauli_sampled(&bound, &p, shots, s).unwrap()).collect();
    let mean = ests.iter().map(|e| e.mean).sum::<f64>() / 50.0;
    let spread = (ests.iter().map(|e| (e.mean - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
    let reported = ests.iter().map(|e| e.std_error).sum::<f64>() / 50.0;
    assert!((spread / reported - 1.0).abs() < 0.2, "spread {spread} vs reported {reported}");
    assert!((mean - exact).abs() < 5.0 * reported / 50f64.sqrt());
    // Reproducible under a fixed seed.
    assert_eq!(measure_pauli_sampled(&bound, &p, shots, 3).unwrap(), ests[3]);
}
