//! Random instance generators shared by unit tests.

use std::sync::Arc;

use rand::Rng;

use crate::circuit::{Circuit, CircuitBuilder, Clifford, Prep};
use crate::pauli::{Letter, PauliString, PauliSum};
use crate::tableau::StabilizerTableau;

pub(crate) fn random_letter(rng: &mut impl Rng) -> Letter {
    [Letter::X, Letter::Y, Letter::Z][rng.random_range(0..3)]
}

/// Random Hermitian string of weight `1..=max_weight` on qubits within a
/// window of `span` sites.
pub(crate) fn random_local_pauli(rng: &mut impl Rng, n: usize, max_weight: usize, span: usize) -> PauliString {
    let weight = rng.random_range(1..=max_weight.min(n));
    let span = span.max(weight).min(n);
    let start = rng.random_range(0..=n - span);
    let mut sites: Vec<usize> = (start..start + span).collect();
    for k in (1..sites.len()).rev() {
        sites.swap(k, rng.random_range(0..=k));
    }
    sites.truncate(weight);
    PauliString::from_letters(n, sites.into_iter().map(|q| (q, random_letter(rng)))).unwrap()
}

pub(crate) fn random_clifford(rng: &mut impl Rng, n: usize) -> Clifford {
    let q = rng.random_range(0..n);
    if n == 1 {
        return [Clifford::H(q), Clifford::S(q), Clifford::Sdg(q)][rng.random_range(0..3)];
    }
    let mut r = rng.random_range(0..n - 1);
    if r >= q {
        r += 1;
    }
    match rng.random_range(0..5) {
        0 => Clifford::H(q),
        1 => Clifford::S(q),
        2 => Clifford::Sdg(q),
        3 => Clifford::Cz(q, r),
        _ => Clifford::Cnot(q, r),
    }
}

pub(crate) fn random_observable(rng: &mut impl Rng, n: usize, terms: usize, max_weight: usize) -> PauliSum {
    PauliSum::from_terms(
        n,
        (0..terms).map(|_| (rng.random_range(-1.0..1.0), random_local_pauli(rng, n, max_weight, max_weight + 1))),
    )
    .unwrap()
}

/// Mixed Clifford/rotation circuit with shared parameters; a short random
/// Clifford prefix serves as the in-circuit preparation.
pub(crate) fn random_circuit(rng: &mut impl Rng, n: usize, layers: usize, n_params: usize) -> Circuit {
    let mut b = CircuitBuilder::new(n);
    let params: Vec<usize> = (0..n_params).map(|k| b.param(format!("t{k}"))).collect();
    let prefix = rng.random_range(0..=n);
    for _ in 0..prefix {
        b.clifford(random_clifford(rng, n));
    }
    for _ in 0..layers * n {
        if rng.random_bool(0.25) {
            b.clifford(random_clifford(rng, n));
        } else {
            let axis = random_local_pauli(rng, n, 2, 3);
            let p = params[rng.random_range(0..n_params)];
            b.rotation(axis, p, rng.random_range(-2.0..2.0));
        }
    }
    b.build(Prep::InCircuit { prefix }, layers).unwrap()
}

/// Random stabilizer state obtained by a Clifford walk from `|0…0⟩`.
pub(crate) fn random_tableau(rng: &mut impl Rng, n: usize) -> Arc<StabilizerTableau> {
    let mut t = StabilizerTableau::zero_state(n).unwrap();
    for _ in 0..4 * n {
        t = t.apply_clifford(&random_clifford(rng, n)).unwrap();
    }
    Arc::new(t)
}

/// Same gate list as `c`, started from a tableau instead.
pub(crate) fn with_tableau_prep(c: &Circuit, t: Arc<StabilizerTableau>) -> Circuit {
    Circuit::new(
        c.n_qubits(),
        Prep::Tableau(t),
        c.gates().to_vec(),
        c.param_names().to_vec(),
        c.depth(),
    )
    .unwrap()
}

pub(crate) fn random_theta(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}
