use num_complex::Complex64;

use crate::circuit::{BoundGate, Circuit, Gate, Initial};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::state::{accumulate_pauli, apply_bound_gate, inner, matrix_element_pauli};

pub(crate) fn bind(g: &Gate, theta: &[f64]) -> BoundGate {
    match *g {
        Gate::Clifford(c) => BoundGate::Clifford(c),
        Gate::Rotation(r) => BoundGate::Rotation {
            axis: r.axis,
            angle: r.scale * theta[r.param],
        },
    }
}

/// Energy of `gates` applied to `initial`, optionally accumulating the
/// adjoint gradient into `grad`. Uses `dE/dφ = Im⟨λ|P|ψ⟩` for
/// `exp(-iφP/2)`, with `λ` the back-propagated `H|ψ⟩`.
pub(crate) fn run(initial: &[Complex64], gates: &[Gate], theta: &[f64], h: &PauliSum, grad: Option<&mut [f64]>) -> f64 {
    let mut psi = initial.to_vec();
    for g in gates {
        apply_bound_gate(&mut psi, &bind(g, theta));
    }
    let mut lambda = vec![Complex64::new(0.0, 0.0); psi.len()];
    for (c, p) in h.terms() {
        accumulate_pauli(&psi, p, *c, &mut lambda);
    }
    let energy = inner(&psi, &lambda).re;
    let Some(grad) = grad else {
        return energy;
    };
    let Some(first) = gates.iter().position(|g| matches!(g, Gate::Rotation(_))) else {
        return energy;
    };
    for g in gates[first..].iter().rev() {
        if let Gate::Rotation(r) = g {
            grad[r.param] += r.scale * matrix_element_pauli(&lambda, &r.axis, &psi).im;
        }
        let undo = bind(g, theta).inverse();
        apply_bound_gate(&mut psi, &undo);
        apply_bound_gate(&mut lambda, &undo);
    }
    energy
}

pub(crate) struct FullPlan {
    initial: Vec<Complex64>,
    gates: Vec<Gate>,
    h: PauliSum,
}

impl FullPlan {
    pub(crate) fn new(c: &Circuit, h: &PauliSum, cap: usize) -> Result<Self> {
        let n = c.n_qubits();
        if n > cap {
            return Err(Error::Resource(format!(
                "{n} qubits exceeds the state-vector cap of {cap}"
            )));
        }
        let initial = match c.initial() {
            Initial::Zero => {
                let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
                v[0] = Complex64::new(1.0, 0.0);
                v
            }
            Initial::Tableau(t) => t.to_statevector(cap)?.into_amplitudes(),
        };
        Ok(FullPlan {
            initial,
            gates: c.gates().to_vec(),
            h: h.clone(),
        })
    }

    pub(crate) fn run(&self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        run(&self.initial, &self.gates, theta, &self.h, grad)
    }
}
