//! Expectation-value engines.
//!
//! Three exact backends share one contract: `⟨prep|U(θ)† H U(θ)|prep⟩`.
//! `full` simulates the whole register, `cone` simulates only the causal
//! cones of the observable terms, and `heisenberg` propagates the
//! observable backwards into a weighted Pauli list that is read off a
//! stabilizer tableau. Gradients come from adjoint differentiation on the
//! state-vector backends and from forward-mode jets during propagation;
//! [`parameter_shift_gradient`] is kept as the reference definition.

mod adjoint;
mod cone;
mod heisenberg;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{BoundCircuit, BoundGate, Circuit, Gate, Initial, Rotation};
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::state::StateVector;
use crate::tableau::DEFAULT_STATEVECTOR_CAP;

pub use cone::ConePlan;
pub use heisenberg::{HeisenbergPlan, DEFAULT_TERM_CAP};
pub use sampling::{measure_pauli_sampled, ShotEstimate};

pub use crate::lightcone::DEFAULT_CONE_CAP;

/// Which exact engine evaluates the energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Full,
    Cone,
    Heisenberg,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Full => "full",
            Backend::Cone => "cone",
            Backend::Heisenberg => "heisenberg",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Backend::Full),
            "cone" => Ok(Backend::Cone),
            "heisenberg" => Ok(Backend::Heisenberg),
            other => Err(Error::Parse(format!("unknown backend `{other}`"))),
        }
    }
}

fn check_dims(n: usize, h: &PauliSum) -> Result<()> {
    if h.n_qubits() != n {
        return Err(Error::Dimension(format!(
            "{}-qubit observable for a {n}-qubit circuit",
            h.n_qubits()
        )));
    }
    Ok(())
}

/// Dense `U|prep⟩`.
pub fn prepare_state(c: &BoundCircuit, cap: usize) -> Result<StateVector> {
    if c.n_qubits > cap {
        return Err(Error::Resource(format!(
            "{} qubits exceeds the state-vector cap of {cap}",
            c.n_qubits
        )));
    }
    let mut psi = match &c.initial {
        Initial::Zero => StateVector::zero(c.n_qubits)?,
        Initial::Tableau(t) => t.to_statevector(cap)?,
    };
    psi.apply_all(&c.gates)?;
    Ok(psi)
}

pub fn expval_full(c: &BoundCircuit, h: &PauliSum) -> Result<f64> {
    check_dims(c.n_qubits, h)?;
    prepare_state(c, DEFAULT_STATEVECTOR_CAP)?.expectation_sum(h)
}

/// Cone-restricted evaluation from `|0…0⟩`; tableau preparations are
/// rejected because the tableau may entangle across the cone boundary.
pub fn expval_cone(c: &BoundCircuit, h: &PauliSum) -> Result<f64> {
    check_dims(c.n_qubits, h)?;
    cone::expval_bound(c, h, DEFAULT_CONE_CAP)
}

pub fn expval_heisenberg(c: &BoundCircuit, h: &PauliSum) -> Result<f64> {
    check_dims(c.n_qubits, h)?;
    heisenberg::expval_bound(c, h, DEFAULT_TERM_CAP)
}

pub fn expval(backend: Backend, c: &BoundCircuit, h: &PauliSum) -> Result<f64> {
    match backend {
        Backend::Full => expval_full(c, h),
        Backend::Cone => expval_cone(c, h),
        Backend::Heisenberg => expval_heisenberg(c, h),
    }
}

/// Literal parameter-shift rule, one pair of evaluations per rotation
/// occurrence: `∂E/∂θ_j = Σ_g (scale_g / 2) [E(φ_g + π/2) − E(φ_g − π/2)]`.
pub fn parameter_shift_gradient(backend: Backend, c: &Circuit, h: &PauliSum, theta: &[f64]) -> Result<Vec<f64>> {
    let bound = c.bind(theta)?;
    let mut grad = vec![0.0; c.n_params()];
    let shift = std::f64::consts::FRAC_PI_2;
    for (k, g) in c.gates().iter().enumerate() {
        let Gate::Rotation(Rotation { param, scale, .. }) = *g else {
            continue;
        };
        let mut shifted = bound.clone();
        let mut energy_at = |delta: f64| -> Result<f64> {
            if let BoundGate::Rotation { axis, angle } = bound.gates[k] {
                shifted.gates[k] = BoundGate::Rotation { axis, angle: angle + delta };
            }
            expval(backend, &shifted, h)
        };
        let plus = energy_at(shift)?;
        let minus = energy_at(-shift)?;
        grad[param] += 0.5 * scale * (plus - minus);
    }
    Ok(grad)
}

enum Plan {
    Full(adjoint::FullPlan),
    Cone(ConePlan),
    Heisenberg(HeisenbergPlan),
}

/// A reusable energy/gradient engine for one circuit structure and one
/// observable. Stateless across calls, so it can be shared between threads.
pub struct Evaluator {
    backend: Backend,
    n_params: usize,
    plan: Plan,
}

impl Evaluator {
    pub fn new(backend: Backend, c: &Circuit, h: &PauliSum) -> Result<Self> {
        check_dims(c.n_qubits(), h)?;
        let plan = match backend {
            Backend::Full => Plan::Full(adjoint::FullPlan::new(c, h, DEFAULT_STATEVECTOR_CAP)?),
            Backend::Cone => Plan::Cone(ConePlan::new(c, h, DEFAULT_CONE_CAP)?),
            Backend::Heisenberg => Plan::Heisenberg(HeisenbergPlan::new(c, h, DEFAULT_TERM_CAP)),
        };
        Ok(Evaluator {
            backend,
            n_params: c.n_params(),
            plan,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.n_params,
                theta.len()
            )));
        }
        Ok(())
    }

    pub fn energy(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        match &self.plan {
            Plan::Full(p) => Ok(p.run(theta, None)),
            Plan::Cone(p) => Ok(p.run(theta, None)),
            Plan::Heisenberg(p) => p.run(theta, false).map(|(e, _)| e),
        }
    }

    pub fn energy_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_theta(theta)?;
        let mut grad = vec![0.0; self.n_params];
        let e = match &self.plan {
            Plan::Full(p) => p.run(theta, Some(&mut grad)),
            Plan::Cone(p) => p.run(theta, Some(&mut grad)),
            Plan::Heisenberg(p) => {
                let (e, g) = p.run(theta, true)?;
                grad = g;
                e
            }
        };
        Ok((e, grad))
    }
}

#[cfg(test)]
mod tests;
