//! Dense state vectors and the in-place gate kernels shared by every
//! state-vector backend.
//!
//! Layout is little-endian: qubit `q` is bit `q` of the amplitude index.

use num_complex::Complex64;

use crate::circuit::{BoundGate, Clifford};
use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Hard ceiling on dense registers; beyond this the amplitude index would
/// not fit comfortably in memory anyway.
pub const MAX_DENSE_QUBITS: usize = 30;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_dense(n_qubits)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n: n_qubits, amps })
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_dense(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::Dimension(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n: n_qubits, amps })
    }

    /// Wraps amplitudes that must already be normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = dimension_qubits(amps.len())?;
        let norm = l2(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!(
                "state vector norm {norm} differs from 1"
            )));
        }
        Ok(StateVector { n, amps })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let n = dimension_qubits(amps.len())?;
        let norm = l2(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numerical("cannot normalize a zero vector".into()));
        }
        for a in amps.iter_mut() {
            *a /= norm;
        }
        Ok(StateVector { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::Dimension(format!(
                "inner product of {}- and {}-qubit states",
                self.n, other.n
            )));
        }
        Ok(inner(&self.amps, &other.amps))
    }

    pub fn apply(&mut self, gate: &BoundGate) -> Result<()> {
        gate.check_range(self.n)?;
        apply_bound_gate(&mut self.amps, gate);
        Ok(())
    }

    pub fn apply_all<'a, I>(&mut self, gates: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a BoundGate>,
    {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> Result<Complex64> {
        if p.n_qubits() != self.n {
            return Err(Error::Dimension(format!(
                "{}-qubit observable on a {}-qubit state",
                p.n_qubits(),
                self.n
            )));
        }
        Ok(expectation_pauli(&self.amps, p))
    }

    pub fn expectation_sum(&self, h: &PauliSum) -> Result<f64> {
        if h.n_qubits() != self.n {
            return Err(Error::Dimension(format!(
                "{}-qubit observable on a {}-qubit state",
                h.n_qubits(),
                self.n
            )));
        }
        Ok(h.terms()
            .iter()
            .map(|(c, p)| c * expectation_pauli(&self.amps, p).re)
            .sum())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_QUBITS {
        return Err(Error::Resource(format!(
            "dense state on {n} qubits (supported: 1..={MAX_DENSE_QUBITS})"
        )));
    }
    Ok(())
}

fn dimension_qubits(len: usize) -> Result<usize> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::Dimension(format!(
            "amplitude count {len} is not a power of two ≥ 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    check_dense(n)?;
    Ok(n)
}

pub(crate) fn l2(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(a_j) b_j`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
fn i_power(k: u32) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[inline]
fn parity(v: usize) -> bool {
    v.count_ones() & 1 == 1
}

/// Power of `i` in the `i^k X^x Z^z` form of a string.
#[inline]
fn xz_power(p: &PauliString) -> u32 {
    p.phase().power() + (p.x_mask() & p.z_mask()).count_ones()
}

/// `exp(-i θ/2 P)` applied in place; `P` must be Hermitian.
pub(crate) fn apply_rotation(amps: &mut [Complex64], axis: &PauliString, angle: f64) {
    let x = axis.x_mask() as usize;
    let z = axis.z_mask() as usize;
    let (s, c) = (0.5 * angle).sin_cos();
    let base = i_power(xz_power(axis));
    if x == 0 {
        // Diagonal: eigenvalue base * (-1)^{z·j}, base is ±1.
        let sign = base.re;
        let plus = Complex64::new(c, -s * sign);
        let minus = Complex64::new(c, s * sign);
        for (j, a) in amps.iter_mut().enumerate() {
            *a *= if parity(z & j) { minus } else { plus };
        }
        return;
    }
    let low = x & x.wrapping_neg();
    // -i * s * i^k
    let coupling = Complex64::new(0.0, -s) * base;
    for j in 0..amps.len() {
        if j & low != 0 {
            continue;
        }
        let k = j ^ x;
        let (aj, ak) = (amps[j], amps[k]);
        let pj = if parity(z & k) { -coupling } else { coupling };
        let pk = if parity(z & j) { -coupling } else { coupling };
        amps[j] = aj * c + pj * ak;
        amps[k] = ak * c + pk * aj;
    }
}

/// `P|ψ⟩` into `out`.
#[cfg(test)]
pub(crate) fn apply_pauli_into(amps: &[Complex64], p: &PauliString, out: &mut [Complex64]) {
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    let base = i_power(xz_power(p));
    for (j, a) in amps.iter().enumerate() {
        let v = if parity(z & j) { -base } else { base };
        out[j ^ x] = v * a;
    }
}

/// `out += coeff · P|ψ⟩`.
pub(crate) fn accumulate_pauli(amps: &[Complex64], p: &PauliString, coeff: f64, out: &mut [Complex64]) {
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    let base = i_power(xz_power(p)) * coeff;
    for (j, a) in amps.iter().enumerate() {
        let v = if parity(z & j) { -base } else { base };
        out[j ^ x] += v * a;
    }
}

/// `⟨ψ|P|ψ⟩` without allocating.
pub(crate) fn expectation_pauli(amps: &[Complex64], p: &PauliString) -> Complex64 {
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    let base = i_power(xz_power(p));
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, a) in amps.iter().enumerate() {
        let term = amps[j ^ x].conj() * a;
        if parity(z & j) {
            acc -= term;
        } else {
            acc += term;
        }
    }
    acc * base
}

/// `⟨λ|P|ψ⟩`.
pub(crate) fn matrix_element_pauli(lambda: &[Complex64], p: &PauliString, psi: &[Complex64]) -> Complex64 {
    let x = p.x_mask() as usize;
    let z = p.z_mask() as usize;
    let base = i_power(xz_power(p));
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, a) in psi.iter().enumerate() {
        let term = lambda[j ^ x].conj() * a;
        if parity(z & j) {
            acc -= term;
        } else {
            acc += term;
        }
    }
    acc * base
}

pub(crate) fn apply_clifford(amps: &mut [Complex64], gate: &Clifford) {
    match *gate {
        Clifford::H(q) => {
            let bit = 1usize << q;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for j in 0..amps.len() {
                if j & bit == 0 {
                    let (a, b) = (amps[j], amps[j | bit]);
                    amps[j] = (a + b) * h;
                    amps[j | bit] = (a - b) * h;
                }
            }
        }
        Clifford::S(q) | Clifford::Sdg(q) => {
            let bit = 1usize << q;
            let f = if matches!(gate, Clifford::S(_)) {
                Complex64::new(0.0, 1.0)
            } else {
                Complex64::new(0.0, -1.0)
            };
            for (j, a) in amps.iter_mut().enumerate() {
                if j & bit != 0 {
                    *a *= f;
                }
            }
        }
        Clifford::Cz(a, b) => {
            let m = (1usize << a) | (1usize << b);
            for (j, amp) in amps.iter_mut().enumerate() {
                if j & m == m {
                    *amp = -*amp;
                }
            }
        }
        Clifford::Cnot(c, t) => {
            let cb = 1usize << c;
            let tb = 1usize << t;
            for j in 0..amps.len() {
                if j & cb != 0 && j & tb == 0 {
                    amps.swap(j, j | tb);
                }
            }
        }
    }
}

pub(crate) fn apply_bound_gate(amps: &mut [Complex64], gate: &BoundGate) {
    match gate {
        BoundGate::Clifford(c) => apply_clifford(amps, c),
        BoundGate::Rotation { axis, angle } => apply_rotation(amps, axis, *angle),
    }
}
